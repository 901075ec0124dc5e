"""Offline stand-in provider speaking the NDJSON protocol on stdin/stdout.

``python -m stagefuzz.harmony.echo_provider [--mode good|garbage|unsafe|silent]``

good: seeds from the builtin generator, one extra rule proposal.
garbage: unparsable text. unsafe: a rule that swaps dependent nests.
silent: never answers (exercises the timeout).
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

_GOOD_RULE = """---
pass: UnrollExpand
rules:
  - id: provider-unroll-8
    trigger: unroll.expand
    precondition: innermost and serial and trip % 8 == 0
    action: attach unroll(8)
---
"""

_UNSAFE_RULE = """---
pass: ReorderLoops
rules:
  - id: provider-swap-any
    trigger: reorder.interchange
    precondition: perfect-nest
    action: swap
---
"""


def answer(req: dict, mode: str) -> dict:
    if mode == "garbage":
        return {"text": "program ??? this is not loop IR"}
    if req.get("op") == "rules":
        return {"text": _UNSAFE_RULE if mode == "unsafe" else _GOOD_RULE}
    from .catalog import CatalogEntry
    from .seeds import BUILDERS, _Hints
    entry = CatalogEntry(req["template"], req["constraints"], {"provider"})
    rng = np.random.default_rng(int(req.get("seed", 0)))
    lines = BUILDERS[req["template"]](entry, rng, _Hints(entry, rng, 0.0),
                                      f"prov_{req['template']}_{req.get('seed', 0)}")
    return {"text": "\n".join(lines) + "\n"}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--mode", default="good", choices=["good", "garbage", "unsafe", "silent"])
    mode = ap.parse_args(argv).mode
    for line in sys.stdin:
        if mode == "silent":
            time.sleep(3600)
        try:
            out = answer(json.loads(line), mode)
        except Exception as exc:  # a broken provider answers with junk
            out = {"error": str(exc)}
        sys.stdout.write(json.dumps(out) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
