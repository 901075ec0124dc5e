"""Combined campaign with every seeded bug on, then replay each reproduction.

    python demos/fuzz_and_replay.py [OUTDIR]
"""

import sys
import tempfile
from pathlib import Path

from stagefuzz import bugs
from stagefuzz.campaign import CampaignConfig, replay, run_campaign

out = Path(sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="stagefuzz_"))
r = run_campaign(CampaignConfig(stage="all", budget=300, seed=7, bugs=bugs.BUG_IDS,
                                out=str(out)))
print(f"report: {out / 'report.json'}  hash {r['content_hash'][:16]}")
for s in r["signatures"]:
    recorded, got = replay(out / s["repro"])
    print(f"  #{s['first_hit']:<4} {s['where']:<36} {s['tag']:<17} bugs={','.join(s['bugs'])}"
          f"  replay {'ok' if recorded is got else 'DIFFERS'}")
print("detected:", ", ".join(r["bugs_detected"]))
