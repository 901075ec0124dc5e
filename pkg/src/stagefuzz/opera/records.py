"""Operator-instance records and the JSON Lines corpus format.

One record per line::

    {"kind": "Conv2D", "params": {"stride": [1, 1], "pad": [1, 1]},
     "inputs": [{"shape": [1, 3, 8, 8], "dtype": "F32", "src": {"random": 7}}],
     "origin": "t_conv_basic"}

``src`` is either ``{"random": seed}`` or ``{"data": [...]}`` (row-major).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import CorpusUnreadable, GraphTypeError, SchemaViolation
from ..graph.ops import LEAF_KINDS, OPERATORS, get_kind, normalize_params
from ..graph.types import DType

log = logging.getLogger(__name__)

MAX_RANK = 5
MAX_EXTENT = 64
MAX_ELEMENTS = 4096
RECORD_KINDS = tuple(k for k in OPERATORS if k not in LEAF_KINDS)


@dataclass(frozen=True)
class InputSpec:
    shape: tuple
    dtype: DType
    seed: int | None = None  # random source
    data: tuple | None = None  # inline source

    @property
    def inline(self) -> bool:
        return self.data is not None

    def to_json(self) -> dict:
        src = {"data": list(self.data)} if self.inline else {"random": self.seed}
        return {"shape": list(self.shape), "dtype": self.dtype.value, "src": src}


@dataclass(frozen=True)
class OperatorInstanceRecord:
    kind: str
    params: dict = field(hash=False)
    inputs: tuple
    origin: str = ""

    def to_json(self) -> dict:
        params = {k: (v.value if isinstance(v, DType) else list(v) if isinstance(v, tuple) else v)
                  for k, v in self.params.items()}
        return {"kind": self.kind, "params": params,
                "inputs": [s.to_json() for s in self.inputs], "origin": self.origin}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))


def _int(v, what: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaViolation(f"{what} must be an integer, got {v!r}")
    return v


def _input_spec(obj: Any, k: int) -> InputSpec:
    what = f"inputs[{k}]"
    if not isinstance(obj, dict) or set(obj) != {"shape", "dtype", "src"}:
        raise SchemaViolation(f"{what} needs exactly shape, dtype and src")
    shape = obj["shape"]
    if not isinstance(shape, list):
        raise SchemaViolation(f"{what}.shape must be a list")
    shape = tuple(_int(d, f"{what}.shape") for d in shape)
    if len(shape) > MAX_RANK or any(d < 1 or d > MAX_EXTENT for d in shape):
        raise SchemaViolation(f"{what}.shape {list(shape)} outside rank/extent caps")
    if math.prod(shape) > MAX_ELEMENTS:
        raise SchemaViolation(f"{what} has more than {MAX_ELEMENTS} elements")
    try:
        dtype = DType.parse(str(obj["dtype"]))
    except ValueError:
        raise SchemaViolation(f"{what}.dtype {obj['dtype']!r} unknown") from None
    src = obj["src"]
    if not isinstance(src, dict) or len(src) != 1:
        raise SchemaViolation(f"{what}.src must be {{random: seed}} or {{data: [...]}}")
    if "random" in src:
        seed = _int(src["random"], f"{what}.src.random")
        if seed < 0:
            raise SchemaViolation(f"{what}.src.random must be non-negative")
        return InputSpec(shape, dtype, seed=seed)
    if "data" in src:
        data = src["data"]
        if not isinstance(data, list) or len(data) != math.prod(shape):
            raise SchemaViolation(f"{what}.src.data must hold {math.prod(shape)} values")
        if dtype is DType.F32:
            ok = all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in data)
        elif dtype is DType.BOOL:
            ok = all(isinstance(x, bool) or x in (0, 1) for x in data)
        else:
            ok = all(isinstance(x, int) and not isinstance(x, bool) for x in data)
        if not ok:
            raise SchemaViolation(f"{what}.src.data has values of the wrong type")
        if dtype is DType.F32:
            data = [float(x) for x in data]
        elif dtype is DType.BOOL:
            data = [bool(x) for x in data]
        return InputSpec(shape, dtype, data=tuple(data))
    raise SchemaViolation(f"{what}.src has unknown source {sorted(src)}")


def parse_record(obj: Any) -> OperatorInstanceRecord:
    """Schema-check a decoded JSON object and build a record.

    Shape compatibility is not part of the schema: a record whose operands
    violate the kind's shape rule is still valid input (a negative test).
    """
    if not isinstance(obj, dict):
        raise SchemaViolation("record must be a JSON object")
    extra = set(obj) - {"kind", "params", "inputs", "origin"}
    if extra:
        raise SchemaViolation(f"unknown record fields {sorted(extra)}")
    kind = obj.get("kind")
    if kind not in RECORD_KINDS:
        raise SchemaViolation(f"unknown operator kind {kind!r}")
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise SchemaViolation("params must be an object")
    try:
        normalize_params(kind, params)
    except GraphTypeError as exc:
        raise SchemaViolation(str(exc)) from None
    inputs = obj.get("inputs")
    if not isinstance(inputs, list):
        raise SchemaViolation("inputs must be a list")
    arity = get_kind(kind).arity
    if (arity is None and not inputs) or (arity is not None and len(inputs) != arity):
        raise SchemaViolation(f"{kind} takes {arity or 'one or more'} inputs, got {len(inputs)}")
    specs = tuple(_input_spec(s, k) for k, s in enumerate(inputs))
    origin = obj.get("origin", "")
    if not isinstance(origin, str):
        raise SchemaViolation("origin must be a string")
    raw = {k: tuple(v) if isinstance(v, list) else v for k, v in params.items()}
    return OperatorInstanceRecord(kind, raw, specs, origin)


def parse_record_line(line: str) -> OperatorInstanceRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"malformed JSON: {exc.msg}") from None
    return parse_record(obj)


def ingest_corpus(path, skipped: list | None = None) -> list[OperatorInstanceRecord]:
    """Read a JSONL corpus, skipping (and logging) records that fail the schema.

    When ``skipped`` is given, ``(line_number, reason)`` pairs are appended
    to it for every rejected line.
    """
    try:
        text = Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusUnreadable(f"cannot read corpus {path}: {exc}") from exc
    records = []
    bad = 0
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(parse_record_line(line))
        except SchemaViolation as exc:
            bad += 1
            log.warning("corpus line %d skipped: %s", n, exc)
            if skipped is not None:
                skipped.append((n, str(exc)))
    if not records and not bad:
        log.warning("corpus %s is empty", path)
    elif bad:
        log.warning("corpus %s: %d records read, %d skipped", path, len(records), bad)
    return records


def write_corpus(records, path) -> None:
    Path(path).write_text("".join(r.dumps() + "\n" for r in records))
