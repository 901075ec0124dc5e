"""Verdict oracles for the three compiler stages."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .. import bugs
from ..errors import (ConversionError, LoopRuntimeError, NumericDomain, PassInternal,
                      ShapeMismatch, StageFuzzError)
from ..frontend import conversion_rule, load_record
from ..graph.interp import interpret_graph
from ..graph.ir import Graph
from ..graph.types import DType, TensorValue, random_tensor
from ..hlopt import pipeline_steps as hl_steps
from ..llopt import pipeline_steps as ll_steps
from ..loopir import LoopProgram, interpret_loop, lower_graph
from ..opera.records import OperatorInstanceRecord
from ..opera.wrap import input_values, wrap_instance

F32_RTOL = 1e-5
F32_ATOL = 1e-6
INTRINSIC_RTOL = 1e-4


class Stage(str, enum.Enum):
    loader = "loader"
    hlopt = "hlopt"
    llopt = "llopt"


STAGE_CODES = {Stage.loader: 0, Stage.hlopt: 1, Stage.llopt: 2}


class Tag(str, enum.Enum):
    Pass = "Pass"
    Crash = "Crash"
    Mismatch = "Mismatch"
    InvalidRejection = "InvalidRejection"
    MissedRejection = "MissedRejection"


@dataclass
class TestCase:
    __test__ = False

    id: int
    stage: Stage
    payload: Any  # Graph | LoopProgram | OperatorInstanceRecord
    data_seed: int  # loader records: replay round instead
    lineage: dict = field(default_factory=dict)


@dataclass
class Verdict:
    tag: Tag
    message: str = ""
    pass_id: str | None = None  # first pass whose output diverges (or that crashed)
    rule_id: str | None = None
    max_abs: float | None = None
    max_rel: float | None = None
    index: int | None = None  # first divergent flat index
    rules: list[str] = field(default_factory=list)  # rule ids fired while compiling
    passes: list[str] = field(default_factory=list)  # passes that fired at least one rule
    bugs_hit: frozenset = frozenset()  # seeded-bug paths behind this verdict

    @property
    def ok(self) -> bool:
        return self.tag is Tag.Pass

    def to_json(self) -> dict:
        return {"tag": self.tag.value, "message": self.message, "pass": self.pass_id,
                "rule": self.rule_id, "max_abs": self.max_abs, "max_rel": self.max_rel,
                "index": self.index, "bugs_hit": sorted(self.bugs_hit)}


@dataclass
class Divergence:
    message: str
    max_abs: float | None = None
    max_rel: float | None = None
    index: int | None = None


def compare_values(ref: Sequence[TensorValue], got: Sequence[TensorValue],
                   intrinsics: bool = False) -> Divergence | None:
    """None when ``got`` matches ``ref``.

    Integers and booleans must be equal. F32 elements must satisfy
    ``|got - ref| <= 1e-6 + 1e-5 |ref|`` with NaNs in the same places; when
    fused multiply-add was emitted the check becomes norm-wise with
    relative tolerance 1e-4, since fma legitimately changes cancellation.
    """
    if len(ref) != len(got):
        return Divergence(f"{len(got)} outputs, expected {len(ref)}")
    for k, (r, g) in enumerate(zip(ref, got)):
        if r.ttype != g.ttype:
            return Divergence(f"output {k} has type {g.ttype}, expected {r.ttype}")
        a, b = r.data.reshape(-1), g.data.reshape(-1)
        if r.ttype.dtype is not DType.F32:
            bad = np.flatnonzero(a != b)
            if bad.size:
                i = int(bad[0])
                err = abs(int(a[i]) - int(b[i]))
                return Divergence(f"output {k} differs", float(err), None, i)
            continue
        a64, b64 = a.astype(np.float64), b.astype(np.float64)
        nan_a, nan_b = np.isnan(a64), np.isnan(b64)
        if (nan_a != nan_b).any():
            i = int(np.flatnonzero(nan_a != nan_b)[0])
            return Divergence(f"output {k} has a NaN mismatch", None, None, i)
        fin = ~nan_a
        with np.errstate(all="ignore"):
            diff = np.where(fin, np.abs(a64 - b64), 0.0)
            same_inf = fin & np.isinf(a64) & (a64 == b64)
            diff = np.where(same_inf, 0.0, diff)
            diff = np.where(np.isnan(diff), np.inf, diff)
            scale = np.where(np.isfinite(a64), np.abs(a64), 0.0)
            rel = np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), diff)
        if intrinsics:
            limit = F32_ATOL + INTRINSIC_RTOL * (float(scale.max()) if scale.size else 0.0)
            bad = np.flatnonzero(diff > limit)
        else:
            bad = np.flatnonzero(diff > F32_ATOL + F32_RTOL * scale)
        if bad.size:
            i = int(bad[0])
            return Divergence(f"output {k} differs", float(diff.max()), float(rel.max()), i)
    return None


def graph_inputs(g: Graph, seed: int) -> dict[str, TensorValue]:
    rng = np.random.default_rng(seed)
    return {n.params["name"]: random_tensor(n.out_type, rng) for n in g.input_nodes()}


def loop_inputs(p: LoopProgram, seed: int) -> dict[str, TensorValue]:
    from ..graph.types import TensorType
    rng = np.random.default_rng(seed)
    return {b.name: random_tensor(TensorType(b.dtype, b.extents), rng) for b in p.inputs}


def _run_loop(p: LoopProgram, x) -> list[TensorValue]:
    out = interpret_loop(p, x)
    return [out[b.name] for b in p.outputs]


def _graph_compiled(g: Graph, x) -> list[TensorValue]:
    """Level-0 back end: lower and interpret the loop program."""
    return _run_loop(lower_graph(g), x)


def _outcome(fn):
    """('ok', values) or ('domain', message); other runtime faults propagate."""
    try:
        return "ok", fn()
    except NumericDomain as exc:
        return "domain", str(exc)


def _judge(ref, got, intrinsics=False) -> Divergence | None:
    if ref[0] == "domain" and got[0] == "domain":
        return None
    if ref[0] == "domain":
        return Divergence("reference hits a numeric-domain fault, optimized code does not")
    if got[0] == "domain":
        return Divergence(f"numeric-domain fault only after optimization: {got[1]}")
    return compare_values(ref[1], got[1], intrinsics)


def _mismatch(d: Divergence, **kw) -> Verdict:
    return Verdict(Tag.Mismatch, d.message, max_abs=d.max_abs, max_rel=d.max_rel,
                   index=d.index, **kw)


def _loader(record: OperatorInstanceRecord, round_: int) -> Verdict:
    rule = conversion_rule(record.kind)
    try:
        ref_graph = wrap_instance(record)
        negative = False
    except ShapeMismatch:
        ref_graph, negative = None, True
    try:
        loaded = load_record(record)
    except ConversionError as exc:
        if negative:
            return Verdict(Tag.Pass, rules=[rule])
        return Verdict(Tag.InvalidRejection, str(exc), "Loader", rule, rules=[rule])
    except StageFuzzError as exc:
        return Verdict(Tag.Crash, f"{type(exc).__name__}: {exc}", "Loader", rule, rules=[rule])
    if negative:
        return Verdict(Tag.MissedRejection, "shape-invalid instance accepted", "Loader", rule,
                       rules=[rule])
    x = input_values(record, round_)
    ref = _outcome(lambda: interpret_graph(ref_graph, x))
    try:
        got = _outcome(lambda: _graph_compiled(loaded, x))
    except (LoopRuntimeError, StageFuzzError) as exc:
        return Verdict(Tag.Crash, f"{type(exc).__name__}: {exc}", "Loader", rule, rules=[rule])
    d = _judge(ref, got)
    if d is not None:
        return _mismatch(d, pass_id="Loader", rule_id=rule, rules=[rule])
    return Verdict(Tag.Pass, rules=[rule])


def _hlopt(g: Graph, seed: int) -> Verdict:
    x = graph_inputs(g, seed)
    ref = _outcome(lambda: interpret_graph(g, x))
    rules: list[str] = []
    passes: list[str] = []
    steps = []
    try:
        for pid, after, traces in hl_steps(2, g):
            fired = [t.rule_id for t in traces if t.fired]
            rules += fired
            steps.append((pid.value, after, fired))
            if fired and pid.value not in passes:
                passes.append(pid.value)
    except PassInternal as exc:
        return Verdict(Tag.Crash, str(exc), exc.pass_name, exc.rule_id, rules=rules,
                       passes=passes)
    final = steps[-1][1] if steps else g
    try:
        got = _outcome(lambda: _graph_compiled(final, x))
    except StageFuzzError as exc:
        return Verdict(Tag.Crash, f"{type(exc).__name__}: {exc}", "Lowering", None,
                       rules=rules, passes=passes)
    d = _judge(ref, got)
    if d is None:
        return Verdict(Tag.Pass, rules=rules, passes=passes)
    # localize: first pass application whose output diverges from the reference
    pass_id = rule_id = None
    for pid, after, fired in steps:
        if not fired:
            continue
        if _judge(ref, _outcome(lambda: interpret_graph(after, x))) is not None:
            pass_id, rule_id = pid, fired[-1]
            break
    if pass_id is None:
        pass_id = "Lowering"
    return _mismatch(d, pass_id=pass_id, rule_id=rule_id, rules=rules, passes=passes)


def _llopt(p: LoopProgram, seed: int) -> Verdict:
    x = loop_inputs(p, seed)
    ref = _outcome(lambda: _run_loop(p, x))
    rules: list[str] = []
    passes: list[str] = []
    steps = []
    try:
        for pid, after, traces in ll_steps(2, p):
            fired = [t.rule_id for t in traces if t.fired]
            rules += fired
            steps.append((pid.value, after, fired))
            if fired and pid.value not in passes:
                passes.append(pid.value)
    except PassInternal as exc:
        return Verdict(Tag.Crash, str(exc), exc.pass_name, exc.rule_id, rules=rules,
                       passes=passes)
    final = steps[-1][1] if steps else p

    def run(q):
        try:
            return _outcome(lambda: _run_loop(q, x))
        except LoopRuntimeError as exc:
            return "fault", f"{type(exc).__name__}: {exc}"

    got = run(final)
    if got[0] != "fault":
        d = _judge(ref, got, bool(final.intrinsics_used))
        if d is None:
            return Verdict(Tag.Pass, rules=rules, passes=passes)
    pass_id = rule_id = None
    for pid, after, fired in steps:
        if not fired:
            continue
        mid = run(after)
        if mid[0] == "fault" or _judge(ref, mid, bool(after.intrinsics_used)) is not None:
            pass_id, rule_id = pid, fired[-1]
            break
    if got[0] == "fault":
        return Verdict(Tag.Crash, got[1], pass_id, rule_id, rules=rules, passes=passes)
    return _mismatch(d, pass_id=pass_id, rule_id=rule_id, rules=rules, passes=passes)


def diff_test(tc: TestCase) -> Verdict:
    """Run one test under the active seeded bugs; never raises for
    compiler faults (they become Crash verdicts)."""
    with bugs.record_hits() as hits:
        if tc.stage is Stage.loader:
            v = _loader(tc.payload, tc.data_seed)
        elif tc.stage is Stage.hlopt:
            v = _hlopt(tc.payload, tc.data_seed)
        else:
            v = _llopt(tc.payload, tc.data_seed)
    # failures name only the bugs in the component they were localized to
    v.bugs_hit = frozenset(hits) if v.ok else bugs.attribute(hits, v.pass_id)
    return v


_NUM = re.compile(r"\d+")


def dedup_key(v: Verdict, tc: TestCase) -> tuple:
    """Failure signature: stage, localized pass/rule, tag, digit-free message."""
    if v.ok:
        raise ValueError("passing verdicts have no signature")
    where = f"{v.pass_id}/{v.rule_id}" if v.rule_id else str(v.pass_id)
    return (tc.stage.value, where, v.tag.value, _NUM.sub("", v.message))
