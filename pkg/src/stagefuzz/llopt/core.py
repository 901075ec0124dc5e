"""Low-level pass infrastructure: pass ids, traces and drivers."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

from ..errors import PassInternal
from ..loopir.ir import LoopProgram
from ..loopir.validate import validate_loop


class LLPassId(str, enum.Enum):
    UnrollExpand = "UnrollExpand"
    TileLoops = "TileLoops"
    VectorizeLegalize = "VectorizeLegalize"
    ReorderLoops = "ReorderLoops"
    IntrinsicMap = "IntrinsicMap"
    MemLatencyHide = "MemLatencyHide"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class LLTrace:
    pass_id: LLPassId
    rule_id: str
    loop_path: tuple  # indices into successive bodies of the pre-pass program
    fired: bool = True


@dataclass
class PassContext:
    program: LoopProgram
    pass_id: LLPassId
    traces: list = field(default_factory=list)

    def trace(self, rule_id: str, path: tuple, fired: bool = True) -> None:
        self.traces.append(LLTrace(self.pass_id, rule_id, tuple(path), fired))


PassFn = Callable[[PassContext], LoopProgram]
_REGISTRY: dict[LLPassId, PassFn] = {}


def register(pass_id: LLPassId):
    def deco(fn: PassFn) -> PassFn:
        _REGISTRY[pass_id] = fn
        return fn

    return deco


def run_ll_pass(pass_id: LLPassId | str, p: LoopProgram) -> tuple[LoopProgram, list[LLTrace]]:
    """Apply one pass. Internal faults and invalid output become ``PassInternal``."""
    from . import passes  # noqa: F401  (populates the registry)

    pid = LLPassId(pass_id)
    ctx = PassContext(p, pid)
    try:
        out = _REGISTRY[pid](ctx)
    except PassInternal:
        raise
    except Exception as exc:  # noqa: BLE001
        raise PassInternal(pid.value, f"{type(exc).__name__}: {exc}") from exc
    problems = validate_loop(out)
    if problems:
        rule = ctx.traces[-1].rule_id if ctx.traces else None
        raise PassInternal(pid.value, f"produced invalid program: {problems[0]}", rule)
    return out, ctx.traces


LEVEL2_ORDER = (
    LLPassId.TileLoops,
    LLPassId.ReorderLoops,
    LLPassId.VectorizeLegalize,
    LLPassId.UnrollExpand,
    LLPassId.MemLatencyHide,
    LLPassId.IntrinsicMap,
)


def pipeline_steps(level: int, p: LoopProgram):
    if level == 0:
        return
    if level != 2:
        raise ValueError(f"unknown low-level optimization level {level}")
    for pid in LEVEL2_ORDER:
        p, traces = run_ll_pass(pid, p)
        yield pid, p, traces


def run_ll_pipeline(level: int, p: LoopProgram) -> tuple[LoopProgram, list[LLTrace]]:
    traces: list[LLTrace] = []
    for _, p, step in pipeline_steps(level, p):
        traces.extend(step)
    return p, traces
