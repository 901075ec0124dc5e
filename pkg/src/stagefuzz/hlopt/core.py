"""Pass infrastructure: pass ids, rewrite traces, a graph editor and drivers."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable

from ..errors import FixpointNotReached, PassInternal
from ..graph.ir import Graph, Node
from ..graph.validate import validate_graph

log = logging.getLogger(__name__)


class PassId(str, enum.Enum):
    ConstFold = "ConstFold"
    FuseElementwise = "FuseElementwise"
    DeadNodeElim = "DeadNodeElim"
    AlgebraicSimplify = "AlgebraicSimplify"
    CSE = "CSE"
    LayoutTransform = "LayoutTransform"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class RewriteTrace:
    pass_id: PassId
    rule_id: str
    matched_nodes: frozenset
    produced_nodes: frozenset
    fired: bool = True


class Editor:
    """Mutable working copy of a graph used while a pass runs."""

    def __init__(self, g: Graph, pass_id: PassId):
        self.nodes: dict[int, Node] = dict(g.nodes)
        self.outputs: list[int] = list(g.outputs)
        self.name = g.name
        self.pass_id = pass_id
        self.traces: list[RewriteTrace] = []
        self._next = g.next_id

    def fresh_id(self) -> int:
        nid = self._next
        self._next += 1
        return nid

    def graph(self) -> Graph:
        return Graph(dict(self.nodes), tuple(self.outputs), self.name)

    def users(self, nid: int) -> list[int]:
        return [n.id for n in self.nodes.values() if nid in n.inputs]

    def use_count(self, nid: int) -> int:
        return sum(n.inputs.count(nid) for n in self.nodes.values()) + self.outputs.count(nid)

    def replace_uses(self, old: int, new: int, only: set[int] | None = None) -> None:
        for n in list(self.nodes.values()):
            if old in n.inputs and (only is None or n.id in only):
                self.nodes[n.id] = n.replace(
                    inputs=tuple(new if s == old else s for s in n.inputs))
        if only is None:
            self.outputs = [new if o == old else o for o in self.outputs]

    def put(self, node: Node) -> None:
        self.nodes[node.id] = node

    def remove(self, nid: int) -> None:
        del self.nodes[nid]

    def trace(self, rule_id: str, matched, produced) -> None:
        self.traces.append(RewriteTrace(self.pass_id, rule_id, frozenset(matched),
                                        frozenset(produced), True))

    def topo(self) -> list[int]:
        return self.graph().topo_order()


PassFn = Callable[[Editor], None]
_REGISTRY: dict[PassId, PassFn] = {}


def register(pass_id: PassId):
    def deco(fn: PassFn) -> PassFn:
        _REGISTRY[pass_id] = fn
        return fn

    return deco


def run_hl_pass(pass_id: PassId | str, g: Graph) -> tuple[Graph, list[RewriteTrace]]:
    """Run one pass; any failure inside it surfaces as :class:`PassInternal`.

    The result is re-verified, so a pass that corrupts the graph is also
    reported as ``PassInternal``.
    """
    from . import passes  # noqa: F401  (populates the registry)

    pid = PassId(pass_id)
    ed = Editor(g, pid)
    try:
        _REGISTRY[pid](ed)
        out = ed.graph()
    except PassInternal:
        raise
    except Exception as exc:  # noqa: BLE001 - every fault is a bug candidate
        raise PassInternal(pid.value, f"{type(exc).__name__}: {exc}") from exc
    problems = validate_graph(out)
    if problems:
        rule = ed.traces[-1].rule_id if ed.traces else None
        raise PassInternal(pid.value, f"produced invalid graph: {problems[0]}", rule)
    return out, ed.traces


LEVEL2_ORDER = (
    PassId.ConstFold,
    PassId.AlgebraicSimplify,
    PassId.CSE,
    PassId.LayoutTransform,
    PassId.FuseElementwise,
    PassId.DeadNodeElim,
)
FIXPOINT_CAP = 10


def pipeline_steps(level: int, g: Graph, strict: bool = False):
    """Yield ``(pass_id, graph_after, traces)`` for each pass application."""
    if level == 0:
        return
    if level == 1:
        for pid in (PassId.ConstFold, PassId.DeadNodeElim):
            g, traces = run_hl_pass(pid, g)
            yield pid, g, traces
        return
    if level != 2:
        raise ValueError(f"unknown optimization level {level}")
    for _ in range(FIXPOINT_CAP):
        fired = False
        for pid in LEVEL2_ORDER:
            g, traces = run_hl_pass(pid, g)
            fired = fired or bool(traces)
            yield pid, g, traces
        if not fired:
            return
    if strict:
        raise FixpointNotReached(f"no fixpoint after {FIXPOINT_CAP} sweeps")
    log.warning("high-level pipeline hit the fixpoint cap on %s", g.name)


def run_hl_pipeline(level: int, g: Graph, strict: bool = False
                    ) -> tuple[Graph, list[RewriteTrace]]:
    traces: list[RewriteTrace] = []
    for _, g, step_traces in pipeline_steps(level, g, strict):
        traces.extend(step_traces)
    return g, traces
