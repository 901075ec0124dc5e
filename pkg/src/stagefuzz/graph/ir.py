"""High-level graph IR: nodes, graphs and a small builder."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from ..errors import StageFuzzError
from .ops import LEAF_KINDS, infer_shape, normalize_params
from .types import DType, TensorType


NAN = float("nan")


@dataclass(frozen=True, eq=True)
class Node:
    id: int
    kind: str
    params: Mapping[str, Any]
    inputs: tuple[int, ...]
    out_type: TensorType
    data: tuple | None = None  # Constant payload, row-major

    def replace(self, **changes) -> "Node":
        return replace(self, **changes)

    def payload(self) -> np.ndarray:
        if self.data is None:
            raise StageFuzzError(f"node {self.id} has no payload")
        return np.asarray(self.data, dtype=self.out_type.dtype.np).reshape(
            self.out_type.shape
        )


def payload_tuple(arr, dtype: DType) -> tuple:
    flat = np.asarray(arr, dtype=dtype.np).reshape(-1)
    if dtype is DType.F32:
        # a shared NaN object keeps tuple equality reflexive
        return tuple(NAN if math.isnan(x) else float(x) for x in flat)
    if dtype is DType.BOOL:
        return tuple(bool(x) for x in flat)
    return tuple(int(x) for x in flat)


@dataclass(frozen=True)
class Graph:
    """An immutable computational graph.

    ``nodes`` is keyed by node id; iteration order is ascending id. The graph
    does not validate itself on construction (see ``validate_graph``), which
    lets fuzzers build partial graphs with dangling inputs.
    """

    nodes: Mapping[int, Node]
    outputs: tuple[int, ...]
    name: str = "g"
    _consumers: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", {k: self.nodes[k] for k in sorted(self.nodes)})
        object.__setattr__(self, "outputs", tuple(self.outputs))

    def __getitem__(self, nid: int) -> Node:
        return self.nodes[nid]

    def __contains__(self, nid: int) -> bool:
        return nid in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def next_id(self) -> int:
        return max(self.nodes, default=-1) + 1

    def consumers(self) -> dict[int, list[int]]:
        """Map node id -> consumer ids (one entry per use)."""
        if self._consumers is None:
            cons: dict[int, list[int]] = {nid: [] for nid in self.nodes}
            for node in self.nodes.values():
                for src in node.inputs:
                    cons.setdefault(src, []).append(node.id)
            object.__setattr__(self, "_consumers", cons)
        return self._consumers

    def use_count(self, nid: int) -> int:
        return len(self.consumers().get(nid, ())) + self.outputs.count(nid)

    def input_nodes(self) -> list[Node]:
        return [n for n in self.nodes.values() if n.kind == "Input"]

    def topo_order(self) -> list[int]:
        """Node ids in dependency order; ties broken by ascending id.

        Raises ValueError on a cycle or a dangling reference.
        """
        indeg = {nid: 0 for nid in self.nodes}
        for node in self.nodes.values():
            for src in node.inputs:
                if src not in self.nodes:
                    raise ValueError(f"node {node.id} references missing {src}")
                indeg[node.id] += 1
        cons = self.consumers()
        ready = [nid for nid, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            nid = heapq.heappop(ready)
            order.append(nid)
            for c in cons.get(nid, ()):
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
        if len(order) != len(self.nodes):
            raise ValueError("graph contains a cycle")
        return order

    def reachable_from_outputs(self) -> set[int]:
        seen: set[int] = set()
        stack = [o for o in self.outputs if o in self.nodes]
        while stack:
            nid = stack.pop()
            if nid in seen:
                continue
            seen.add(nid)
            stack.extend(s for s in self.nodes[nid].inputs if s in self.nodes)
        return seen

    def descendants(self, nid: int) -> set[int]:
        """``nid`` and every node that (transitively) consumes it."""
        cons = self.consumers()
        seen = {nid}
        stack = [nid]
        while stack:
            for c in cons.get(stack.pop(), ()):
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen

    def with_nodes(self, nodes: Iterable[Node], outputs: Sequence[int] | None = None,
                   name: str | None = None) -> "Graph":
        return Graph({n.id: n for n in nodes},
                     self.outputs if outputs is None else tuple(outputs),
                     self.name if name is None else name)


def make_node(nid: int, kind: str, inputs: Sequence[int], input_types: Sequence[TensorType],
              **params) -> Node:
    """Build an operator node, inferring its output type."""
    p = normalize_params(kind, params)
    return Node(nid, kind, p, tuple(inputs), infer_shape(kind, p, input_types))


class GraphBuilder:
    """Incremental construction of valid graphs.

    >>> b = GraphBuilder()
    >>> x = b.input("x", DType.F32, (2, 3))
    >>> y = b.op("ReLU", [x])
    >>> g = b.build([y])
    """

    def __init__(self, name: str = "g", start_id: int = 0):
        self.name = name
        self.nodes: dict[int, Node] = {}
        self._next = start_id

    def _take_id(self) -> int:
        nid = self._next
        self._next += 1
        return nid

    def type_of(self, nid: int) -> TensorType:
        return self.nodes[nid].out_type

    def input(self, name: str, dtype: DType, shape: Sequence[int]) -> int:
        nid = self._take_id()
        self.nodes[nid] = Node(nid, "Input", normalize_params("Input", {"name": name}), (),
                               TensorType(dtype, tuple(shape)))
        return nid

    def const(self, value, dtype: DType | None = None) -> int:
        arr = np.asarray(value)
        if dtype is None:
            dtype = {np.dtype(np.float32): DType.F32, np.dtype(np.float64): DType.F32,
                     np.dtype(np.int8): DType.I8, np.dtype(np.bool_): DType.BOOL}.get(
                         arr.dtype, DType.I32)
        nid = self._take_id()
        ttype = TensorType(dtype, arr.shape)
        self.nodes[nid] = Node(nid, "Constant", {}, (), ttype, payload_tuple(arr, dtype))
        return nid

    def op(self, kind: str, inputs: Sequence[int], **params) -> int:
        if kind in LEAF_KINDS:
            raise ValueError("use input() or const() for leaf nodes")
        nid = self._take_id()
        self.nodes[nid] = make_node(nid, kind, inputs, [self.type_of(i) for i in inputs],
                                    **params)
        return nid

    def build(self, outputs: Sequence[int]) -> Graph:
        return Graph(dict(self.nodes), tuple(outputs), self.name)
