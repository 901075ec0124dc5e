"""Random generator of small valid graphs (seed graphs for the fuzzers)."""

from __future__ import annotations

import math

import numpy as np

from ..errors import GraphTypeError
from .ir import Graph, GraphBuilder
from .ops import broadcast_shapes
from .types import DType, TensorType, random_tensor

MAX_ELEMENTS = 256
MAX_EXTENT = 8

_OP_WEIGHTS = {
    "Add": 3, "Sub": 2, "Mul": 3, "Div": 1, "Neg": 1, "ReLU": 3, "Sigmoid": 2,
    "MatMul": 2, "Conv2D": 2, "Reshape": 2, "Transpose": 2, "Concat": 1,
    "ReduceSum": 1, "Cast": 1, "Pad": 1,
}


def random_shape(rng: np.random.Generator, max_rank: int = 4, max_elems: int = 64) -> tuple:
    while True:
        rank = int(rng.integers(1, max_rank + 1))
        shape = tuple(int(d) for d in rng.integers(1, 7, rank))
        if math.prod(shape) <= max_elems:
            return shape


def _factorize(n: int, rng: np.random.Generator) -> tuple[int, ...]:
    dims = []
    rest = n
    for _ in range(int(rng.integers(1, 4))):
        divisors = [d for d in range(1, rest + 1) if rest % d == 0 and d <= MAX_EXTENT]
        d = int(rng.choice(divisors))
        dims.append(d)
        rest //= d
        if rest == 1:
            break
    if rest > 1:
        dims.append(rest)
    rng.shuffle(dims)
    return tuple(dims[:5]) if len(dims) <= 5 else (n,)


class _Gen:
    def __init__(self, rng: np.random.Generator, name: str):
        self.rng = rng
        self.b = GraphBuilder(name)
        self.n_inputs = 0

    def pick(self, pred=lambda t: True) -> int | None:
        cands = [nid for nid, n in self.b.nodes.items() if pred(n.out_type)]
        return int(self.rng.choice(cands)) if cands else None

    def const(self, ttype: TensorType) -> int:
        r = self.rng.random()
        if r < 0.08:
            data = np.zeros(ttype.shape, ttype.dtype.np)
        elif r < 0.16 and ttype.dtype.is_numeric:
            data = np.ones(ttype.shape, ttype.dtype.np)
        else:
            data = random_tensor(ttype, self.rng).data
        return self.b.const(data, ttype.dtype)

    def new_input(self, ttype: TensorType) -> int:
        self.n_inputs += 1
        return self.b.input(f"x{self.n_inputs - 1}", ttype.dtype, ttype.shape)

    def operand(self, ttype: TensorType) -> int:
        """An existing node of exactly ``ttype`` or a fresh leaf."""
        if self.rng.random() < 0.5:
            nid = self.pick(lambda t: t == ttype)
            if nid is not None:
                return nid
        return self.const(ttype) if self.rng.random() < 0.7 else self.new_input(ttype)

    def step(self, kind: str) -> int | None:
        rng = self.rng
        numeric = lambda t: t.dtype.is_numeric  # noqa: E731
        if kind in ("Add", "Sub", "Mul", "Div"):
            x = self.pick(numeric)
            if x is None:
                return None
            tx = self.b.type_of(x)
            shape = tx.shape
            r = rng.random()
            if r < 0.3 and shape:
                shape = shape[int(rng.integers(0, len(shape))):]
            elif r < 0.5 and shape:
                shape = tuple(1 if rng.random() < 0.5 else d for d in shape)
            other = TensorType(tx.dtype, shape)
            if kind == "Div" and tx.dtype.is_int:
                data = rng.integers(1, 9, other.size) * rng.choice([-1, 1], other.size)
                y = self.b.const(data.reshape(other.shape), tx.dtype)
            else:
                y = self.operand(other)
            swap = rng.random() < 0.3 and not (kind == "Div" and tx.dtype.is_int)
            args = [y, x] if swap else [x, y]
            broadcast_shapes(self.b.type_of(args[0]).shape, self.b.type_of(args[1]).shape)
            return self.b.op(kind, args)
        if kind in ("Neg", "ReLU"):
            x = self.pick(numeric)
            return None if x is None else self.b.op(kind, [x])
        if kind == "Sigmoid":
            x = self.pick(lambda t: t.dtype is DType.F32)
            return None if x is None else self.b.op(kind, [x])
        if kind == "MatMul":
            x = self.pick(lambda t: t.rank == 2 and t.dtype.is_numeric)
            if x is None:
                return None
            m, k = self.b.type_of(x).shape
            n = int(rng.integers(1, 7))
            y = self.operand(TensorType(self.b.type_of(x).dtype, (k, n)))
            return self.b.op(kind, [x, y])
        if kind == "Conv2D":
            x = self.pick(lambda t: t.rank == 4 and t.dtype.is_numeric)
            if x is None:
                return None
            tx = self.b.type_of(x)
            _, c, h, w = tx.shape
            kh, kw = int(rng.integers(1, min(h, 3) + 1)), int(rng.integers(1, min(w, 3) + 1))
            o = int(rng.integers(1, 4))
            if rng.random() < 0.5:
                pad = tuple(int(p) for p in rng.integers(0, 2, 2))
            else:
                pad = tuple(int(p) for p in rng.integers(0, 3, 4))
            stride = tuple(int(s) for s in rng.integers(1, 3, 2))
            wt = self.const(TensorType(tx.dtype, (o, c, kh, kw)))
            return self.b.op(kind, [x, wt], stride=stride, pad=pad)
        if kind == "Reshape":
            x = self.pick()
            if x is None:
                return None
            return self.b.op(kind, [x], shape=_factorize(self.b.type_of(x).size, rng))
        if kind == "Transpose":
            x = self.pick(lambda t: t.rank >= 2)
            if x is None:
                return None
            perm = tuple(int(p) for p in rng.permutation(self.b.type_of(x).rank))
            return self.b.op(kind, [x], perm=perm)
        if kind == "Concat":
            x = self.pick(lambda t: t.rank >= 1)
            if x is None:
                return None
            tx = self.b.type_of(x)
            axis = int(rng.integers(-tx.rank, tx.rank))
            shape = list(tx.shape)
            shape[axis] = int(rng.integers(1, 4))
            y = self.operand(TensorType(tx.dtype, tuple(shape)))
            return self.b.op(kind, [x, y], axis=axis)
        if kind == "ReduceSum":
            x = self.pick(lambda t: t.rank >= 1 and t.dtype.is_numeric)
            if x is None:
                return None
            rank = self.b.type_of(x).rank
            k = int(rng.integers(1, rank + 1))
            axes = sorted(int(a) for a in rng.choice(rank, k, replace=False))
            return self.b.op(kind, [x], axes=axes, keepdims=int(rng.integers(0, 2)))
        if kind == "Cast":
            x = self.pick()
            if x is None:
                return None
            to = [DType.F32, DType.I32, DType.I8, DType.BOOL][
                int(rng.choice(4, p=[0.4, 0.3, 0.25, 0.05]))]
            return self.b.op(kind, [x], to=to)
        if kind == "Pad":
            x = self.pick(lambda t: 1 <= t.rank)
            if x is None:
                return None
            pads = [int(p) for p in rng.integers(0, 2, 2 * self.b.type_of(x).rank)]
            return self.b.op(kind, [x], pads=pads)
        raise AssertionError(kind)


def random_graph(rng: np.random.Generator, min_nodes: int = 5, max_nodes: int = 30,
                 name: str = "seed") -> Graph:
    """Draw a valid graph with ``min_nodes``..``max_nodes`` nodes.

    Extents stay small (at most 256 elements per tensor) to bound
    interpretation cost.
    """
    gen = _Gen(rng, name)
    target = int(rng.integers(min_nodes, max_nodes + 1))
    r = rng.random()
    dtype = DType.F32 if r < 0.7 else (DType.I32 if r < 0.85 else DType.I8)
    for _ in range(int(rng.integers(1, 3))):
        rank4 = rng.random() < 0.3
        shape = ((1, int(rng.integers(1, 4)), int(rng.integers(2, 6)), int(rng.integers(2, 6)))
                 if rank4 else random_shape(rng))
        gen.new_input(TensorType(dtype, shape))
    kinds = list(_OP_WEIGHTS)
    weights = np.array([_OP_WEIGHTS[k] for k in kinds], float)
    weights /= weights.sum()
    attempts = 0
    while len(gen.b.nodes) < target and attempts < 20 * max_nodes:
        attempts += 1
        kind = kinds[int(rng.choice(len(kinds), p=weights))]
        snapshot = dict(gen.b.nodes), gen.b._next, gen.n_inputs
        try:
            nid = gen.step(kind)
        except GraphTypeError:
            nid = None
        if nid is not None and gen.b.type_of(nid).size > MAX_ELEMENTS:
            nid = None
        if nid is None:
            gen.b.nodes, gen.b._next, gen.n_inputs = snapshot
    g = gen.b.build([])
    cons = g.consumers()
    sinks = [nid for nid in g.nodes if not cons[nid] and g.nodes[nid].kind not in
             ("Input", "Constant")]
    if not sinks:
        sinks = [max(g.nodes)]
    last = max(sinks)
    outputs = [s for s in sinks if s == last or rng.random() < 0.8]
    return Graph(g.nodes, tuple(outputs), name)
