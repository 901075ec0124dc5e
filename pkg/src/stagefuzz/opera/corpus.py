"""Synthetic operator-instance corpus.

Stands in for instrumenting library test suites. The mix is deliberately
skewed: a redundant head of everyday usages (many near-identical ReLU, Add,
Conv2D calls), a more varied tail, shape-invalid negative records, and a
few rare usages (asymmetric padding, casts from I32, negative concat axes,
repeated transpose axes).
"""

from __future__ import annotations

import numpy as np

from ..graph.types import DType
from .records import InputSpec, OperatorInstanceRecord

F32, I32, I8 = DType.F32, DType.I32, DType.I8


class _Maker:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.records: list[OperatorInstanceRecord] = []
        self.seed = 1000

    def spec(self, shape, dtype=F32, inline=False) -> InputSpec:
        shape = tuple(shape)
        if inline:
            n = int(np.prod(shape))
            if dtype is F32:
                data = tuple(float(np.float32(x)) for x in self.rng.uniform(-4, 4, n))
            elif dtype is I8:
                data = tuple(int(x) for x in self.rng.integers(-128, 128, n))
            else:
                data = tuple(int(x) for x in self.rng.integers(-1000, 1000, n))
            return InputSpec(shape, dtype, data=data)
        self.seed += 1
        return InputSpec(shape, dtype, seed=self.seed)

    def add(self, kind, params, inputs, origin):
        self.records.append(OperatorInstanceRecord(kind, dict(params), tuple(inputs), origin))

    def repeat(self, count, kind, params, shapes, origin, dtype=F32, inline=False):
        for i in range(count):
            self.add(kind, params, [self.spec(s, dtype, inline) for s in shapes],
                     f"{origin}_{i}")


def _head(m: _Maker) -> None:
    m.repeat(50, "ReLU", {}, [(8, 8)], "test_relu")
    m.repeat(45, "Add", {}, [(4, 4), (4, 4)], "test_add")
    m.repeat(30, "Mul", {}, [(16,), (16,)], "test_mul")
    m.repeat(35, "Conv2D", {"stride": [1, 1], "pad": [1, 1]}, [(1, 3, 8, 8), (4, 3, 3, 3)],
             "test_conv_same")
    m.repeat(35, "MatMul", {}, [(4, 8), (8, 4)], "test_matmul")
    m.repeat(20, "Sigmoid", {}, [(32,)], "test_sigmoid")
    m.repeat(20, "Sub", {}, [(2, 3, 4), (3, 4)], "test_sub_bcast")
    m.repeat(20, "Transpose", {"perm": [1, 0]}, [(4, 6)], "test_transpose")
    m.repeat(20, "Reshape", {"shape": [2, 12]}, [(4, 6)], "test_reshape")
    m.repeat(20, "Concat", {"axis": 0}, [(2, 3), (2, 3)], "test_concat")
    m.repeat(10, "Concat", {"axis": 1}, [(2, 3), (2, 5)], "test_concat_cols")
    m.repeat(15, "ReduceSum", {"axes": [1], "keepdims": 0}, [(4, 5)], "test_reduce")
    m.repeat(20, "Cast", {"to": "I32"}, [(10,)], "test_cast_f2i")
    m.repeat(6, "Cast", {"to": "I32"}, [(10,)], "test_cast_widen", dtype=I8)
    m.repeat(12, "Pad", {"pads": [1, 1]}, [(6,)], "test_pad")
    m.repeat(10, "Neg", {}, [(5,)], "test_neg_int", dtype=I32)
    m.repeat(10, "Div", {}, [(8,), (8,)], "test_div")
    m.repeat(8, "Add", {}, [(3,), (3,)], "test_add_i8_const", dtype=I8, inline=True)
    m.repeat(8, "Conv2D", {"stride": [1, 1], "pad": [0, 0], "layout": "NHWC"},
             [(1, 6, 6, 2), (3, 2, 3, 3)], "test_conv_nhwc")


def _tail(m: _Maker, count: int) -> None:
    rng = m.rng
    kinds = ["Add", "Mul", "ReLU", "Sigmoid", "MatMul", "Conv2D", "Transpose", "Reshape",
             "Concat", "ReduceSum", "Cast", "Pad"]
    for i in range(count):
        kind = kinds[int(rng.integers(len(kinds)))]
        origin = f"test_misc_{kind.lower()}_{i}"
        if kind in ("Add", "Mul"):
            shape = tuple(int(d) for d in rng.integers(1, 6, int(rng.integers(1, 4))))
            m.add(kind, {}, [m.spec(shape), m.spec(shape)], origin)
        elif kind in ("ReLU", "Sigmoid"):
            shape = tuple(int(d) for d in rng.integers(1, 8, int(rng.integers(1, 4))))
            m.add(kind, {}, [m.spec(shape)], origin)
        elif kind == "MatMul":
            a, k, b = (int(d) for d in rng.integers(1, 7, 3))
            m.add(kind, {}, [m.spec((a, k)), m.spec((k, b))], origin)
        elif kind == "Conv2D":
            c, o = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            h, w = int(rng.integers(4, 8)), int(rng.integers(4, 8))
            stride = [int(rng.integers(1, 3))] * 2
            pad = [int(rng.integers(0, 2))] * 2
            m.add(kind, {"stride": stride, "pad": pad},
                  [m.spec((1, c, h, w)), m.spec((o, c, 3, 3))], origin)
        elif kind == "Transpose":
            rank = int(rng.integers(2, 4))
            shape = tuple(int(d) for d in rng.integers(1, 6, rank))
            perm = [int(p) for p in rng.permutation(rank)]
            m.add(kind, {"perm": perm}, [m.spec(shape)], origin)
        elif kind == "Reshape":
            a, b = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            m.add(kind, {"shape": [a * b]}, [m.spec((a, b))], origin)
        elif kind == "Concat":
            rank = int(rng.integers(1, 4))
            axis = int(rng.integers(0, rank))
            shape = [int(d) for d in rng.integers(1, 5, rank)]
            other = list(shape)
            other[axis] = int(rng.integers(1, 5))
            m.add(kind, {"axis": axis}, [m.spec(shape), m.spec(other)], origin)
        elif kind == "ReduceSum":
            rank = int(rng.integers(1, 4))
            shape = tuple(int(d) for d in rng.integers(1, 6, rank))
            axes = sorted(int(a) for a in rng.choice(rank, int(rng.integers(1, rank + 1)),
                                                     replace=False))
            m.add(kind, {"axes": axes, "keepdims": int(rng.integers(0, 2))}, [m.spec(shape)],
                  origin)
        elif kind == "Cast":
            src, to = [(F32, "I8"), (F32, "BOOL"), (I8, "F32"), (F32, "F32")][
                int(rng.integers(4))]
            m.add(kind, {"to": to}, [m.spec((int(rng.integers(1, 9)),), src)], origin)
        else:
            rank = int(rng.integers(1, 3))
            shape = tuple(int(d) for d in rng.integers(1, 5, rank))
            m.add(kind, {"pads": [int(p) for p in rng.integers(0, 2, 2 * rank)]},
                  [m.spec(shape)], origin)


def _negative(m: _Maker) -> None:
    m.repeat(5, "MatMul", {}, [(3, 4), (5, 6)], "test_matmul_bad_inner")
    m.repeat(4, "Add", {}, [(3,), (4,)], "test_add_bad_bcast")
    m.repeat(3, "Reshape", {"shape": [5, 5]}, [(4, 6)], "test_reshape_bad_size")


def _rare(m: _Maker) -> None:
    # asymmetric 4-value padding
    for i, (shape, pad) in enumerate([((1, 2, 6, 6), [0, 1, 1, 0]), ((1, 1, 5, 7), [0, 1, 1, 0]),
                                      ((1, 3, 6, 5), [0, 1, 1, 0]), ((1, 2, 7, 7), [0, 1, 1, 0])]):
        m.add("Conv2D", {"stride": [1, 1], "pad": pad},
              [m.spec(shape), m.spec((2, shape[1], 3, 3))], f"test_conv_asym_pad_{i}")
    # casts out of I32
    for i, (to, n) in enumerate([("F32", 6), ("F32", 9), ("F32", 4), ("F32", 7)]):
        m.add("Cast", {"to": to}, [m.spec((n,), I32)], f"test_cast_from_i32_{i}")
    # negative concat axis
    for i, (a, b) in enumerate([((2, 3), (2, 4)), ((3, 2), (3, 5)), ((2, 2), (2, 3)),
                                ((4, 1), (4, 2))]):
        m.add("Concat", {"axis": -1}, [m.spec(a), m.spec(b)], f"test_concat_neg_axis_{i}")
    # repeated transpose axes (must be rejected)
    for i, (shape, perm) in enumerate([((3, 4, 2), [0, 1, 0]), ((2, 5, 2), [0, 2, 0]),
                                       ((4, 4, 1), [0, 1, 0]), ((3, 3, 3), [0, 2, 0])]):
        m.add("Transpose", {"perm": perm}, [m.spec(shape)], f"test_transpose_dup_{i}")


def generate_corpus(seed: int = 2024, tail: int = 110) -> list[OperatorInstanceRecord]:
    """Deterministic corpus of roughly 600 records in shuffled order."""
    m = _Maker(np.random.default_rng(seed))
    _head(m)
    _tail(m, tail)
    _negative(m)
    _rare(m)
    order = np.random.default_rng(seed + 1).permutation(len(m.records))
    return [m.records[int(i)] for i in order]
