"""Sequential loop-IR interpreter, the second oracle.

The program is compiled once into nested closures; annotations are
ignored, so every loop runs serially in source order. F32 values are
numpy float32 scalars and integers are Python ints wrapped after each
operation, which reproduces the graph interpreter bit for bit.
"""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from ..errors import MissingInput, NumericDomain, OutOfBounds, UninitializedRead
from ..graph.types import INT_RANGE, DType, TensorType, TensorValue
from .ir import (Alloc, Bin, Cast, Cmp, Const, Fma, For, If, Load, LoopProgram, Seq, Store, Un,
                 Var, expr_dtype)

F32 = np.float32
_ONE = F32(1)


def _wrapper(dtype: DType):
    if dtype is DType.I32:
        return lambda x: ((x + 0x80000000) & 0xFFFFFFFF) - 0x80000000
    if dtype is DType.I8:
        return lambda x: ((x + 0x80) & 0xFF) - 0x80
    return None


def fma_f32(a, b, c) -> np.float32:
    """``a*b + c`` rounded once to float32."""
    p = float(a) * float(b)  # exact: 24-bit significands fit in a double
    c = float(c)
    s = p + c
    if not math.isfinite(s):
        return F32(s)
    bb = s - p
    err = (p - (s - bb)) + (c - bb)
    r = F32(s)
    if err == 0 or float(r) == s or not math.isfinite(float(r)):
        return r
    other = np.nextafter(r, F32(math.copysign(np.inf, s - float(r))))
    if s == (float(r) + float(other)) / 2:
        # s sits exactly between two float32 values; the discarded error
        # decides which way the exact sum rounds
        if (err > 0) == (float(other) > float(r)):
            return other
    return r


def cast_scalar(x, src: DType, dst: DType):
    if dst is DType.BOOL:
        return bool(x != 0)
    if src is DType.BOOL:
        return F32(1 if x else 0) if dst is DType.F32 else int(bool(x))
    if dst is DType.F32:
        return F32(x)
    if src is DType.F32:
        if x != x:
            return 0
        lo, hi = INT_RANGE[dst]
        if x == np.inf:
            return hi
        if x == -np.inf:
            return lo
        return min(max(math.trunc(float(x)), lo), hi)
    return _wrapper(dst)(int(x))


def _fmax(a, b):
    return a if (a >= b or a != a) else b


def _int_div(a: int, b: int) -> int:
    if b == 0:
        raise NumericDomain("integer division by zero")
    q = abs(a) // abs(b)
    return -q if (a < 0) != (b < 0) else q


class _Compiler:
    def __init__(self, p: LoopProgram, debug: bool):
        self.buffers = p.buffers()
        self.debug = debug

    # -- index and value expressions -----------------------------------
    def index_expr(self, e):
        if isinstance(e, Const):
            v = int(e.value)
            return lambda V, B: v
        if isinstance(e, Var):
            name = e.name
            return lambda V, B: V[name]
        if isinstance(e, Bin):
            fa, fb = self.index_expr(e.a), self.index_expr(e.b)
            if e.op == "+":
                return lambda V, B: fa(V, B) + fb(V, B)
            if e.op == "-":
                return lambda V, B: fa(V, B) - fb(V, B)
            if e.op == "*":
                return lambda V, B: fa(V, B) * fb(V, B)
        if isinstance(e, Load):
            return self.value_expr(e)
        raise TypeError(f"not an index expression: {e!r}")

    def offset(self, buf: str, index: tuple):
        b = self.buffers[buf]
        ext = b.extents
        fs = [self.index_expr(i) for i in index]
        if len(fs) != len(ext) or not self.debug:
            if len(fs) != 1 and len(fs) != len(ext):
                raise OutOfBounds(f"{buf}: {len(fs)} indices for rank {len(ext)}")
            size = b.size
            if len(fs) == 1:
                f0 = fs[0]

                def flat(V, B):
                    i = f0(V, B)
                    if not 0 <= i < size:
                        raise OutOfBounds(f"{buf}[{i}] outside {size} elements")
                    return i
                return flat
        strides = []
        acc = 1
        for d in reversed(ext):
            strides.append(acc)
            acc *= d
        strides.reverse()
        if not fs:
            return lambda V, B: 0
        if len(fs) == 1:
            f0, e0 = fs[0], ext[0]

            def off1(V, B):
                i = f0(V, B)
                if not 0 <= i < e0:
                    raise OutOfBounds(f"{buf}[{i}] outside extent {e0}")
                return i
            return off1
        if len(fs) == 2:
            f0, f1 = fs
            e0, e1 = ext

            def off2(V, B):
                i, j = f0(V, B), f1(V, B)
                if not (0 <= i < e0 and 0 <= j < e1):
                    raise OutOfBounds(f"{buf}[{i}, {j}] outside {list(ext)}")
                return i * e1 + j
            return off2
        parts = list(zip(fs, ext, strides))

        def offn(V, B):
            off = 0
            for f, e, s in parts:
                i = f(V, B)
                if not 0 <= i < e:
                    raise OutOfBounds(f"{buf}: index {i} outside extent {e}")
                off += i * s
            return off
        return offn

    def value_expr(self, e):
        if isinstance(e, Const):
            v = e.value
            if e.dtype is DType.F32:
                v = F32(v)
            elif e.dtype is None or e.dtype.is_int:
                v = int(v)
            return lambda V, B: v
        if isinstance(e, Var):
            return self.index_expr(e)
        if isinstance(e, Load):
            off = self.offset(e.buf, e.index)
            name = e.buf

            def load(V, B):
                x = B[name][off(V, B)]
                if x is None:
                    raise UninitializedRead(f"read of uninitialized element of {name}")
                return x
            return load
        dtype = expr_dtype(e, self.buffers)
        if isinstance(e, Bin):
            if dtype is None:
                return self.index_expr(e)
            fa, fb = self.value_expr(e.a), self.value_expr(e.b)
            op = e.op
            if op == "max":
                if dtype is DType.F32:
                    return lambda V, B: _fmax(fa(V, B), fb(V, B))
                return lambda V, B: max(fa(V, B), fb(V, B))
            if dtype is DType.F32:
                if op == "+":
                    return lambda V, B: fa(V, B) + fb(V, B)
                if op == "-":
                    return lambda V, B: fa(V, B) - fb(V, B)
                if op == "*":
                    return lambda V, B: fa(V, B) * fb(V, B)
                return lambda V, B: fa(V, B) / fb(V, B)
            w = _wrapper(dtype)
            if op == "+":
                return lambda V, B: w(fa(V, B) + fb(V, B))
            if op == "-":
                return lambda V, B: w(fa(V, B) - fb(V, B))
            if op == "*":
                return lambda V, B: w(fa(V, B) * fb(V, B))
            return lambda V, B: w(_int_div(fa(V, B), fb(V, B)))
        if isinstance(e, Un):
            fa = self.value_expr(e.a)
            if e.op == "sigmoid":
                return lambda V, B: _ONE / (_ONE + np.exp(-fa(V, B)))
            if dtype is DType.F32:
                return lambda V, B: -fa(V, B)
            w = _wrapper(dtype)
            return lambda V, B: w(-fa(V, B))
        if isinstance(e, Cast):
            fa = self.value_expr(e.a)
            src, dst = expr_dtype(e.a, self.buffers), e.to
            if src is dst:
                return fa
            return lambda V, B: cast_scalar(fa(V, B), src, dst)
        if isinstance(e, Fma):
            fa, fb, fc = self.value_expr(e.a), self.value_expr(e.b), self.value_expr(e.c)
            return lambda V, B: fma_f32(fa(V, B), fb(V, B), fc(V, B))
        raise TypeError(f"not a value expression: {e!r}")

    def cond(self, c: Cmp):
        fa, fb = self.index_expr(c.a), self.index_expr(c.b)
        return {
            "<": lambda V, B: fa(V, B) < fb(V, B),
            "<=": lambda V, B: fa(V, B) <= fb(V, B),
            ">": lambda V, B: fa(V, B) > fb(V, B),
            ">=": lambda V, B: fa(V, B) >= fb(V, B),
            "==": lambda V, B: fa(V, B) == fb(V, B),
        }[c.op]

    # -- statements -------------------------------------------------------
    def stmt(self, s):
        if isinstance(s, Seq):
            fs = [self.stmt(x) for x in s.stmts]
            if len(fs) == 1:
                return fs[0]

            def seq(V, B):
                for f in fs:
                    f(V, B)
            return seq
        if isinstance(s, For):
            lo, hi, body, var = self.index_expr(s.lo), self.index_expr(s.hi), self.stmt(s.body), s.var

            def loop(V, B):
                for i in range(lo(V, B), hi(V, B)):
                    V[var] = i
                    body(V, B)
            return loop
        if isinstance(s, Store):
            off, val, name = self.offset(s.buf, s.index), self.value_expr(s.value), s.buf

            def store(V, B):
                v = val(V, B)
                B[name][off(V, B)] = v
            return store
        if isinstance(s, Alloc):
            name, size = s.buffer.name, s.buffer.size

            def alloc(V, B):
                B[name] = [None] * size
            return alloc
        if isinstance(s, If):
            conds, body = [self.cond(c) for c in s.cond], self.stmt(s.body)

            def guard(V, B):
                for c in conds:
                    if not c(V, B):
                        return
                body(V, B)
            return guard
        raise TypeError(f"not a statement: {s!r}")


def compile_loop(p: LoopProgram, debug: bool = True):
    return _Compiler(p, debug).stmt(p.body)


def interpret_loop(p: LoopProgram, inputs: Mapping[str, TensorValue],
                   debug: bool = True) -> dict[str, TensorValue]:
    """Run ``p`` on the bound inputs and return every output buffer.

    With ``debug`` each index is checked against its own extent; without
    it only the flattened offset is checked.
    """
    run = compile_loop(p, debug)
    bufs: dict[str, list] = {}
    for b in p.inputs:
        if b.name not in inputs:
            raise MissingInput(f"no value bound for input {b.name!r}")
        v = inputs[b.name]
        if v.ttype != TensorType(b.dtype, b.extents):
            raise MissingInput(f"input {b.name!r} bound to {v.ttype}, expects "
                               f"{TensorType(b.dtype, b.extents)}")
        flat = v.data.reshape(-1)
        bufs[b.name] = list(flat) if b.dtype is DType.F32 else flat.tolist()
    for b in p.outputs:
        bufs.setdefault(b.name, [None] * b.size)
    with np.errstate(all="ignore"):
        run({}, bufs)
    out = {}
    for b in p.outputs:
        data = bufs[b.name]
        if any(x is None for x in data):
            raise UninitializedRead(f"output {b.name} not fully written")
        arr = np.array(data, dtype=b.dtype.np).reshape(b.extents)
        out[b.name] = TensorValue(TensorType(b.dtype, b.extents), arr)
    return out
