"""Reference interpreter for the graph IR.

Float kernels accumulate in a fixed, documented order (see ``matmul``,
``conv2d`` and ``reduce_sum``) so that the loop-IR interpreter, which
executes one scalar at a time, reproduces them bit for bit.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from ..errors import MissingInput, NumericDomain, ShapeMismatch, StageFuzzError
from .ir import Graph
from .ops import conv_pads, normalize_axis
from .types import INT_RANGE, DType, TensorType, TensorValue, random_tensor

F32 = np.float32


def _wrap(arr: np.ndarray, dtype: DType) -> np.ndarray:
    if dtype.is_int:
        return np.asarray(arr, dtype=np.int64).astype(dtype.np)
    return np.asarray(arr, dtype=dtype.np)


def _int_div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Integer division truncating toward zero."""
    if np.any(b == 0):
        raise NumericDomain("integer division by zero")
    q = np.abs(a) // np.abs(b)
    return np.where((a < 0) != (b < 0), -q, q)


def binary(op: str, a: np.ndarray, b: np.ndarray, dtype: DType) -> np.ndarray:
    if dtype is DType.F32:
        a, b = a.astype(F32), b.astype(F32)
        if op == "Add":
            return a + b
        if op == "Sub":
            return a - b
        if op == "Mul":
            return a * b
        return a / b
    a64, b64 = a.astype(np.int64), b.astype(np.int64)
    if op == "Add":
        r = a64 + b64
    elif op == "Sub":
        r = a64 - b64
    elif op == "Mul":
        r = a64 * b64
    else:
        r = _int_div(*np.broadcast_arrays(a64, b64))
    return _wrap(r, dtype)


def unary(op: str, x: np.ndarray, dtype: DType) -> np.ndarray:
    if op == "Neg":
        return -x if dtype is DType.F32 else _wrap(-x.astype(np.int64), dtype)
    if op == "ReLU":
        return np.maximum(x, x.dtype.type(0))
    one = F32(1)
    return one / (one + np.exp(-x))


def cast(x: np.ndarray, src: DType, dst: DType) -> np.ndarray:
    """Element conversion.

    Float to integer truncates toward zero and saturates; NaN becomes 0.
    Integer to integer wraps. Anything to BOOL tests ``!= 0``.
    """
    if dst is DType.BOOL:
        return x != 0
    if src is DType.BOOL:
        return x.astype(dst.np)
    if dst is DType.F32:
        return x.astype(F32)
    if src is DType.F32:
        lo, hi = INT_RANGE[dst]
        t = np.where(np.isnan(x), F32(0), np.trunc(x)).astype(np.float64)
        return np.clip(t, lo, hi).astype(dst.np)
    return _wrap(x.astype(np.int64), dst)


def matmul(a: np.ndarray, b: np.ndarray, dtype: DType) -> np.ndarray:
    """Row-by-column product; floats accumulate over k in ascending order."""
    m, kdim = a.shape
    n = b.shape[1]
    if dtype.is_int:
        return _wrap(a.astype(np.int64) @ b.astype(np.int64), dtype)
    acc = np.zeros((m, n), F32)
    for k in range(kdim):
        acc = acc + a[:, k:k + 1] * b[k:k + 1, :]
    return acc


def _valid_range(out_len: int, stride: int, offset: int, in_len: int) -> tuple[int, int]:
    """Output positions o with 0 <= o*stride + offset < in_len, as [lo, hi)."""
    lo = 0
    while lo < out_len and lo * stride + offset < 0:
        lo += 1
    hi = lo
    while hi < out_len and hi * stride + offset < in_len:
        hi += 1
    return lo, hi


def conv2d(x: np.ndarray, w: np.ndarray, params, dtype: DType) -> np.ndarray:
    """Direct convolution accumulating over (c, kh, kw) in that order.

    Padded positions are skipped rather than multiplied by zero.
    """
    nhwc = params["layout"] == "NHWC"
    if nhwc:
        x = np.transpose(x, (0, 3, 1, 2))
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    sh, sw = params["stride"]
    top, left, bottom, right = conv_pads(params["pad"])
    oh = (h + top + bottom - kh) // sh + 1
    ow = (wd + left + right - kw) // sw + 1
    is_int = dtype.is_int
    acc = np.zeros((n, o, oh, ow), np.int64 if is_int else F32)
    xs = x.astype(np.int64) if is_int else x
    ws = w.astype(np.int64) if is_int else w
    for ci in range(c):
        for ki in range(kh):
            h0, h1 = _valid_range(oh, sh, ki - top, h)
            if h0 >= h1:
                continue
            rows = np.arange(h0, h1) * sh + ki - top
            for kj in range(kw):
                w0, w1 = _valid_range(ow, sw, kj - left, wd)
                if w0 >= w1:
                    continue
                cols = np.arange(w0, w1) * sw + kj - left
                patch = xs[:, ci][:, rows][:, :, cols]  # (n, rows, cols)
                prod = patch[:, None, :, :] * ws[:, ci, ki, kj][None, :, None, None]
                acc[:, :, h0:h1, w0:w1] = acc[:, :, h0:h1, w0:w1] + prod
    out = _wrap(acc, dtype)
    if nhwc:
        out = np.transpose(out, (0, 2, 3, 1))
    return out


def reduce_sum(x: np.ndarray, axes: Sequence[int], keepdims: int, dtype: DType) -> np.ndarray:
    """Sum over ``axes``; floats add reduced elements in row-major order."""
    rank = x.ndim
    axes = sorted(normalize_axis(a, rank) for a in axes)
    kept = [i for i in range(rank) if i not in axes]
    moved = np.transpose(x, kept + axes)
    kept_shape = tuple(x.shape[i] for i in kept)
    flat = moved.reshape(kept_shape + (-1,))
    if dtype.is_int:
        acc = _wrap(flat.astype(np.int64).sum(axis=-1), dtype)
    else:
        acc = np.zeros(kept_shape, F32)
        for r in range(flat.shape[-1]):
            acc = acc + flat[..., r]
    if keepdims:
        acc = acc.reshape(tuple(1 if i in axes else d for i, d in enumerate(x.shape)))
    return np.asarray(acc, dtype=dtype.np)


def concat(args: Sequence[np.ndarray], axis: int) -> np.ndarray:
    return np.concatenate(args, axis=normalize_axis(axis, args[0].ndim))


def pad(x: np.ndarray, pads: Sequence[int]) -> np.ndarray:
    widths = [(pads[2 * i], pads[2 * i + 1]) for i in range(x.ndim)]
    return np.pad(x, widths, mode="constant")


def fused(body, args: Sequence[np.ndarray], dtypes: Sequence[DType]) -> np.ndarray:
    temps: list[np.ndarray] = []
    dtype = dtypes[0]
    for op, refs in body:
        vals = [args[int(r[1:])] if r[0] == "i" else temps[int(r[1:])] for r in refs]
        if len(vals) == 2:
            temps.append(binary(op, vals[0], vals[1], dtype))
        else:
            temps.append(unary(op, vals[0], dtype))
    return temps[-1]


def eval_kernel(kind: str, params, args: Sequence[np.ndarray],
                in_types: Sequence[TensorType], out_type: TensorType) -> np.ndarray:
    """Evaluate one non-leaf operator on concrete arrays."""
    dtype = in_types[0].dtype if in_types else out_type.dtype
    with np.errstate(all="ignore"):
        if kind in ("Add", "Sub", "Mul", "Div"):
            r = binary(kind, args[0], args[1], dtype)
        elif kind in ("Neg", "ReLU", "Sigmoid"):
            r = unary(kind, args[0], dtype)
        elif kind == "MatMul":
            r = matmul(args[0], args[1], dtype)
        elif kind == "Conv2D":
            r = conv2d(args[0], args[1], params, dtype)
        elif kind == "Reshape":
            r = args[0].reshape(params["shape"])
        elif kind == "Transpose":
            r = np.transpose(args[0], params["perm"])
        elif kind == "Concat":
            r = concat(args, params["axis"])
        elif kind == "ReduceSum":
            r = reduce_sum(args[0], params["axes"], params["keepdims"], dtype)
        elif kind == "Cast":
            r = cast(args[0], dtype, params["to"])
        elif kind == "Pad":
            r = pad(args[0], params["pads"])
        elif kind == "FusedGroup":
            r = fused(params["body"], args, [t.dtype for t in in_types])
        else:
            raise StageFuzzError(f"cannot evaluate {kind}")
    r = np.asarray(r, dtype=out_type.dtype.np)
    if r.shape != out_type.shape:
        raise ShapeMismatch(f"{kind} produced {r.shape}, declared {out_type.shape}")
    return r


def interpret_graph(g: Graph, inputs: Mapping[str, TensorValue]) -> list[TensorValue]:
    """Evaluate ``g`` in topological order and return its outputs in order.

    Extra bindings in ``inputs`` are ignored.
    """
    values: dict[int, np.ndarray] = {}
    for nid in g.topo_order():
        node = g.nodes[nid]
        if node.kind == "Input":
            name = node.params["name"]
            if name not in inputs:
                raise MissingInput(f"no value bound for input {name!r}")
            v = inputs[name]
            if v.ttype != node.out_type:
                raise MissingInput(f"input {name!r} bound to {v.ttype}, expects {node.out_type}")
            values[nid] = v.data
        elif node.kind == "Constant":
            values[nid] = node.payload()
        else:
            in_types = [g.nodes[s].out_type for s in node.inputs]
            values[nid] = eval_kernel(node.kind, node.params, [values[s] for s in node.inputs],
                                      in_types, node.out_type)
    return [TensorValue(g.nodes[o].out_type, values[o]) for o in g.outputs]


def random_inputs(g: Graph, rng: np.random.Generator) -> dict[str, TensorValue]:
    return {n.params["name"]: random_tensor(n.out_type, rng) for n in g.input_nodes()}

