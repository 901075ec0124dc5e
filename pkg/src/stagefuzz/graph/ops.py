"""Operator vocabulary: arity, parameter schemas and shape/type inference."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

from ..errors import InvalidParam, ShapeMismatch
from .types import MAX_RANK, DType, TensorType

ELEMENTWISE_BINARY = ("Add", "Sub", "Mul", "Div")
ELEMENTWISE_UNARY = ("Neg", "ReLU", "Sigmoid")
ELEMENTWISE = ELEMENTWISE_BINARY + ELEMENTWISE_UNARY
LEAF_KINDS = ("Input", "Constant")

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    domain: str  # int | ints | dtype | choice | ident | body
    default: Any = None
    required: bool = False
    choices: tuple = ()
    check: Callable[[Any], bool] | None = None


@dataclass(frozen=True)
class OperatorKind:
    name: str
    arity: int | None  # None: variadic (at least one input)
    params: tuple[ParamSpec, ...] = field(default=())

    @property
    def param_schema(self) -> list[tuple[str, str]]:
        return [(p.name, p.domain) for p in self.params]

    def spec(self, name: str) -> ParamSpec | None:
        for p in self.params:
            if p.name == name:
                return p
        return None


def _nonneg(v):
    return all(x >= 0 for x in v)


def _positive(v):
    return all(x >= 1 for x in v)


OPERATORS: dict[str, OperatorKind] = {
    k.name: k
    for k in [
        OperatorKind("Input", 0, (ParamSpec("name", "ident", required=True),)),
        OperatorKind("Constant", 0),
        *(OperatorKind(n, 2) for n in ELEMENTWISE_BINARY),
        *(OperatorKind(n, 1) for n in ELEMENTWISE_UNARY),
        OperatorKind("MatMul", 2),
        OperatorKind(
            "Conv2D",
            2,
            (
                ParamSpec("stride", "ints", default=(1, 1),
                          check=lambda v: len(v) == 2 and _positive(v)),
                ParamSpec("pad", "ints", default=(0, 0),
                          check=lambda v: len(v) in (2, 4) and _nonneg(v)),
                ParamSpec("layout", "choice", default="NCHW", choices=("NCHW", "NHWC")),
            ),
        ),
        OperatorKind("Reshape", 1, (ParamSpec("shape", "ints", required=True,
                                              check=_nonneg),)),
        OperatorKind("Transpose", 1, (ParamSpec("perm", "ints", required=True),)),
        OperatorKind("Concat", None, (ParamSpec("axis", "int", default=0),)),
        OperatorKind(
            "ReduceSum",
            1,
            (
                ParamSpec("axes", "ints", required=True),
                ParamSpec("keepdims", "int", default=0, check=lambda v: v in (0, 1)),
            ),
        ),
        OperatorKind("Cast", 1, (ParamSpec("to", "dtype", required=True),)),
        OperatorKind("Pad", 1, (ParamSpec("pads", "ints", required=True,
                                          check=_nonneg),)),
    ]
}

# FusedGroup is produced only by the fusion pass; it is not one of the 17
# front-end kinds but the graph IR must carry it.
FUSED_GROUP = OperatorKind("FusedGroup", None, (ParamSpec("body", "body", required=True),))

KIND_NAMES: tuple[str, ...] = tuple(OPERATORS)


def get_kind(name: str) -> OperatorKind:
    if name == "FusedGroup":
        return FUSED_GROUP
    try:
        return OPERATORS[name]
    except KeyError:
        raise InvalidParam(f"unknown operator kind {name!r}") from None


def normalize_params(kind: str, params: Mapping[str, Any]) -> dict[str, Any]:
    """Check ``params`` against the kind's schema and fill in defaults.

    Lists become tuples and dtype names become :class:`DType` members so that
    parameter maps compare structurally.
    """
    op = get_kind(kind)
    out: dict[str, Any] = {}
    for key in params:
        if op.spec(key) is None:
            raise InvalidParam(f"{kind} has no parameter {key!r}")
    for spec in op.params:
        if spec.name not in params:
            if spec.required:
                raise InvalidParam(f"{kind} requires parameter {spec.name!r}")
            out[spec.name] = spec.default
            continue
        out[spec.name] = _coerce(kind, spec, params[spec.name])
    return out


def _coerce(kind: str, spec: ParamSpec, value: Any) -> Any:
    where = f"{kind}.{spec.name}"
    if spec.domain == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise InvalidParam(f"{where} expects an int, got {value!r}")
        v: Any = int(value)
    elif spec.domain == "ints":
        if not isinstance(value, (list, tuple)) or not all(
            isinstance(x, int) and not isinstance(x, bool) for x in value
        ):
            raise InvalidParam(f"{where} expects a list of ints, got {value!r}")
        v = tuple(int(x) for x in value)
    elif spec.domain == "dtype":
        if isinstance(value, DType):
            v = value
        else:
            try:
                v = DType.parse(str(value))
            except ValueError as exc:
                raise InvalidParam(f"{where}: {exc}") from None
    elif spec.domain == "choice":
        if value not in spec.choices:
            raise InvalidParam(f"{where} must be one of {spec.choices}, got {value!r}")
        v = value
    elif spec.domain == "ident":
        if not isinstance(value, str) or not _IDENT.match(value):
            raise InvalidParam(f"{where} expects an identifier, got {value!r}")
        v = value
    elif spec.domain == "body":
        v = _coerce_body(value)
    else:  # pragma: no cover - schema table is closed
        raise AssertionError(spec.domain)
    if spec.check is not None and not spec.check(v):
        raise InvalidParam(f"{where} out of domain: {value!r}")
    return v


def _coerce_body(value) -> tuple[tuple[str, tuple[str, ...]], ...]:
    steps = []
    try:
        for op, args in value:
            if op not in ELEMENTWISE:
                raise InvalidParam(f"FusedGroup body holds non-elementwise {op!r}")
            steps.append((str(op), tuple(str(a) for a in args)))
    except (TypeError, ValueError):
        raise InvalidParam(f"malformed FusedGroup body {value!r}") from None
    if not steps:
        raise InvalidParam("empty FusedGroup body")
    return tuple(steps)


def broadcast_shapes(a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
    """Trailing-aligned broadcasting where size-1 axes stretch."""
    out = []
    for i in range(1, max(len(a), len(b)) + 1):
        x = a[-i] if i <= len(a) else 1
        y = b[-i] if i <= len(b) else 1
        if x == y or y == 1:
            out.append(x)
        elif x == 1:
            out.append(y)
        else:
            raise ShapeMismatch(f"cannot broadcast {tuple(a)} with {tuple(b)}")
    return tuple(reversed(out))


def conv_pads(pad: Sequence[int]) -> tuple[int, int, int, int]:
    """Expand a 2- or 4-element pad into (top, left, bottom, right)."""
    if len(pad) == 2:
        return (pad[0], pad[1], pad[0], pad[1])
    return tuple(pad)  # type: ignore[return-value]


def normalize_axis(axis: int, rank: int) -> int:
    if not -rank <= axis < rank:
        raise InvalidParam(f"axis {axis} out of range for rank {rank}")
    return axis % rank


def _numeric(kind: str, t: TensorType):
    if not t.dtype.is_numeric:
        raise ShapeMismatch(f"{kind} does not accept dtype {t.dtype}")


def _same_dtype(kind: str, types: Sequence[TensorType]):
    dts = {t.dtype for t in types}
    if len(dts) > 1:
        raise ShapeMismatch(f"{kind} dtype mismatch: {sorted(d.value for d in dts)}")


def _checked(dtype: DType, shape: Sequence[int]) -> TensorType:
    if len(shape) > MAX_RANK:
        raise ShapeMismatch(f"result rank {len(shape)} exceeds {MAX_RANK}")
    return TensorType(dtype, tuple(shape))


def _elementwise_rule(kind: str, input_types: Sequence[TensorType]) -> TensorType:
    _same_dtype(kind, input_types)
    _numeric(kind, input_types[0])
    if kind == "Sigmoid" and input_types[0].dtype is not DType.F32:
        raise ShapeMismatch("Sigmoid requires F32")
    if len(input_types) == 1:
        return input_types[0]
    return _checked(input_types[0].dtype,
                    broadcast_shapes(input_types[0].shape, input_types[1].shape))


def _conv_rule(params, x: TensorType, w: TensorType) -> TensorType:
    if x.rank != 4 or w.rank != 4:
        raise ShapeMismatch(f"Conv2D expects rank-4 operands, got {x.rank} and {w.rank}")
    _same_dtype("Conv2D", [x, w])
    _numeric("Conv2D", x)
    nhwc = params["layout"] == "NHWC"
    n, c, h, wd = (x.shape[0], x.shape[3], x.shape[1], x.shape[2]) if nhwc else x.shape
    o, wc, kh, kw = w.shape
    if c != wc:
        raise ShapeMismatch(f"Conv2D channel mismatch: input {c}, weight {wc}")
    sh, sw = params["stride"]
    top, left, bottom, right = conv_pads(params["pad"])
    hs, ws = h + top + bottom - kh, wd + left + right - kw
    if hs < 0 or ws < 0:
        raise ShapeMismatch("Conv2D kernel larger than padded input")
    oh, ow = hs // sh + 1, ws // sw + 1
    shape = (n, oh, ow, o) if nhwc else (n, o, oh, ow)
    return TensorType(x.dtype, shape)


def infer_shape(kind: str, params: Mapping[str, Any],
                input_types: Sequence[TensorType]) -> TensorType:
    """Result type of applying ``kind`` to operands of ``input_types``.

    ``params`` may be raw (as written by a user) or already normalized.
    Leaf kinds have no rule; their types are declared on the node.
    """
    op = get_kind(kind)
    if kind in LEAF_KINDS:
        raise InvalidParam(f"{kind} nodes carry a declared type")
    if op.arity is None:
        if not input_types:
            raise ShapeMismatch(f"{kind} needs at least one input")
    elif len(input_types) != op.arity:
        raise ShapeMismatch(f"{kind} takes {op.arity} inputs, got {len(input_types)}")
    p = normalize_params(kind, params)

    if kind in ELEMENTWISE:
        return _elementwise_rule(kind, input_types)
    if kind == "MatMul":
        a, b = input_types
        if a.rank != 2 or b.rank != 2:
            raise ShapeMismatch(f"MatMul expects rank-2 operands, got {a.shape} and {b.shape}")
        _same_dtype(kind, input_types)
        _numeric(kind, a)
        if a.shape[1] != b.shape[0]:
            raise ShapeMismatch(f"MatMul inner dims differ: {a.shape} x {b.shape}")
        return TensorType(a.dtype, (a.shape[0], b.shape[1]))
    if kind == "Conv2D":
        return _conv_rule(p, *input_types)
    if kind == "Reshape":
        (x,) = input_types
        if math.prod(p["shape"]) != x.size:
            raise ShapeMismatch(f"cannot reshape {x.shape} to {p['shape']}")
        return _checked(x.dtype, p["shape"])
    if kind == "Transpose":
        (x,) = input_types
        perm = p["perm"]
        if sorted(perm) != list(range(x.rank)):
            raise InvalidParam(f"{perm} is not a permutation of rank {x.rank}")
        return TensorType(x.dtype, tuple(x.shape[i] for i in perm))
    if kind == "Concat":
        first = input_types[0]
        _same_dtype(kind, input_types)
        if first.rank == 0:
            raise ShapeMismatch("Concat of rank-0 tensors")
        axis = normalize_axis(p["axis"], first.rank)
        total = 0
        for t in input_types:
            if t.rank != first.rank or any(
                t.shape[i] != first.shape[i] for i in range(t.rank) if i != axis
            ):
                raise ShapeMismatch(f"Concat operands disagree: {first.shape} vs {t.shape}")
            total += t.shape[axis]
        shape = list(first.shape)
        shape[axis] = total
        return TensorType(first.dtype, tuple(shape))
    if kind == "ReduceSum":
        (x,) = input_types
        _numeric(kind, x)
        axes = sorted(normalize_axis(a, x.rank) for a in p["axes"]) if x.rank else []
        if len(set(axes)) != len(axes) or (x.rank == 0 and p["axes"]):
            raise InvalidParam(f"bad ReduceSum axes {p['axes']} for rank {x.rank}")
        if p["keepdims"]:
            shape = tuple(1 if i in axes else d for i, d in enumerate(x.shape))
        else:
            shape = tuple(d for i, d in enumerate(x.shape) if i not in axes)
        return TensorType(x.dtype, shape)
    if kind == "Cast":
        (x,) = input_types
        return TensorType(p["to"], x.shape)
    if kind == "Pad":
        (x,) = input_types
        pads = p["pads"]
        if len(pads) != 2 * x.rank:
            raise InvalidParam(f"Pad needs {2 * x.rank} pad values, got {len(pads)}")
        return TensorType(
            x.dtype, tuple(d + pads[2 * i] + pads[2 * i + 1] for i, d in enumerate(x.shape))
        )
    if kind == "FusedGroup":
        return fused_type(p["body"], input_types)
    raise AssertionError(kind)  # pragma: no cover


def fused_type(body, input_types: Sequence[TensorType]) -> TensorType:
    temps: list[TensorType] = []
    for op, args in body:
        arg_types = [_resolve_slot(a, input_types, temps) for a in args]
        arity = get_kind(op).arity
        if len(arg_types) != arity:
            raise ShapeMismatch(f"fused {op} takes {arity} args")
        temps.append(_elementwise_rule(op, arg_types))
    return temps[-1]


def _resolve_slot(ref: str, inputs, temps):
    try:
        idx = int(ref[1:])
        if ref[0] == "i":
            return inputs[idx]
        if ref[0] == "t" and idx < len(temps):
            return temps[idx]
    except (ValueError, IndexError):
        pass
    raise InvalidParam(f"bad FusedGroup operand {ref!r}")
