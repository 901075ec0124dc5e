"""Loop-nest IR: buffers, affine-indexed statements and annotated loops."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Union

from ..graph.types import DType

NAN = float("nan")

# --------------------------------------------------------------------------
# expressions


@dataclass(frozen=True)
class Const:
    value: Union[int, float, bool]
    dtype: DType | None = None  # None: index integer

    def __post_init__(self):
        if isinstance(self.value, float) and math.isnan(self.value):
            object.__setattr__(self, "value", NAN)


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Load:
    buf: str
    index: tuple


@dataclass(frozen=True)
class Bin:
    op: str  # + - * / max
    a: "Expr"
    b: "Expr"


@dataclass(frozen=True)
class Un:
    op: str  # neg | sigmoid
    a: "Expr"


@dataclass(frozen=True)
class Cast:
    to: DType
    a: "Expr"


@dataclass(frozen=True)
class Fma:
    """Fused multiply-add intrinsic: a*b + c with a single rounding."""

    a: "Expr"
    b: "Expr"
    c: "Expr"


@dataclass(frozen=True)
class Cmp:
    op: str  # < <= > >= ==
    a: "Expr"
    b: "Expr"


Expr = Union[Const, Var, Load, Bin, Un, Cast, Fma]
BIN_OPS = ("+", "-", "*", "/", "max")
CMP_OPS = ("<", "<=", ">", ">=", "==")


def children(e) -> tuple:
    if isinstance(e, Load):
        return e.index
    if isinstance(e, (Bin, Cmp)):
        return (e.a, e.b)
    if isinstance(e, (Un, Cast)):
        return (e.a,)
    if isinstance(e, Fma):
        return (e.a, e.b, e.c)
    return ()


def iter_expr(e) -> Iterator:
    yield e
    for c in children(e):
        yield from iter_expr(c)


def map_expr(e, fn):
    """Rebuild ``e`` bottom-up applying ``fn`` to every node."""
    if isinstance(e, Load):
        e = Load(e.buf, tuple(map_expr(i, fn) for i in e.index))
    elif isinstance(e, Bin):
        e = Bin(e.op, map_expr(e.a, fn), map_expr(e.b, fn))
    elif isinstance(e, Cmp):
        e = Cmp(e.op, map_expr(e.a, fn), map_expr(e.b, fn))
    elif isinstance(e, Un):
        e = Un(e.op, map_expr(e.a, fn))
    elif isinstance(e, Cast):
        e = Cast(e.to, map_expr(e.a, fn))
    elif isinstance(e, Fma):
        e = Fma(map_expr(e.a, fn), map_expr(e.b, fn), map_expr(e.c, fn))
    return fn(e)


# --------------------------------------------------------------------------
# affine index arithmetic


def idx(v) -> Expr:
    """Coerce an int or a variable name into an index expression."""
    if isinstance(v, int):
        return Const(v)
    if isinstance(v, str):
        return Var(v)
    return v


def add(a, b) -> Expr:
    a, b = idx(a), idx(b)
    if isinstance(a, Const) and a.dtype is None and isinstance(b, Const) and b.dtype is None:
        return Const(a.value + b.value)
    if isinstance(b, Const) and b.dtype is None and b.value == 0:
        return a
    if isinstance(a, Const) and a.dtype is None and a.value == 0:
        return b
    if isinstance(b, Const) and b.dtype is None and b.value < 0:
        return Bin("-", a, Const(-b.value))
    return Bin("+", a, b)


def sub(a, b) -> Expr:
    b = idx(b)
    if isinstance(b, Const) and b.dtype is None:
        return add(a, Const(-b.value))
    return Bin("-", idx(a), b)


def mul(a, c: int) -> Expr:
    a = idx(a)
    if c == 1:
        return a
    if c == 0:
        return Const(0)
    if isinstance(a, Const) and a.dtype is None:
        return Const(a.value * c)
    return Bin("*", a, Const(c))


def affine(e) -> dict | None:
    """Linear form ``{var: coeff, 1: const}`` of an index expression, or None."""
    if isinstance(e, Const):
        if e.dtype is not None or not isinstance(e.value, int):
            return None
        return {1: e.value} if e.value else {}
    if isinstance(e, Var):
        return {e.name: 1}
    if isinstance(e, Bin) and e.op in "+-*":
        a, b = affine(e.a), affine(e.b)
        if a is None or b is None:
            return None
        if e.op == "*":
            if set(a) <= {1}:
                a, b = b, a
            if not set(b) <= {1}:
                return None
            k = b.get(1, 0)
            return {v: c * k for v, c in a.items() if c * k}
        sign = 1 if e.op == "+" else -1
        out = dict(a)
        for v, c in b.items():
            out[v] = out.get(v, 0) + sign * c
        return {v: c for v, c in out.items() if c}
    return None


def const_value(e) -> int | None:
    f = affine(e)
    if f is None or set(f) - {1}:
        return None
    return f.get(1, 0)


def from_affine(form: Mapping) -> Expr:
    e: Expr = Const(form.get(1, 0))
    first = True
    for v in sorted(k for k in form if k != 1):
        term = mul(Var(v), form[v])
        e = term if first and form.get(1, 0) == 0 else add(e, term)
        first = False
    return e


# --------------------------------------------------------------------------
# statements


@dataclass(frozen=True)
class Ann:
    kind: str = "serial"  # serial | parallel | vectorize | unroll | pipelined
    param: int | None = None

    LEGAL = {"vectorize": (2, 4, 8), "unroll": (2, 4, 8), "pipelined": (2, 3)}

    def __str__(self):
        if self.kind == "serial":
            return ""
        if self.param is None:
            return f"@{self.kind}"
        return f"@{self.kind}({self.param})"

    @property
    def legal(self) -> bool:
        if self.kind in ("serial", "parallel"):
            return self.param is None
        return self.param in self.LEGAL.get(self.kind, ())


SERIAL = Ann()


@dataclass(frozen=True)
class Buffer:
    name: str
    dtype: DType
    extents: tuple

    def __post_init__(self):
        object.__setattr__(self, "extents", tuple(int(e) for e in self.extents))

    @property
    def size(self) -> int:
        return math.prod(self.extents)

    def __str__(self):
        return f"{self.name}: {self.dtype.value}[{','.join(map(str, self.extents))}]"


@dataclass(frozen=True)
class Seq:
    stmts: tuple = ()

    def __post_init__(self):
        flat = []
        for s in self.stmts:
            if isinstance(s, Seq):
                flat.extend(s.stmts)
            else:
                flat.append(s)
        object.__setattr__(self, "stmts", tuple(flat))

    def __iter__(self):
        return iter(self.stmts)

    def __len__(self):
        return len(self.stmts)


@dataclass(frozen=True)
class For:
    var: str
    lo: Expr
    hi: Expr
    ann: Ann
    body: Seq

    @property
    def trip(self) -> int | None:
        """Trip count when ``hi - lo`` is a constant."""
        lo, hi = affine(self.lo), affine(self.hi)
        if lo is None or hi is None:
            return None
        diff = {v: hi.get(v, 0) - lo.get(v, 0) for v in set(lo) | set(hi)}
        if any(c for v, c in diff.items() if v != 1):
            return None
        return max(diff.get(1, 0), 0)


@dataclass(frozen=True)
class Store:
    buf: str
    index: tuple
    value: Expr


@dataclass(frozen=True)
class Alloc:
    buffer: Buffer
    scope: str = "global"  # global | local | cache


@dataclass(frozen=True)
class If:
    cond: tuple  # conjunction of Cmp
    body: Seq


Stmt = Union[For, Store, Alloc, If, Seq]
SCOPES = ("global", "local", "cache")


@dataclass(frozen=True)
class LoopProgram:
    name: str
    inputs: tuple
    outputs: tuple
    body: Seq
    intrinsics_used: frozenset = field(default_factory=frozenset)

    def buffers(self) -> dict[str, Buffer]:
        out = {b.name: b for b in self.inputs + self.outputs}
        for s in walk(self.body):
            if isinstance(s, Alloc):
                out[s.buffer.name] = s.buffer
        return out

    def with_body(self, body, **changes) -> "LoopProgram":
        return replace(self, body=body if isinstance(body, Seq) else Seq((body,)), **changes)


def walk(stmt) -> Iterator:
    """Pre-order traversal of every statement under ``stmt``."""
    yield stmt
    if isinstance(stmt, Seq):
        for s in stmt.stmts:
            yield from walk(s)
    elif isinstance(stmt, (For, If)):
        yield from walk(stmt.body)


def walk_paths(stmt, path=()) -> Iterator[tuple[tuple, object]]:
    """Pre-order ``(path, stmt)``; a path indexes into successive bodies."""
    yield path, stmt
    body = stmt if isinstance(stmt, Seq) else getattr(stmt, "body", None)
    if isinstance(body, Seq):
        for i, s in enumerate(body.stmts):
            yield from walk_paths(s, path + (i,))


def get_at(stmt, path):
    for i in path:
        body = stmt if isinstance(stmt, Seq) else stmt.body
        stmt = body.stmts[i]
    return stmt


def replace_at(stmt, path, new):
    """Return ``stmt`` with the node at ``path`` replaced by ``new``.

    ``new`` may be a Seq, which is spliced into the enclosing body.
    """
    if not path:
        return new
    body = stmt if isinstance(stmt, Seq) else stmt.body
    items = list(body.stmts)
    items[path[0]] = replace_at(items[path[0]], path[1:], new)
    new_body = Seq(tuple(items))
    if isinstance(stmt, Seq):
        return new_body
    return replace(stmt, body=new_body)


def stmt_exprs(s) -> Iterator:
    """Expressions owned directly by a statement (not its children)."""
    if isinstance(s, For):
        yield s.lo
        yield s.hi
    elif isinstance(s, Store):
        yield from s.index
        yield s.value
    elif isinstance(s, If):
        yield from s.cond


def map_stmt_exprs(s, fn):
    """Apply ``fn`` (an expression mapper) to every expression under ``s``."""
    if isinstance(s, Seq):
        return Seq(tuple(map_stmt_exprs(x, fn) for x in s.stmts))
    if isinstance(s, For):
        return For(s.var, map_expr(s.lo, fn), map_expr(s.hi, fn), s.ann,
                   map_stmt_exprs(s.body, fn))
    if isinstance(s, Store):
        return Store(s.buf, tuple(map_expr(i, fn) for i in s.index), map_expr(s.value, fn))
    if isinstance(s, If):
        return If(tuple(map_expr(c, fn) for c in s.cond), map_stmt_exprs(s.body, fn))
    return s


def _simplify_index(e):
    if isinstance(e, Bin) and e.op in "+-*":
        f = affine(e)
        if f is not None:
            return from_affine(f)
    return e


def subst(s, mapping: Mapping[str, Expr]):
    """Substitute loop variables in statement or expression ``s``."""

    def fn(e):
        if isinstance(e, Var) and e.name in mapping:
            return mapping[e.name]
        return e

    def tidy(e):
        e = fn(e)
        return _simplify_index(e)

    if isinstance(s, (Seq, For, Store, If, Alloc)):
        return map_stmt_exprs(s, tidy)
    return map_expr(s, tidy)


def rename_buffer(s, old: str, new: str, only_loads: bool = False):
    def fn(e):
        if isinstance(e, Load) and e.buf == old:
            return Load(new, e.index)
        return e

    s = map_stmt_exprs(s, fn)
    if only_loads:
        return s

    def st(x):
        if isinstance(x, Seq):
            return Seq(tuple(st(y) for y in x.stmts))
        if isinstance(x, Store) and x.buf == old:
            return Store(new, x.index, x.value)
        if isinstance(x, Alloc) and x.buffer.name == old:
            return Alloc(replace(x.buffer, name=new), x.scope)
        if isinstance(x, (For, If)):
            return replace(x, body=st(x.body))
        return x

    return st(s)


def strip_annotations(p: LoopProgram) -> LoopProgram:
    def st(x):
        if isinstance(x, Seq):
            return Seq(tuple(st(y) for y in x.stmts))
        if isinstance(x, For):
            return replace(x, ann=SERIAL, body=st(x.body))
        if isinstance(x, If):
            return replace(x, body=st(x.body))
        return x

    return replace(p, body=st(p.body))


def loop_vars(s) -> set[str]:
    return {x.var for x in walk(s) if isinstance(x, For)}


def free_index_vars(e) -> set[str]:
    return {x.name for x in iter_expr(e) if isinstance(x, Var)}


def expr_dtype(e, buffers: Mapping[str, Buffer]) -> DType | None:
    """Element type of a value expression (None for index expressions)."""
    if isinstance(e, Const):
        return e.dtype
    if isinstance(e, Var):
        return None
    if isinstance(e, Load):
        return buffers[e.buf].dtype
    if isinstance(e, Cast):
        return e.to
    if isinstance(e, (Bin, Un, Fma)):
        return expr_dtype(e.a, buffers)
    return None
