"""Static well-formedness checks for loop programs."""

from __future__ import annotations

from dataclasses import dataclass

from ..graph.types import DType
from .ir import (SCOPES, Alloc, Bin, Cast, Cmp, Const, Fma, For, If, Load, LoopProgram, Seq,
                 Store, Un, Var, affine, expr_dtype, free_index_vars, walk)


@dataclass(frozen=True)
class LoopViolation:
    code: str
    detail: str

    def __str__(self):
        return f"{self.code}: {self.detail}"


class _Checker:
    def __init__(self, p: LoopProgram):
        self.p = p
        self.out: list[LoopViolation] = []
        self.decl = {b.name: b for b in p.inputs + p.outputs}
        self.inputs = {b.name for b in p.inputs}
        self.all_buffers = p.buffers()

    def bad(self, code: str, detail: str) -> None:
        self.out.append(LoopViolation(code, detail))

    def index(self, e, scope: set[str], what: str) -> None:
        if affine(e) is None:
            self.bad("NonAffine", f"{what}: index expression is not affine")
            return
        for v in free_index_vars(e):
            if v not in scope:
                self.bad("UndeclaredVar", f"{what}: variable {v!r} is not in scope")

    def access(self, buf: str, index: tuple, scope, what: str) -> None:
        b = self.decl.get(buf)
        if b is None:
            self.bad("UndeclaredBuffer", f"{what}: buffer {buf!r} is not declared")
            return
        if len(index) != len(b.extents) and len(index) != 1:
            self.bad("IndexArity", f"{what}: {len(index)} indices for rank {len(b.extents)}")
        for i in index:
            self.index(i, scope, what)

    def value(self, e, scope, what: str) -> DType | None:
        """Check a value expression and return its element type."""
        if isinstance(e, Const):
            if e.dtype is None:
                self.bad("TypeMismatch", f"{what}: untyped constant in value position")
            return e.dtype
        if isinstance(e, Var):
            self.bad("TypeMismatch", f"{what}: loop variable {e.name!r} used as a value")
            return None
        if isinstance(e, Load):
            self.access(e.buf, e.index, scope, what)
            b = self.decl.get(e.buf)
            return b.dtype if b else None
        if isinstance(e, Bin):
            a, b = self.value(e.a, scope, what), self.value(e.b, scope, what)
            if a is not None and b is not None:
                if a is not b:
                    self.bad("TypeMismatch", f"{what}: {e.op} mixes {a.value} and {b.value}")
                elif not a.is_numeric:
                    self.bad("TypeMismatch", f"{what}: {e.op} on {a.value}")
            return a
        if isinstance(e, Un):
            a = self.value(e.a, scope, what)
            if a is not None and (e.op == "sigmoid" and a is not DType.F32 or not a.is_numeric):
                self.bad("TypeMismatch", f"{what}: {e.op} on {a.value}")
            return a
        if isinstance(e, Cast):
            self.value(e.a, scope, what)
            return e.to
        if isinstance(e, Fma):
            ts = [self.value(x, scope, what) for x in (e.a, e.b, e.c)]
            if any(t is not None and t is not DType.F32 for t in ts):
                self.bad("TypeMismatch", f"{what}: fma needs F32 operands")
            return DType.F32
        self.bad("TypeMismatch", f"{what}: {type(e).__name__} is not a value expression")
        return None

    def stmts(self, seq: Seq, scope: set[str]) -> None:
        for s in seq.stmts:
            self.stmt(s, scope)

    def stmt(self, s, scope: set[str]) -> None:
        if isinstance(s, Seq):
            self.stmts(s, scope)
        elif isinstance(s, For):
            what = f"loop {s.var}"
            self.index(s.lo, scope, what)
            self.index(s.hi, scope, what)
            if s.var in scope:
                self.bad("ShadowedVar", f"{what}: variable already bound")
            if not s.ann.legal:
                self.bad("Annotation", f"{what}: illegal annotation {s.ann}")
            self.stmts(s.body, scope | {s.var})
        elif isinstance(s, If):
            for c in s.cond:
                if not isinstance(c, Cmp):
                    self.bad("TypeMismatch", "guard condition is not a comparison")
                    continue
                self.index(c.a, scope, "guard")
                self.index(c.b, scope, "guard")
            self.stmts(s.body, scope)
        elif isinstance(s, Alloc):
            b = s.buffer
            if b.name in self.decl:
                self.bad("DuplicateBuffer", f"buffer {b.name!r} declared twice")
            if any(e < 1 for e in b.extents):
                self.bad("BadExtent", f"buffer {b.name!r} has extent < 1")
            if s.scope not in SCOPES:
                self.bad("Scope", f"buffer {b.name!r} has unknown scope {s.scope!r}")
            self.decl[b.name] = b
        elif isinstance(s, Store):
            what = f"store to {s.buf}"
            self.access(s.buf, s.index, scope, what)
            if s.buf in self.inputs:
                self.bad("StoreToInput", f"{what}: input buffers are read-only")
            vt = self.value(s.value, scope, what)
            b = self.decl.get(s.buf)
            if b is not None and vt is not None and vt is not b.dtype:
                self.bad("TypeMismatch", f"{what}: stores {vt.value} into {b.dtype.value}")
        else:
            self.bad("Statement", f"unknown statement {type(s).__name__}")

    def run(self) -> list[LoopViolation]:
        names = [b.name for b in self.p.inputs + self.p.outputs]
        for n in {n for n in names if names.count(n) > 1}:
            self.bad("DuplicateBuffer", f"buffer {n!r} declared twice")
        for b in self.p.inputs + self.p.outputs:
            if any(e < 1 for e in b.extents):
                self.bad("BadExtent", f"buffer {b.name!r} has extent < 1")
        self.stmts(self.p.body, set())
        stored = {s.buf for s in walk(self.p.body) if isinstance(s, Store)}
        for b in self.p.outputs:
            if b.name not in stored:
                self.bad("OutputNotWritten", f"output {b.name!r} is never stored")
        unknown = set(self.p.intrinsics_used) - {"fma"}
        if unknown:
            self.bad("Intrinsic", f"unknown intrinsics {sorted(unknown)}")
        return self.out


def validate_loop(p: LoopProgram) -> list[LoopViolation]:
    """Return every violation found; an empty list means well-formed."""
    return _Checker(p).run()


__all__ = ["LoopViolation", "validate_loop", "expr_dtype"]
