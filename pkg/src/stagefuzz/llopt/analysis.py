"""Dependence analysis and renaming helpers for loop transformations.

The dependence test is syntactic and conservative: it only proves
independence from affine subscripts that match in every variable except
the loop's own, and reports a dependence whenever it cannot.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..loopir.ir import (Alloc, For, If, Load, LoopProgram, Seq, Store, Var, affine, iter_expr,
                         rename_buffer, stmt_exprs, subst, walk)


@dataclass(frozen=True)
class Access:
    buf: str
    index: tuple
    write: bool
    inner: frozenset  # loop variables bound between the loop and the access


def accesses(stmt, inner: frozenset = frozenset()) -> list[Access]:
    out: list[Access] = []
    if isinstance(stmt, Seq):
        for s in stmt.stmts:
            out += accesses(s, inner)
        return out
    if isinstance(stmt, For):
        for e in (stmt.lo, stmt.hi):
            out += _loads(e, inner)
        return out + accesses(stmt.body, inner | {stmt.var})
    if isinstance(stmt, If):
        for c in stmt.cond:
            out += _loads(c, inner)
        return out + accesses(stmt.body, inner)
    if isinstance(stmt, Store):
        for e in stmt.index + (stmt.value,):
            out += _loads(e, inner)
        out.append(Access(stmt.buf, stmt.index, True, inner))
    return out


def _loads(e, inner) -> list[Access]:
    return [Access(x.buf, x.index, False, inner) for x in iter_expr(e) if isinstance(x, Load)]


def private_buffers(stmt) -> set[str]:
    return {s.buffer.name for s in walk(stmt) if isinstance(s, Alloc)}


def _independent(w: Access, a: Access, var: str, trip: int | None) -> bool:
    """True when ``w`` and ``a`` provably never meet in different iterations."""
    if len(w.index) != len(a.index):
        return False
    inner = w.inner | a.inner
    for ew, ea in zip(w.index, a.index):
        fw, fa = affine(ew), affine(ea)
        if fw is None or fa is None:
            return False
        if any(v in inner for v in list(fw) + list(fa)):
            continue
        others = (set(fw) | set(fa)) - {var, 1}
        if any(fw.get(v, 0) != fa.get(v, 0) for v in others):
            continue
        cw, ca = fw.get(var, 0), fa.get(var, 0)
        kw, ka = fw.get(1, 0), fa.get(1, 0)
        if cw != ca:
            continue
        if cw == 0:
            if kw != ka:
                return True
            continue
        if (ka - kw) % cw:
            return True
        dist = (ka - kw) // cw
        if dist == 0 or (trip is not None and abs(dist) >= trip):
            return True
    return False


def carries_dependence(loop: For) -> bool:
    """Conservatively decide whether ``loop`` has a loop-carried dependence."""
    acc = accesses(loop.body)
    private = private_buffers(loop.body)
    trip = loop.trip
    for w in acc:
        if not w.write or w.buf in private:
            continue
        for a in acc:
            if a.buf == w.buf and not _independent(w, a, loop.var, trip):
                return True
    return False


def reads_written(stmt) -> set[str]:
    return {a.buf for a in accesses(stmt) if a.write}


class Namer:
    """Fresh buffer and loop-variable names for one program."""

    def __init__(self, p: LoopProgram):
        self.used = set(p.buffers())
        self.used |= {s.var for s in walk(p.body) if isinstance(s, For)}

    def fresh(self, base: str) -> str:
        k = 0
        while f"{base}_{k}" in self.used:
            k += 1
        name = f"{base}_{k}"
        self.used.add(name)
        return name

    def clone(self, stmt):
        """Copy ``stmt`` giving every buffer allocated inside a fresh name."""
        for name in sorted(private_buffers(stmt)):
            stmt = rename_buffer(stmt, name, self.fresh(name.split("_")[0] or name))
        return stmt


def instantiate(body: Seq, var: str, value, namer: Namer | None) -> Seq:
    """``body`` with ``var`` replaced by ``value``; allocs renamed if ``namer``."""
    out = subst(body, {var: value})
    return namer.clone(out) if namer is not None else out


def uses_var(stmt, var: str) -> bool:
    if isinstance(stmt, Seq):
        return any(uses_var(s, var) for s in stmt.stmts)
    for e in stmt_exprs(stmt):
        if any(isinstance(x, Var) and x.name == var for x in iter_expr(e)):
            return True
    if isinstance(stmt, (For, If)):
        return uses_var(stmt.body, var)
    return False


__all__ = ["Access", "Namer", "accesses", "carries_dependence", "instantiate",
           "private_buffers", "reads_written", "uses_var"]
