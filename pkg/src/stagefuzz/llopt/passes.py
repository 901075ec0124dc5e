"""The six hardware-oriented loop passes.

Each pass gathers candidate loops in the incoming program, then rewrites
them deepest-last-first so that the recorded paths stay valid for the
pre-pass program.
"""

from __future__ import annotations

from dataclasses import replace

from .. import bugs
from ..graph.types import DType
from ..loopir.ir import (SERIAL, Alloc, Ann, Bin, Buffer, Const, Fma, For, Load, Seq, Store, Var,
                         add, expr_dtype, get_at, iter_expr, map_expr, map_stmt_exprs, mul,
                         replace_at, subst, walk, walk_paths)
from .analysis import Namer, carries_dependence, instantiate, private_buffers, reads_written
from .core import LLPassId, PassContext, register

TILE = 8
TILE_MIN_TRIP = 16


def _loops(stmt, path=(), depth=0):
    """Yield ``(path, loop, enclosing_loop_count)`` in pre-order."""
    body = stmt if isinstance(stmt, Seq) else getattr(stmt, "body", None)
    inner = depth + isinstance(stmt, For)
    if isinstance(stmt, For):
        yield path, stmt, depth
    if isinstance(body, Seq):
        for i, s in enumerate(body.stmts):
            yield from _loops(s, path + (i,), inner)


def _rewrite(ctx: PassContext, paths, fn):
    body = ctx.program.body
    for path in sorted(paths, reverse=True):
        new = fn(get_at(body, path), path)
        if new is not None:
            body = replace_at(body, path, new)
    return body


def _contains_loop(loop: For) -> bool:
    return any(isinstance(s, For) for s in walk(loop.body))


# --------------------------------------------------------------------------


@register(LLPassId.TileLoops)
def tile_loops(ctx: PassContext):
    namer = Namer(ctx.program)
    cands = []
    for path, loop, depth in _loops(ctx.program.body):
        trip = loop.trip
        if loop.ann.kind not in ("serial", "parallel") or trip is None or trip < TILE_MIN_TRIP:
            continue
        if loop.ann.kind == "parallel" or (depth == 0 and _contains_loop(loop)):
            cands.append(path)

    def tile(loop: For, path):
        trip, n = loop.trip, loop.trip // TILE
        vo, vi = namer.fresh(f"{loop.var}o"), namer.fresh(f"{loop.var}i")
        pos = add(add(loop.lo, mul(Var(vo), TILE)), Var(vi))
        inner = For(vi, Const(0), Const(TILE), SERIAL, subst(loop.body, {loop.var: pos}))
        out = [For(vo, Const(0), Const(n), loop.ann, Seq((inner,)))]
        ctx.trace("tile.split", path)
        if trip % TILE:
            if bugs.enabled("B2"):
                bugs.hit("B2")
            else:
                out.append(For(loop.var, add(loop.lo, n * TILE), loop.hi, loop.ann,
                               namer.clone(loop.body)))
                ctx.trace("tile.remainder", path)
        return Seq(tuple(out))

    return ctx.program.with_body(_rewrite(ctx, cands, tile))


def _prefers_swap(outer: For, inner: For) -> bool:
    """Locality heuristic: the outer variable indexes the innermost store dimension."""
    private = private_buffers(inner.body)
    stores = [s for s in walk(inner.body) if isinstance(s, Store) and s.buf not in private]
    if not stores:
        return False
    for s in stores:
        if not s.index:
            return False
        last = s.index[-1]
        names = {x.name for x in iter_expr(last) if isinstance(x, Var)}
        if outer.var not in names or inner.var in names:
            return False
    return True


@register(LLPassId.ReorderLoops)
def reorder_loops(ctx: PassContext):
    cands = [path for path, loop, _ in _loops(ctx.program.body)
             if len(loop.body) == 1 and isinstance(loop.body.stmts[0], For)]

    def swap(outer: For, path):
        if len(outer.body) != 1 or not isinstance(outer.body.stmts[0], For):
            return None
        inner = outer.body.stmts[0]
        if not _prefers_swap(outer, inner):
            return None
        legal = (not any(outer.var == x.name for e in (inner.lo, inner.hi)
                         for x in iter_expr(e) if isinstance(x, Var))
                 and not carries_dependence(outer) and not carries_dependence(inner))
        if not legal:
            ctx.trace("reorder.interchange", path, fired=False)
            return None
        ctx.trace("reorder.interchange", path)
        return For(inner.var, inner.lo, inner.hi, inner.ann,
                   Seq((For(outer.var, outer.lo, outer.hi, outer.ann, inner.body),)))

    return ctx.program.with_body(_rewrite(ctx, cands, swap))


@register(LLPassId.VectorizeLegalize)
def vectorize_legalize(ctx: PassContext):
    namer = Namer(ctx.program)
    buffers = ctx.program.buffers()
    cands = [path for path, loop, _ in _loops(ctx.program.body) if loop.ann.kind == "vectorize"]

    def legalize(loop: For, path):
        lanes, trip = loop.ann.param, loop.trip
        straight = all(isinstance(s, Store) for s in loop.body.stmts)
        if trip is None or trip % lanes or not straight:
            ctx.trace("vec.demote", path)
            return replace(loop, ann=SERIAL)
        if carries_dependence(loop):
            if not bugs.enabled("B3"):
                ctx.trace("vec.demote", path)
                return replace(loop, ann=SERIAL)
            bugs.hit("B3")
        ctx.trace("vec.legal", path)
        return _materialize(loop, lanes, trip, namer, buffers)

    return ctx.program.with_body(_rewrite(ctx, cands, legalize))


def _materialize(loop: For, lanes: int, trip: int, namer: Namer, buffers) -> For:
    """SIMD form: every statement computes all lanes, then stores them."""
    vo, lane = namer.fresh(f"{loop.var}v"), namer.fresh("lane")
    pos = add(add(loop.lo, mul(Var(vo), lanes)), Var(lane))
    ann = Ann("vectorize", lanes)
    stmts = []
    for st in loop.body.stmts:
        vt = namer.fresh("vt")
        lane_idx = (Var(lane),)
        stmts.append(Alloc(Buffer(vt, buffers[st.buf].dtype, (lanes,)), "local"))
        stmts.append(For(lane, Const(0), Const(lanes), ann,
                         Seq((Store(vt, lane_idx, subst(st.value, {loop.var: pos})),))))
        index = tuple(subst(i, {loop.var: pos}) for i in st.index)
        stmts.append(For(lane, Const(0), Const(lanes), ann,
                         Seq((Store(st.buf, index, Load(vt, lane_idx)),))))
    return For(vo, Const(0), Const(trip // lanes), SERIAL, Seq(tuple(stmts)))


@register(LLPassId.UnrollExpand)
def unroll_expand(ctx: PassContext):
    namer = Namer(ctx.program)
    cands = [path for path, loop, _ in _loops(ctx.program.body) if loop.ann.kind == "unroll"]

    def unroll(loop: For, path):
        factor, trip = loop.ann.param, loop.trip
        if trip is None:
            ctx.trace("unroll.demote", path)
            return replace(loop, ann=SERIAL)
        n = trip // factor
        out = []
        if n:
            vo = namer.fresh(f"{loop.var}u")
            base = add(loop.lo, mul(Var(vo), factor))
            copies = [instantiate(loop.body, loop.var, add(base, j), namer if j else None)
                      for j in range(factor)]
            out.append(For(vo, Const(0), Const(n), SERIAL, Seq(tuple(copies))))
        ctx.trace("unroll.expand", path)
        if trip % factor:
            start = n * factor
            if bugs.enabled("B1"):
                bugs.hit("B1")
                start += 1
            body = namer.clone(loop.body) if n else loop.body
            out.append(For(loop.var, add(loop.lo, start), loop.hi, SERIAL, body))
            ctx.trace("unroll.remainder", path)
        return Seq(tuple(out))

    return ctx.program.with_body(_rewrite(ctx, cands, unroll))


def _retarget(stmt, buf: str, slot: int):
    """Point every ``buf[0]`` load in ``stmt`` at ``buf[slot]``."""
    def fn(e):
        if isinstance(e, Load) and e.buf == buf:
            return Load(buf, (Const(slot),))
        return e
    return map_stmt_exprs(stmt, fn)


def _cache_pattern(loop: For):
    """Return ``(alloc, fetch_expr)`` when the loop starts with a cache fill."""
    stmts = loop.body.stmts
    if len(stmts) < 2 or not isinstance(stmts[0], Alloc) or stmts[0].scope != "cache":
        return None
    alloc = stmts[0]
    name = alloc.buffer.name
    fill = stmts[1]
    if alloc.buffer.extents != (1,) or not (isinstance(fill, Store) and fill.buf == name
                                            and fill.index == (Const(0),)):
        return alloc, None
    rest = Seq(stmts[2:])
    if any(isinstance(s, Store) and s.buf == name for s in walk(rest)):
        return alloc, None
    loads = [x for s in walk(rest) if isinstance(s, Store) for e in (s.value, *s.index)
             for x in iter_expr(e) if isinstance(x, Load) and x.buf == name]
    if any(x.index != (Const(0),) for x in loads):
        return alloc, None
    read = {x.buf for x in iter_expr(fill.value) if isinstance(x, Load)}
    if read & (reads_written(loop.body) | {name}):
        return alloc, None
    return alloc, fill.value


@register(LLPassId.MemLatencyHide)
def mem_latency_hide(ctx: PassContext):
    namer = Namer(ctx.program)
    cands = [path for path, loop, _ in _loops(ctx.program.body) if loop.ann.kind == "pipelined"]

    def pipeline(loop: For, path):
        depth, trip = loop.ann.param, loop.trip
        found = _cache_pattern(loop)
        if found is None:
            ctx.trace("mlh.no_cache", path)
            return replace(loop, ann=SERIAL)
        alloc, fetch_expr = found
        if fetch_expr is None or trip is None or trip < depth:
            ctx.trace("mlh.demote", path)
            return replace(loop, ann=SERIAL)
        name = alloc.buffer.name
        rest = Seq(loop.body.stmts[2:])
        first = [True]

        def fetch(it, slot):
            return Store(name, (Const(slot),), subst(fetch_expr, {loop.var: it}))

        def compute(it, slot):
            body = instantiate(rest, loop.var, it, None if first[0] else namer)
            first[0] = False
            return _retarget(body, name, slot)

        out = [Alloc(replace(alloc.buffer, extents=(depth,)), "cache")]
        out += [fetch(add(loop.lo, s), s) for s in range(depth - 1)]
        blocks = (trip - 2 * depth + 1) // depth + 1 if trip >= 2 * depth - 1 else 0
        if blocks:
            vo = namer.fresh(f"{loop.var}p")
            base = add(loop.lo, mul(Var(vo), depth))
            steady = []
            for s in range(depth):
                steady.append(fetch(add(base, s + depth - 1), (s + depth - 1) % depth))
                steady.append(compute(add(base, s), s))
            out.append(For(vo, Const(0), Const(blocks), SERIAL, Seq(tuple(steady))))
        for rel in range(blocks * depth, trip):
            if rel + depth - 1 < trip:
                out.append(fetch(add(loop.lo, rel + depth - 1), (rel + depth - 1) % depth))
            out.append(compute(add(loop.lo, rel), rel % depth))
        ctx.trace("mlh.double_buffer", path)
        return Seq(tuple(out))

    return ctx.program.with_body(_rewrite(ctx, cands, pipeline))


@register(LLPassId.IntrinsicMap)
def intrinsic_map(ctx: PassContext):
    p = ctx.program
    buffers = p.buffers()

    def f32(e) -> bool:
        return expr_dtype(e, buffers) is DType.F32

    def fn(e):
        if isinstance(e, Bin) and e.op == "+" and f32(e):
            if isinstance(e.a, Bin) and e.a.op == "*":
                return Fma(e.a.a, e.a.b, e.b)
            if isinstance(e.b, Bin) and e.b.op == "*":
                return Fma(e.b.a, e.b.b, e.a)
        if bugs.enabled("B4") and isinstance(e, Bin) and e.op == "*" and f32(e):
            for x, y in ((e.a, e.b), (e.b, e.a)):
                if isinstance(y, Bin) and y.op == "+":
                    bugs.hit("B4")
                    return Fma(x, y.a, y.b)
        return e

    body = p.body
    hits = []
    for path, s in walk_paths(p.body):
        if isinstance(s, Store):
            value = map_expr(s.value, fn)
            if value != s.value:
                hits.append((path, replace(s, value=value)))
                ctx.trace("intrin.fma", path)
    for path, new in reversed(hits):
        body = replace_at(body, path, new)
    if not hits:
        return p
    return p.with_body(body, intrinsics_used=p.intrinsics_used | {"fma"})

