"""Mutation rules: a guard over loops plus a semantics-preserving action.

Guards are conjunctions joined by ``and``::

    innermost | outermost | serial | straight-line | dependence-free |
    perfect-nest | no-cache-fill | invariant-load | f32-store |
    trip % K == 0 | trip % K != 0 | trip >= N

Actions are steps joined by ``then``::

    attach parallel | attach vectorize(L) | attach unroll(F) |
    attach pipelined(D) | insert-cache | split(K) | swap | introduce-muladd
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from ..errors import MutationInapplicable, RuleRejected, StageFuzzError
from ..graph.types import DType, TensorType, random_tensor
from ..llopt import LLPassId
from ..llopt.analysis import Namer, carries_dependence, private_buffers, reads_written
from ..loopir import (SERIAL, Alloc, Ann, Bin, Buffer, Const, For, Load, LoopProgram, Seq,
                      Store, Var, interpret_loop, validate_loop, walk)
from ..loopir.ir import (add, free_index_vars, iter_expr, map_stmt_exprs, mul, replace_at,
                         subst)

log = logging.getLogger(__name__)

PROBES = 3


@dataclass(frozen=True)
class MutationRule:
    id: str
    target: LLPassId
    guard: str
    action: str
    provenance: str = "builtin"  # doc file and rule entry

    def __post_init__(self):
        parse_guard(self.guard)
        parse_action(self.action)


# ---------------------------------------------------------------- guards

Site = tuple  # (path, loop, depth)
Pred = Callable[[For, int], bool]


def _innermost(loop: For, depth: int) -> bool:
    return not any(isinstance(s, For) for s in walk(loop.body))


def _hoistable(loop: For) -> list[Load]:
    """Loads that depend only on the loop variable and read unwritten buffers."""
    written = reads_written(loop.body) | private_buffers(loop.body)
    seen: list[Load] = []
    for s in walk(loop.body):
        if not isinstance(s, Store):
            continue
        for e in (s.value, *s.index):
            for x in iter_expr(e):
                if (isinstance(x, Load) and x.buf not in written and x not in seen
                        and all(free_index_vars(i) <= {loop.var} for i in x.index)):
                    seen.append(x)
    return seen


def _f32_stores(loop: For, buffers) -> list[Store]:
    return [s for s in walk(loop.body)
            if isinstance(s, Store) and buffers[s.buf].dtype is DType.F32]


_ATOMS: dict[str, Pred] = {
    "innermost": _innermost,
    "outermost": lambda loop, depth: depth == 0,
    "serial": lambda loop, depth: loop.ann == SERIAL,
    "straight-line": lambda loop, depth: all(isinstance(s, Store) for s in loop.body.stmts),
    "dependence-free": lambda loop, depth: not carries_dependence(loop),
    "perfect-nest": lambda loop, depth: (len(loop.body.stmts) == 1
                                         and isinstance(loop.body.stmts[0], For)),
    "no-cache-fill": lambda loop, depth: not any(
        isinstance(s, Alloc) and s.scope == "cache" for s in loop.body.stmts),
    "invariant-load": lambda loop, depth: bool(_hoistable(loop)),
}
_TRIP = re.compile(r"^trip\s*(%\s*(\d+)\s*(==|!=)\s*0|>=\s*(\d+))$")


def _atom(text: str) -> Pred | str:
    text = text.strip()
    if text in _ATOMS:
        return _ATOMS[text]
    if text == "f32-store":
        return text  # needs the buffer table; resolved at match time
    m = _TRIP.match(text)
    if not m:
        raise ValueError(f"unknown guard atom {text!r}")
    if m.group(4):
        n = int(m.group(4))
        return lambda loop, depth: loop.trip is not None and loop.trip >= n
    k, eq = int(m.group(2)), m.group(3) == "=="
    if k <= 0:
        raise ValueError("trip modulus must be positive")
    return lambda loop, depth: loop.trip is not None and (loop.trip % k == 0) == eq


def parse_guard(text: str) -> list:
    parts = [p for p in re.split(r"\s+and\s+", text.strip()) if p]
    if not parts:
        raise ValueError("empty guard")
    return [_atom(p) for p in parts]


def _loops(stmt, path=(), depth=0):
    inner = depth + isinstance(stmt, For)
    if isinstance(stmt, For):
        yield path, stmt, depth
    body = stmt if isinstance(stmt, Seq) else getattr(stmt, "body", None)
    if isinstance(body, Seq):
        for i, s in enumerate(body.stmts):
            yield from _loops(s, path + (i,), inner)


def matching_sites(p: LoopProgram, rule: MutationRule) -> list[Site]:
    preds = parse_guard(rule.guard)
    buffers = p.buffers()
    out = []
    for path, loop, depth in _loops(p.body):
        if all(_f32_stores(loop, buffers) if pr == "f32-store" else pr(loop, depth)
               for pr in preds):
            out.append((path, loop, depth))
    return out


# ---------------------------------------------------------------- actions

_ATTACH = re.compile(r"^attach\s+(parallel|vectorize|unroll|pipelined)(?:\((\d+)\))?$")
_SPLIT = re.compile(r"^split\((\d+)\)$")


def parse_action(text: str) -> list[tuple]:
    steps = []
    for part in re.split(r"\s+then\s+", text.strip()):
        part = part.strip()
        m = _ATTACH.match(part)
        if m:
            ann = Ann(m.group(1), int(m.group(2)) if m.group(2) else None)
            if not ann.legal:
                raise ValueError(f"illegal annotation in action {part!r}")
            steps.append(("attach", ann))
            continue
        m = _SPLIT.match(part)
        if m:
            if int(m.group(1)) < 2:
                raise ValueError("split factor must be at least 2")
            steps.append(("split", int(m.group(1))))
            continue
        if part in ("insert-cache", "swap", "introduce-muladd"):
            steps.append((part, None))
            continue
        raise ValueError(f"unknown action {part!r}")
    return steps


def _insert_cache(p: LoopProgram, loop: For, rng, namer: Namer) -> For:
    loads = _hoistable(loop)
    if not loads:
        raise MutationInapplicable("no loop-invariant load to cache")
    target = loads[int(rng.integers(len(loads)))]
    dtype = p.buffers()[target.buf].dtype
    name = namer.fresh(f"{target.buf}c")
    slot = Load(name, (Const(0),))
    body = map_stmt_exprs(loop.body, lambda e: slot if e == target else e)
    fill = Store(name, (Const(0),), target)
    return replace(loop, body=Seq((Alloc(Buffer(name, dtype, (1,)), "cache"), fill,
                                   *body.stmts)))


def _split(loop: For, k: int, namer: Namer) -> For:
    trip = loop.trip
    if trip is None or trip % k or trip < k:
        raise MutationInapplicable(f"trip {trip} not divisible by {k}")
    vo, vi = namer.fresh(f"{loop.var}s"), namer.fresh(f"{loop.var}t")
    pos = add(add(loop.lo, mul(Var(vo), k)), Var(vi))
    inner = For(vi, Const(0), Const(k), SERIAL, subst(loop.body, {loop.var: pos}))
    return For(vo, Const(0), Const(trip // k), loop.ann, Seq((inner,)))


def _swap(loop: For) -> For:
    if len(loop.body.stmts) != 1 or not isinstance(loop.body.stmts[0], For):
        raise MutationInapplicable("not a perfect nest")
    inner = loop.body.stmts[0]
    if loop.var in free_index_vars(inner.lo) | free_index_vars(inner.hi):
        raise MutationInapplicable("inner bounds depend on the outer variable")
    return For(inner.var, inner.lo, inner.hi, inner.ann,
               Seq((For(loop.var, loop.lo, loop.hi, loop.ann, inner.body),)))


def _muladd(p: LoopProgram, loop: For, rng) -> For:
    stores = _f32_stores(loop, p.buffers())
    if not stores:
        raise MutationInapplicable("no F32 store")
    pick = stores[int(rng.integers(len(stores)))]
    one, zero = Const(1.0, DType.F32), Const(0.0, DType.F32)
    new = replace(pick, value=Bin("+", Bin("*", pick.value, one), zero))
    return _replace_stmt(loop, pick, new)


def _replace_stmt(loop: For, old: Store, new: Store) -> For:
    done = [False]

    def rec(s):
        if done[0]:
            return s
        if s is old:
            done[0] = True
            return new
        if isinstance(s, Seq):
            return Seq(tuple(rec(x) for x in s.stmts))
        if hasattr(s, "body"):
            return replace(s, body=rec(s.body))
        return s

    return rec(loop)


def _apply(p: LoopProgram, site: Site, steps, rng) -> LoopProgram:
    path, loop, _ = site
    namer = Namer(p)
    new: For = loop
    for kind, arg in steps:
        if kind == "attach":
            new = replace(new, ann=arg)
        elif kind == "insert-cache":
            new = _insert_cache(p, new, rng, namer)
        elif kind == "split":
            new = _split(new, arg, namer)
        elif kind == "swap":
            new = _swap(new)
        else:
            new = _muladd(p, new, rng)
    return p.with_body(replace_at(p.body, path, new))


# ---------------------------------------------------------------- probing

def probe_inputs(p: LoopProgram, rng: np.random.Generator, n: int = PROBES) -> list[dict]:
    return [{b.name: random_tensor(TensorType(b.dtype, b.extents), rng) for b in p.inputs}
            for _ in range(n)]


def _same(a, b) -> bool:
    if a.ttype != b.ttype:
        return False
    x, y = a.data.reshape(-1), b.data.reshape(-1)
    if a.ttype.dtype is DType.F32:
        return bool(np.array_equal(x, y, equal_nan=True))
    return bool(np.array_equal(x, y))


def probe_equivalent(p: LoopProgram, q: LoopProgram, probes: list[dict]) -> bool:
    """Exact agreement of every output on every probe input at level 0.

    Runtime faults count as agreement only when both programs fault alike.
    """
    if [b.name for b in p.outputs] != [b.name for b in q.outputs]:
        return False
    for x in probes:
        outs = []
        for prog in (p, q):
            try:
                outs.append(interpret_loop(prog, x))
            except StageFuzzError as exc:
                outs.append(type(exc).__name__)
        a, b = outs
        if isinstance(a, str) or isinstance(b, str):
            if a != b:
                return False
            continue
        if not all(_same(a[k], b[k]) for k in a):
            return False
    return True


def mutate(p: LoopProgram, rule: MutationRule, rng: np.random.Generator,
           probes: list[dict] | None = None) -> LoopProgram:
    """Apply ``rule`` at a random matching site.

    The result validates and agrees exactly with ``p`` on the probe inputs
    (three random ones unless given); otherwise MutationInapplicable.
    """
    sites = matching_sites(p, rule)
    if not sites:
        raise MutationInapplicable(f"{rule.id}: guard matches no loop")
    site = sites[int(rng.integers(len(sites)))]
    q = _apply(p, site, parse_action(rule.action), rng)
    problems = validate_loop(q)
    if problems:
        raise MutationInapplicable(f"{rule.id}: result invalid: {problems[0]}")
    if probes is None:
        probes = probe_inputs(p, rng)
    if not probe_equivalent(p, q, probes):
        log.info("%s (%s) changed semantics; mutation dropped", rule.id, rule.provenance)
        raise MutationInapplicable(f"{rule.id}: not probe-equivalent")
    return q


def check_rule(rule: MutationRule, sample: LoopProgram, rng: np.random.Generator) -> None:
    """Admission probe for externally proposed rules: the rule must apply
    somewhere on ``sample`` and preserve its semantics on three inputs."""
    sites = matching_sites(sample, rule)
    if not sites:
        raise RuleRejected(f"{rule.id} ({rule.provenance}): guard matches nothing on probe seed")
    probes = probe_inputs(sample, rng)
    applied = 0
    for site in sites:
        try:
            q = _apply(sample, site, parse_action(rule.action), rng)
        except MutationInapplicable:
            continue
        applied += 1
        if validate_loop(q) or not probe_equivalent(sample, q, probes):
            raise RuleRejected(f"{rule.id} ({rule.provenance}): semantic-preservation probe "
                               "failed")
    if not applied:
        raise RuleRejected(f"{rule.id} ({rule.provenance}): action applies nowhere on probe seed")


__all__ = ["MutationRule", "check_rule", "matching_sites", "mutate", "parse_action",
           "parse_guard", "probe_equivalent", "probe_inputs"]
