"""Catalog-guided loop-IR seeds for the low-level stage."""

from __future__ import annotations

import hashlib
import logging
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import StageFuzzError
from ..graph.types import DType
from ..loopir import LoopProgram, load_loop, parse_loop, serialize_loop, validate_loop
from .catalog import CatalogEntry, ConstraintCatalog

log = logging.getLogger(__name__)

_LIT = {"F32": "f32", "I32": "i32", "I8": "i8"}


def _draw(rng, lo_hi) -> int:
    lo, hi = lo_hi
    return int(rng.integers(int(lo), int(hi) + 1))


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _lit(dtype: str, v) -> str:
    return f"{_LIT[dtype]}({float(v) if dtype == 'F32' else int(v)})"


class _Hints:
    """Random loop annotations drawn from the catalog's compatibility matrix."""

    def __init__(self, entry: CatalogEntry, rng, rate: float = 0.25):
        self.c, self.rng, self.rate = entry.constraints, rng, rate

    def __call__(self, where: str) -> str:
        kinds = self.c["annotations"].get(where) or []
        if not kinds or self.rng.random() >= self.rate:
            return ""
        kind = _pick(self.rng, kinds)
        if kind == "vectorize":
            return f" @vectorize({_pick(self.rng, self.c['lanes'])})"
        if kind == "unroll":
            return f" @unroll({_pick(self.rng, self.c['unroll'])})"
        return f" @{kind}"


def _elementwise(entry, rng, hint, name):
    c = entry.constraints
    dt = _pick(rng, c["dtypes"])
    n = _draw(rng, c["extents"]["n"])
    rows = _draw(rng, c["extents"]["rows"])
    shape = f"[{rows},{n}]" if rows > 1 else f"[{n}]"
    ix = "i, j" if rows > 1 else "j"
    x, y, z = (f"{b}[{ix}]" for b in "xyz")
    k = _lit(dt, _pick(rng, [2, 3, -1]) if dt != "F32" else _pick(rng, [0.5, 1.5, -2.0]))
    forms = [f"({x} + {y})", f"({x} * {y})", f"max({x}, {y})", f"({x} * ({y} + {z}))",
             f"(({x} * {y}) + {z})", f"(({x} - {y}) * {k})"]
    if dt == "F32":
        forms += [f"(sigmoid({x}) - {y})", f"(neg({x}) + ({y} * {z}))"]
    expr = _pick(rng, forms)
    lines = [f"program {name}", f"input x: {dt}{shape}", f"input y: {dt}{shape}",
             f"input z: {dt}{shape}", f"output out: {dt}{shape}", "body:"]
    if rows > 1:
        lines += [f"  for i in 0..{rows}{hint('outer')}:",
                  f"    for j in 0..{n}{hint('inner')}:", f"      out[{ix}] = {expr}"]
    else:
        lines += [f"  for j in 0..{n}{hint('inner')}:", f"    out[{ix}] = {expr}"]
    return lines


def _reduction(entry, rng, hint, name):
    c = entry.constraints
    dt = _pick(rng, c["dtypes"])
    rows, n = _draw(rng, c["extents"]["rows"]), _draw(rng, c["extents"]["n"])
    op = _pick(rng, ["+", "max"])
    step = f"max(s[0], x[i, k])" if op == "max" else "(s[0] + x[i, k])"
    init = "x[i, 0]" if op == "max" else _lit(dt, 0)
    return [f"program {name}", f"input x: {dt}[{rows},{n}]", f"output out: {dt}[{rows}]",
            "body:", f"  for i in 0..{rows}{hint('outer')}:", f"    alloc s: {dt}[1] @local",
            f"    s[0] = {init}", f"    for k in 0..{n}{hint('inner')}:",
            f"      s[0] = {step}", "    out[i] = s[0]"]


def _matmul(entry, rng, hint, name):
    c = entry.constraints
    dt = _pick(rng, c["dtypes"])
    m, n, k = (_draw(rng, c["extents"][d]) for d in ("m", "n", "k"))
    return [f"program {name}", f"input a: {dt}[{m},{k}]", f"input b: {dt}[{k},{n}]",
            f"output c: {dt}[{m},{n}]", "body:",
            f"  for i in 0..{m}{hint('outer')}:", f"    for j in 0..{n}{hint('outer')}:",
            f"      alloc s: {dt}[1] @local", f"      s[0] = {_lit(dt, 0)}",
            f"      for k in 0..{k}{hint('inner')}:",
            "        s[0] = ((a[i, k] * b[k, j]) + s[0])", "      c[i, j] = s[0]"]


def _conv(entry, rng, hint, name):
    c = entry.constraints
    dt = _pick(rng, c["dtypes"])
    n, taps = _draw(rng, c["extents"]["n"]), _draw(rng, c["extents"]["taps"])
    m = n - taps + 1
    return [f"program {name}", f"input x: {dt}[{n}]", f"input w: {dt}[{taps}]",
            f"output y: {dt}[{m}]", "body:", f"  for i in 0..{m}{hint('outer')}:",
            f"    alloc s: {dt}[1] @local", f"    s[0] = {_lit(dt, 0)}",
            f"    for t in 0..{taps}{hint('inner')}:",
            "      s[0] = (s[0] + (x[(i + t)] * w[t]))", "    y[i] = s[0]"]


def _stencil(entry, rng, hint, name):
    n = _draw(rng, entry.constraints["extents"]["n"])
    coef = _lit("F32", _pick(rng, [0.5, 0.25, 1.5]))
    return [f"program {name}", f"input x: F32[{n}]", f"output y: F32[{n}]",
            f"output p: F32[{n}]", "body:", "  y[0] = x[0]", f"  y[{n - 1}] = x[{n - 1}]",
            f"  for i in 1..{n - 1}{hint('outer')}:",
            f"    y[i] = ({coef} * (x[(i - 1)] + x[(i + 1)]))",
            "  p[0] = x[0]", f"  for i in 1..{n}{hint('outer')}:",
            "    p[i] = (p[(i - 1)] + x[i])"]


BUILDERS = {"elementwise": _elementwise, "reduction": _reduction, "matmul": _matmul,
            "conv": _conv, "stencil": _stencil}


def _accept(text: str, origin: str) -> LoopProgram | None:
    try:
        p = parse_loop(text)
    except StageFuzzError as exc:
        log.warning("%s: unparsable seed: %s", origin, exc)
        return None
    problems = validate_loop(p)
    if problems:
        log.warning("%s: invalid seed: %s", origin, problems[0])
        return None
    return p


def generate_seed(catalog: ConstraintCatalog, template: str, rng: np.random.Generator,
                  provider=None, name: str | None = None) -> LoopProgram:
    """One valid seed for ``template``.

    Extents and dtypes come from the catalog entry. A configured provider
    is asked first; its text is used only when it parses and validates,
    otherwise the builtin builder takes over, so a seed is always returned.
    """
    entry = catalog.entry(template)
    name = name or f"{template}_{int(rng.integers(1 << 30))}"
    if provider is not None:
        text = provider.request("seed", template, entry.constraints, int(rng.integers(1 << 31)))
        if text is not None:
            p = _accept(text, f"provider[{template}]")
            if p is not None:
                return p
        log.info("provider seed for %s unusable; using builtin generator", template)
    lines = BUILDERS[template](entry, rng, _Hints(entry, rng), name)
    p = _accept("\n".join(lines) + "\n", f"builtin[{template}]")
    if p is None:  # builder bug, not an input problem
        raise AssertionError(f"builtin {template} seed failed to validate")
    return p


def canonical_hash(p: LoopProgram) -> str:
    text = serialize_loop(p).split("\n", 1)[1]  # the program name does not count
    return hashlib.sha256(text.encode()).hexdigest()


def bundled_seeds() -> list[LoopProgram]:
    root = resources.files("stagefuzz") / "data" / "seeds"
    out = []
    for f in sorted(root.iterdir(), key=lambda f: f.name):
        if f.name.endswith(".lir"):
            out.append(load_loop(Path(str(f))))
    return out


def build_seed_pool(catalog: ConstraintCatalog, rng: np.random.Generator, size: int = 40,
                    provider=None, extra: list[LoopProgram] | None = None) -> list[LoopProgram]:
    """Round-robin over the usable templates until ``size`` distinct seeds
    (by canonical hash) are collected; bundled and ``extra`` seeds first."""
    pool, seen = [], set()

    def add(p):
        h = canonical_hash(p)
        if h not in seen:
            seen.add(h)
            pool.append(p)

    for p in bundled_seeds() + list(extra or []):
        add(p)
    templates = [t for t in BUILDERS if t in catalog.usable()]
    if not templates:
        return pool
    k = 0
    while len(pool) < size and k < size * 20:
        t = templates[k % len(templates)]
        add(generate_seed(catalog, t, rng, provider, name=f"{t}{k}"))
        k += 1
    return pool


__all__ = ["BUILDERS", "build_seed_pool", "bundled_seeds", "canonical_hash", "generate_seed"]
