"""Seeded-bug registry.

Each bug is a flag-gated defect inside the compiler under test. Bugs are
off unless activated explicitly (``activate`` or ``STAGEFUZZ_BUGS``). When
a buggy code path actually changes behaviour it calls :func:`hit`, which
lets campaigns attribute failures to the bug that caused them.
"""

from __future__ import annotations

import contextlib
import contextvars
import os
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import ConfigError


@dataclass(frozen=True)
class SeededBug:
    id: str
    stage: str  # loader | hlopt | llopt
    description: str
    component: str  # pass (or "Loader") containing the defect


CATALOG: dict[str, SeededBug] = {
    b.id: b
    for b in [
        SeededBug("L1", "loader", "Conv2D asymmetric pad ignored", "Loader"),
        SeededBug("L2", "loader", "Cast dropped on I32 input", "Loader"),
        SeededBug("L3", "loader", "Concat negative axis off-by-one", "Loader"),
        SeededBug("L4", "loader", "Transpose permutation check accepts duplicates", "Loader"),
        SeededBug("H1", "hlopt", "ConstFold I8 saturates instead of wrapping", "ConstFold"),
        SeededBug("H2", "hlopt", "FuseElementwise fuses across multi-consumer intermediate",
                  "FuseElementwise"),
        SeededBug("H3", "hlopt", "CSE ignores constant payload", "CSE"),
        SeededBug("H4", "hlopt", "LayoutTransform drops one boundary Transpose", "LayoutTransform"),
        SeededBug("B1", "llopt", "UnrollExpand wrong remainder indices", "UnrollExpand"),
        SeededBug("B2", "llopt", "TileLoops drops remainder loop", "TileLoops"),
        SeededBug("B3", "llopt", "VectorizeLegalize skips dependence check", "VectorizeLegalize"),
        SeededBug("B4", "llopt", "IntrinsicMap rewrites a*(b+c) as fma(a,b,c)", "IntrinsicMap"),
    ]
}
BUG_IDS = tuple(CATALOG)
ENV_VAR = "STAGEFUZZ_BUGS"

_active: contextvars.ContextVar[frozenset] = contextvars.ContextVar("active_bugs",
                                                                   default=frozenset())
_hits: contextvars.ContextVar[set | None] = contextvars.ContextVar("bug_hits", default=None)


def parse_flags(flags: str | Iterable[str] | None) -> frozenset[str]:
    if flags is None:
        return frozenset()
    if isinstance(flags, str):
        flags = [f for f in flags.replace(" ", "").split(",") if f]
    out = set()
    for f in flags:
        f = f.upper()
        if f == "ALL":
            out.update(BUG_IDS)
        elif f in ("L", "H", "B"):
            out.update(b for b in BUG_IDS if b[0] == f)
        elif f in CATALOG:
            out.add(f)
        else:
            raise ConfigError(f"unknown seeded bug {f!r}")
    return frozenset(out)


def seeded_bug_registry(flags=None, use_env: bool = True) -> frozenset[str]:
    """Resolve the active bug set from explicit flags (an empty string means
    none), else the environment."""
    if flags is not None:
        return parse_flags(flags)
    if use_env:
        return parse_flags(os.environ.get(ENV_VAR))
    return frozenset()


def attribute(hits: Iterable[str], where: str | None) -> frozenset[str]:
    """Bugs among ``hits`` that live in the component a failure was
    localized to; all hits when the failure could not be localized."""
    hits = frozenset(hits)
    own = frozenset(b for b in hits if CATALOG[b].component == where)
    return own or hits


def enabled(bug: str) -> bool:
    return bug in _active.get()


def active() -> frozenset[str]:
    return _active.get()


def hit(bug: str) -> None:
    hits = _hits.get()
    if hits is not None:
        hits.add(bug)


@contextlib.contextmanager
def activate(bugs: Iterable[str]) -> Iterator[None]:
    token = _active.set(frozenset(bugs))
    try:
        yield
    finally:
        _active.reset(token)


@contextlib.contextmanager
def record_hits() -> Iterator[set]:
    hits: set = set()
    token = _hits.set(hits)
    try:
        yield hits
    finally:
        _hits.reset(token)
