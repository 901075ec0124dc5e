"""Splicing patterns into seed graphs with validity-restoring fixes."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import PassInternal, SynthesisFailed
from ..graph.generate import random_graph
from ..graph.ir import Graph, Node, make_node, payload_tuple
from ..graph.ops import LEAF_KINDS, normalize_params
from ..graph.types import TensorType, random_tensor
from ..graph.validate import validate_graph
from ..hlopt import run_hl_pipeline
from .patterns import Pattern

MAX_ATTEMPTS = 16


class SpliceMode(str, enum.Enum):
    FeedPattern = "feed-output-into-pattern"
    FeedConsumer = "pattern-feeds-consumer"


@dataclass(frozen=True)
class SynthesisPoint:
    anchor: int
    mode: SpliceMode


@dataclass(frozen=True)
class Slot:
    ref: int  # placeholder id used by pattern nodes
    ttype: TensorType


class Fix(str, enum.Enum):
    Reuse = "reuse"
    Adapter = "adapter"
    Fresh = "fresh"


def _adapter(nid: int, src: Node, want: TensorType) -> Node | None:
    have = src.out_type
    if have.shape == want.shape and have.dtype is not want.dtype:
        return make_node(nid, "Cast", [src.id], [have], to=want.dtype)
    if have.dtype is want.dtype and have.size == want.size and have.shape != want.shape:
        return make_node(nid, "Reshape", [src.id], [have], shape=want.shape)
    return None


def _fresh_name(nodes: dict[int, Node]) -> str:
    names = {n.params["name"] for n in nodes.values() if n.kind == "Input"}
    k = 0
    while f"syn{k}" in names:
        k += 1
    return f"syn{k}"


def fix_dangling(g_partial: Graph, frontier_slots: Sequence[Slot], rng: np.random.Generator,
                 candidates: Sequence[int] | None = None,
                 applied: list | None = None) -> Graph:
    """Resolve every placeholder reference in ``g_partial``.

    Per slot: reuse a random node of exactly the slot's type; else route a
    random node through one Cast or Reshape adapter; else create a fresh
    Input or Constant (coin flip). ``candidates`` limits which existing
    nodes may be reused (default: all). ``applied`` collects the strategy
    used for each slot.
    """
    nodes = dict(g_partial.nodes)
    pool = list(g_partial.nodes) if candidates is None else list(candidates)
    next_id = max(max(nodes, default=-1) + 1, 0)
    binding: dict[int, int] = {}
    for slot in frontier_slots:
        exact = [n for n in pool if nodes[n].out_type == slot.ttype]
        if exact:
            binding[slot.ref] = exact[int(rng.integers(len(exact)))]
            if applied is not None:
                applied.append(Fix.Reuse)
            continue
        adapters = [n for n in pool if _adapter(-1, nodes[n], slot.ttype) is not None]
        if adapters:
            src = nodes[adapters[int(rng.integers(len(adapters)))]]
            node = _adapter(next_id, src, slot.ttype)
            kind = Fix.Adapter
        elif rng.random() < 0.5:
            node = Node(next_id, "Input", normalize_params("Input", {"name": _fresh_name(nodes)}),
                        (), slot.ttype)
            kind = Fix.Fresh
        else:
            value = random_tensor(slot.ttype, rng)
            node = Node(next_id, "Constant", {}, (), slot.ttype,
                        payload_tuple(value.data, slot.ttype.dtype))
            kind = Fix.Fresh
        nodes[node.id] = node
        next_id += 1
        binding[slot.ref] = node.id
        if applied is not None:
            applied.append(kind)
    for nid, n in list(nodes.items()):
        if any(s in binding for s in n.inputs):
            nodes[nid] = n.replace(inputs=tuple(binding.get(s, s) for s in n.inputs))
    return Graph(nodes, g_partial.outputs, g_partial.name)


def _splice_once(pattern: Pattern, seed: Graph, rng: np.random.Generator,
                 point: SynthesisPoint) -> Graph | None:
    k = len(pattern.frontier)
    base = seed.next_id
    remap = {pid: base + i for i, pid in enumerate(pattern.body_ids)}
    remap.update({i: -1 - i for i in range(k)})
    pnodes = pattern.graph.nodes
    body = [pnodes[p].replace(id=remap[p], inputs=tuple(remap[s] for s in pnodes[p].inputs))
            for p in pattern.body_ids]
    sinks = [remap[o] for o in pattern.graph.outputs]
    nodes = dict(seed.nodes)
    nodes.update({n.id: n for n in body})
    outputs = list(seed.outputs)
    slots = [Slot(-1 - i, t) for i, t in enumerate(pattern.frontier)]
    host = list(seed.nodes)
    anchor = seed.nodes[point.anchor]
    candidates = host
    if point.mode is SpliceMode.FeedPattern:
        if slots:
            fits = [s for s in slots if s.ttype == anchor.out_type]
            if fits:
                bound = fits[int(rng.integers(len(fits)))]
                src = anchor.id
            else:
                # no slot fits the anchor even through an adapter: every slot
                # is left to fix_dangling
                adapt = [s for s in slots if _adapter(-1, anchor, s.ttype) is not None]
                bound = adapt[int(rng.integers(len(adapt)))] if adapt else None
                if bound is not None:
                    node = _adapter(base + len(body), anchor, bound.ttype)
                    nodes[node.id] = node
                    src = node.id
            if bound is not None:
                for nid, n in list(nodes.items()):
                    if bound.ref in n.inputs:
                        nodes[nid] = n.replace(inputs=tuple(src if s == bound.ref else s
                                                            for s in n.inputs))
                slots = [s for s in slots if s is not bound]
        if not pattern.dead_code:
            outputs += [s for s in sinks if s not in outputs]
    else:
        if pattern.dead_code or anchor.kind in LEAF_KINDS:
            return None
        options = [(j, s) for j, src in enumerate(anchor.inputs) for s in sinks
                   if seed.nodes[src].out_type == nodes[s].out_type]
        if not options:
            return None
        j, sink = options[int(rng.integers(len(options)))]
        ins = list(anchor.inputs)
        ins[j] = sink
        nodes[anchor.id] = anchor.replace(inputs=tuple(ins))
        outputs += [s for s in sinks if s != sink and s not in outputs]
        # reusing anything downstream of the anchor would close a cycle
        blocked = seed.descendants(anchor.id)
        candidates = [n for n in host if n not in blocked]
    partial = Graph(nodes, tuple(outputs), f"{seed.name}_syn")
    g = fix_dangling(partial, slots, rng, candidates=candidates)
    return None if validate_graph(g) else g


def synthesize(pattern: Pattern, seed_graph: Graph, rng: np.random.Generator) -> Graph:
    """Splice ``pattern`` into ``seed_graph`` at a random synthesis point.

    The pattern's outputs become graph outputs or replace an input edge of
    the anchor, so the trigger stays live (dead-node patterns are the
    exception: they are left unreachable on purpose).
    """
    if validate_graph(seed_graph):
        raise SynthesisFailed("seed graph is not valid")
    ids = list(seed_graph.nodes)
    for _ in range(MAX_ATTEMPTS):
        anchor = ids[int(rng.integers(len(ids)))]
        mode = SpliceMode.FeedPattern if rng.random() < 0.5 else SpliceMode.FeedConsumer
        g = _splice_once(pattern, seed_graph, rng, SynthesisPoint(anchor, mode))
        if g is not None:
            return g
    raise SynthesisFailed(f"no legal splice of {pattern.source[1]} into {seed_graph.name}")


def synthesize_batch(patterns: Sequence[Pattern], n: int, rng: np.random.Generator,
                     use_patterns: bool = True) -> list[Graph]:
    """``n`` test graphs: random seeds, each with one random pattern spliced
    in (or the bare seeds when ``use_patterns`` is off)."""
    out: list[Graph] = []
    while len(out) < n:
        seed = random_graph(rng, 5, 30, name=f"seed{len(out)}")
        if not use_patterns or not patterns:
            out.append(seed)
            continue
        p = patterns[int(rng.integers(len(patterns)))]
        try:
            out.append(synthesize(p, seed, rng))
        except SynthesisFailed:
            continue
    return out


def fired_rules(graphs: Sequence[Graph]) -> set[str]:
    """Distinct high-level rule ids fired by the level-2 pipeline."""
    rules: set[str] = set()
    for g in graphs:
        try:
            _, traces = run_hl_pipeline(2, g)
        except PassInternal:
            continue
        rules |= {t.rule_id for t in traces if t.fired}
    return rules
