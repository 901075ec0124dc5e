"""Seed x stacked-mutation test generation for the low-level stage."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import MutationInapplicable
from ..loopir import LoopProgram, strip_annotations
from .rules import MutationRule, mutate, probe_inputs

MAX_STACK = 3
DRAWS_PER_STEP = 6


def mutate_stack(seed: LoopProgram, rules: Sequence[MutationRule], rng: np.random.Generator,
                 depth: int) -> tuple[LoopProgram, list[str]]:
    """Apply up to ``depth`` rules in turn; each step draws rules until one
    applies or the draw budget runs out. Returns the mutant and rule ids."""
    probes = probe_inputs(seed, rng)
    p, applied = seed, []
    for _ in range(depth):
        for _ in range(DRAWS_PER_STEP):
            rule = rules[int(rng.integers(len(rules)))]
            try:
                p = mutate(p, rule, rng, probes)
            except MutationInapplicable:
                continue
            applied.append(rule.id)
            break
    return p, applied


def harmony_programs(seeds: Sequence[LoopProgram], rules: Sequence[MutationRule], budget: int,
                     rng: np.random.Generator) -> list[tuple[LoopProgram, dict]]:
    """``budget`` mutants with lineage (seed name, applied rule ids)."""
    if budget <= 0:
        return []
    if not seeds or not rules:
        raise ValueError("harmony needs non-empty seed and rule pools")
    out = []
    for _ in range(budget):
        seed = seeds[int(rng.integers(len(seeds)))]
        depth = int(rng.integers(1, MAX_STACK + 1))
        p, applied = mutate_stack(seed, rules, rng, depth)
        out.append((p, {"seed": seed.name, "mutations": applied}))
    return out


def baseline_programs(seeds: Sequence[LoopProgram], budget: int,
                      rng: np.random.Generator) -> list[tuple[LoopProgram, dict]]:
    """Annotation-free seeds drawn at random: the no-guidance baseline."""
    stripped = [strip_annotations(s) for s in seeds]
    return [(p, {"seed": p.name, "mutations": []})
            for p in (stripped[int(rng.integers(len(stripped)))] for _ in range(max(budget, 0)))]


def harmony_campaign(seeds, rules, budget: int, rng: np.random.Generator):
    """Low-level TestCases, each a seed with 1 to 3 stacked mutations."""
    from ..campaign.oracle import Stage, TestCase
    return [TestCase(i, Stage.llopt, p, int(rng.integers(1 << 31)), lineage)
            for i, (p, lineage) in enumerate(harmony_programs(seeds, rules, budget, rng))]
