"""Campaign driver: generate tests per stage, judge them, write the report."""

from __future__ import annotations

import hashlib
import json
import logging
import multiprocessing as mp
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import bugs
from ..errors import ConfigError, CorpusUnreadable, StageFuzzError, SynthesisFailed
from ..graph.generate import random_graph
from ..harmony import (build_seed_pool, doc_constraints, extract_rules, load_catalog,
                       mutate_stack)
from ..harmony.campaign import MAX_STACK
from ..loopir import strip_annotations
from ..oatest import capture_patterns, load_patterns, synthesize
from ..opera import ingest_corpus, order_records
from .oracle import STAGE_CODES, Stage, Tag, TestCase, dedup_key, diff_test
from .regress import data_dir, write_repro

log = logging.getLogger(__name__)

STAGES = ("loader", "hlopt", "llopt")
ORDERS = ("diversity", "random", "fifo")
SEED_POOL = 40
REPORT_VERSION = 1
# fields that do not affect verdicts and stay out of the content hash
_UNHASHED_CONFIG = ("jobs", "out")


@dataclass
class CampaignConfig:
    stage: str = "all"  # loader | hlopt | llopt | all
    budget: int = 300
    seed: int = 7
    jobs: int = 1
    bugs: tuple = ()
    order: str = "diversity"  # loader test order
    use_patterns: bool = True  # hlopt: splice captured patterns into seeds
    use_rules: bool = True  # llopt: mutate seeds with documented rules
    corpus: str | None = None
    passtests: str | None = None
    patterns: str | None = None  # pattern library file; default: capture from passtests
    docs: str | None = None
    provider: str | None = None
    out: str | None = None

    def validate(self) -> None:
        if self.stage not in STAGES + ("all",):
            raise ConfigError(f"unknown stage {self.stage!r}")
        if self.order not in ORDERS:
            raise ConfigError(f"unknown order {self.order!r}; expected one of {ORDERS}")
        if self.budget < 0:
            raise ConfigError("budget must be non-negative")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        unknown = set(self.bugs) - set(bugs.BUG_IDS)
        if unknown:
            raise ConfigError(f"unknown seeded bugs {sorted(unknown)}")

    def stage_budgets(self) -> dict[str, int]:
        if self.stage != "all":
            return {self.stage: self.budget}
        base, extra = divmod(self.budget, len(STAGES))
        return {s: base + (k < extra) for k, s in enumerate(STAGES)}

    def echo(self) -> dict:
        d = asdict(self)
        d["bugs"] = sorted(self.bugs)
        return d


@dataclass
class Context:
    """Read-only material shared by all workers."""
    config: CampaignConfig
    records: list = field(default_factory=list)
    order: list = field(default_factory=list)
    patterns: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    rules: list = field(default_factory=list)
    catalog: dict = field(default_factory=dict)
    skipped: int = 0


def build_context(cfg: CampaignConfig) -> Context:
    ctx = Context(cfg)
    budgets = cfg.stage_budgets()
    if budgets.get("loader"):
        skipped: list = []
        path = cfg.corpus or data_dir("corpus", "operators.jsonl")
        try:
            ctx.records = ingest_corpus(path, skipped)
        except CorpusUnreadable as exc:
            raise ConfigError(str(exc)) from None
        ctx.skipped = len(skipped)
        if not ctx.records:
            raise ConfigError(f"corpus {path} holds no usable records")
        ctx.order = order_records(ctx.records, cfg.order, cfg.seed)
    if budgets.get("hlopt") and cfg.use_patterns:
        if cfg.patterns:
            try:
                ctx.patterns = load_patterns(cfg.patterns)
            except (OSError, ValueError, StageFuzzError) as exc:
                raise ConfigError(f"cannot load pattern library {cfg.patterns}: {exc}") from None
        else:
            ctx.patterns = capture_patterns(cfg.passtests or data_dir("passtests"))
    if budgets.get("llopt"):
        docs = cfg.docs or data_dir("docs", "llpasses")
        catalog = load_catalog(doc_constraints(docs))
        ctx.catalog = catalog.summary()
        rng = np.random.default_rng([cfg.seed, STAGE_CODES[Stage.llopt]])
        provider = None
        if cfg.provider:
            from ..harmony import Provider
            provider = Provider(cfg.provider)
        try:
            ctx.seeds = build_seed_pool(catalog, rng, SEED_POOL, provider)
            if cfg.use_rules:
                ctx.rules = extract_rules(docs, provider, ctx.seeds[0], rng)
        finally:
            if provider is not None:
                provider.close()
        if not cfg.use_rules:
            ctx.seeds = [strip_annotations(s) for s in ctx.seeds]
    return ctx


def make_test(ctx: Context, stage: str, i: int) -> TestCase:
    """Test ``i`` of ``stage``; depends only on the config, never on other tests."""
    cfg = ctx.config
    st = Stage(stage)
    if st is Stage.loader:
        n = len(ctx.order)
        k = ctx.order[i % n]
        rec = ctx.records[k]
        # past the end of the corpus, the same order is replayed on fresh data
        return TestCase(i, st, rec, i // n, {"record": k, "origin": rec.origin})
    rng = np.random.default_rng([cfg.seed, STAGE_CODES[st], i])
    if st is Stage.hlopt:
        while True:
            g = random_graph(rng, 5, 30, name=f"t{i}")
            if not ctx.patterns:
                lineage = {"pattern": None}
                break
            p = ctx.patterns[int(rng.integers(len(ctx.patterns)))]
            try:
                g = synthesize(p, g, rng)
            except SynthesisFailed:
                continue
            lineage = {"pattern": p.key[:16], "source": f"{p.source[0].value}:{p.source[1]}"}
            break
        return TestCase(i, st, g, int(rng.integers(1 << 31)), lineage)
    seed = ctx.seeds[int(rng.integers(len(ctx.seeds)))]
    prog, applied = seed, []
    if ctx.rules:
        depth = int(rng.integers(1, MAX_STACK + 1))
        prog, applied = mutate_stack(seed, ctx.rules, rng, depth)
    return TestCase(i, st, prog, int(rng.integers(1 << 31)),
                    {"seed": seed.name, "mutations": applied})


_CTX: Context | None = None


def _init(ctx: Context) -> None:
    global _CTX
    _CTX = ctx


def _work(job: tuple[str, int]):
    stage, i = job
    with bugs.activate(_CTX.config.bugs):
        tc = make_test(_CTX, stage, i)
        v = diff_test(tc)
    return stage, i, v, (None if v.ok else tc)


def _jobs(budgets: dict[str, int]):
    for stage in STAGES:
        for i in range(budgets.get(stage, 0)):
            yield stage, i


def _run(ctx: Context, budgets):
    if ctx.config.jobs == 1:
        _init(ctx)
        yield from map(_work, _jobs(budgets))
        return
    with mp.get_context("fork").Pool(ctx.config.jobs, _init, (ctx,)) as pool:
        yield from pool.imap(_work, _jobs(budgets), chunksize=8)


def content_hash(report: dict) -> str:
    body = {k: v for k, v in report.items() if k not in ("wall_time", "content_hash")}
    body["config"] = {k: v for k, v in body["config"].items() if k not in _UNHASHED_CONFIG}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def run_campaign(cfg: CampaignConfig) -> dict:
    """Run the campaign described by ``cfg`` and return the report dict.

    With ``cfg.out`` set, ``report.json`` and one reproduction per failure
    signature (its first hit) are written there.
    """
    cfg.validate()
    start = time.perf_counter()
    budgets = cfg.stage_budgets()
    ctx = build_context(cfg)
    verdicts: Counter = Counter()
    per_stage = {s: {"tests": 0, "verdicts": Counter(), "rules": set(), "passes": set()}
                 for s in budgets}
    sigs: dict[tuple, dict] = {}
    detected: set = set()
    repro_dir = Path(cfg.out) / "repro" if cfg.out else None
    index = 0
    for stage, i, v, tc in _run(ctx, budgets):
        verdicts[v.tag.value] += 1
        ps = per_stage[stage]
        ps["tests"] += 1
        ps["verdicts"][v.tag.value] += 1
        ps["rules"].update(v.rules)
        ps["passes"].update(v.passes)
        if not v.ok:
            key = dedup_key(v, tc)
            entry = sigs.get(key)
            if entry is None:
                entry = sigs[key] = {"stage": key[0], "where": key[1], "tag": key[2],
                                     "message": key[3], "first_hit": index,
                                     "stage_index": i, "count": 0, "bugs": set()}
                if repro_dir is not None:
                    meta = write_repro(repro_dir, f"sig{len(sigs) - 1:03d}_{stage}_{i}", tc, v,
                                       cfg.bugs)
                    entry["repro"] = str(meta.relative_to(cfg.out))
            entry["count"] += 1
            entry["bugs"] |= v.bugs_hit
            detected |= v.bugs_hit
        index += 1
    signatures = []
    for e in sorted(sigs.values(), key=lambda e: e["first_hit"]):
        e["bugs"] = sorted(e["bugs"])
        signatures.append(e)
    report = {
        "version": REPORT_VERSION,
        "config": cfg.echo(),
        "tests_run": index,
        "verdicts": dict(sorted(verdicts.items())),
        "stages": {s: {"tests": d["tests"], "verdicts": dict(sorted(d["verdicts"].items())),
                       "rules": sorted(d["rules"]), "passes": sorted(d["passes"])}
                   for s, d in per_stage.items()},
        "rules": {"loader": sorted(per_stage.get("loader", {}).get("rules", ())),
                  "hl": sorted(per_stage.get("hlopt", {}).get("rules", ())),
                  "ll": sorted(per_stage.get("llopt", {}).get("rules", ()))},
        "signatures": signatures,
        "bugs_detected": sorted(detected),
        "corpus_skipped": ctx.skipped,
        "catalog": ctx.catalog,
    }
    report["wall_time"] = round(time.perf_counter() - start, 3)
    report["content_hash"] = content_hash(report)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def failures(report: dict) -> int:
    return sum(n for tag, n in report["verdicts"].items() if tag != Tag.Pass.value)


__all__ = ["CampaignConfig", "Context", "build_context", "content_hash", "failures",
           "make_test", "run_campaign"]

