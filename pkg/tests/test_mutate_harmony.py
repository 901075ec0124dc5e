import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import matmul
from stagefuzz.errors import ConfigError, DocParseError, MutationInapplicable, RuleRejected
from stagefuzz.graph import DType, TensorType, TensorValue
from stagefuzz.harmony import (BUILTIN, MutationRule, Provider, build_seed_pool, canonical_hash,
                               check_rule, doc_constraints, extract_rules, generate_seed,
                               harmony_campaign, harmony_programs, load_catalog, load_docs,
                               mutate, parse_doc, probe_equivalent, probe_inputs,
                               provider_rules)
from stagefuzz.llopt import LLPassId, run_ll_pipeline
from stagefuzz.loopir import Alloc, For, interpret_loop, load_loop, parse_loop, validate_loop, walk

ECHO = f"{sys.executable} -m stagefuzz.harmony.echo_provider"


@pytest.fixture(scope="module")
def docs():
    from stagefuzz.campaign.regress import data_dir
    return data_dir("docs", "llpasses")


@pytest.fixture(scope="module")
def catalog(docs):
    return load_catalog(doc_constraints(docs))


@pytest.fixture(scope="module")
def rules(docs):
    return extract_rules(docs)


def loops(p):
    return [s for s in walk(p.body) if isinstance(s, For)]


def simple(trip=8, body="out[i] = (x[i] + f32(1.0))"):
    return parse_loop(f"""program s
input x: F32[{trip}]
output out: F32[{trip}]
body:
  for i in 0..{trip}:
    {body}
""")


def test_builtin_only_catalog():
    cat = load_catalog()
    assert all(e.sources == {"builtin"} and not e.disputed and not e.verified
               for e in cat.entries.values())
    assert set(cat.usable()) == set(BUILTIN)


def test_contradicting_docs_dispute_entry():
    cat = load_catalog([("bad.md", {"elementwise": {"lanes": [16]}})])
    assert cat.entries["elementwise"].disputed
    assert "elementwise" not in cat.usable()
    with pytest.raises(ConfigError):
        cat.entry("elementwise")


def test_bundled_docs_verified_count(catalog):
    verified = sorted(t for t, e in catalog.entries.items() if e.verified)
    assert verified == ["elementwise", "matmul", "reduction", "stencil"]
    assert not any(e.disputed for e in catalog.entries.values())


def test_unknown_template_in_docs():
    with pytest.raises(DocParseError):
        load_catalog([("x.md", {"fft": {"lanes": [2]}})])


def test_elementwise_seed(catalog):
    p = generate_seed(catalog, "elementwise", np.random.default_rng(1))
    assert validate_loop(p) == []
    lo, hi = catalog.entry("elementwise").constraints["extents"]["n"]
    assert lo <= loops(p)[-1].trip <= hi


def test_matmul_seed_matches_oracle(catalog):
    rng = np.random.default_rng(3)
    p = generate_seed(catalog, "matmul", rng)
    assert len(loops(p)) >= 3
    a_buf, b_buf = p.inputs
    x = {b.name: TensorValue(TensorType(b.dtype, b.extents),
                             rng.standard_normal(b.extents).astype(np.float32))
         for b in p.inputs}
    out = interpret_loop(p, x)[p.outputs[0].name].data
    np.testing.assert_allclose(out, matmul(x[a_buf.name].data, x[b_buf.name].data),
                               rtol=1e-5, atol=1e-5)


def test_seed_pool_is_deduplicated(catalog):
    pool = build_seed_pool(catalog, np.random.default_rng(0), size=40)
    assert len(pool) == 40
    assert len({canonical_hash(p) for p in pool}) == 40
    assert all(validate_loop(p) == [] for p in pool)


def test_vectorize_doc_rule(docs):
    rules = {r.id: r for r in extract_rules(docs)}
    r = rules["vectorize-innermost"]
    assert r.target is LLPassId.VectorizeLegalize
    assert r.action == "attach vectorize(4)"
    assert {"innermost", "dependence-free", "trip % 4 == 0"} <= set(r.guard.split(" and "))
    assert r.provenance.startswith("vectorize.md")


def test_one_rule_per_doc_entry(docs, rules):
    parsed, errors = load_docs(docs)
    assert errors == []
    assert len(rules) == sum(len(d.rules) for d in parsed) == 13


def test_missing_precondition_is_skipped(tmp_path, docs):
    text = (docs / "unroll.md").read_text()
    with pytest.raises(DocParseError):
        parse_doc(text.replace("precondition:", "note:", 1), "unroll.md")
    (tmp_path / "bad.md").write_text(text.replace("precondition:", "note:", 1))
    (tmp_path / "good.md").write_text((docs / "tiling.md").read_text())
    parsed, errors = load_docs(tmp_path)
    assert len(parsed) == 1
    assert [name for name, _ in errors] == ["bad.md"]


def test_unsafe_rule_rejected(data_dir):
    wave = load_loop(data_dir / "seeds" / "wavefront_8.lir")
    rule = MutationRule("swap-any", LLPassId.ReorderLoops, "perfect-nest", "swap", "test")
    with pytest.raises(RuleRejected):
        check_rule(rule, wave, np.random.default_rng(0))


def test_unroll_attaches_annotation():
    rule = MutationRule("u", LLPassId.UnrollExpand, "innermost and trip % 4 == 0",
                        "attach unroll(4)")
    p = simple(8)
    q = mutate(p, rule, np.random.default_rng(0))
    assert [(f.ann.kind, f.ann.param) for f in loops(q)] == [("unroll", 4)]
    assert probe_equivalent(p, q, probe_inputs(p, np.random.default_rng(1)))


def test_cache_and_pipeline_inserted(rules):
    rule = next(r for r in rules if r.id == "mlh-cache-pipeline")
    p = parse_loop("""program m
input x: F32[8]
input w: F32[8]
output out: F32[8,4]
body:
  for i in 0..8:
    for j in 0..4:
      out[i, j] = (x[i] * w[i])
""")
    q = mutate(p, rule, np.random.default_rng(0))
    assert any(isinstance(s, Alloc) and s.scope == "cache" for s in walk(q.body))
    assert any(f.ann.kind == "pipelined" and f.ann.param == 2 for f in loops(q))
    assert probe_equivalent(p, q, probe_inputs(p, np.random.default_rng(1)))
    out, traces = run_ll_pipeline(2, q)
    assert "mlh.double_buffer" in {t.rule_id for t in traces}


def test_vectorize_rejects_dependence(rules):
    rule = next(r for r in rules if r.id == "vectorize-innermost")
    p = simple(8, "out[i] = x[i]")
    rec = parse_loop("""program r
input x: F32[9]
output p: F32[9]
body:
  p[0] = x[0]
  for i in 1..9:
    p[i] = (p[(i - 1)] + x[i])
""")
    mutate(p, rule, np.random.default_rng(0))
    with pytest.raises(MutationInapplicable):
        mutate(rec, rule, np.random.default_rng(0))


def test_budget_fires_four_passes(catalog, rules):
    rng = np.random.default_rng(7)
    seeds = build_seed_pool(catalog, rng, 40)
    fired = set()
    for p, _ in harmony_programs(seeds, rules, 100, rng):
        _, traces = run_ll_pipeline(2, p)
        fired |= {t.pass_id for t in traces}
    assert len(fired) >= 4


def test_budget_zero(catalog, rules):
    assert harmony_campaign([], [], 0, np.random.default_rng(0)) == []


def test_campaign_deterministic(catalog, rules):
    seeds = build_seed_pool(catalog, np.random.default_rng(2), 10)
    a = harmony_campaign(seeds, rules, 15, np.random.default_rng(5))
    b = harmony_campaign(seeds, rules, 15, np.random.default_rng(5))
    assert a == b


class TestProvider:
    def test_good_provider_seed(self, catalog):
        with Provider(f"{ECHO} --mode good") as prov:
            p = generate_seed(catalog, "matmul", np.random.default_rng(0), prov)
        assert p.name.startswith("prov_matmul") and validate_loop(p) == []

    def test_garbage_falls_back(self, catalog, caplog):
        with Provider(f"{ECHO} --mode garbage") as prov:
            p = generate_seed(catalog, "elementwise", np.random.default_rng(0), prov)
        assert "unparsable seed" in caplog.text
        assert not p.name.startswith("prov_") and validate_loop(p) == []

    def test_silent_provider_times_out(self, catalog):
        with Provider(f"{ECHO} --mode silent", timeout=0.5) as prov:
            p = generate_seed(catalog, "stencil", np.random.default_rng(0), prov)
        assert validate_loop(p) == []

    def test_missing_provider_never_blocks(self, catalog):
        with Provider("/nonexistent/provider-binary") as prov:
            pool = build_seed_pool(catalog, np.random.default_rng(0), 8, prov)
        assert len(pool) == 8

    def test_provider_rules(self, catalog, data_dir):
        sample = load_loop(data_dir / "seeds" / "matmul_16.lir")
        with Provider(f"{ECHO} --mode good") as prov:
            ok, bad = provider_rules(prov, sample, np.random.default_rng(0))
        assert [r.id for r in ok] == ["provider-unroll-8"] and not bad
        wave = load_loop(data_dir / "seeds" / "wavefront_8.lir")
        with Provider(f"{ECHO} --mode unsafe") as prov:
            ok, bad = provider_rules(prov, wave, np.random.default_rng(0))
        assert ok == [] and len(bad) == 1


_CAT = load_catalog()
_POOL = build_seed_pool(_CAT, np.random.default_rng(21), 30)


@given(st.integers(0, 2**31 - 1))
def test_mutants_validate_and_are_probe_equivalent(seed):
    from stagefuzz.campaign.regress import data_dir
    rules = extract_rules(data_dir("docs", "llpasses"))
    rng = np.random.default_rng(seed)
    base = _POOL[int(rng.integers(len(_POOL)))]
    for p, lineage in harmony_programs([base], rules, 2, rng):
        assert validate_loop(p) == []
        fresh = probe_inputs(base, np.random.default_rng(seed + 1))
        assert probe_equivalent(base, p, fresh), lineage
