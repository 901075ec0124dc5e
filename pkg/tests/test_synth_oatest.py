import shutil

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stagefuzz.errors import DegeneratePattern
from stagefuzz.graph import DType, Graph, GraphBuilder, TensorType, load_graph, validate_graph
from stagefuzz.graph.generate import random_graph
from stagefuzz.hlopt import PassId, RewriteTrace, run_hl_pass, run_hl_pipeline
from stagefuzz.oatest import (Fix, Slot, capture, capture_patterns, derive_pattern,
                              dumps_patterns, fix_dangling, loads_patterns, synthesize,
                              synthesize_batch)

F32, I32, I8 = DType.F32, DType.I32, DType.I8


@pytest.fixture(scope="module")
def patterns():
    from stagefuzz.campaign.regress import data_dir
    return capture_patterns(data_dir("passtests"))


def by_rule(patterns, rule):
    return next(p for p in patterns if p.source[1] == rule)


def test_bundled_capture(patterns, data_dir):
    assert len(list((data_dir / "passtests").glob("*.g"))) >= 18
    assert len(patterns) >= 6
    assert {p.source[0] for p in patterns} == set(PassId)
    assert len({p.key for p in patterns}) == len(patterns)


def test_every_pattern_fires_its_rule(patterns):
    assert all(p.fires() for p in patterns)


def test_stale_and_duplicate_tests(tmp_path, data_dir):
    src = data_dir / "passtests" / "pt07_fuse_chain.g"
    shutil.copy(src, tmp_path / "a.g")
    shutil.copy(src, tmp_path / "b.g")
    (tmp_path / "c.g").write_text(src.read_text().replace("fuse.chain", "fuse.never"))
    (tmp_path / "d.g").write_text("#expect-pass: CSE cse.merge\ngraph broken\n")
    res = capture(tmp_path)
    assert res.stale == ["c.g"]
    assert [name for name, _ in res.load_errors] == ["d.g"]
    assert len([p for p in res.patterns if p.source[1] == "fuse.chain"]) == 1


def test_constfold_pattern_has_no_frontier():
    b = GraphBuilder()
    add = b.op("Add", [b.const(np.float32([1.0])), b.const(np.float32([2.0]))])
    g = b.build([b.op("ReLU", [add])])
    _, traces = run_hl_pass(PassId.ConstFold, g)
    p = derive_pattern(g, traces[0])
    assert p.frontier == ()
    assert sorted(n.kind for n in p.graph.nodes.values()) == ["Add", "Constant", "Constant"]


def test_fuse_pattern_from_bundled_test(data_dir):
    g = load_graph(data_dir / "passtests" / "pt07_fuse_chain.g")
    _, traces = run_hl_pass(PassId.FuseElementwise, g)
    p = derive_pattern(g, traces[0])
    body = sorted(p.graph[n].kind for n in p.body_ids)
    assert body == ["Add", "ReLU"]
    assert p.frontier == (TensorType(F32, (4, 4)), TensorType(F32, (4, 4)))


def test_cse_pattern_shares_slots(data_dir):
    g = load_graph(data_dir / "passtests" / "pt12_cse_add.g")
    _, traces = run_hl_pass(PassId.CSE, g)
    p = derive_pattern(g, traces[0])
    adds = [p.graph[n] for n in p.body_ids if p.graph[n].kind == "Add"]
    assert len(adds) == 2 and adds[0].inputs == adds[1].inputs


def test_empty_trace_is_degenerate():
    g = random_graph(np.random.default_rng(0), 5, 8)
    with pytest.raises(DegeneratePattern):
        derive_pattern(g, RewriteTrace(PassId.CSE, "cse.merge", frozenset({999}), frozenset()))


def test_fuse_into_matmul_seed(patterns):
    b = GraphBuilder("mm")
    g = b.build([b.op("MatMul", [b.input("a", F32, (4, 4)), b.input("b", F32, (4, 4))])])
    p = by_rule(patterns, "fuse.chain")
    for seed in range(10):
        out = synthesize(p, g, np.random.default_rng(seed))
        assert validate_graph(out) == []
        _, traces = run_hl_pipeline(2, out)
        assert "fuse.chain" in {t.rule_id for t in traces}


def test_constfold_pattern_into_any_seed(patterns):
    p = next(p for p in patterns if p.source[0] is PassId.ConstFold and not p.frontier)
    for seed in range(10):
        rng = np.random.default_rng(seed)
        out = synthesize(p, random_graph(rng, 5, 15), rng)
        _, traces = run_hl_pass(PassId.ConstFold, out)
        assert traces


def _partial(slot_type, host_type):
    b = GraphBuilder("h")
    h = b.input("h", host_type.dtype, host_type.shape)
    g = b.build([h])
    user = g.nodes[h].replace(id=1, kind="ReLU", params={}, inputs=(-1,), out_type=slot_type)
    return Graph({**g.nodes, 1: user}, (0, 1), "h"), [Slot(-1, slot_type)]


def test_fix_reuse_exact_match():
    g, slots = _partial(TensorType(F32, (3,)), TensorType(F32, (3,)))
    used = []
    out = fix_dangling(g, slots, np.random.default_rng(0), candidates=[0], applied=used)
    assert used == [Fix.Reuse] and out[1].inputs == (0,)


def test_fix_reshape_adapter():
    g, slots = _partial(TensorType(F32, (6,)), TensorType(F32, (2, 3)))
    used = []
    out = fix_dangling(g, slots, np.random.default_rng(0), candidates=[0], applied=used)
    assert used == [Fix.Adapter]
    assert out[out[1].inputs[0]].kind == "Reshape"
    assert validate_graph(out) == []


def test_fix_fresh_node():
    g, slots = _partial(TensorType(I8, (7,)), TensorType(I32, (2,)))
    kinds = set()
    for seed in range(8):
        used = []
        out = fix_dangling(g, slots, np.random.default_rng(seed), candidates=[0], applied=used)
        assert used == [Fix.Fresh] and validate_graph(out) == []
        kinds.add(out[out[1].inputs[0]].kind)
    assert kinds == {"Input", "Constant"}


def test_plib_round_trip(patterns):
    back = loads_patterns(dumps_patterns(patterns))
    assert [p.key for p in back] == [p.key for p in patterns]


@given(st.integers(0, 2**31 - 1))
def test_synthesized_graphs_validate(seed):
    from stagefuzz.campaign.regress import data_dir
    pats = _cached(data_dir("passtests"))
    for g in synthesize_batch(pats, 3, np.random.default_rng(seed)):
        assert validate_graph(g) == []


@given(st.integers(0, 2**31 - 1))
def test_synthesis_deterministic(seed):
    from stagefuzz.campaign.regress import data_dir
    pats = _cached(data_dir("passtests"))
    a = synthesize_batch(pats, 2, np.random.default_rng(seed))
    b = synthesize_batch(pats, 2, np.random.default_rng(seed))
    assert a == b


_CACHE = {}


def _cached(path):
    if path not in _CACHE:
        _CACHE[path] = capture_patterns(path)
    return _CACHE[path]
