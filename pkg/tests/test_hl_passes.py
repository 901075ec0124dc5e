import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stagefuzz import bugs
from stagefuzz.campaign.oracle import compare_values
from stagefuzz.errors import NumericDomain, PassInternal
from stagefuzz.graph import (DType, GraphBuilder, interpret_graph, load_graph, random_inputs,
                             validate_graph)
from stagefuzz.graph.generate import random_graph
from stagefuzz.hlopt import LEVEL2_ORDER, PassId, run_hl_pass, run_hl_pipeline

F32 = DType.F32


def xy(shape=(4,)):
    b = GraphBuilder("g")
    return b, b.input("x", F32, shape), b.input("y", F32, shape)


def outputs_equal(g, h, seed=0):
    rng = np.random.default_rng(seed)
    x = random_inputs(g, rng)
    return compare_values(interpret_graph(g, x), interpret_graph(h, x)) is None


def test_constfold_mul_into_relu():
    b = GraphBuilder()
    m = b.op("Mul", [b.const(np.float32([2.0])), b.const(np.float32([3.0]))])
    g = b.build([b.op("ReLU", [m])])
    out, traces = run_hl_pass(PassId.ConstFold, g)
    assert [t.rule_id for t in traces][0] == "fold.binary"
    assert m in traces[0].matched_nodes
    relu = out[out.outputs[0]]
    assert relu.kind == "Constant" or out[relu.inputs[0]].kind == "Constant"
    assert interpret_graph(out, {})[0].data.tolist() == [6.0]


def test_fuse_add_relu():
    b, x, y = xy()
    g = b.build([b.op("ReLU", [b.op("Add", [x, y])])])
    out, traces = run_hl_pass(PassId.FuseElementwise, g)
    assert [t.rule_id for t in traces] == ["fuse.chain"]
    fused = out[out.outputs[0]]
    assert fused.kind == "FusedGroup"
    assert [kind for kind, _ in fused.params["body"]] == ["Add", "ReLU"]
    for seed in range(5):
        assert outputs_equal(g, out, seed)


def test_cse_merges_identical_adds():
    b, x, y = xy()
    a1, a2 = b.op("Add", [x, y]), b.op("Add", [x, y])
    g = b.build([b.op("Mul", [a1, a2])])
    out, traces = run_hl_pass(PassId.CSE, g)
    assert [t.rule_id for t in traces] == ["cse.merge"]
    mul = out[out.outputs[0]]
    assert mul.inputs[0] == mul.inputs[1]
    assert sum(n.kind == "Add" for n in out.nodes.values()) == 1


@pytest.mark.parametrize("op,ident,rule", [("Add", 0.0, "simplify.add_zero"),
                                           ("Mul", 1.0, "simplify.mul_one")])
def test_identity_elements(op, ident, rule):
    b, x, _ = xy()
    g = b.build([b.op("ReLU", [b.op(op, [x, b.const(np.full(4, ident, np.float32))])])])
    out, traces = run_hl_pass(PassId.AlgebraicSimplify, g)
    assert rule in {t.rule_id for t in traces}
    assert out[out.outputs[0]].inputs[0] == x


def test_dce_leaves_only_reachable():
    b, x, y = xy()
    b.op("Sigmoid", [x])
    g = b.build([b.op("Neg", [y])])
    out, traces = run_hl_pass(PassId.DeadNodeElim, g)
    assert traces and traces[0].rule_id == "dce.unreachable"
    assert not any(n.kind == "Sigmoid" for n in out.nodes.values())


def test_level0_is_identity():
    g = random_graph(np.random.default_rng(1), 5, 20)
    out, traces = run_hl_pipeline(0, g)
    assert out == g and traces == []


def test_level1_passes():
    b = GraphBuilder()
    g = b.build([b.op("Add", [b.const(np.float32([1.0])), b.const(np.float32([1.0]))])])
    _, traces = run_hl_pipeline(1, g)
    assert {t.pass_id for t in traces} <= {PassId.ConstFold, PassId.DeadNodeElim}


def test_level2_folds_to_single_constant():
    b = GraphBuilder()
    g = b.build([b.op("Add", [b.const(np.float32([1.0])), b.const(np.float32([1.0]))])])
    out, _ = run_hl_pipeline(2, g)
    assert len(out.nodes) == 1
    (node,) = out.nodes.values()
    assert node.kind == "Constant"
    assert interpret_graph(out, {})[0].data.tolist() == [2.0]


def test_order_is_fixed():
    assert [p.value for p in LEVEL2_ORDER] == ["ConstFold", "AlgebraicSimplify", "CSE",
                                               "LayoutTransform", "FuseElementwise",
                                               "DeadNodeElim"]


def test_bundled_passtest_7_fires_fuse_chain(data_dir):
    g = load_graph(data_dir / "passtests" / "pt07_fuse_chain.g")
    _, traces = run_hl_pipeline(2, g)
    assert "fuse.chain" in {t.rule_id for t in traces}


def test_every_passtest_fires_its_expected_rule(data_dir):
    for f in sorted((data_dir / "passtests").glob("*.g")):
        header = next(ln for ln in f.read_text().splitlines() if ln.startswith("#expect-pass"))
        pid, rule = header.split(":", 1)[1].split()
        _, traces = run_hl_pass(pid, load_graph(f))
        assert rule in {t.rule_id for t in traces}, f.name


def test_layout_transform_on_conv(data_dir):
    g = load_graph(data_dir / "passtests" / "pt18_conv_nhwc.g")
    out, traces = run_hl_pass(PassId.LayoutTransform, g)
    assert "layout.conv_nhwc" in {t.rule_id for t in traces}
    assert sum(n.kind == "Transpose" for n in out.nodes.values()) >= 2
    assert outputs_equal(g, out)


def test_seeded_bug_surfaces_as_divergence(data_dir):
    g = load_graph(data_dir / "regressions" / "H2_fuse_shared_intermediate.g")
    with bugs.activate(["H2"]):
        try:
            out, _ = run_hl_pipeline(2, g)
        except PassInternal:
            return
    assert not outputs_equal(g, out)


@given(st.integers(0, 2**31 - 1))
def test_level2_preserves_semantics(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 5, 25)
    out, traces = run_hl_pipeline(2, g)
    assert validate_graph(out) == []
    x = random_inputs(g, rng)
    try:
        ref = interpret_graph(g, x)
    except NumericDomain:
        return
    assert compare_values(ref, interpret_graph(out, x)) is None
    ids = set(g.nodes)
    seen = set(ids)
    for t in traces:
        assert t.fired and t.matched_nodes
        seen |= set(t.produced_nodes)
    assert all(t.matched_nodes <= seen for t in traces)


@given(st.integers(0, 2**31 - 1))
def test_pipeline_deterministic(seed):
    g = random_graph(np.random.default_rng(seed), 5, 25)
    assert run_hl_pipeline(2, g) == run_hl_pipeline(2, g)


@given(st.integers(0, 2**31 - 1))
def test_dce_output_fully_reachable(seed):
    g = random_graph(np.random.default_rng(seed), 5, 25)
    out, _ = run_hl_pass(PassId.DeadNodeElim, g)
    reach, stack = set(), list(out.outputs)
    while stack:
        n = stack.pop()
        if n not in reach:
            reach.add(n)
            stack.extend(out[n].inputs)
    assert reach == set(out.nodes)
