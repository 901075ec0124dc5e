import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import conv2d_nchw, matmul
from stagefuzz.campaign.oracle import compare_values, loop_inputs
from stagefuzz.errors import NumericDomain, OutOfBounds, ParseError, UninitializedRead
from stagefuzz.graph import (DType, GraphBuilder, TensorType, TensorValue, interpret_graph,
                             random_inputs)
from stagefuzz.graph.generate import random_graph
from stagefuzz.hlopt import PassId, run_hl_pass
from stagefuzz.loopir import (For, Store, interpret_loop, load_loop, lower_graph, parse_loop,
                              serialize_loop, strip_annotations, validate_loop, walk)

F32 = DType.F32
ADD = """program add
input a: F32[4]
input b: F32[4]
output out: F32[4]
body:
  for i in 0..4:
    out[i] = (a[i] + b[i])
"""


def tv(dtype, data):
    arr = np.asarray(data)
    return TensorValue(TensorType(dtype, arr.shape), arr)


def run_lowered(g, x):
    p = lower_graph(g)
    assert validate_loop(p) == []
    out = interpret_loop(p, x)
    return [out[b.name] for b in p.outputs]


def test_add_program():
    out = interpret_loop(parse_loop(ADD), {"a": tv(F32, [1, 2, 3, 4]),
                                           "b": tv(F32, [10, 20, 30, 40])})
    assert out["out"].data.tolist() == [11, 22, 33, 44]


def test_store_past_extent_is_out_of_bounds():
    p = parse_loop(ADD.replace("0..4", "0..5"))
    with pytest.raises(OutOfBounds):
        interpret_loop(p, {"a": tv(F32, [1] * 4), "b": tv(F32, [1] * 4)})


def test_partial_output_is_uninitialized_read():
    p = parse_loop(ADD.replace("0..4", "0..3"))
    with pytest.raises(UninitializedRead):
        interpret_loop(p, {"a": tv(F32, [1] * 4), "b": tv(F32, [1] * 4)})


def test_lowered_add_is_one_elementwise_nest():
    b = GraphBuilder("g")
    g = b.build([b.op("Add", [b.input("a", F32, (4,)), b.input("b", F32, (4,))])])
    p = lower_graph(g)
    nests = [s for s in walk(p.body) if isinstance(s, For)]
    compute = [f for f in nests if any(isinstance(t, Store) and "Bin" in repr(t.value)
                                       for t in f.body)]
    assert len(compute) == 1 and compute[0].trip == 4


def test_lowered_matmul_matches_oracle():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((2, 3)).astype(np.float32)
    c = rng.standard_normal((3, 2)).astype(np.float32)
    b = GraphBuilder("mm")
    g = b.build([b.op("MatMul", [b.input("a", F32, (2, 3)), b.input("c", F32, (3, 2))])])
    got = run_lowered(g, {"a": tv(F32, a), "c": tv(F32, c)})[0].data
    np.testing.assert_allclose(got, matmul(a, c), rtol=1e-5, atol=1e-6)
    fors = [s for s in walk(lower_graph(g).body) if isinstance(s, For)]
    assert [f.trip for f in fors][:3] == [2, 2, 3]


def test_lowered_conv_matches_both_oracles():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((1, 2, 5, 5)).astype(np.float32)
    w = rng.standard_normal((3, 2, 3, 3)).astype(np.float32)
    b = GraphBuilder("conv")
    g = b.build([b.op("Conv2D", [b.input("x", F32, x.shape), b.const(w)], stride=(1, 1),
                      pad=(1, 1, 1, 1))])
    inputs = {"x": tv(F32, x)}
    lowered = run_lowered(g, inputs)
    assert compare_values(interpret_graph(g, inputs), lowered) is None
    np.testing.assert_allclose(lowered[0].data, conv2d_nchw(x, w, (1, 1), (1, 1, 1, 1)),
                               rtol=1e-5, atol=1e-5)


def test_fused_group_lowers_to_one_nest():
    b = GraphBuilder("f")
    g = b.build([b.op("ReLU", [b.op("Add", [b.input("a", F32, (8,)),
                                            b.input("b", F32, (8,))])])])
    fused, _ = run_hl_pass(PassId.FuseElementwise, g)
    p = lower_graph(fused)
    assert "max((a[" in serialize_loop(p)
    x = random_inputs(g, np.random.default_rng(2))
    assert compare_values(interpret_graph(g, x), run_lowered(fused, x)) is None


def test_unknown_annotation_is_parse_error():
    with pytest.raises(ParseError):
        parse_loop(ADD.replace("0..4:", "0..4 @spin(3):"))


def test_illegal_annotation_parameter_is_parse_error():
    with pytest.raises(ParseError):
        parse_loop(ADD.replace("0..4:", "0..4 @vectorize(3):"))


@pytest.mark.parametrize("name", ["matmul_16.lir", "wavefront_8.lir"])
def test_bundled_seeds_parse_and_validate(data_dir, name):
    p = load_loop(data_dir / "seeds" / name)
    assert validate_loop(p) == []
    assert parse_loop(serialize_loop(p)) == p


def _graph(seed):
    return random_graph(np.random.default_rng(seed), 5, 25)


@given(st.integers(0, 2**31 - 1))
def test_lowering_equivalence(seed):
    g = _graph(seed)
    x = random_inputs(g, np.random.default_rng(seed + 1))
    try:
        ref = interpret_graph(g, x)
    except NumericDomain:
        with pytest.raises(NumericDomain):
            run_lowered(g, x)
        return
    assert compare_values(ref, run_lowered(g, x)) is None


@given(st.integers(0, 2**31 - 1))
def test_round_trip_lowered(seed):
    p = lower_graph(_graph(seed))
    assert parse_loop(serialize_loop(p)) == p


@given(st.integers(0, 2**31 - 1))
def test_annotation_erasure(seed):
    from stagefuzz.harmony import build_seed_pool, load_catalog
    rng = np.random.default_rng(seed)
    p = build_seed_pool(load_catalog(), rng, size=1)[0]
    x = loop_inputs(p, seed)
    a, b = interpret_loop(p, x), interpret_loop(strip_annotations(p), x)
    for k in a:
        np.testing.assert_array_equal(a[k].data, b[k].data)
