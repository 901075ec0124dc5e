import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import conv2d_nchw
from stagefuzz.errors import InvalidParam, NumericDomain, ParseError, ShapeMismatch
from stagefuzz.graph import (DType, Graph, GraphBuilder, Node, TensorType, TensorValue,
                             infer_shape, interpret_graph, load_graph, parse_graph,
                             random_inputs, serialize_graph, validate_graph)
from stagefuzz.graph.generate import random_graph

F32, I32, I8 = DType.F32, DType.I32, DType.I8


def tt(dtype, *shape):
    return TensorType(dtype, shape)


def run(build, inputs=None):
    b = GraphBuilder()
    g = b.build(build(b))
    assert validate_graph(g) == []
    return interpret_graph(g, inputs or {})


class TestInferShape:
    def test_matmul(self):
        assert infer_shape("MatMul", {}, [tt(F32, 3, 4), tt(F32, 4, 5)]) == tt(F32, 3, 5)

    def test_conv_same_padding(self):
        # expected shape taken from a brute-force convolution
        ref = conv2d_nchw(np.zeros((1, 3, 8, 8)), np.zeros((4, 3, 3, 3)), (1, 1), (1, 1, 1, 1))
        assert ref.shape == (1, 4, 8, 8)
        got = infer_shape("Conv2D", {"stride": [1, 1], "pad": [1, 1]},
                          [tt(F32, 1, 3, 8, 8), tt(F32, 4, 3, 3, 3)])
        assert got == tt(F32, *ref.shape)

    @pytest.mark.parametrize("stride,pad", [((2, 2), (0, 0, 0, 0)), ((1, 2), (0, 1, 2, 1)),
                                            ((3, 1), (2, 2, 2, 2))])
    def test_conv_matches_brute_force_shape(self, stride, pad):
        ref = conv2d_nchw(np.zeros((2, 2, 7, 9)), np.zeros((3, 2, 3, 2)), stride, pad)
        got = infer_shape("Conv2D", {"stride": list(stride), "pad": list(pad)},
                          [tt(F32, 2, 2, 7, 9), tt(F32, 3, 2, 3, 2)])
        assert got.shape == ref.shape

    def test_broadcast_size_one(self):
        assert infer_shape("Add", {}, [tt(F32, 2, 3), tt(F32, 1, 3)]) == tt(F32, 2, 3)

    def test_matmul_inner_mismatch(self):
        with pytest.raises(ShapeMismatch):
            infer_shape("MatMul", {}, [tt(F32, 3, 4), tt(F32, 5, 6)])

    def test_transpose_needs_permutation(self):
        with pytest.raises(InvalidParam):
            infer_shape("Transpose", {"perm": [0, 0]}, [tt(F32, 2, 3)])

    @given(st.lists(st.sampled_from([1, 2, 3]), min_size=0, max_size=4),
           st.lists(st.sampled_from([1, 2, 3]), min_size=0, max_size=4))
    def test_broadcast_commutes(self, a, b):
        def shape(x, y):
            try:
                return infer_shape("Add", {}, [tt(F32, *x), tt(F32, *y)])
            except ShapeMismatch:
                return "mismatch"
        assert shape(a, b) == shape(b, a)


class TestValidate:
    def test_single_add(self):
        b = GraphBuilder()
        x = b.input("x", F32, (3,))
        assert validate_graph(b.build([b.op("Add", [x, x])])) == []

    def test_dangling_reference(self):
        b = GraphBuilder()
        x = b.input("x", F32, (3,))
        y = b.op("ReLU", [x])
        g = b.build([y])
        bad = Graph({**g.nodes, y: g.nodes[y].replace(inputs=(99,))}, g.outputs, "bad")
        codes = [(v.code, v.ref) for v in validate_graph(bad)]
        assert ("DanglingInput", 99) in codes

    def test_cycle(self):
        t = tt(F32, 2)
        nodes = {0: Node(0, "Input", {"name": "x"}, (), t),
                 1: Node(1, "Add", {}, (0, 2), t), 2: Node(2, "ReLU", {}, (1,), t)}
        codes = [v.code for v in validate_graph(Graph(nodes, (2,), "cyc"))]
        assert "CycleDetected" in codes


class TestInterpret:
    def test_add_constants(self):
        out = run(lambda b: [b.op("Add", [b.const(np.float32([2.0])), b.const(np.float32([3.0]))])])
        assert out[0].data.tolist() == [5.0]

    def test_relu(self):
        out = run(lambda b: [b.op("ReLU", [b.const(np.float32([-1.0, 2.0]))])])
        assert out[0].data.tolist() == [0.0, 2.0]

    def test_conv_all_ones(self):
        x, w = np.ones((1, 1, 3, 3), np.float32), np.ones((1, 1, 2, 2), np.float32)
        expected = conv2d_nchw(x, w)
        out = run(lambda b: [b.op("Conv2D", [b.const(x), b.const(w)], stride=(1, 1),
                                  pad=(0, 0, 0, 0))])
        assert out[0].data.shape == expected.shape == (1, 1, 2, 2)
        np.testing.assert_array_equal(out[0].data, expected.astype(np.float32))
        assert (out[0].data == 4.0).all()

    def test_random_conv_matches_brute_force(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((1, 2, 5, 5)).astype(np.float32)
        w = rng.standard_normal((3, 2, 3, 3)).astype(np.float32)
        out = run(lambda b: [b.op("Conv2D", [b.const(x), b.const(w)], stride=(2, 1),
                                  pad=(1, 0, 1, 2))])
        np.testing.assert_allclose(out[0].data, conv2d_nchw(x, w, (2, 1), (1, 0, 1, 2)),
                                   rtol=1e-5, atol=1e-5)

    def test_int_division_by_zero(self):
        with pytest.raises(NumericDomain):
            run(lambda b: [b.op("Div", [b.const(np.int32([4])), b.const(np.int32([0]))])])

    def test_float_division_by_zero_is_ieee(self):
        out = run(lambda b: [b.op("Div", [b.const(np.float32([1.0, 0.0])),
                                          b.const(np.float32([0.0, 0.0]))])])
        assert out[0].data[0] == np.inf and np.isnan(out[0].data[1])

    def test_i8_wraps(self):
        out = run(lambda b: [b.op("Add", [b.const(np.int8([100, -100])),
                                          b.const(np.int8([100, -100]))])])
        assert out[0].data.tolist() == [-56, 56]

    def test_inputs_bound_by_name(self):
        b = GraphBuilder()
        x = b.input("x", I32, (2,))
        g = b.build([b.op("Neg", [x])])
        out = interpret_graph(g, {"x": TensorValue(tt(I32, 2), [3, -4])})
        assert out[0].data.tolist() == [-3, 4]

    @given(st.integers(0, 2**31 - 1))
    def test_type_soundness(self, seed):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, 5, 20)
        try:
            outs = interpret_graph(g, random_inputs(g, rng))
        except NumericDomain:
            return
        assert [o.ttype for o in outs] == [g.nodes[o].out_type for o in g.outputs]


class TestText:
    @given(st.integers(0, 2**31 - 1))
    def test_round_trip(self, seed):
        g = random_graph(np.random.default_rng(seed), 5, 30)
        text = serialize_graph(g)
        back = parse_graph(text)
        assert serialize_graph(back) == text
        assert back.nodes == g.nodes and back.outputs == g.outputs

    def test_missing_outputs_is_parse_error(self):
        b = GraphBuilder("g")
        x = b.input("x", F32, (2,))
        text = serialize_graph(b.build([b.op("ReLU", [x])]))
        body = "\n".join(line for line in text.splitlines() if not line.startswith("outputs"))
        with pytest.raises(ParseError):
            parse_graph(body)

    def test_parse_error_has_position(self):
        with pytest.raises(ParseError) as info:
            parse_graph("graph g\nnode 0 Input inputs=[] params={name=x} type=F32[2\n"
                        "outputs=[0]\n")
        assert info.value.line == 2

    def test_bundled_graphs_validate(self, data_dir):
        files = sorted((data_dir / "passtests").glob("*.g"))
        files += sorted((data_dir / "regressions").glob("*.g"))
        assert len(files) >= 20
        for f in files:
            assert validate_graph(load_graph(f)) == [], f.name
