import json
import zlib

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stagefuzz.errors import CorpusUnreadable, SchemaViolation, ShapeMismatch
from stagefuzz.graph import infer_shape, interpret_graph, validate_graph
from stagefuzz.graph.types import DType, TensorType
from stagefuzz.opera import (cluster_instances, feature_vector, generate_corpus, ingest_corpus,
                             input_values, order_records, parse_record, prioritize, signature,
                             wrap_instance)
from stagefuzz.opera.cluster import BUCKETS, PARAM_NAMES, SLICES, Cluster

CONV = {"kind": "Conv2D", "params": {"stride": [1, 1], "pad": [1, 1]},
        "inputs": [{"shape": [1, 3, 8, 8], "dtype": "F32", "src": {"random": 7}},
                   {"shape": [4, 3, 3, 3], "dtype": "F32", "src": {"random": 8}}],
        "origin": "t_conv_basic"}


def relu(shape, origin="r"):
    return parse_record({"kind": "ReLU", "params": {},
                         "inputs": [{"shape": list(shape), "dtype": "F32",
                                     "src": {"random": 1}}], "origin": origin})


@pytest.fixture(scope="module")
def corpus():
    from stagefuzz.campaign.regress import data_dir
    return ingest_corpus(data_dir("corpus", "operators.jsonl"))


def test_bundled_corpus_ingests_cleanly(data_dir):
    skipped = []
    recs = ingest_corpus(data_dir / "corpus" / "operators.jsonl", skipped)
    assert len(recs) >= 500 and skipped == []


def test_malformed_lines_are_skipped(tmp_path):
    f = tmp_path / "c.jsonl"
    f.write_text("\n".join([json.dumps(CONV), json.dumps({**CONV, "kind": "Conv3D"}),
                            "{not json", json.dumps({"kind": "ReLU"}), json.dumps(CONV)]))
    skipped = []
    recs = ingest_corpus(f, skipped)
    assert len(recs) == 2
    assert [n for n, _ in skipped] == [2, 3, 4]


def test_unknown_kind_is_schema_violation():
    with pytest.raises(SchemaViolation):
        parse_record({**CONV, "kind": "Conv3D"})


def test_empty_and_missing_files(tmp_path):
    (tmp_path / "e.jsonl").write_text("")
    assert ingest_corpus(tmp_path / "e.jsonl") == []
    with pytest.raises(CorpusUnreadable):
        ingest_corpus(tmp_path / "nope.jsonl")


def test_wrap_conv():
    g = wrap_instance(parse_record(CONV))
    assert len(g.nodes) == 3 and validate_graph(g) == []
    expected = infer_shape("Conv2D", {"stride": [1, 1], "pad": [1, 1]},
                           [TensorType(DType.F32, (1, 3, 8, 8)),
                            TensorType(DType.F32, (4, 3, 3, 3))])
    assert g[g.outputs[0]].out_type == expected
    assert expected.shape == (1, 4, 8, 8)


def test_wrap_relu():
    g = wrap_instance(relu((5,)))
    assert len(g.nodes) == 2 and validate_graph(g) == []


def test_wrap_shape_mismatch_is_negative_test():
    rec = parse_record({"kind": "MatMul", "params": {},
                        "inputs": [{"shape": [3, 4], "dtype": "F32", "src": {"random": 1}},
                                   {"shape": [5, 6], "dtype": "F32", "src": {"random": 2}}]})
    with pytest.raises(ShapeMismatch):
        wrap_instance(rec)


def test_inline_data_is_used():
    rec = parse_record({"kind": "Neg", "params": {},
                        "inputs": [{"shape": [3], "dtype": "I32", "src": {"data": [1, -2, 3]}}]})
    out = interpret_graph(wrap_instance(rec), input_values(rec))
    assert out[0].data.tolist() == [-1, 2, -3]


def test_identical_records_same_vector():
    a, b = parse_record(CONV), parse_record(CONV)
    assert (feature_vector(a) == feature_vector(b)).all()


def test_relu_rank_only_differs_in_rank_slot():
    diff = np.nonzero(feature_vector(relu((5,))) != feature_vector(relu((5, 2))))[0]
    assert diff.size == 2
    assert all(SLICES["ranks"].start <= i < SLICES["ranks"].stop for i in diff)


def test_stride_buckets():
    # buckets computed directly from CRC-32 of the canonical "name=value" key
    expected = {1: zlib.crc32(b"stride=[1, 1]") % 16, 2: zlib.crc32(b"stride=[2, 2]") % 16}
    assert expected == {1: 1, 2: 2}
    s2 = parse_record({**CONV, "params": {"stride": [2, 2], "pad": [1, 1]}})
    v1, v2 = feature_vector(parse_record(CONV)), feature_vector(s2)
    base = SLICES["params"].start + PARAM_NAMES.index("stride") * BUCKETS
    assert v1[base + 1] == 1 and v2[base + 2] == 1
    assert set(np.nonzero(v1 != v2)[0]) == {base + 1, base + 2}


def test_identical_signatures_share_cluster():
    cs = cluster_instances([relu((4,), str(k)) for k in range(3)])
    assert len(cs) == 1 and cs[0].members == [0, 1, 2]


def test_relu_and_conv_split():
    assert len(cluster_instances([relu((4,)), parse_record(CONV)])) >= 2


def test_round_robin_largest_first():
    a, b = Cluster((), ("A",), [0, 1, 2]), Cluster((), ("B",), [3])
    order = prioritize([b, a], 0)
    assert order[1] == 3
    assert sorted(order) == [0, 1, 2, 3]
    assert [i in (0, 1, 2) for i in order] == [True, False, True, True]


def test_single_cluster_is_seeded_permutation():
    c = Cluster((), ("A",), list(range(10)))
    assert prioritize([c], 5) == prioritize([c], 5)
    assert sorted(prioritize([c], 5)) == list(range(10))


def test_threshold_merges_clusters(corpus):
    exact = cluster_instances(corpus)
    merged = cluster_instances(corpus, 0.05)
    assert len(merged) < len(exact)
    assert sorted(i for c in merged for i in c.members) == list(range(len(corpus)))


def test_bundled_clustering_is_stable(corpus):
    a = [c.members for c in cluster_instances(corpus)]
    b = [c.members for c in cluster_instances(corpus)]
    assert a == b and len(a) == 61


def test_prefix_coverage_dominates_random(corpus):
    order = order_records(corpus, "diversity", 42)
    n = len(cluster_instances(corpus))

    def coverage(o):
        seen, out = set(), []
        for i in o:
            seen.add(signature(corpus[i]))
            out.append(len(seen))
        return out

    div = coverage(order)
    assert div[:n] == list(range(1, n + 1))
    for t in range(20):
        rnd = coverage(order_records(corpus, "random", t))
        assert all(d >= r for d, r in zip(div, rnd))


@given(st.integers(0, 10_000))
def test_order_is_partition(seed):
    recs = generate_corpus(seed, tail=20)
    order = order_records(recs, "diversity", seed)
    assert sorted(order) == list(range(len(recs)))
    k = len(cluster_instances(recs))
    assert len({signature(recs[i]) for i in order[:k]}) == k


@given(st.integers(0, 10_000))
def test_wrap_never_crashes(seed):
    for r in generate_corpus(seed, tail=10):
        try:
            g = wrap_instance(r)
        except ShapeMismatch:
            continue
        assert validate_graph(g) == []
