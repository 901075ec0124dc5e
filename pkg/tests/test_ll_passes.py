import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stagefuzz import bugs
from stagefuzz.campaign import Tag, diff_test, load_case
from stagefuzz.campaign.oracle import compare_values, loop_inputs
from stagefuzz.harmony import build_seed_pool, load_catalog
from stagefuzz.llopt import LEVEL2_ORDER, LLPassId, run_ll_pass, run_ll_pipeline
from stagefuzz.llopt.analysis import carries_dependence
from stagefuzz.loopir import For, interpret_loop, load_loop, parse_loop, validate_loop, walk


def prog(trip, ann, body="out[i] = (x[i] + y[i])", dtype="F32"):
    return parse_loop(f"""program p
input x: {dtype}[{trip}]
input y: {dtype}[{trip}]
output out: {dtype}[{trip}]
body:
  for i in 0..{trip} {ann}:
    {body}
""")


def same(p, q, seeds=range(3), intrinsics=False):
    for s in seeds:
        x = loop_inputs(p, s)
        a, b = interpret_loop(p, x), interpret_loop(q, x)
        if compare_values([a[o.name] for o in p.outputs], [b[o.name] for o in p.outputs],
                          intrinsics) is not None:
            return False
    return True


def loops(p):
    return [s for s in walk(p.body) if isinstance(s, For)]


def test_unroll_trip8_by4():
    p = prog(8, "@unroll(4)")
    out, traces = run_ll_pass(LLPassId.UnrollExpand, p)
    assert [t.rule_id for t in traces] == ["unroll.expand"]
    (main,) = loops(out)
    assert main.trip == 2 and len(main.body) == 4
    assert same(p, out)


def test_unroll_trip10_by4_has_remainder():
    p = prog(10, "@unroll(4)")
    out, traces = run_ll_pass(LLPassId.UnrollExpand, p)
    assert {"unroll.expand", "unroll.remainder"} <= {t.rule_id for t in traces}
    main, rem = loops(out)
    assert (main.trip, len(main.body), rem.trip) == (2, 4, 2)
    assert same(p, out)


def test_vectorize_recurrence_is_demoted():
    p = parse_loop("""program rec
input x: F32[16]
output b: F32[16]
body:
  b[0] = x[0]
  for i in 1..16 @vectorize(4):
    b[i] = (b[(i - 1)] + f32(1.0))
""")
    out, traces = run_ll_pass(LLPassId.VectorizeLegalize, p)
    assert "vec.demote" in {t.rule_id for t in traces}
    assert all(f.ann.kind == "serial" for f in loops(out))


def test_vectorize_legal_loop_is_kept():
    out, traces = run_ll_pass(LLPassId.VectorizeLegalize, prog(16, "@vectorize(4)"))
    assert "vec.legal" in {t.rule_id for t in traces}


def test_tile_requires_min_trip():
    _, short = run_ll_pass(LLPassId.TileLoops, prog(8, "@parallel"))
    out, long = run_ll_pass(LLPassId.TileLoops, prog(32, "@parallel"))
    assert not short
    assert "tile.split" in {t.rule_id for t in long}
    assert [f.trip for f in loops(out)] == [4, 8]


def test_intrinsic_map_uses_fma():
    p = prog(8, "", "out[i] = ((x[i] * y[i]) + x[i])")
    out, traces = run_ll_pass(LLPassId.IntrinsicMap, p)
    assert [t.rule_id for t in traces] == ["intrin.fma"]
    assert "fma" in out.intrinsics_used
    assert same(p, out, intrinsics=True)


def test_reorder_respects_dependence(data_dir):
    p = load_loop(data_dir / "seeds" / "wavefront_8.lir")
    out, traces = run_ll_pass(LLPassId.ReorderLoops, p)
    assert not traces and out == p


def test_level0_identity(data_dir):
    p = load_loop(data_dir / "seeds" / "matmul_16.lir")
    assert run_ll_pipeline(0, p) == (p, [])


def test_matmul_seed_fires_all_six(data_dir):
    p = load_loop(data_dir / "seeds" / "matmul_16.lir")
    out, traces = run_ll_pipeline(2, p)
    assert {t.pass_id for t in traces} == set(LLPassId)
    assert validate_loop(out) == []
    assert same(p, out, intrinsics=True)


def test_level2_order():
    assert [p.value for p in LEVEL2_ORDER] == ["TileLoops", "ReorderLoops", "VectorizeLegalize",
                                               "UnrollExpand", "MemLatencyHide", "IntrinsicMap"]


def test_unannotated_add_only_heuristics():
    p = prog(12, "")
    out, traces = run_ll_pipeline(2, p)
    assert same(p, out)
    assert all(t.rule_id in {"tile.split", "reorder.interchange", "intrin.fma"}
               for t in traces)


@pytest.mark.parametrize("bug,file,where", [
    ("B1", "B1_unroll_remainder.lir", "UnrollExpand"),
    ("B2", "B2_tile_remainder.lir", "TileLoops"),
    ("B3", "B3_vectorize_recurrence.lir", "VectorizeLegalize"),
    ("B4", "B4_mul_of_sum.lir", "IntrinsicMap")])
def test_seeded_bug_is_localized(data_dir, bug, file, where):
    tc = load_case(data_dir / "regressions" / file)
    assert diff_test(tc).tag is Tag.Pass
    with bugs.activate([bug]):
        v = diff_test(tc)
    assert v.tag is not Tag.Pass
    assert v.pass_id == where and bug in v.bugs_hit


_POOL = build_seed_pool(load_catalog(), np.random.default_rng(11), size=40)


@given(st.sampled_from(_POOL), st.sampled_from(list(LLPassId)), st.integers(0, 1000))
def test_single_pass_preserves_semantics(p, pid, seed):
    out, _ = run_ll_pass(pid, p)
    assert validate_loop(out) == []
    assert same(p, out, [seed], intrinsics=pid is LLPassId.IntrinsicMap)
    if pid is LLPassId.UnrollExpand:
        assert not any(f.ann.kind == "unroll" for f in loops(out))
    if pid is LLPassId.VectorizeLegalize:
        assert not any(f.ann.kind == "vectorize" and carries_dependence(f) for f in loops(out))
