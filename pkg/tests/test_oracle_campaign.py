import json

import numpy as np
import pytest

from stagefuzz import bugs
from stagefuzz.campaign import (CampaignConfig, Stage, Tag, TestCase, Verdict, compare_values,
                                content_hash, dedup_key, diff_test, load_case, make_test,
                                replay, run_campaign, run_regressions)
from stagefuzz.campaign.run import build_context
from stagefuzz.errors import ConfigError
from stagefuzz.graph import DType, GraphBuilder, TensorType, TensorValue
from stagefuzz.opera import parse_record


def tv(dtype, data):
    a = np.asarray(data, dtype=np.float32 if dtype is DType.F32 else np.int32)
    return TensorValue(TensorType(dtype, a.shape), a)


def add_graph():
    b = GraphBuilder("add")
    return b.build([b.op("Add", [b.input("x", DType.F32, (4,)), b.input("y", DType.F32, (4,))])])


class TestCompare:
    def test_int_exact(self):
        d = compare_values([tv(DType.I32, [1, 2, 3])], [tv(DType.I32, [1, 2, 4])])
        assert d.index == 2

    def test_float_tolerance(self):
        ref = [tv(DType.F32, [1.0, 100.0])]
        assert compare_values(ref, [tv(DType.F32, [1.0 + 5e-7, 100.0 + 5e-4])]) is None
        assert compare_values(ref, [tv(DType.F32, [1.0 + 1e-4, 100.0])]).index == 0

    def test_intrinsic_tolerance_is_wider(self):
        ref, got = [tv(DType.F32, [1.0])], [tv(DType.F32, [1.00005])]
        assert compare_values(ref, got) is not None
        assert compare_values(ref, got, intrinsics=True) is None

    def test_nan_placement(self):
        assert compare_values([tv(DType.F32, [np.nan])], [tv(DType.F32, [np.nan])]) is None
        assert compare_values([tv(DType.F32, [np.nan])], [tv(DType.F32, [0.0])]) is not None


class TestDiffTest:
    def test_valid_add_passes(self):
        v = diff_test(TestCase(0, Stage.hlopt, add_graph(), 1))
        assert v.tag is Tag.Pass and v.bugs_hit == frozenset()

    def test_h1_mismatch_with_index(self, data_dir):
        tc = load_case(data_dir / "regressions" / "H1_fold_i8_overflow.g")
        with bugs.activate(["H1"]):
            v = diff_test(tc)
        assert v.tag is Tag.Mismatch and v.index is not None
        assert (v.pass_id, v.rule_id) == ("ConstFold", "fold.binary")

    def test_negative_record_missed_rejection(self, data_dir):
        tc = load_case(data_dir / "regressions" / "L4_transpose_dup_perm.jsonl")
        assert diff_test(tc).tag is Tag.Pass
        with bugs.activate(["L4"]):
            assert diff_test(tc).tag is Tag.MissedRejection

    def test_negative_matmul_rejected(self):
        rec = parse_record({"kind": "MatMul", "params": {},
                            "inputs": [{"shape": [3, 4], "dtype": "F32", "src": {"random": 1}},
                                       {"shape": [5, 6], "dtype": "F32", "src": {"random": 2}}]})
        assert diff_test(TestCase(0, Stage.loader, rec, 0)).tag is Tag.Pass

    def test_b2_crash(self, data_dir):
        tc = load_case(data_dir / "regressions" / "B2_tile_remainder.lir")
        with bugs.activate(["B2"]):
            v = diff_test(tc)
        assert v.tag in (Tag.Crash, Tag.Mismatch) and v.pass_id == "TileLoops"


class TestDedup:
    def test_digits_ignored(self):
        tc = TestCase(0, Stage.hlopt, None, 0)
        a = Verdict(Tag.Crash, "bad node 12", "CSE", "cse.merge")
        b = Verdict(Tag.Crash, "bad node 7", "CSE", "cse.merge")
        assert dedup_key(a, tc) == dedup_key(b, tc)

    def test_tag_distinguishes(self):
        tc = TestCase(0, Stage.hlopt, None, 0)
        a = Verdict(Tag.Crash, "x", "CSE", "cse.merge")
        b = Verdict(Tag.Mismatch, "x", "CSE", "cse.merge")
        assert dedup_key(a, tc) != dedup_key(b, tc)

    def test_pass_has_no_signature(self):
        with pytest.raises(ValueError):
            dedup_key(Verdict(Tag.Pass), TestCase(0, Stage.hlopt, None, 0))

    def test_duplicate_fixture_pair(self, data_dir):
        keys = set()
        with bugs.activate(["B2"]):
            for f in sorted((data_dir / "duplicates").glob("*.lir")):
                tc = load_case(f)
                v = diff_test(tc)
                assert not v.ok
                keys.add(dedup_key(v, tc))
        assert len(keys) == 1


class TestBugs:
    def test_registry_parsing(self, monkeypatch):
        assert bugs.seeded_bug_registry("L1,h2") == {"L1", "H2"}
        assert bugs.seeded_bug_registry("ALL") == set(bugs.BUG_IDS)
        monkeypatch.setenv(bugs.ENV_VAR, "B3")
        assert bugs.seeded_bug_registry(None) == {"B3"}
        assert bugs.seeded_bug_registry("") == frozenset()
        with pytest.raises(ConfigError):
            bugs.seeded_bug_registry("Z9")

    def test_all_off_by_default(self):
        assert bugs.active() == frozenset()
        assert len(bugs.BUG_IDS) == 12

    def test_every_regression_flips(self):
        results = run_regressions()
        assert sorted(r.bug for r in results) == sorted(bugs.BUG_IDS)
        assert all(r.flips for r in results)


class TestCampaign:
    def test_budget_zero(self):
        r = run_campaign(CampaignConfig(budget=0))
        assert r["tests_run"] == 0 and r["signatures"] == [] and r["verdicts"] == {}

    def test_determinism_and_jobs(self):
        cfg = dict(stage="all", budget=60, seed=7, bugs=("B2", "H1", "L1"))
        a = run_campaign(CampaignConfig(**cfg))
        b = run_campaign(CampaignConfig(**cfg))
        c = run_campaign(CampaignConfig(**cfg, jobs=2))
        assert a["content_hash"] == b["content_hash"] == c["content_hash"]
        assert a["content_hash"] == content_hash(a)

    def test_hash_covers_verdicts(self):
        a = run_campaign(CampaignConfig(stage="llopt", budget=20))
        b = dict(a, verdicts={"Pass": 19, "Crash": 1})
        assert content_hash(b) != a["content_hash"]

    def test_test_i_is_independent_of_budget(self):
        small = build_context(CampaignConfig(stage="hlopt", budget=5))
        large = build_context(CampaignConfig(stage="hlopt", budget=50))
        assert make_test(small, "hlopt", 3) == make_test(large, "hlopt", 3)

    def test_clean_campaign_passes(self):
        r = run_campaign(CampaignConfig(stage="all", budget=150, seed=3))
        assert r["verdicts"] == {"Pass": 150}
        assert set(r["stages"]) == {"loader", "hlopt", "llopt"}

    def test_repros_replay(self, tmp_path):
        r = run_campaign(CampaignConfig(stage="all", budget=120, bugs=tuple(bugs.BUG_IDS),
                                        out=str(tmp_path)))
        assert (tmp_path / "report.json").exists()
        assert json.loads((tmp_path / "report.json").read_text()) == r
        assert r["signatures"]
        for s in r["signatures"]:
            recorded, got = replay(tmp_path / s["repro"])
            assert recorded is got is Tag(s["tag"])

    @pytest.mark.parametrize("bad", [dict(stage="gpu"), dict(order="lifo"), dict(budget=-1),
                                     dict(bugs=("Q1",)), dict(jobs=0)])
    def test_config_errors(self, bad):
        with pytest.raises(ConfigError):
            run_campaign(CampaignConfig(**bad))

    def test_unreadable_corpus(self, tmp_path):
        with pytest.raises(ConfigError):
            run_campaign(CampaignConfig(stage="loader", budget=5,
                                        corpus=str(tmp_path / "missing.jsonl")))

    def test_corpus_skips_reported(self, tmp_path, data_dir):
        lines = (data_dir / "corpus" / "operators.jsonl").read_text().splitlines()[:20]
        f = tmp_path / "c.jsonl"
        f.write_text("\n".join(lines[:10] + ["garbage", '{"kind":"Conv3D"}'] + lines[10:]))
        r = run_campaign(CampaignConfig(stage="loader", budget=25, corpus=str(f)))
        assert r["corpus_skipped"] == 2 and r["tests_run"] == 25
