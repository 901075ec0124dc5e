"""Verdict oracles, regression fixtures and the campaign driver."""

from .oracle import (STAGE_CODES, Divergence, Stage, Tag, TestCase, Verdict, compare_values,
                     dedup_key, diff_test)
from .regress import load_case, replay, run_regressions, write_repro
from .run import CampaignConfig, content_hash, failures, make_test, run_campaign

__all__ = [
    "STAGE_CODES", "CampaignConfig", "Divergence", "Stage", "Tag", "TestCase", "Verdict",
    "compare_values", "content_hash", "dedup_key", "diff_test", "failures", "load_case",
    "make_test", "replay", "run_campaign", "run_regressions", "write_repro",
]
