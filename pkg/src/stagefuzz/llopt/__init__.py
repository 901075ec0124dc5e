"""Hardware-oriented loop passes and their pipeline."""

from . import passes  # noqa: F401
from .core import LEVEL2_ORDER, LLPassId, LLTrace, pipeline_steps, run_ll_pass, run_ll_pipeline

__all__ = ["LEVEL2_ORDER", "LLPassId", "LLTrace", "pipeline_steps", "run_ll_pass",
           "run_ll_pipeline"]
