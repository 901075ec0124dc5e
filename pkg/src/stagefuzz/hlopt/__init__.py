"""Hardware-independent optimization passes over the graph IR."""

from . import passes  # noqa: F401  (registers the passes)
from .core import (FIXPOINT_CAP, LEVEL2_ORDER, PassId, RewriteTrace, pipeline_steps,
                   run_hl_pass, run_hl_pipeline)

__all__ = ["PassId", "RewriteTrace", "run_hl_pass", "run_hl_pipeline", "pipeline_steps",
           "LEVEL2_ORDER", "FIXPOINT_CAP"]
