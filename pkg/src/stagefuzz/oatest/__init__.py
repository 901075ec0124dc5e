"""Pattern capture from pass tests and pattern-guided graph synthesis."""

from .patterns import (CaptureResult, PassTest, Pattern, capture, capture_patterns,
                       derive_pattern, dumps_patterns, load_passtest, load_patterns,
                       loads_patterns, save_patterns)
from .synth import (Fix, Slot, SpliceMode, SynthesisPoint, fired_rules, fix_dangling,
                    synthesize, synthesize_batch)

__all__ = [
    "CaptureResult", "Fix", "PassTest", "Pattern", "Slot", "SpliceMode", "SynthesisPoint",
    "capture", "capture_patterns", "derive_pattern", "dumps_patterns", "fired_rules",
    "fix_dangling", "load_passtest", "load_patterns", "loads_patterns", "save_patterns",
    "synthesize", "synthesize_batch",
]
