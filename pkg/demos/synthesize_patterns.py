"""High-level stage: mine patterns from pass tests and splice them into random graphs.

    python demos/synthesize_patterns.py
"""

import numpy as np

from stagefuzz.campaign.regress import data_dir
from stagefuzz.graph import serialize_graph
from stagefuzz.oatest import capture_patterns, fired_rules, synthesize_batch

patterns = capture_patterns(data_dir("passtests"))
print(f"{len(patterns)} patterns:")
for p in patterns:
    print(f"  {p.source[0].value:<18} {p.source[1]:<26} frontier {len(p.frontier)}")

rng = np.random.default_rng(0)
guided = synthesize_batch(patterns, 100, rng)
plain = synthesize_batch(patterns, 100, np.random.default_rng(0), use_patterns=False)
print(f"rule ids fired by 100 graphs: guided {len(fired_rules(guided))}, "
      f"pattern-free {len(fired_rules(plain))}")
print("\nfirst synthesized graph:\n" + serialize_graph(guided[0]))
