"""Low-level stage with the bundled stand-in suggestion provider.

    python demos/mutate_with_provider.py [good|garbage|unsafe]

The provider runs as a child process speaking newline-delimited JSON. A
garbage provider is ignored (builtin fallback) and an unsafe rule is
rejected by the semantic-preservation probe.
"""

import sys

import numpy as np

from stagefuzz.campaign import CampaignConfig, run_campaign
from stagefuzz.campaign.regress import data_dir
from stagefuzz.harmony import (Provider, build_seed_pool, doc_constraints, load_catalog,
                               provider_rules)
from stagefuzz.loopir import load_loop

mode = sys.argv[1] if len(sys.argv) > 1 else "good"
cmd = f"{sys.executable} -m stagefuzz.harmony.echo_provider --mode {mode}"
docs = data_dir("docs", "llpasses")
catalog = load_catalog(doc_constraints(docs))
print("catalog:", {t: ("verified" if e["verified"] else "single-source")
                   for t, e in catalog.summary().items()})

with Provider(cmd, timeout=5) as prov:
    pool = build_seed_pool(catalog, np.random.default_rng(0), 10, prov)
    sample = load_loop(data_dir("seeds", "wavefront_8.lir" if mode == "unsafe"
                                else "matmul_16.lir"))
    accepted, rejected = provider_rules(prov, sample, np.random.default_rng(0))
print("seeds:", [p.name for p in pool])
print("accepted provider rules:", [r.id for r in accepted])
print("rejected:", rejected)

r = run_campaign(CampaignConfig(stage="llopt", budget=200, seed=7, provider=cmd,
                                bugs=("B1", "B2", "B3", "B4")))
print("passes fired:", r["stages"]["llopt"]["passes"])
print("bugs detected:", r["bugs_detected"])
