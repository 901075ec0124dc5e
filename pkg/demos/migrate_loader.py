"""Loader stage: ingest the bundled corpus, cluster it, and compare test orders.

    python demos/migrate_loader.py
"""

from stagefuzz.campaign import CampaignConfig, run_campaign
from stagefuzz.campaign.regress import data_dir
from stagefuzz.opera import cluster_instances, ingest_corpus, wrap_instance

records = ingest_corpus(data_dir("corpus", "operators.jsonl"))
clusters = cluster_instances(records)
print(f"{len(records)} operator instances in {len(clusters)} clusters")
print("one wrapped instance:", wrap_instance(records[0]).name)

for order in ("diversity", "random", "fifo"):
    r = run_campaign(CampaignConfig(stage="loader", budget=len(records), seed=1, order=order,
                                    bugs=("L1", "L2", "L3", "L4")))
    firsts = {}
    for s in r["signatures"]:
        for b in s["bugs"]:
            firsts.setdefault(b, s["first_hit"])
    print(f"{order:>9}: first hits {dict(sorted(firsts.items()))}")
