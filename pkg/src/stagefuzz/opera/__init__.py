"""Operator-instance migration: corpus ingest, wrapping and prioritization."""

from .cluster import (Cluster, cluster_instances, feature_vector, order_records, prioritize,
                      random_order, signature)
from .corpus import generate_corpus
from .records import (InputSpec, OperatorInstanceRecord, ingest_corpus, parse_record,
                      parse_record_line, write_corpus)
from .wrap import input_values, wrap_instance

__all__ = [
    "Cluster", "InputSpec", "OperatorInstanceRecord", "cluster_instances", "feature_vector",
    "generate_corpus", "ingest_corpus", "input_values", "order_records", "parse_record",
    "parse_record_line", "prioritize", "random_order", "signature", "wrap_instance",
    "write_corpus",
]
