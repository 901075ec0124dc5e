"""Catalog-guided loop-IR seeds and documentation-derived mutations."""

from .campaign import baseline_programs, harmony_campaign, harmony_programs, mutate_stack
from .catalog import BUILTIN, TEMPLATES, CatalogEntry, ConstraintCatalog, load_catalog
from .docs import doc_constraints, extract_rules, load_docs, parse_doc, provider_rules
from .provider import Provider
from .rules import MutationRule, check_rule, matching_sites, mutate, probe_equivalent, probe_inputs
from .seeds import build_seed_pool, bundled_seeds, canonical_hash, generate_seed

__all__ = [
    "BUILTIN", "TEMPLATES", "CatalogEntry", "ConstraintCatalog", "MutationRule", "Provider",
    "baseline_programs", "build_seed_pool", "bundled_seeds", "canonical_hash", "check_rule",
    "doc_constraints", "extract_rules", "generate_seed", "harmony_campaign", "harmony_programs",
    "load_catalog", "load_docs", "matching_sites", "mutate", "mutate_stack", "parse_doc",
    "probe_equivalent", "probe_inputs", "provider_rules",
]
