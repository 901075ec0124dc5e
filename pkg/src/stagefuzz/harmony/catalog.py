"""Operator-template constraint catalog merged from several knowledge sources."""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import ConfigError, DocParseError

log = logging.getLogger(__name__)

TEMPLATES = ("elementwise", "reduction", "matmul", "conv", "stencil")
FIELDS = ("extents", "dtypes", "lanes", "unroll", "pipeline", "annotations")

_ANN = {"outer": ["parallel", "unroll"], "inner": ["vectorize", "unroll", "parallel"]}
BUILTIN: dict[str, dict] = {
    "elementwise": {"extents": {"n": [4, 40], "rows": [1, 6]}, "dtypes": ["F32", "I32", "I8"],
                    "lanes": [2, 4, 8], "unroll": [2, 4, 8], "pipeline": [2, 3],
                    "annotations": _ANN},
    "reduction": {"extents": {"rows": [2, 20], "n": [3, 24]}, "dtypes": ["F32", "I32"],
                  "lanes": [2, 4, 8], "unroll": [2, 4, 8], "pipeline": [2, 3],
                  "annotations": {"outer": ["parallel", "unroll"], "inner": ["unroll"]}},
    "matmul": {"extents": {"m": [2, 20], "n": [2, 12], "k": [2, 12]}, "dtypes": ["F32", "I32"],
               "lanes": [2, 4, 8], "unroll": [2, 4, 8], "pipeline": [2, 3],
               "annotations": {"outer": ["parallel"], "inner": ["unroll"]}},
    "conv": {"extents": {"n": [8, 40], "taps": [2, 5]}, "dtypes": ["F32", "I32"],
             "lanes": [2, 4, 8], "unroll": [2, 4, 8], "pipeline": [2, 3],
             "annotations": {"outer": ["parallel", "unroll"], "inner": ["unroll"]}},
    "stencil": {"extents": {"n": [6, 40]}, "dtypes": ["F32"],
                "lanes": [2, 4, 8], "unroll": [2, 4, 8], "pipeline": [2, 3],
                "annotations": {"outer": ["unroll", "vectorize"], "inner": []}},
}


@dataclass
class CatalogEntry:
    template: str
    constraints: dict
    sources: set = field(default_factory=set)  # builtin | docs | provider
    disputed: bool = False
    conflicts: list = field(default_factory=list)  # (field, source, value)

    @property
    def verified(self) -> bool:
        return not self.disputed and len(self.sources) >= 2

    def extent(self, name: str) -> tuple[int, int]:
        lo, hi = self.constraints["extents"][name]
        return int(lo), int(hi)


@dataclass
class ConstraintCatalog:
    entries: dict[str, CatalogEntry]

    def usable(self) -> list[str]:
        return [t for t, e in self.entries.items() if not e.disputed]

    def entry(self, template: str) -> CatalogEntry:
        e = self.entries.get(template)
        if e is None:
            raise ConfigError(f"template {template!r} not in catalog")
        if e.disputed:
            raise ConfigError(f"template {template!r} is disputed and cannot seed programs")
        return e

    def summary(self) -> dict:
        return {t: {"sources": sorted(e.sources), "verified": e.verified,
                    "disputed": e.disputed} for t, e in sorted(self.entries.items())}


def _check(template: str, fields: dict, source: str) -> dict:
    if template not in TEMPLATES:
        raise DocParseError(f"{source}: unknown template {template!r}")
    if not isinstance(fields, dict):
        raise DocParseError(f"{source}: constraints for {template} must be a mapping")
    unknown = set(fields) - set(FIELDS)
    if unknown:
        raise DocParseError(f"{source}: unknown constraint fields {sorted(unknown)}")
    return fields


def _merge(entry: CatalogEntry, fields: dict, source: str) -> None:
    for name, value in fields.items():
        have = entry.constraints.get(name)
        if have is None:
            entry.constraints[name] = copy.deepcopy(value)
        elif have != value:
            entry.disputed = True
            entry.conflicts.append((name, source, value))
    entry.sources.add(source)


def load_catalog(docs_constraints: list[tuple[str, dict]] | None = None,
                 provider_cache=None, builtin: dict | None = None) -> ConstraintCatalog:
    """Merge the builtin catalog with constraints stated in the pass docs and,
    optionally, a provider cache file (YAML or JSON mapping template to
    fields). Any field on which two sources disagree marks the template
    disputed."""
    entries = {t: CatalogEntry(t, copy.deepcopy(f), {"builtin"})
               for t, f in (BUILTIN if builtin is None else builtin).items()}
    for origin, block in docs_constraints or []:
        for template, fields in block.items():
            _check(template, fields, origin)
            if template not in entries:
                entries[template] = CatalogEntry(template, {})
            _merge(entries[template], fields, "docs")
    if provider_cache is not None:
        path = Path(provider_cache)
        try:
            text = path.read_text()
            data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
        except (OSError, ValueError, yaml.YAMLError) as exc:
            log.warning("provider cache %s unreadable: %s", path, exc)
            data = None
        for template, fields in (data or {}).items():
            try:
                _check(template, fields, str(path))
            except DocParseError as exc:
                log.warning("%s", exc)
                continue
            if template not in entries:
                entries[template] = CatalogEntry(template, {})
            _merge(entries[template], fields, "provider")
    for e in entries.values():
        missing = [f for f in FIELDS if f not in e.constraints]
        if missing and not e.disputed:
            e.disputed = True
            e.conflicts.append(("incomplete", "merge", missing))
        if e.disputed:
            log.info("catalog entry %s disputed: %s", e.template, e.conflicts)
    return ConstraintCatalog(entries)
