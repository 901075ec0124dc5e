"""Pass documentation with YAML front-matter: mutation rules and constraints.

A doc starts with::

    ---
    pass: VectorizeLegalize
    rules:
      - id: vectorize-innermost
        trigger: vec.legal
        precondition: innermost and straight-line and dependence-free and trip % 4 == 0
        action: attach vectorize(4)
        example: |
          ...
    constraints:              # optional, merged into the catalog
      elementwise: {lanes: [2, 4, 8]}
    ---
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import yaml

from ..errors import DocParseError, RuleRejected
from ..llopt import LLPassId
from .rules import MutationRule, check_rule

log = logging.getLogger(__name__)

REQUIRED = ("id", "trigger", "precondition", "action")


@dataclass
class PassDoc:
    path: Path
    pass_id: LLPassId
    rules: list[MutationRule]
    constraints: dict


def front_matter(text: str, name: str = "<doc>") -> dict:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "---":
        raise DocParseError(f"{name}: missing front-matter")
    try:
        end = next(i for i in range(1, len(lines)) if lines[i].strip() == "---")
    except StopIteration:
        raise DocParseError(f"{name}: unterminated front-matter") from None
    try:
        data = yaml.safe_load("\n".join(lines[1:end]))
    except yaml.YAMLError as exc:
        raise DocParseError(f"{name}: bad YAML: {exc}") from None
    if not isinstance(data, dict):
        raise DocParseError(f"{name}: front-matter must be a mapping")
    return data


def parse_doc(text: str, name: str = "<doc>") -> PassDoc:
    data = front_matter(text, name)
    try:
        pid = LLPassId(data.get("pass"))
    except ValueError:
        raise DocParseError(f"{name}: unknown pass {data.get('pass')!r}") from None
    entries = data.get("rules")
    if not isinstance(entries, list) or not entries:
        raise DocParseError(f"{name}: no rules listed")
    rules = []
    for k, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise DocParseError(f"{name}: rule {k} is not a mapping")
        missing = [f for f in REQUIRED if not entry.get(f)]
        if missing:
            raise DocParseError(f"{name}: rule {entry.get('id', k)} lacks {', '.join(missing)}")
        try:
            rules.append(MutationRule(str(entry["id"]), pid, str(entry["precondition"]),
                                      str(entry["action"]), f"{name}#{entry['id']}"))
        except ValueError as exc:
            raise DocParseError(f"{name}: rule {entry['id']}: {exc}") from None
    constraints = data.get("constraints") or {}
    if not isinstance(constraints, dict):
        raise DocParseError(f"{name}: constraints must be a mapping")
    return PassDoc(Path(name), pid, rules, constraints)


def load_docs(docs_dir) -> tuple[list[PassDoc], list[tuple[str, str]]]:
    """Parse every ``*.md`` in ``docs_dir``; bad files are logged and skipped."""
    docs, errors = [], []
    for path in sorted(Path(docs_dir).glob("*.md")):
        try:
            docs.append(parse_doc(path.read_text(), path.name))
        except (OSError, UnicodeDecodeError, DocParseError) as exc:
            log.warning("doc skipped: %s", exc)
            errors.append((path.name, str(exc)))
    return docs, errors


def extract_rules(docs_dir, provider=None, sample=None, rng=None) -> list[MutationRule]:
    """One rule per front-matter rule entry. With a provider, its proposals
    are appended when they parse and pass the preservation probe on
    ``sample``."""
    docs, _ = load_docs(docs_dir)
    rules = [r for d in docs for r in d.rules]
    if provider is not None and sample is not None:
        accepted, _ = provider_rules(provider, sample, rng)
        known = {r.id for r in rules}
        rules += [r for r in accepted if r.id not in known]
    return rules


def provider_rules(provider, sample, rng) -> tuple[list[MutationRule], list[str]]:
    """Ask the provider for extra rules; returns (accepted, rejection messages)."""
    text = provider.request("rules", None, None, int(rng.integers(1 << 31)))
    if text is None:
        return [], []
    try:
        proposed = parse_rule_text(text)
    except DocParseError as exc:
        log.warning("provider rules unusable: %s", exc)
        return [], [str(exc)]
    accepted, rejected = [], []
    for rule in proposed:
        rule = MutationRule(rule.id, rule.target, rule.guard, rule.action,
                            f"provider#{rule.id}")
        try:
            check_rule(rule, sample, rng)
        except RuleRejected as exc:
            log.warning("%s", exc)
            rejected.append(str(exc))
            continue
        accepted.append(rule)
    return accepted, rejected


def doc_constraints(docs_dir) -> list[tuple[str, dict]]:
    docs, _ = load_docs(docs_dir)
    return [(d.path.name, d.constraints) for d in docs if d.constraints]


def parse_rule_text(text: str, origin: str = "provider") -> list[MutationRule]:
    """Rules proposed as text: the same front-matter document format."""
    return parse_doc(text, origin).rules
