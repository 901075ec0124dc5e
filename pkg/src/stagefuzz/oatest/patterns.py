"""Optimization-trigger patterns mined from traced pass tests.

A pattern is a small graph whose dangling inputs are ``Input`` nodes named
``slot0``, ``slot1``, ... (the frontier). Slots occupy ids ``0..K-1``; the
remaining nodes follow in topological order, which makes the serialized text
canonical.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import DegeneratePattern, ParseError, PassInternal, TestLoadError
from ..graph.ir import Graph, Node
from ..graph.ops import normalize_params
from ..graph.text import parse_graph, serialize_graph
from ..graph.types import DType, TensorType
from ..graph.validate import validate_graph
from ..hlopt import PassId, RewriteTrace, pipeline_steps, run_hl_pass

log = logging.getLogger(__name__)

# rules judged on a single node keep its producers too
NODE_LOCAL = frozenset({PassId.ConstFold, PassId.AlgebraicSimplify})
SLOT_PREFIX = "slot"


def _input_params(name: str) -> dict:
    return normalize_params("Input", {"name": name})


@dataclass(frozen=True)
class Pattern:
    graph: Graph  # slots are Input nodes 0..K-1; outputs are the pattern's sinks
    frontier: tuple[TensorType, ...]
    source: tuple[PassId, str]

    @property
    def dead_code(self) -> bool:
        """Dead-node patterns must stay unreachable to keep triggering."""
        return self.source[0] is PassId.DeadNodeElim

    @property
    def body_ids(self) -> list[int]:
        return [n for n in self.graph.nodes if n >= len(self.frontier)]

    def text(self) -> str:
        return serialize_graph(self.graph)

    @property
    def key(self) -> str:
        src = f"{self.source[0].value}:{self.source[1]}\n"
        return hashlib.sha256((src + self.text()).encode()).hexdigest()

    def wrapped(self) -> Graph:
        """Stand-alone graph (slots already are fresh Inputs)."""
        if not self.dead_code:
            return self.graph
        keep = self.graph.next_id
        node = Node(keep, "Input", _input_params("keep"), (), TensorType(DType.F32, (1,)))
        return self.graph.with_nodes([*self.graph.nodes.values(), node], [keep])

    def fires(self) -> bool:
        try:
            _, traces = run_hl_pass(self.source[0], self.wrapped())
        except PassInternal:
            return False
        return any(t.fired and t.rule_id == self.source[1] for t in traces)


def _build(g: Graph, kept: set[int], source) -> Pattern:
    kept = {n for n in kept if g.nodes[n].kind != "Input"}
    order = [n for n in g.topo_order() if n in kept]
    slots: dict[int, int] = {}
    for n in order:
        for s in g.nodes[n].inputs:
            if s not in kept and s not in slots:
                slots[s] = len(slots)
    remap = {old: len(slots) + i for i, old in enumerate(order)}
    nodes = []
    for old, k in slots.items():
        nodes.append(Node(k, "Input", _input_params(f"{SLOT_PREFIX}{k}"), (),
                          g.nodes[old].out_type))
    for old in order:
        n = g.nodes[old]
        ins = tuple(remap[s] if s in remap else slots[s] for s in n.inputs)
        nodes.append(n.replace(id=remap[old], inputs=ins))
    used = {s for n in nodes for s in n.inputs}
    sinks = [remap[o] for o in order if remap[o] not in used]
    pg = Graph({n.id: n for n in nodes}, tuple(sinks), "pattern")
    frontier = tuple(g.nodes[old].out_type for old in slots)
    return Pattern(pg, frontier, source)


def derive_pattern(g: Graph, t: RewriteTrace) -> Pattern:
    """Cut the subgraph behind ``t`` out of ``g`` (the graph the pass saw).

    Node-local rules keep the matched nodes and their producers; region
    rules keep the matched nodes only. If the cut no longer fires its rule
    (a producer was rewritten earlier in the same pass), producers are
    added one level at a time until it does.
    """
    if not t.fired:
        raise DegeneratePattern("trace did not fire")
    matched = set(t.matched_nodes)
    if not matched or not matched <= set(g.nodes):
        raise DegeneratePattern(f"{t.rule_id}: matched nodes not in the graph")
    kept = set(matched)
    if t.pass_id in NODE_LOCAL:
        kept |= {s for n in matched for s in g.nodes[n].inputs}
    source = (t.pass_id, t.rule_id)
    while True:
        if all(g.nodes[n].kind == "Input" for n in kept):
            raise DegeneratePattern(f"{t.rule_id}: nothing left after derivation")
        p = _build(g, kept, source)
        if not validate_graph(p.wrapped()) and p.fires():
            return p
        more = {s for n in kept for s in g.nodes[n].inputs
                if s not in kept and g.nodes[s].kind != "Input"}
        if not more:
            raise DegeneratePattern(f"{t.rule_id}: derived pattern does not fire")
        kept |= more


@dataclass
class PassTest:
    path: Path
    graph: Graph
    expect_pass: PassId | None
    expect_rule: str | None


_HEADER = re.compile(r"^#\s*expect-pass\s*:\s*(\w+)(?:\s+(\S+))?\s*$")


def load_passtest(path) -> PassTest:
    """Read a graph file whose header carries ``#expect-pass: <PassId> <rule_id>``."""
    path = Path(path)
    try:
        text = path.read_text()
        g = parse_graph(text, base_dir=path.parent)
    except (OSError, UnicodeDecodeError, ParseError) as exc:
        raise TestLoadError(f"{path.name}: {exc}") from exc
    problems = validate_graph(g)
    if problems:
        raise TestLoadError(f"{path.name}: invalid graph: {problems[0]}")
    pid = rule = None
    for line in text.splitlines():
        m = _HEADER.match(line.strip())
        if m:
            try:
                pid = PassId(m.group(1))
            except ValueError:
                raise TestLoadError(f"{path.name}: unknown pass {m.group(1)!r}") from None
            rule = m.group(2)
    return PassTest(path, g, pid, rule)


@dataclass
class CaptureResult:
    patterns: list[Pattern] = field(default_factory=list)
    stale: list[str] = field(default_factory=list)  # tests whose expected rule never fired
    load_errors: list[tuple[str, str]] = field(default_factory=list)
    degenerate: int = 0


def capture(passtests_dir) -> CaptureResult:
    """Run every pass test through the traced level-2 pipeline and mine
    one pattern per fired trace, deduplicated by canonical hash."""
    res = CaptureResult()
    seen: set[str] = set()
    for path in sorted(Path(passtests_dir).glob("*.g")):
        try:
            test = load_passtest(path)
        except TestLoadError as exc:
            log.warning("pass test skipped: %s", exc)
            res.load_errors.append((path.name, str(exc)))
            continue
        fired_rules = set()
        before = test.graph
        try:
            for _, after, traces in pipeline_steps(2, test.graph):
                for t in traces:
                    fired_rules.add((t.pass_id, t.rule_id))
                    try:
                        p = derive_pattern(before, t)
                    except DegeneratePattern as exc:
                        log.info("%s: %s", path.name, exc)
                        res.degenerate += 1
                        continue
                    if p.key not in seen:
                        seen.add(p.key)
                        res.patterns.append(p)
                before = after
        except PassInternal as exc:
            log.warning("%s: pipeline failed: %s", path.name, exc)
        expected = (test.expect_pass, test.expect_rule)
        if test.expect_rule is not None and not any(
                r == test.expect_rule and (test.expect_pass in (None, pid))
                for pid, r in fired_rules):
            res.stale.append(path.name)
            log.warning("stale pass test %s: %s did not fire", path.name, expected)
    return res


def capture_patterns(passtests_dir) -> list[Pattern]:
    return capture(passtests_dir).patterns


def dumps_patterns(patterns) -> str:
    chunks = []
    for p in patterns:
        chunks.append(f"pattern {p.key[:16]} source={p.source[0].value}:{p.source[1]}\n"
                      f"{p.text()}end\n")
    return "".join(chunks)


def save_patterns(patterns, path) -> None:
    Path(path).write_text(dumps_patterns(patterns))


def loads_patterns(text: str) -> list[Pattern]:
    out: list[Pattern] = []
    header, body = None, []
    for lineno, line in enumerate(text.splitlines(), 1):
        if header is None:
            if not line.strip():
                continue
            m = re.match(r"^pattern\s+\S+\s+source=(\w+):(\S+)$", line.strip())
            if not m:
                raise ParseError(f"expected a pattern header, got {line[:40]!r}", lineno, 1)
            try:
                header = (PassId(m.group(1)), m.group(2))
            except ValueError:
                raise ParseError(f"unknown pass {m.group(1)!r}", lineno, 1) from None
            body = []
        elif line.strip() == "end":
            g = parse_graph("\n".join(body))
            k = sum(1 for n in g.nodes.values()
                    if n.kind == "Input" and n.params["name"].startswith(SLOT_PREFIX))
            out.append(Pattern(g, tuple(g.nodes[i].out_type for i in range(k)), header))
            header = None
        else:
            body.append(line)
    if header is not None:
        raise ParseError("unterminated pattern", len(text.splitlines()), 1)
    return out


def load_patterns(path) -> list[Pattern]:
    return loads_patterns(Path(path).read_text())
