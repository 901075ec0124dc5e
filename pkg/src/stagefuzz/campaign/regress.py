"""Bundled per-bug regression tests and test-case (de)serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .. import bugs
from ..graph.text import parse_graph, serialize_graph
from ..loopir import parse_loop, serialize_loop
from ..opera.records import parse_record_line
from .oracle import Stage, Tag, TestCase, diff_test

_EXT = {Stage.loader: ".jsonl", Stage.hlopt: ".g", Stage.llopt: ".lir"}
_STAGE_OF = {v: k for k, v in _EXT.items()}


def data_dir(*parts) -> Path:
    return Path(str(resources.files("stagefuzz").joinpath("data", *parts)))


def dumps_payload(tc: TestCase) -> str:
    if tc.stage is Stage.loader:
        return tc.payload.dumps() + "\n"
    if tc.stage is Stage.hlopt:
        return serialize_graph(tc.payload)
    return serialize_loop(tc.payload)


def loads_payload(stage: Stage, text: str):
    if stage is Stage.loader:
        return parse_record_line(text.strip().splitlines()[0])
    if stage is Stage.hlopt:
        return parse_graph(text)
    return parse_loop(text)


def load_case(path, tc_id: int = 0, data_seed: int = 0) -> TestCase:
    path = Path(path)
    stage = _STAGE_OF[path.suffix]
    return TestCase(tc_id, stage, loads_payload(stage, path.read_text()), data_seed,
                    {"file": path.name})


@dataclass
class RegressionResult:
    bug: str
    file: str
    off: Tag
    on: Tag

    @property
    def flips(self) -> bool:
        return self.off is Tag.Pass and self.on is not Tag.Pass


def regression_cases() -> dict[str, TestCase]:
    out = {}
    for f in sorted(data_dir("regressions").iterdir()):
        if f.suffix in _STAGE_OF:
            out[f.name.split("_", 1)[0]] = load_case(f)
    return out


def run_regressions(only=None) -> list[RegressionResult]:
    """Each bundled case with every bug off, then with just its bug on."""
    results = []
    for bug, tc in regression_cases().items():
        if only and bug not in only:
            continue
        with bugs.activate(()):
            off = diff_test(tc).tag
        with bugs.activate([bug]):
            on = diff_test(tc).tag
        results.append(RegressionResult(bug, tc.lineage["file"], off, on))
    return results


def write_repro(dirpath: Path, stem: str, tc: TestCase, verdict, active_bugs) -> Path:
    """Payload file plus a JSON sidecar holding what replay needs."""
    dirpath.mkdir(parents=True, exist_ok=True)
    payload = dirpath / f"{stem}{_EXT[tc.stage]}"
    payload.write_text(dumps_payload(tc))
    meta = dirpath / f"{stem}.json"
    meta.write_text(json.dumps({
        "payload": payload.name, "stage": tc.stage.value, "test_id": tc.id,
        "data_seed": tc.data_seed, "bugs": sorted(active_bugs), "lineage": tc.lineage,
        "verdict": verdict.to_json()}, indent=2, sort_keys=True, default=str) + "\n")
    return meta


def replay(meta_path) -> tuple[Tag, Tag]:
    """(recorded tag, tag from re-running the saved reproduction)."""
    meta_path = Path(meta_path)
    meta = json.loads(meta_path.read_text())
    stage = Stage(meta["stage"])
    payload = loads_payload(stage, (meta_path.parent / meta["payload"]).read_text())
    tc = TestCase(meta["test_id"], stage, payload, meta["data_seed"], meta.get("lineage", {}))
    with bugs.activate(meta["bugs"]):
        got = diff_test(tc).tag
    return Tag(meta["verdict"]["tag"]), got
