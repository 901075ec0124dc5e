"""Command-line entry point: ``stagefuzz <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import bugs
from .errors import ConfigError

# command -> (stage, default budget)
COMMANDS = {"migrate": ("loader", 1000), "synthesize": ("hlopt", 1000),
            "mutate": ("llopt", 500), "fuzz": ("all", 1500)}


def _common(p: argparse.ArgumentParser, budget: int) -> None:
    p.add_argument("--budget", type=int, default=budget, help=f"tests to run (default {budget})")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="directory for report.json and reproductions")
    p.add_argument("--bugs", help="seeded bugs to enable, e.g. L1,H2 or ALL "
                                  f"(default: ${bugs.ENV_VAR})")
    p.add_argument("--json", action="store_true", help="print the full report as JSON")


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stagefuzz", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (stage, budget) in COMMANDS.items():
        p = sub.add_parser(name, help=f"{stage} campaign")
        _common(p, budget)
        if name in ("migrate", "fuzz"):
            p.add_argument("--order", default="diversity", choices=["diversity", "random", "fifo"])
            p.add_argument("--corpus", help="operator-instance JSONL (default: bundled)")
        if name in ("synthesize", "fuzz"):
            p.add_argument("--no-patterns", action="store_true",
                           help="random graphs without spliced patterns")
            p.add_argument("--passtests", help="pass-test directory (default: bundled)")
            p.add_argument("--patterns", help="pattern library (.plib) instead of capturing")
        if name in ("mutate", "fuzz"):
            p.add_argument("--no-rules", action="store_true",
                           help="annotation-free seeds, no mutations")
            p.add_argument("--provider", help="suggestion provider command or http(s) URL")
            p.add_argument("--docs", help="pass documentation directory (default: bundled)")
        if name == "fuzz":
            p.add_argument("--stage", default="all", choices=["all", "loader", "hlopt", "llopt"])
    rp = sub.add_parser("report", help="summarize a report or replay a reproduction")
    rp.add_argument("path", help="report.json, or a reproduction's .json with --replay")
    rp.add_argument("--replay", action="store_true")
    st = sub.add_parser("selftest", help="run the per-bug regression suite")
    st.add_argument("--bugs", help="restrict to these bug ids")
    return ap


def _summary(report: dict) -> str:
    lines = [f"tests run: {report['tests_run']}  wall time: {report['wall_time']}s",
             "verdicts: " + ", ".join(f"{k}={v}" for k, v in report["verdicts"].items())]
    for stage, d in report["stages"].items():
        lines.append(f"  {stage}: {d['tests']} tests, {len(d['rules'])} rule ids, "
                     f"passes {', '.join(d['passes']) or '-'}")
    for s in report["signatures"]:
        lines.append(f"  #{s['first_hit']:<6} {s['stage']:<7} {s['tag']:<17} {s['where']}  "
                     f"x{s['count']}  bugs={','.join(s['bugs']) or '-'}  {s['message'][:60]}")
    lines.append(f"bugs detected: {', '.join(report['bugs_detected']) or 'none'}")
    lines.append(f"content hash: {report['content_hash']}")
    return "\n".join(lines)


def _campaign(args) -> int:
    from .campaign.run import CampaignConfig, failures, run_campaign
    stage, _ = COMMANDS[args.command]
    cfg = CampaignConfig(
        stage=getattr(args, "stage", stage), budget=args.budget, seed=args.seed,
        jobs=args.jobs, bugs=tuple(sorted(bugs.seeded_bug_registry(args.bugs))),
        order=getattr(args, "order", "diversity"),
        use_patterns=not getattr(args, "no_patterns", False),
        use_rules=not getattr(args, "no_rules", False),
        corpus=getattr(args, "corpus", None), passtests=getattr(args, "passtests", None),
        patterns=getattr(args, "patterns", None),
        docs=getattr(args, "docs", None), provider=getattr(args, "provider", None),
        out=args.out)
    report = run_campaign(cfg)
    print(json.dumps(report, indent=2, sort_keys=True) if args.json else _summary(report))
    return 1 if failures(report) else 0


def _report(args) -> int:
    from pathlib import Path
    if args.replay:
        from .campaign.regress import replay
        try:
            recorded, got = replay(args.path)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot replay {args.path}: {exc}") from None
        print(f"recorded {recorded.value}, replayed {got.value}")
        return 0 if recorded == got else 1
    try:
        report = json.loads(Path(args.path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read report {args.path}: {exc}") from None
    print(_summary(report))
    return 1 if report["signatures"] else 0


def _selftest(args) -> int:
    from .campaign.regress import run_regressions
    only = bugs.parse_flags(args.bugs) if args.bugs else None
    results = run_regressions(only)
    for r in results:
        print(f"{r.bug:<3} {r.file:<34} off={r.off.value:<17} on={r.on.value:<17} "
              f"{'ok' if r.flips else 'FAIL'}")
    bad = [r.bug for r in results if not r.flips]
    print(f"{len(results) - len(bad)}/{len(results)} regressions flip")
    return 1 if bad else 0


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            return _report(args)
        if args.command == "selftest":
            return _selftest(args)
        return _campaign(args)
    except ConfigError as exc:
        print(f"stagefuzz: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
