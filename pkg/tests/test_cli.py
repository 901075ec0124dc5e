import json
import subprocess
import sys

import pytest

from stagefuzz.cli import main


def run(*argv):
    return main(list(argv))


def test_clean_mutate_exits_zero(capsys):
    assert run("mutate", "--budget", "20") == 0
    assert "tests run: 20" in capsys.readouterr().out


def test_bugs_found_exits_one(capsys):
    assert run("synthesize", "--budget", "40", "--bugs", "H", "--json") == 1
    report = json.loads(capsys.readouterr().out)
    assert report["config"]["bugs"] == ["H1", "H2", "H3", "H4"]
    assert report["signatures"]


def test_env_var_enables_bugs(monkeypatch, capsys):
    monkeypatch.setenv("STAGEFUZZ_BUGS", "L1")
    run("migrate", "--budget", "10", "--json")
    assert json.loads(capsys.readouterr().out)["config"]["bugs"] == ["L1"]


@pytest.mark.parametrize("argv", [["fuzz", "--budget", "-1"], ["mutate", "--bugs", "Z7"],
                                  ["report", "/nonexistent/report.json"],
                                  ["report", "--replay", "/nonexistent/x.json"],
                                  ["synthesize", "--budget", "5", "--patterns", "/nope.plib"],
                                  ["migrate", "--budget", "5", "--corpus", "/nope.jsonl"]])
def test_config_errors_exit_two(argv, capsys):
    assert run(*argv) == 2
    assert "stagefuzz:" in capsys.readouterr().err


def test_report_and_replay(tmp_path, capsys):
    out = tmp_path / "run"
    assert run("fuzz", "--stage", "llopt", "--budget", "30", "--bugs", "B", "--out", str(out)) == 1
    capsys.readouterr()
    assert run("report", str(out / "report.json")) == 1
    assert "bugs detected" in capsys.readouterr().out
    report = json.loads((out / "report.json").read_text())
    meta = out / report["signatures"][0]["repro"]
    assert run("report", "--replay", str(meta)) == 0
    assert "recorded" in capsys.readouterr().out


def test_selftest(capsys):
    assert run("selftest") == 0
    assert "12/12 regressions flip" in capsys.readouterr().out


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "stagefuzz.cli", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("migrate", "synthesize", "mutate", "fuzz", "report", "selftest"):
        assert cmd in res.stdout
