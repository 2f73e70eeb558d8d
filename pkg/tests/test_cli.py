"""Command-line interface tests."""

import json
import subprocess
import sys

import pytest

from netpen import Scenario
from netpen.cli import main
from netpen.protocol import read_trajectories


def test_generate_writes_canonical_scenario(tmp_path, capsys):
    out = tmp_path / "scenario.json"
    assert main(["generate", "--seed", "5", "--out", str(out)]) == 0
    scenario = Scenario.from_json(out.read_text())
    assert 5 <= scenario.host_count <= 8
    # determinism: regenerating with the same seed is byte-identical
    out2 = tmp_path / "scenario2.json"
    main(["generate", "--seed", "5", "--out", str(out2)])
    assert out.read_text() == out2.read_text()


def test_generate_respects_config_flags(tmp_path):
    out = tmp_path / "s.json"
    main(["generate", "--seed", "1", "--max-hosts", "6", "--host-count", "6", "--out", str(out)])
    scenario = Scenario.from_json(out.read_text())
    assert scenario.host_count == 6
    assert scenario.config.max_hosts == 6


def test_validate_ok_and_broken(tmp_path, capsys):
    out = tmp_path / "scenario.json"
    main(["generate", "--seed", "2", "--out", str(out)])
    assert main(["validate", str(out)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["ok"] and report["witness"]

    data = json.loads(out.read_text())
    for rule in data["firewall"]:
        rule["allowed_services"] = []
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(data))
    assert main(["validate", str(broken)]) == 1
    report = json.loads(capsys.readouterr().out)
    assert not report["ok"]


def test_run_logs_trajectory(tmp_path, capsys):
    log = tmp_path / "run.jsonl"
    assert main(["run", "--policy", "oracle", "--seed", "4", "--out", str(log)]) == 0
    export = json.loads(capsys.readouterr().out)
    assert export["terminal"] == "terminated"
    trajectories = read_trajectories(log)
    assert len(trajectories) == 1
    assert trajectories[0].episode_return == export["return"]


def test_evaluate_writes_summary_and_log(tmp_path, capsys):
    log = tmp_path / "eval.jsonl"
    code = main(
        ["evaluate", "--policy", "oracle", "--episodes", "5", "--seed", "3", "--out", str(log)]
    )
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["episodes"] == 5
    assert summary["policy"] == "oracle"
    assert len(read_trajectories(log)) == 5


def test_stats_recomputes_from_log(tmp_path, capsys):
    log = tmp_path / "eval.jsonl"
    main(["evaluate", "--policy", "oracle", "--episodes", "5", "--seed", "3", "--out", str(log)])
    first = json.loads(capsys.readouterr().out)
    assert main(["stats", str(log)]) == 0
    second = json.loads(capsys.readouterr().out)
    assert second["mean_return"] == first["mean_return"]
    assert second["per_size"] == first["per_size"]


def test_stats_with_baselines(tmp_path, capsys):
    log = tmp_path / "eval.jsonl"
    main(["evaluate", "--policy", "oracle", "--episodes", "6", "--seed", "3", "--out", str(log)])
    capsys.readouterr()
    main(["stats", str(log), "--baseline-random", "-800", "--baseline-oracle", "170"])
    summary = json.loads(capsys.readouterr().out)
    assert summary["iqm_normalized_score"] is not None


def test_calibrate_prints_rounded_limit(capsys):
    assert main(["calibrate", "--episodes", "30", "--seed", "1"]) == 0
    value = int(capsys.readouterr().out.strip())
    assert value % 1000 == 0 and value >= 1000


def test_empty_evaluation_is_usage_error(capsys):
    assert main(["evaluate", "--policy", "oracle", "--episodes", "0", "--seed", "1"]) == 2


def test_unknown_policy_rejected_by_parser():
    with pytest.raises(SystemExit):
        main(["evaluate", "--policy", "dqn"])


def test_serve_subprocess_stdio():
    requests = "\n".join(
        json.dumps(r)
        for r in [
            {"type": "spec"},
            {"type": "reset", "seed": 7},
            {"type": "step", "action": 0},
            {"type": "close"},
        ]
    )
    proc = subprocess.run(
        [sys.executable, "-m", "netpen", "serve"],
        input=requests + "\n",
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 0, proc.stderr
    responses = [json.loads(line) for line in proc.stdout.splitlines()]
    assert [r["type"] for r in responses] == ["spec_info", "transition", "transition", "closed"]
    assert responses[0]["action_space_size"] == 96
