"""Command-line contract tests: exit codes, config validation, output
round-trips, and the transcript dump."""

import json

from qpcsim.cli import EXIT_CONFIG, EXIT_OK, main
from qpcsim.harness import TrialStats


def write_config(tmp_path, name="cfg.json", **overrides):
    doc = {
        "schema_version": 1,
        "protocol": "proposed",
        "n": 2,
        "m": 2,
        "trials": 40,
        "seed": 11,
    }
    doc.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_run_writes_json_and_round_trips(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "stats.json"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    stats = TrialStats.from_json(out.read_text())
    assert stats.counters["trials"] == 40
    assert stats.to_json() == out.read_text().rstrip("\n") or stats.to_json() == out.read_text()


def test_run_csv_output(tmp_path):
    cfg = write_config(tmp_path, adversary={"kind": "eve_intercept_resend", "params": {"links": [1]}})
    out = tmp_path / "stats.csv"
    assert main(["run", "--config", str(cfg), "--format", "csv", "--out", str(out)]) == EXIT_OK
    rows = TrialStats.rows_from_csv(out.read_text())
    names = [r.name for r in rows]
    assert "detected_step2_rate" in names


def test_run_overrides_trials_and_seed(tmp_path):
    cfg = write_config(tmp_path)
    out_a = tmp_path / "a.json"
    out_b = tmp_path / "b.json"
    assert main(["run", "--config", str(cfg), "--trials", "10", "--seed", "3", "--out", str(out_a)]) == EXIT_OK
    assert main(["run", "--config", str(cfg), "--trials", "10", "--seed", "3", "--out", str(out_b)]) == EXIT_OK
    assert out_a.read_text() == out_b.read_text()
    stats = TrialStats.from_json(out_a.read_text())
    assert stats.counters["trials"] == 10
    assert stats.scenario["seed"] == 3


def test_run_uses_config_output_section(tmp_path):
    out = tmp_path / "via_config.csv"
    cfg = write_config(tmp_path, output={"path": str(out), "format": "csv"})
    assert main(["run", "--config", str(cfg)]) == EXIT_OK
    assert out.exists()
    assert out.read_text().startswith("name,estimate")


def test_missing_seed_is_drawn_and_announced(tmp_path, capsys):
    cfg = write_config(tmp_path)
    doc = json.loads(cfg.read_text())
    del doc["seed"]
    cfg.write_text(json.dumps(doc))
    out = tmp_path / "stats.json"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    err = capsys.readouterr().err
    assert "seed:" in err and "--seed" in err


def test_bad_config_exits_one_and_names_field(tmp_path, capsys):
    cfg = write_config(tmp_path, m=-3)
    assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["category"] == "config"
    assert "`m`" in err["message"]


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, warp_drive=True)
    assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "warp_drive" in err["message"]


def test_missing_config_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["category"] == "config"


def test_invalid_json_config(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["run", "--config", str(path)]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "not valid JSON" in err["message"]


def test_transcript_requires_single_trial(tmp_path, capsys):
    cfg = write_config(tmp_path, trials=5)
    assert main(["transcript", "--config", str(cfg)]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["category"] == "usage"


def test_transcript_writes_full_run(tmp_path):
    cfg = write_config(tmp_path, trials=1)
    out = tmp_path / "transcript.json"
    assert main(["transcript", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == 1
    assert doc["events"]
    assert doc["result"]["aborted"] is False


def test_unknown_suite_lists_available(capsys):
    assert main(["suite", "imaginary"]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "paper_tables" in err["message"]


def test_usage_errors_exit_one(capsys):
    assert main(["run"]) == EXIT_CONFIG  # missing --config
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["category"] == "usage"
    assert main([]) == EXIT_CONFIG


def test_help_exits_zero(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "qpcsim" in capsys.readouterr().out


def test_zhang_config_runs(tmp_path):
    cfg = write_config(
        tmp_path,
        protocol="zhang_baseline",
        n=2,
        adversary={"kind": "tp1_fake_result", "params": {}},
    )
    out = tmp_path / "z.json"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    stats = TrialStats.from_json(out.read_text())
    assert stats.row("abort_rate").estimate == 0.0
    assert stats.row("verdict_correct_rate").estimate == 0.0
