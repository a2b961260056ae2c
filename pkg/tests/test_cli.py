"""Command-line entry points: argument wiring, replay mode, exit codes."""

import json

import pytest

from pqballot import bench, cli
from tests.test_bench import sample_report


def test_bench_replay_renders_and_exits_zero(tmp_path, capsys):
    raw = tmp_path / "raw.json"
    raw.write_text(sample_report().to_json())
    code = cli.bench_main(["--replay", str(raw), "--format", "csv"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.splitlines()[0] == bench.CSV_HEADER
    assert "block_sizes registration=2275 vote=768" in out


def test_bench_replay_nonzero_on_property_failure(tmp_path, capsys):
    report = sample_report()
    report.rows[2].avg_verify_ms = 500.0  # breaks the asymmetry property
    raw = tmp_path / "raw.json"
    raw.write_text(report.to_json())
    code = cli.bench_main(["--replay", str(raw)])
    captured = capsys.readouterr()
    assert code == 1
    assert "property failed" in captured.err


def test_bench_out_and_record(tmp_path):
    raw = tmp_path / "raw.json"
    raw.write_text(sample_report().to_json())
    out = tmp_path / "report.txt"
    rec = tmp_path / "rec.json"
    code = cli.bench_main(["--replay", str(raw), "--out", str(out),
                           "--record", str(rec)])
    assert code == 0
    assert "gas registration=" in out.read_text()
    assert json.loads(rec.read_text())["registration_bytes"] == 2275


def test_bench_requires_target_or_replay(capsys):
    with pytest.raises(SystemExit):
        cli.bench_main([])


def test_node_main_rejects_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"theta": 3.0}))
    code = cli.node_main(["--config", str(bad)])
    assert code == 2
    assert "theta" in capsys.readouterr().err


def test_node_main_unreachable_port(tmp_path, capsys):
    # port 1 is privileged/unbindable for the test user; startup must fail loudly
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"port": 0}))
    code = cli.node_main(["--config", str(cfg)])
    assert code == 2
