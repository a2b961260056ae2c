"""Bench harness: report rendering contracts, replay determinism, and the
load-response property checks (the live load run happens in acceptance)."""

import pytest

from pqballot import bench
from pqballot.errors import TargetUnreachable


def sample_report() -> bench.BenchReport:
    rows = [
        bench.LevelRow(concurrency=c, avg_sign_ms=s, avg_verify_ms=v,
                       p95_ms=p, avg_request_ms=r, ops=max(c, 10))
        for c, s, v, p, r in [
            (1, 20.0, 0.4, 25.0, 22.0),
            (10, 95.0, 0.5, 160.0, 120.0),
            (20, 210.0, 0.6, 380.0, 250.0),
            (40, 430.0, 0.8, 800.0, 520.0),
            (80, 900.0, 1.2, 1700.0, 1100.0),
        ]
    ]
    return bench.BenchReport(rows=rows, registration_bytes=2275, vote_bytes=768,
                             registration_gas_fraction=0.033,
                             vote_gas_fraction=0.00157)


def test_csv_header_contract():
    text = bench.render_report(sample_report(), "csv")
    assert text.splitlines()[0] == "concurrency,avg_sign_ms,avg_verify_ms,p95_ms"


def test_report_prints_block_sizes_and_gas():
    for fmt in ("csv", "table"):
        text = bench.render_report(sample_report(), fmt)
        assert "block_sizes registration=2275 vote=768" in text
        assert "gas registration=3.30% vote=0.16%" in text


def test_rows_sorted_by_concurrency():
    report = sample_report()
    report.rows = list(reversed(report.rows))
    lines = bench.render_report(report, "csv").splitlines()
    levels = [int(line.split(",")[0]) for line in lines[1:6]]
    assert levels == sorted(levels)


def test_render_rejects_unknown_format():
    with pytest.raises(ValueError):
        bench.render_report(sample_report(), "xml")


def test_replay_determinism():
    report = sample_report()
    encoded = report.to_json()
    replayed = bench.BenchReport.from_json(encoded)
    assert bench.render_report(replayed, "table") == bench.render_report(report, "table")
    assert replayed.to_json() == encoded


def test_properties_pass_on_escalating_report():
    assert bench.check_properties(sample_report()) == []


def test_property_detects_flat_sign_latency():
    report = sample_report()
    report.rows[4].avg_sign_ms = report.rows[2].avg_sign_ms  # 80 == 20
    failures = bench.check_properties(report)
    assert any("sign latency" in f for f in failures)


def test_property_detects_slow_verify():
    report = sample_report()
    report.rows[2].avg_verify_ms = report.rows[2].avg_sign_ms / 2
    failures = bench.check_properties(report)
    assert any("verify latency" in f for f in failures)


def test_property_detects_latency_regression():
    report = sample_report()
    report.rows[3].avg_request_ms = report.rows[2].avg_request_ms * 0.5
    failures = bench.check_properties(report)
    assert any("fell" in f for f in failures)


def test_slack_tolerates_small_dips():
    report = sample_report()
    report.rows[3].avg_request_ms = report.rows[2].avg_request_ms * 0.95
    assert bench.check_properties(report) == []


def test_unreachable_target():
    with pytest.raises(TargetUnreachable):
        bench.run_load("http://127.0.0.1:9", levels=(1,), ops_per_level=1,
                       timeout=0.5)
