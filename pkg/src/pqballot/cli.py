"""Console entry points: the node server and the load-bench harness."""

from __future__ import annotations

import argparse
import sys

from . import bench, service
from .errors import PqBallotError


def node_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pqballot-node",
        description="Run a quantum-secure e-voting node (REST + metrics).",
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--host")
    parser.add_argument("--port", type=int)
    parser.add_argument("--profile", choices=["F512", "F1024"])
    parser.add_argument("--theta", type=float, help="cosine acceptance threshold")
    parser.add_argument("--spoof-threshold", type=float, dest="spoof_threshold")
    parser.add_argument("--data-dir", dest="data_dir")
    parser.add_argument("--authority-key", dest="authority_key_path")
    parser.add_argument("--key-passphrase", dest="key_passphrase")
    parser.add_argument("--session-ttl-ms", type=int, dest="session_ttl_ms")
    parser.add_argument("--gas-limit", type=int, dest="gas_block_limit")
    args = parser.parse_args(argv)

    overrides = {k: v for k, v in vars(args).items() if k != "config"}
    try:
        config = service.load_config(args.config, overrides=overrides)
        service.serve(config)
    except PqBallotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def bench_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pqballot-bench",
        description="Load-bench a node: latency vs concurrency, block sizes, gas.",
    )
    parser.add_argument("--target", help="node base URL, e.g. http://127.0.0.1:8080")
    parser.add_argument("--levels", default="1,10,20,40,80",
                        help="comma-separated concurrency levels")
    parser.add_argument("--ops", type=int, default=50, help="operations per level")
    parser.add_argument("--format", choices=["table", "csv"], default="table")
    parser.add_argument("--out", help="write the report to this file")
    parser.add_argument("--record", help="write the raw report JSON to this file")
    parser.add_argument("--replay", help="render a previously recorded report JSON")
    args = parser.parse_args(argv)

    try:
        if args.replay:
            with open(args.replay) as fh:
                report = bench.BenchReport.from_json(fh.read())
        else:
            if not args.target:
                parser.error("--target is required unless --replay is given")
            levels = tuple(int(x) for x in args.levels.split(",") if x)
            report = bench.run_load(args.target, levels=levels,
                                    ops_per_level=args.ops)
    except PqBallotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    text = bench.render_report(report, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.record:
        with open(args.record, "w") as fh:
            fh.write(report.to_json())

    failures = bench.check_properties(report)
    for failure in failures:
        print(f"property failed: {failure}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(node_main())
