"""Load harness: drives enroll+authenticate cycles at increasing concurrency
against a running node, reports latency rows plus block-size and gas-fraction
measurements, and checks the load-response properties.

Client-side wall times feed the request-latency columns; server-side signing
and verification averages come from /metrics deltas around each level, so the
numbers isolate the cryptographic cost from HTTP overhead.
"""

from __future__ import annotations

import json
import statistics
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import httpx
import numpy as np

from .biometric import EMBEDDING_DIM, SyntheticProvider
from .errors import InsufficientIdentities, TargetUnreachable

DEFAULT_LEVELS = (1, 10, 20, 40, 80)
WARMUP_OPS = 3

CSV_HEADER = "concurrency,avg_sign_ms,avg_verify_ms,p95_ms"


@dataclass
class LevelRow:
    concurrency: int
    avg_sign_ms: float
    avg_verify_ms: float
    p95_ms: float
    avg_request_ms: float
    ops: int


@dataclass
class BenchReport:
    rows: list[LevelRow]
    registration_bytes: int
    vote_bytes: int
    registration_gas_fraction: float
    vote_gas_fraction: float

    def to_json(self) -> str:
        return json.dumps({
            "rows": [asdict(r) for r in self.rows],
            "registration_bytes": self.registration_bytes,
            "vote_bytes": self.vote_bytes,
            "registration_gas_fraction": self.registration_gas_fraction,
            "vote_gas_fraction": self.vote_gas_fraction,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "BenchReport":
        raw = json.loads(text)
        return cls(
            rows=[LevelRow(**r) for r in raw["rows"]],
            registration_bytes=raw["registration_bytes"],
            vote_bytes=raw["vote_bytes"],
            registration_gas_fraction=raw["registration_gas_fraction"],
            vote_gas_fraction=raw["vote_gas_fraction"],
        )


def _scrape(client: httpx.Client, target: str) -> dict[str, float]:
    text = client.get(target + "/metrics").text
    out: dict[str, float] = {}
    for line in text.splitlines():
        if line.startswith("#") or not line.strip():
            continue
        name, _, value = line.partition(" ")
        if "{" in name:  # bucket samples are not needed for averages
            continue
        out[name] = float(value)
    return out


def _fresh_identity(provider: SyntheticProvider, tag: str) -> dict:
    sample = provider.capture(tag)
    return {
        "personal": {
            "full_name": f"Load Tester {tag[:8]}",
            "phone": "+1-555-0199",
            "date_of_birth": "1990-05-05",
            "citizenship_number": f"LT-{tag[:16]}",  # stays inside the 24B budget
            "address": "1 Benchmark Way",
        },
        "embedding": [float(x) for x in sample.embedding.values],
        "spoof_score": 0.0,
    }


class _IdentityPool:
    def __init__(self, count: int, seed: bytes):
        provider = SyntheticProvider(seed=seed)
        self._items = [
            _fresh_identity(provider, uuid.uuid4().hex) for _ in range(count)
        ]
        self._lock = threading.Lock()

    def take(self) -> dict:
        with self._lock:
            if not self._items:
                raise InsufficientIdentities("identity pool exhausted")
            return self._items.pop()


def _enroll_authenticate(client: httpx.Client, target: str, identity: dict,
                         latencies: list[float], lock: threading.Lock) -> None:
    t0 = time.perf_counter()
    reg = client.post(target + "/api/register", json=identity)
    t1 = time.perf_counter()
    reg.raise_for_status()
    address = reg.json()["address"]
    auth = client.post(target + "/api/authenticate", json={
        "address": address,
        "embedding": identity["embedding"],
        "spoof_score": 0.0,
    })
    t2 = time.perf_counter()
    auth.raise_for_status()
    with lock:
        latencies.append((t1 - t0) * 1000.0)
        latencies.append((t2 - t1) * 1000.0)


def _measure_block_economics(client: httpx.Client, target: str,
                             pool: _IdentityPool) -> tuple[int, int, float, float]:
    identity = pool.take()
    reg = client.post(target + "/api/register", json=identity)
    reg.raise_for_status()
    auth = client.post(target + "/api/authenticate", json={
        "address": reg.json()["address"],
        "embedding": identity["embedding"],
        "spoof_score": 0.0,
    })
    auth.raise_for_status()
    candidates = list(client.get(target + "/api/tally").json())
    vote = client.post(target + "/api/vote", json={
        "session_id": auth.json()["session_id"],
        "candidate_id": int(candidates[0]),
    })
    vote.raise_for_status()
    reg_block = client.get(f"{target}/api/blocks/{reg.json()['block_index']}").json()
    vote_block = client.get(f"{target}/api/blocks/{vote.json()['block_index']}").json()
    return (
        reg_block["size_bytes"],
        vote_block["size_bytes"],
        reg_block["gas_used"] / reg_block["gas_limit"],
        vote_block["gas_used"] / vote_block["gas_limit"],
    )


def run_load(target: str, levels=DEFAULT_LEVELS, ops_per_level: int = 50,
             timeout: float = 300.0, seed: bytes = b"bench") -> BenchReport:
    if not levels:
        raise ValueError("levels must be nonempty")
    target = target.rstrip("/")
    client = httpx.Client(timeout=timeout)
    try:
        try:
            client.get(target + "/api/tally").raise_for_status()
        except httpx.HTTPError as exc:
            raise TargetUnreachable(f"{target}: {exc}") from exc

        pool = _IdentityPool(WARMUP_OPS + sum(max(l, ops_per_level) for l in levels) + 1,
                             seed)
        lock = threading.Lock()

        # Warmup excludes cold-start costs from the measured rows.
        sink: list[float] = []
        for _ in range(WARMUP_OPS):
            _enroll_authenticate(client, target, pool.take(), sink, lock)

        rows = []
        for level in sorted(levels):
            ops = max(level, ops_per_level)
            before = _scrape(client, target)
            latencies: list[float] = []
            with ThreadPoolExecutor(max_workers=level) as pool_exec:
                with httpx.Client(timeout=timeout) as level_client:
                    futures = [
                        pool_exec.submit(_enroll_authenticate, level_client, target,
                                         pool.take(), latencies, lock)
                        for _ in range(ops)
                    ]
                    for fut in futures:
                        fut.result()
            after = _scrape(client, target)

            def delta(name: str) -> float:
                count = after[f"{name}_count"] - before[f"{name}_count"]
                total = after[f"{name}_sum"] - before[f"{name}_sum"]
                return total / count if count else 0.0

            ordered = sorted(latencies)
            p95 = ordered[min(len(ordered) - 1, int(0.95 * len(ordered)))]
            rows.append(LevelRow(
                concurrency=level,
                avg_sign_ms=delta("sign_latency_ms"),
                avg_verify_ms=delta("verify_latency_ms"),
                p95_ms=p95,
                avg_request_ms=statistics.fmean(latencies),
                ops=ops,
            ))

        reg_size, vote_size, reg_frac, vote_frac = _measure_block_economics(
            client, target, pool)
        return BenchReport(
            rows=rows,
            registration_bytes=reg_size,
            vote_bytes=vote_size,
            registration_gas_fraction=reg_frac,
            vote_gas_fraction=vote_frac,
        )
    finally:
        client.close()


# -- reporting -----------------------------------------------------------------

def check_properties(report: BenchReport, slack: float = 0.10) -> list[str]:
    """Load-response assertions; empty list means all hold."""
    failures = []
    rows = sorted(report.rows, key=lambda r: r.concurrency)
    by_level = {r.concurrency: r for r in rows}
    for prev, cur in zip(rows, rows[1:]):
        if cur.avg_request_ms < prev.avg_request_ms * (1 - slack):
            failures.append(
                f"avg request latency fell from {prev.avg_request_ms:.2f}ms "
                f"@{prev.concurrency} to {cur.avg_request_ms:.2f}ms @{cur.concurrency}")
    if 20 in by_level and 80 in by_level:
        if not by_level[80].avg_sign_ms > by_level[20].avg_sign_ms:
            failures.append("avg sign latency did not increase from level 20 to 80")
    if 20 in by_level:
        row = by_level[20]
        if row.avg_verify_ms > row.avg_sign_ms / 10:
            failures.append(
                f"verify latency {row.avg_verify_ms:.3f}ms exceeds a tenth of "
                f"sign latency {row.avg_sign_ms:.3f}ms at level 20")
    return failures


def render_report(report: BenchReport, fmt: str = "table") -> str:
    rows = sorted(report.rows, key=lambda r: r.concurrency)
    lines: list[str] = []
    if fmt == "csv":
        lines.append(CSV_HEADER)
        for r in rows:
            lines.append(f"{r.concurrency},{r.avg_sign_ms:.3f},"
                         f"{r.avg_verify_ms:.3f},{r.p95_ms:.3f}")
    elif fmt == "table":
        lines.append(f"{'concurrency':>11} {'avg_sign_ms':>12} "
                     f"{'avg_verify_ms':>14} {'p95_ms':>10} {'avg_req_ms':>11}")
        for r in rows:
            lines.append(f"{r.concurrency:>11} {r.avg_sign_ms:>12.3f} "
                         f"{r.avg_verify_ms:>14.3f} {r.p95_ms:>10.3f} "
                         f"{r.avg_request_ms:>11.3f}")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    lines.append(f"block_sizes registration={report.registration_bytes} "
                 f"vote={report.vote_bytes}")
    lines.append(f"gas registration={100 * report.registration_gas_fraction:.2f}% "
                 f"vote={100 * report.vote_gas_fraction:.2f}%")
    return "\n".join(lines) + "\n"
