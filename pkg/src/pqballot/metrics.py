"""Counters and histograms with a text exposition endpoint for scraping.

Fixed bucket bounds keep cross-run comparisons stable.  The exposition writer
emits format version 0.0.4: HELP/TYPE headers, cumulative _bucket samples with
an le label, then _sum and _count.
"""

from __future__ import annotations

import threading
from bisect import bisect_left

BUCKET_BOUNDS_MS = (1, 2, 5, 10, 25, 50, 100, 250, 500, 1000, 2500)

COUNTERS = (
    ("registrations_total", "Successful voter enrollments."),
    ("votes_total", "Successfully cast votes."),
    ("spoof_rejections_total", "Captures rejected by the liveness gate."),
    ("auth_failures_total", "Failed authentication attempts."),
)

HISTOGRAMS = (
    ("sign_latency_ms", "Embedding signing latency per enrollment."),
    ("verify_latency_ms", "Stored-template signature verification latency."),
    ("match_latency_ms", "Cosine matching latency."),
    ("request_latency_ms", "End-to-end HTTP request latency."),
)


class _Histogram:
    __slots__ = ("bucket_counts", "total", "sum")

    def __init__(self):
        self.bucket_counts = [0] * (len(BUCKET_BOUNDS_MS) + 1)  # last is +Inf
        self.total = 0
        self.sum = 0.0

    def observe(self, value: float) -> None:
        self.bucket_counts[bisect_left(BUCKET_BOUNDS_MS, value)] += 1
        self.total += 1
        self.sum += value


class MetricsRegistry:
    """Thread-safe; counters are monotone and histogram count equals the sum
    of its bucket counts by construction."""

    def __init__(self):
        self._lock = threading.Lock()
        self._counters = {name: 0 for name, _ in COUNTERS}
        self._histograms = {name: _Histogram() for name, _ in HISTOGRAMS}

    def increment(self, name: str, amount: int = 1) -> None:
        if amount < 0:
            raise ValueError("counters are monotone")
        with self._lock:
            self._counters[name] += amount

    def observe(self, name: str, value_ms: float) -> None:
        with self._lock:
            self._histograms[name].observe(value_ms)

    def counter(self, name: str) -> int:
        with self._lock:
            return self._counters[name]

    def histogram_snapshot(self, name: str) -> tuple[list[int], int, float]:
        with self._lock:
            h = self._histograms[name]
            return list(h.bucket_counts), h.total, h.sum

    def render(self) -> str:
        """Text exposition, format version 0.0.4."""
        lines: list[str] = []
        with self._lock:
            for name, help_text in COUNTERS:
                lines.append(f"# HELP {name} {help_text}")
                lines.append(f"# TYPE {name} counter")
                lines.append(f"{name} {self._counters[name]}")
            for name, help_text in HISTOGRAMS:
                h = self._histograms[name]
                lines.append(f"# HELP {name} {help_text}")
                lines.append(f"# TYPE {name} histogram")
                cumulative = 0
                for bound, count in zip(BUCKET_BOUNDS_MS, h.bucket_counts):
                    cumulative += count
                    lines.append(f'{name}_bucket{{le="{_format_bound(bound)}"}} {cumulative}')
                cumulative += h.bucket_counts[-1]
                lines.append(f'{name}_bucket{{le="+Inf"}} {cumulative}')
                lines.append(f"{name}_sum {_format_value(h.sum)}")
                lines.append(f"{name}_count {h.total}")
        return "\n".join(lines) + "\n"


def _format_bound(bound: float) -> str:
    return f"{float(bound):g}"


def _format_value(value: float) -> str:
    return f"{value:.6f}" if value % 1 else str(int(value))
