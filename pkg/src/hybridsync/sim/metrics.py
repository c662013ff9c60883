"""Per-message measurements and the CSV report.

End-to-end latency of a message is the time from the peer's send until the
last member (sender echo included) applies the relay-stamped copy.
``total_bytes`` counts every byte the relay delivers toward peers,
cross-checked against the transport's own counter at quiescence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class MessageRow:
    t_ms: float
    peer: int
    msg_type: str
    bytes: int
    e2e_ms: float


@dataclass
class MetricsReport:
    rows: list[MessageRow] = field(default_factory=list)
    p50_ms: float = 0.0
    p95_ms: float = 0.0
    p99_ms: float = 0.0
    total_bytes: int = 0
    convergence_ms: float = 0.0

    def finalize(self, total_bytes: int, convergence_ms: float) -> None:
        latencies = [r.e2e_ms for r in self.rows]
        self.p50_ms = nearest_rank_percentile(latencies, 50)
        self.p95_ms = nearest_rank_percentile(latencies, 95)
        self.p99_ms = nearest_rank_percentile(latencies, 99)
        self.total_bytes = total_bytes
        self.convergence_ms = max(0.0, convergence_ms)

    def count_of(self, msg_type: str) -> int:
        return sum(1 for r in self.rows if r.msg_type == msg_type)

    def to_csv(self) -> str:
        lines = ["t_ms,peer,msg_type,bytes,e2e_ms"]
        for r in self.rows:
            lines.append(f"{r.t_ms:.3f},{r.peer},{r.msg_type},{r.bytes},{r.e2e_ms:.3f}")
        lines.append(
            "# summary: "
            f"p50_ms={self.p50_ms:.3f},p95_ms={self.p95_ms:.3f},p99_ms={self.p99_ms:.3f},"
            f"total_bytes={self.total_bytes},convergence_ms={self.convergence_ms:.3f}"
        )
        return "\n".join(lines) + "\n"


def nearest_rank_percentile(values: list[float], pct: float) -> float:
    """Nearest-rank percentile: the value at rank ceil(pct/100 * n)."""
    if not values:
        return 0.0
    ordered = sorted(values)
    rank = math.ceil(pct / 100.0 * len(ordered))
    rank = min(max(rank, 1), len(ordered))
    return ordered[rank - 1]
