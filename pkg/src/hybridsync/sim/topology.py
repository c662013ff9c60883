"""Simulated network shape: peer/group partition and per-link delay models.

Links are reliable and ordered; degraded networks appear as added latency,
never as drops.  Intra-group links model the proximity network and carry
only anchor-establishment exchanges; every state frame travels the
peer-relay links.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field


@dataclass(frozen=True)
class LatencySpec:
    mean_ms: float
    jitter_ms: float = 0.0

    def __post_init__(self):
        if self.mean_ms < 0 or self.jitter_ms < 0:
            raise ValueError("latency mean and jitter must be >= 0")


def parse_groups(spec: str, peers: int) -> list[list[int]]:
    """Parse a group layout like ``4x4`` (4 groups of 4) or ``2,3,11``.

    Peers are assigned to groups in index order; the sizes must sum to the
    peer count.
    """
    spec = spec.strip()
    if "x" in spec:
        count_str, size_str = spec.split("x", 1)
        sizes = [int(size_str)] * int(count_str)
    else:
        sizes = [int(tok) for tok in spec.split(",") if tok]
    if sum(sizes) != peers:
        raise ValueError(f"group sizes {sizes} sum to {sum(sizes)}, expected {peers}")
    if any(s < 1 for s in sizes):
        raise ValueError("group sizes must be >= 1")
    groups, next_peer = [], 0
    for size in sizes:
        groups.append(list(range(next_peer, next_peer + size)))
        next_peer += size
    return groups


@dataclass
class TopologyConfig:
    peers: int
    groups: list[list[int]]
    relay_link: LatencySpec = LatencySpec(50.0, 20.0)
    intra_link: LatencySpec = LatencySpec(5.0, 2.0)
    seed: int = 0
    anchor_noise_m: float = 0.0
    feature_points: int = 40

    def __post_init__(self):
        if not 1 <= self.peers <= 16:
            raise ValueError(f"peer count must be within [1, 16], got {self.peers}")
        seen: set[int] = set()
        for group in self.groups:
            for p in group:
                if p in seen:
                    raise ValueError(f"peer {p} appears in more than one group")
                seen.add(p)
        if seen != set(range(self.peers)):
            raise ValueError("every peer must belong to exactly one group")

    @classmethod
    def build(cls, peers: int, groups_spec: str, **kw) -> "TopologyConfig":
        return cls(peers=peers, groups=parse_groups(groups_spec, peers), **kw)

    def group_of(self, peer: int) -> int:
        for gid, members in enumerate(self.groups):
            if peer in members:
                return gid
        raise KeyError(peer)


@dataclass
class Link:
    """One direction of one link; FIFO is enforced by clamping deliveries."""

    spec: LatencySpec
    rng: random.Random
    last_delivery: float = field(default=float("-inf"))

    def delivery_time(self, send_time: float) -> float:
        mean = self.spec.mean_ms / 1000.0
        jitter = self.spec.jitter_ms / 1000.0
        delay = mean + self.rng.uniform(-jitter, jitter)
        t = send_time + delay
        if t < send_time:
            t = send_time
        if t < self.last_delivery:
            t = self.last_delivery
        self.last_delivery = t
        return t


def inject_delay(link: Link, send_time: float) -> float:
    """Scheduled delivery time for a frame sent now on the given link."""
    return link.delivery_time(send_time)


def make_link(spec: LatencySpec, seed: int, name: str) -> Link:
    return Link(spec, random.Random(f"{seed}/{name}"))
