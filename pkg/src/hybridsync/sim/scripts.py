"""Deterministic scenario generators, including the flagship mixed workload."""

from __future__ import annotations

import random

# Directions the generated annotation rays approach the model from.
_APPROACHES = [
    (0.0, 0.0, -1.0),
    (0.0, 0.0, 1.0),
    (-1.0, 0.0, 0.0),
    (1.0, 0.0, 0.0),
    (0.0, -1.0, 0.0),
    (0.0, 1.0, 0.0),
]


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def make_flagship_scenario(
    peers: int = 16,
    group_size: int = 4,
    rounds: int = 12,
    transforms_per_round: int = 20,
    seed: int = 2026,
) -> str:
    """16 peers in 4 groups, ~60 s of mixed traffic with periodic barriers.

    Every round sends a burst of transforms, then annotations and pointing
    rays aimed at the model's current center (annotations only while the
    slice stack is empty, plus one aimed up the kept half-space of a known
    slice), then a slice push/pop pair, then a convergence barrier.
    Translations stay small enough that center-aimed rays always hit the
    star-shaped model.
    """
    assert peers % group_size == 0
    rng = random.Random(seed)
    lines = [
        "# generated flagship workload: joins, placements, then mixed rounds",
    ]
    groups = peers // group_size

    for p in range(peers):
        lines.append(f"{p * 50} {p} join group={p // group_size}")

    # Each group's founder places the model at a per-group spot.
    for g in range(groups):
        founder = g * group_size
        lines.append(f"{2000 + g * 60} {founder} place pose=0,0,0,1;{_fmt(0.1 * g)},0,0")
    lines.append("2600 * assert converged")

    group_center = {g: (0.1 * g, 0.0, 0.0) for g in range(groups)}
    translation = (0.0, 0.0, 0.0)
    t = 3000
    for round_no in range(rounds):
        # translation for this round; frozen before the aimed rays fire
        translation = (
            rng.uniform(-0.25, 0.25),
            rng.uniform(-0.25, 0.25),
            rng.uniform(-0.25, 0.25),
        )
        for i in range(transforms_per_round):
            peer = rng.randrange(peers)
            q = [rng.gauss(0, 1) for _ in range(4)]
            norm = sum(c * c for c in q) ** 0.5
            q = [c / norm for c in q]
            scale = rng.uniform(0.8, 1.25)
            lines.append(
                f"{t} {peer} transform rot={','.join(_fmt(c) for c in q)} "
                f"scale={_fmt(scale)} trans={','.join(_fmt(c) for c in translation)}"
            )
            t += 100

        t += 400  # let the last transform settle everywhere
        for k in range(3):
            peer = (round_no * 3 + k) % peers
            cx, cy, cz = group_center[peer // group_size]
            cx, cy, cz = cx + translation[0], cy + translation[1], cz + translation[2]
            dx, dy, dz = _APPROACHES[(round_no + k) % len(_APPROACHES)]
            ox, oy, oz = cx - 2.5 * dx, cy - 2.5 * dy, cz - 2.5 * dz
            lines.append(
                f'{t} {peer} annotate ray={_fmt(ox)},{_fmt(oy)},{_fmt(oz)};'
                f'{_fmt(dx)},{_fmt(dy)},{_fmt(dz)} label="r{round_no}a{k}" '
                f"color={rng.randrange(256)}"
            )
            t += 120
        for k in range(2):
            peer = (round_no * 2 + k + 5) % peers
            cx, cy, cz = group_center[peer // group_size]
            cx, cy, cz = cx + translation[0], cy + translation[1], cz + translation[2]
            dx, dy, dz = _APPROACHES[(round_no + k + 2) % len(_APPROACHES)]
            lines.append(
                f"{t} {peer} point ray={_fmt(cx - 2.5 * dx)},{_fmt(cy - 2.5 * dy)},"
                f"{_fmt(cz - 2.5 * dz)};{_fmt(dx)},{_fmt(dy)},{_fmt(dz)} "
                f"ttl={rng.randrange(1000, 3000)}"
            )
            t += 120

        # one slice, one annotation up its kept half-space, then undo
        slicer = rng.randrange(peers)
        lines.append(f"{t} {slicer} slice push n=0,0,1 d={_fmt(rng.uniform(0.05, 0.25))}")
        t += 400
        peer = (round_no * 5 + 1) % peers
        cx, cy, cz = group_center[peer // group_size]
        cx, cy, cz = cx + translation[0], cy + translation[1], cz + translation[2]
        lines.append(
            f'{t} {peer} annotate ray={_fmt(cx)},{_fmt(cy)},{_fmt(cz - 2.5)};0,0,1 '
            f'label="cut{round_no}"'
        )
        t += 300
        lines.append(f"{t} {rng.randrange(peers)} slice pop")
        t += 200
        lines.append(f"{t} * assert converged")
        t += 300

    lines.append(f"{t} * assert converged")
    return "\n".join(lines) + "\n"


def make_smoke_scenario() -> str:
    """Two peers, one group: join, place, one transform, converge."""
    return "\n".join(
        [
            "0 0 join group=0",
            "100 1 join group=0",
            "1500 0 place pose=0,0,0,1;0,0,0",
            "2000 0 transform rot=0,0,0.3827,0.9239 scale=1.2 trans=0,0.1,0",
            "2600 * assert converged",
        ]
    ) + "\n"
