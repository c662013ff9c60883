"""Unit quaternions and the 32-bit smallest-three rotation codec.

A rotation is packed into 32 bits as: two high bits selecting the dropped
component, then three 10-bit fields quantizing the kept components (in
ascending component order) over [-sqrt(0.5), +sqrt(0.5)].  The sign is
canonicalized so the dropped component is non-negative; it is recovered
from the unit-norm constraint on decode.

The drop index is chosen by trying all four candidates and keeping the one
whose decoded quaternion is closest to the input (ties go to the lowest
index).  Quantization can reorder components whose magnitudes differ by
less than a quantization step, so picking the raw argmax would not survive
an encode/decode round trip; the closest-candidate rule makes
``encode(decode(encode(q))) == encode(q)`` hold exactly.

Scalar and batch paths perform identical floating-point operations in
identical order, and the browser client mirrors them operation for
operation, so codes agree bit for bit across implementations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Kept components span [-HALF_RANGE, +HALF_RANGE]; 10-bit quantizer.
HALF_RANGE = math.sqrt(0.5)
SPAN = 2.0 * HALF_RANGE
LEVELS = 1023
UNIT_NORM_TOL = 1e-6

# Kept component indices, in ascending order, for each drop index.
_KEPT = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion (x, y, z, w) with w the real part."""

    x: float
    y: float
    z: float
    w: float

    def __post_init__(self):
        comps = (self.x, self.y, self.z, self.w)
        if not all(math.isfinite(c) for c in comps):
            raise ValueError(f"quaternion components must be finite, got {comps}")
        norm_sq = self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w
        if abs(norm_sq - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"quaternion is not unit norm: |q|^2 = {norm_sq!r}")

    @classmethod
    def identity(cls) -> "Quaternion":
        return cls(0.0, 0.0, 0.0, 1.0)

    @classmethod
    def normalized(cls, x: float, y: float, z: float, w: float) -> "Quaternion":
        n = math.sqrt(x * x + y * y + z * z + w * w)
        if n == 0.0 or not math.isfinite(n):
            raise ValueError("cannot normalize zero or non-finite quaternion")
        return cls(x / n, y / n, z / n, w / n)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Quaternion":
        ax, ay, az = axis
        n = math.sqrt(ax * ax + ay * ay + az * az)
        if n == 0.0:
            raise ValueError("axis must be nonzero")
        s = math.sin(angle / 2.0) / n
        return cls.normalized(ax * s, ay * s, az * s, math.cos(angle / 2.0))

    @classmethod
    def from_matrix(cls, m) -> "Quaternion":
        """Quaternion from a 3x3 proper rotation matrix (max-trace branch)."""
        m = np.asarray(m, dtype=float)
        t = m[0, 0] + m[1, 1] + m[2, 2]
        if t > 0.0:
            s = math.sqrt(t + 1.0) * 2.0
            return cls.normalized(
                (m[2, 1] - m[1, 2]) / s,
                (m[0, 2] - m[2, 0]) / s,
                (m[1, 0] - m[0, 1]) / s,
                0.25 * s,
            )
        if m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
            s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
            return cls.normalized(
                0.25 * s,
                (m[0, 1] + m[1, 0]) / s,
                (m[0, 2] + m[2, 0]) / s,
                (m[2, 1] - m[1, 2]) / s,
            )
        if m[1, 1] >= m[2, 2]:
            s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
            return cls.normalized(
                (m[0, 1] + m[1, 0]) / s,
                0.25 * s,
                (m[1, 2] + m[2, 1]) / s,
                (m[0, 2] - m[2, 0]) / s,
            )
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        return cls.normalized(
            (m[0, 2] + m[2, 0]) / s,
            (m[1, 2] + m[2, 1]) / s,
            0.25 * s,
            (m[1, 0] - m[0, 1]) / s,
        )

    def components(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.z, self.w)

    def canonical(self) -> "Quaternion":
        """The representative of {q, -q} whose largest-magnitude component is positive."""
        comps = self.components()
        mags = [abs(c) for c in comps]
        idx = mags.index(max(mags))
        if comps[idx] < 0.0:
            return Quaternion(-self.x, -self.y, -self.z, -self.w)
        return self

    def conjugate(self) -> "Quaternion":
        return Quaternion(-self.x, -self.y, -self.z, self.w)

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        ax, ay, az, aw = self.components()
        bx, by, bz, bw = other.components()
        return Quaternion.normalized(
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        )

    def rotate(self, v) -> tuple[float, float, float]:
        """Rotate a 3-vector: v' = v + w*t + qv x t with t = 2 qv x v."""
        vx, vy, vz = v
        tx = 2.0 * (self.y * vz - self.z * vy)
        ty = 2.0 * (self.z * vx - self.x * vz)
        tz = 2.0 * (self.x * vy - self.y * vx)
        return (
            vx + self.w * tx + (self.y * tz - self.z * ty),
            vy + self.w * ty + (self.z * tx - self.x * tz),
            vz + self.w * tz + (self.x * ty - self.y * tx),
        )

    def to_matrix(self) -> np.ndarray:
        x, y, z, w = self.components()
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
            ],
            dtype=float,
        )

    def dot(self, other: "Quaternion") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z + self.w * other.w

    def angle_to(self, other: "Quaternion") -> float:
        """Rotation angle in radians between the two rotations."""
        d = abs(self.dot(other))
        if d > 1.0:
            d = 1.0
        return 2.0 * math.acos(d)


def _quantize(v: float) -> int:
    # Round half away from zero; the scaled value is always >= 0 here.
    x = (v + HALF_RANGE) / SPAN * 1023.0
    level = math.floor(x + 0.5)
    if level < 0:
        return 0
    if level > LEVELS:
        return LEVELS
    return int(level)


def _dequantize(level: int) -> float:
    return (level / 1023.0) * SPAN - HALF_RANGE


def _candidate_code(comps, drop: int) -> int:
    sign = -1.0 if comps[drop] < 0.0 else 1.0
    ka, kb, kc = _KEPT[drop]
    la = _quantize(sign * comps[ka])
    lb = _quantize(sign * comps[kb])
    lc = _quantize(sign * comps[kc])
    return (drop << 30) | (la << 20) | (lb << 10) | lc


def encode_quat(q: Quaternion) -> int:
    """Pack a unit quaternion into a 32-bit smallest-three code."""
    comps = q.components()
    if not all(math.isfinite(c) for c in comps):
        raise ValueError("cannot encode non-finite quaternion")
    norm_sq = comps[0] ** 2 + comps[1] ** 2 + comps[2] ** 2 + comps[3] ** 2
    if abs(norm_sq - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"cannot encode non-unit quaternion: |q|^2 = {norm_sq!r}")

    best_code = 0
    best_err = math.inf
    for drop in range(4):
        code = _candidate_code(comps, drop)
        dq = decode_quat(code)
        d0 = comps[0] - dq.x
        d1 = comps[1] - dq.y
        d2 = comps[2] - dq.z
        d3 = comps[3] - dq.w
        em = d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3
        s0 = comps[0] + dq.x
        s1 = comps[1] + dq.y
        s2 = comps[2] + dq.z
        s3 = comps[3] + dq.w
        ep = s0 * s0 + s1 * s1 + s2 * s2 + s3 * s3
        err = em if em < ep else ep
        if err < best_err:
            best_err = err
            best_code = code
    return best_code


def decode_quat(code: int) -> Quaternion:
    """Unpack a 32-bit smallest-three code into a unit quaternion.

    The dropped component is reconstructed as +sqrt(1 - sum of squares of
    the kept components), clamped at zero when quantization pushes the
    radicand negative; the result is renormalized.
    """
    if not 0 <= code <= 0xFFFFFFFF:
        raise ValueError(f"code out of 32-bit range: {code}")
    drop = (code >> 30) & 0x3
    a = _dequantize((code >> 20) & 0x3FF)
    b = _dequantize((code >> 10) & 0x3FF)
    c = _dequantize(code & 0x3FF)
    ss = a * a + b * b + c * c
    rad = 1.0 - ss
    d = math.sqrt(rad) if rad > 0.0 else 0.0
    out = [0.0, 0.0, 0.0, 0.0]
    ka, kb, kc = _KEPT[drop]
    out[ka] = a
    out[kb] = b
    out[kc] = c
    out[drop] = d
    n = math.sqrt(out[0] * out[0] + out[1] * out[1] + out[2] * out[2] + out[3] * out[3])
    return Quaternion(out[0] / n, out[1] / n, out[2] / n, out[3] / n)


# Batch codec.  Same operations in the same order as the scalar path so the
# two agree bit for bit; used where many rotations are processed at once.


def _quantize_batch(v: np.ndarray) -> np.ndarray:
    x = (v + HALF_RANGE) / SPAN * 1023.0
    levels = np.floor(x + 0.5)
    return np.clip(levels, 0, LEVELS).astype(np.int64)


def _dequantize_batch(levels: np.ndarray) -> np.ndarray:
    return (levels / 1023.0) * SPAN - HALF_RANGE


def decode_quat_batch(codes: np.ndarray) -> np.ndarray:
    """Decode an array of codes to an (N, 4) array of quaternion components."""
    codes = np.asarray(codes, dtype=np.int64)
    drop = (codes >> 30) & 0x3
    a = _dequantize_batch((codes >> 20) & 0x3FF)
    b = _dequantize_batch((codes >> 10) & 0x3FF)
    c = _dequantize_batch(codes & 0x3FF)
    ss = a * a + b * b + c * c
    rad = 1.0 - ss
    d = np.where(rad > 0.0, np.sqrt(np.maximum(rad, 0.0)), 0.0)
    out = np.zeros((codes.shape[0], 4), dtype=float)
    kept_vals = (a, b, c)
    for di in range(4):
        mask = drop == di
        if not mask.any():
            continue
        for slot, comp_idx in enumerate(_KEPT[di]):
            out[mask, comp_idx] = kept_vals[slot][mask]
        out[mask, di] = d[mask]
    n = np.sqrt(
        out[:, 0] * out[:, 0]
        + out[:, 1] * out[:, 1]
        + out[:, 2] * out[:, 2]
        + out[:, 3] * out[:, 3]
    )
    return out / n[:, None]


def encode_quat_batch(comps: np.ndarray) -> np.ndarray:
    """Encode an (N, 4) array of unit quaternion components to uint32 codes."""
    comps = np.asarray(comps, dtype=float)
    if comps.ndim != 2 or comps.shape[1] != 4:
        raise ValueError("expected an (N, 4) component array")
    norm_sq = (
        comps[:, 0] * comps[:, 0]
        + comps[:, 1] * comps[:, 1]
        + comps[:, 2] * comps[:, 2]
        + comps[:, 3] * comps[:, 3]
    )
    if np.any(np.abs(norm_sq - 1.0) > UNIT_NORM_TOL) or not np.all(np.isfinite(comps)):
        raise ValueError("batch contains non-unit or non-finite quaternions")

    n = comps.shape[0]
    cand_codes = np.zeros((n, 4), dtype=np.int64)
    cand_errs = np.zeros((n, 4), dtype=float)
    for drop in range(4):
        sign = np.where(comps[:, drop] < 0.0, -1.0, 1.0)
        ka, kb, kc = _KEPT[drop]
        la = _quantize_batch(sign * comps[:, ka])
        lb = _quantize_batch(sign * comps[:, kb])
        lc = _quantize_batch(sign * comps[:, kc])
        codes = (drop << 30) | (la << 20) | (lb << 10) | lc
        dq = decode_quat_batch(codes)
        diff = comps - dq
        em = (
            diff[:, 0] * diff[:, 0]
            + diff[:, 1] * diff[:, 1]
            + diff[:, 2] * diff[:, 2]
            + diff[:, 3] * diff[:, 3]
        )
        summ = comps + dq
        ep = (
            summ[:, 0] * summ[:, 0]
            + summ[:, 1] * summ[:, 1]
            + summ[:, 2] * summ[:, 2]
            + summ[:, 3] * summ[:, 3]
        )
        cand_codes[:, drop] = codes
        cand_errs[:, drop] = np.where(em < ep, em, ep)
    best = np.argmin(cand_errs, axis=1)
    return cand_codes[np.arange(n), best].astype(np.uint32)


def angle_between_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rotation angles (radians) between paired (N, 4) component arrays."""
    d = np.abs(np.sum(np.asarray(a) * np.asarray(b), axis=1))
    return 2.0 * np.arccos(np.minimum(d, 1.0))
