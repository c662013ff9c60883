/**
 * Unit quaternions and the 32-bit smallest-three rotation codec.
 *
 * This mirrors the relay-side codec operation for operation: identical
 * IEEE-754 double arithmetic in identical order, so codes and digests agree
 * bit for bit across implementations. Do not "simplify" the float
 * expressions here; their evaluation order is part of the wire contract.
 */

export type QuatTuple = [number, number, number, number]; // x, y, z, w

const HALF_RANGE = Math.sqrt(0.5);
const SPAN = 2.0 * HALF_RANGE;
const LEVELS = 1023;
export const UNIT_NORM_TOL = 1e-6;

// Kept component indices, ascending, per drop index.
const KEPT: ReadonlyArray<readonly [number, number, number]> = [
  [1, 2, 3],
  [0, 2, 3],
  [0, 1, 3],
  [0, 1, 2],
];

export function normSq(q: QuatTuple): number {
  return q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3];
}

export function normalizeQuat(q: QuatTuple): QuatTuple {
  const n = Math.sqrt(normSq(q));
  if (n === 0 || !Number.isFinite(n)) {
    throw new Error("cannot normalize zero or non-finite quaternion");
  }
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

export function quatFromAxisAngle(axis: [number, number, number], angle: number): QuatTuple {
  const n = Math.sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  const s = Math.sin(angle / 2.0) / n;
  return normalizeQuat([axis[0] * s, axis[1] * s, axis[2] * s, Math.cos(angle / 2.0)]);
}

export function quatMultiply(a: QuatTuple, b: QuatTuple): QuatTuple {
  const [ax, ay, az, aw] = a;
  const [bx, by, bz, bw] = b;
  return normalizeQuat([
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
    aw * bw - ax * bx - ay * by - az * bz,
  ]);
}

export function quatConjugate(q: QuatTuple): QuatTuple {
  return [-q[0], -q[1], -q[2], q[3]];
}

export function quatRotate(q: QuatTuple, v: [number, number, number]): [number, number, number] {
  const [vx, vy, vz] = v;
  const tx = 2.0 * (q[1] * vz - q[2] * vy);
  const ty = 2.0 * (q[2] * vx - q[0] * vz);
  const tz = 2.0 * (q[0] * vy - q[1] * vx);
  return [
    vx + q[3] * tx + (q[1] * tz - q[2] * ty),
    vy + q[3] * ty + (q[2] * tx - q[0] * tz),
    vz + q[3] * tz + (q[0] * ty - q[1] * tx),
  ];
}

export function angleBetween(a: QuatTuple, b: QuatTuple): number {
  const d = Math.abs(a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]);
  return 2.0 * Math.acos(Math.min(d, 1.0));
}

function quantize(v: number): number {
  const x = ((v + HALF_RANGE) / SPAN) * 1023.0;
  const level = Math.floor(x + 0.5);
  if (level < 0) return 0;
  if (level > LEVELS) return LEVELS;
  return level;
}

function dequantize(level: number): number {
  return (level / 1023.0) * SPAN - HALF_RANGE;
}

function candidateCode(q: QuatTuple, drop: number): number {
  const sign = q[drop] < 0.0 ? -1.0 : 1.0;
  const [ka, kb, kc] = KEPT[drop];
  const la = quantize(sign * q[ka]);
  const lb = quantize(sign * q[kb]);
  const lc = quantize(sign * q[kc]);
  // >>> 0 keeps the value an unsigned 32-bit integer
  return ((drop << 30) | (la << 20) | (lb << 10) | lc) >>> 0;
}

export function encodeQuat(q: QuatTuple): number {
  if (!q.every(Number.isFinite)) {
    throw new Error("cannot encode non-finite quaternion");
  }
  const ns = normSq(q);
  if (Math.abs(ns - 1.0) > UNIT_NORM_TOL) {
    throw new Error(`cannot encode non-unit quaternion: |q|^2 = ${ns}`);
  }
  let bestCode = 0;
  let bestErr = Infinity;
  for (let drop = 0; drop < 4; drop++) {
    const code = candidateCode(q, drop);
    const d = decodeQuat(code);
    const d0 = q[0] - d[0];
    const d1 = q[1] - d[1];
    const d2 = q[2] - d[2];
    const d3 = q[3] - d[3];
    const em = d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3;
    const s0 = q[0] + d[0];
    const s1 = q[1] + d[1];
    const s2 = q[2] + d[2];
    const s3 = q[3] + d[3];
    const ep = s0 * s0 + s1 * s1 + s2 * s2 + s3 * s3;
    const err = em < ep ? em : ep;
    if (err < bestErr) {
      bestErr = err;
      bestCode = code;
    }
  }
  return bestCode;
}

export function decodeQuat(code: number): QuatTuple {
  if (!Number.isInteger(code) || code < 0 || code > 0xffffffff) {
    throw new Error(`code out of 32-bit range: ${code}`);
  }
  const drop = (code >>> 30) & 0x3;
  const a = dequantize((code >>> 20) & 0x3ff);
  const b = dequantize((code >>> 10) & 0x3ff);
  const c = dequantize(code & 0x3ff);
  const ss = a * a + b * b + c * c;
  const rad = 1.0 - ss;
  const d = rad > 0.0 ? Math.sqrt(rad) : 0.0;
  const out: QuatTuple = [0.0, 0.0, 0.0, 0.0];
  const [ka, kb, kc] = KEPT[drop];
  out[ka] = a;
  out[kb] = b;
  out[kc] = c;
  out[drop] = d;
  const n = Math.sqrt(out[0] * out[0] + out[1] * out[1] + out[2] * out[2] + out[3] * out[3]);
  return [out[0] / n, out[1] / n, out[2] / n, out[3] / n];
}
