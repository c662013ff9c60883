/**
 * Cross-implementation parity: every value here was produced by the relay
 * side (scripts/generate_golden_vectors.py) and must match bit for bit.
 */

import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import {
  decodeQuat,
  encodeQuat,
  angleBetween,
  QuatTuple,
} from "../src/protocol/quaternion.js";
import {
  bytesToHex,
  decodeFrame,
  encodeFrame,
  FrameDecodeError,
  hexToBytes,
  MsgType,
} from "../src/protocol/framing.js";
import {
  decodeTransform,
  encodeTransform,
  decodeAnnotationAdd,
  PayloadError,
} from "../src/protocol/payloads.js";
import {
  canonicalStateBytes,
  digestHex,
  fnv1a64,
  initialState,
  rayColor,
  replayFrames,
  restore,
} from "../src/session/state.js";

const goldenPath = join(dirname(fileURLToPath(import.meta.url)), "golden", "golden.json");
const golden = JSON.parse(readFileSync(goldenPath, "utf-8"));

describe("fnv1a64", () => {
  it("matches the relay's hashes", () => {
    for (const { data_hex, hash } of golden.fnv) {
      expect(fnv1a64(hexToBytes(data_hex)).toString(16).padStart(16, "0")).toBe(hash);
    }
  });
});

describe("smallest-three codec", () => {
  it("encodes every golden quaternion to the identical code", () => {
    for (const row of golden.quat_round_trips) {
      expect(encodeQuat(row.q as QuatTuple)).toBe(row.code);
    }
  });

  it("decodes every golden code to bit-identical components", () => {
    for (const row of golden.quat_round_trips) {
      const decoded = decodeQuat(row.code);
      for (let i = 0; i < 4; i++) {
        expect(decoded[i]).toBe(row.decoded[i]);
      }
    }
  });

  it("decodes adversarial codes identically and re-encodes stably", () => {
    for (const row of golden.quat_decodes) {
      const decoded = decodeQuat(row.code);
      for (let i = 0; i < 4; i++) {
        expect(decoded[i]).toBe(row.decoded[i]);
      }
      expect(encodeQuat(decoded)).toBe(encodeQuat(decodeQuat(encodeQuat(decoded))));
    }
  });

  it("round-trips random rotations within 0.25 degrees", () => {
    let worst = 0;
    for (const row of golden.quat_round_trips) {
      const q = row.q as QuatTuple;
      worst = Math.max(worst, angleBetween(q, decodeQuat(encodeQuat(q))));
    }
    expect(worst).toBeLessThan((0.25 * Math.PI) / 180);
  });

  it("identity encodes to the pinned code", () => {
    expect(encodeQuat([0, 0, 0, 1])).toBe(0xe0080200);
  });
});

describe("frame codec", () => {
  it("re-encodes golden frames byte for byte", () => {
    for (const row of golden.frames) {
      const data = hexToBytes(row.hex);
      const frame = decodeFrame(data);
      expect(frame.msgType).toBe(row.msg_type);
      expect(bytesToHex(encodeFrame(frame))).toBe(row.hex);
    }
  });

  it("transform frames are 44 bytes", () => {
    const payload = encodeTransform({ rotation: [0, 0, 0, 1], translation: [0, 0, 0], scale: 1 });
    const data = encodeFrame({
      msgType: MsgType.TRANSFORM,
      sessionId: 1n,
      senderPeer: 0,
      relaySeq: 0,
      senderSeq: 1,
      payload,
    });
    expect(data.length).toBe(44);
  });

  it("rejects malformed frames recoverably", () => {
    expect(() => decodeFrame(new Uint8Array(10))).toThrow(FrameDecodeError);
    const good = hexToBytes(golden.frames[0].hex);
    const badMagic = good.slice();
    badMagic[1] = 0x44;
    expect(() => decodeFrame(badMagic)).toThrow(/magic/);
    const badVersion = good.slice();
    badVersion[2] = 9;
    expect(() => decodeFrame(badVersion)).toThrow(/version/);
    const badType = good.slice();
    badType[3] = 200;
    expect(() => decodeFrame(badType)).toThrow(/msg_type/);
  });
});

describe("payload validation", () => {
  it("rejects out-of-range scale", () => {
    const data = encodeTransform({ rotation: [0, 0, 0, 1], translation: [0, 0, 0], scale: 1 });
    const view = new DataView(data.buffer);
    view.setFloat32(16, 0.001, true);
    expect(() => decodeTransform(data)).toThrow(PayloadError);
  });

  it("round-trips annotations with unicode labels", () => {
    const frameRow = golden.frames.find((f: { msg_type: number }) => f.msg_type === 6)!;
    const record = decodeAnnotationAdd(decodeFrame(hexToBytes(frameRow.hex)).payload);
    expect(record.label).toBe("left atrium");
    expect(record.annotationId >>> 16).toBe(1);
  });
});

describe("session state parity", () => {
  it("empty state digests to the pinned value", () => {
    const state = initialState();
    const empty = golden.states.find((s: { name: string }) => s.name === "empty")!;
    expect(digestHex(state)).toBe(empty.digest);
    expect(bytesToHex(canonicalStateBytes(state))).toBe(empty.snapshot_hex.slice(8));
  });

  it("replaying the golden frame sequence reproduces the digest", () => {
    const replayed = golden.states.find((s: { name: string }) => s.name === "replayed")!;
    const state = replayFrames(replayed.frames.map(hexToBytes), 100.0);
    expect(digestHex(state)).toBe(replayed.digest);
  });

  it("restores golden snapshots to the same digest", () => {
    for (const row of golden.states) {
      const state = restore(hexToBytes(row.snapshot_hex));
      expect(digestHex(state)).toBe(row.digest);
      expect(state.members.size).toBe(0);
      expect(state.liveRays.size).toBe(0);
    }
  });

  it("digest ignores live rays and members", () => {
    const replayed = golden.states.find((s: { name: string }) => s.name === "replayed")!;
    const state = replayFrames(replayed.frames.map(hexToBytes), 100.0);
    state.members.set(9, 3);
    state.liveRays.set(9, {
      ray: { origin: [0, 0, 0], direction: [0, 0, 1], ttlMs: 500 },
      expiresAt: 999,
    });
    expect(digestHex(state)).toBe(replayed.digest);
  });
});

describe("ray colors", () => {
  it("uses the golden-angle assignment", () => {
    expect(rayColor(0)).toBe(0);
    expect(rayColor(1)).toBeCloseTo(137.508, 9);
    const hues = Array.from({ length: 16 }, (_, p) => rayColor(p));
    for (let i = 0; i < 16; i++) {
      for (let j = i + 1; j < 16; j++) {
        const diff = Math.abs(hues[i] - hues[j]);
        expect(Math.min(diff, 360 - diff)).toBeGreaterThanOrEqual(8);
      }
    }
  });
});
