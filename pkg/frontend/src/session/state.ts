/**
 * Mirrored session replica: applies relay-stamped frames in order, restores
 * snapshots, and computes the same canonical FNV-1a 64 digest as every
 * other participant. Rendered model state derives only from this replica.
 */

import { decodeFrame, Frame, MsgType } from "../protocol/framing.js";
import {
  AnnotationRecord,
  decodeAnnotationAdd,
  decodeAnnotationRemove,
  decodeJoin,
  decodePlaceModel,
  decodePointRay,
  decodeSlicePush,
  decodeTransform,
  encodeAnnotationAdd,
  encodePlaceModel,
  encodeSlicePush,
  encodeTransform,
  identityTransform,
  PayloadError,
  Placement,
  PointRay,
  SharedTransform,
  SlicePlane,
} from "../protocol/payloads.js";

export const MAX_MEMBERS = 16;

export interface LiveRay {
  ray: PointRay;
  expiresAt: number; // seconds
}

export interface SessionState {
  transform: SharedTransform;
  annotations: Map<number, AnnotationRecord>;
  sliceStack: SlicePlane[];
  placements: Map<number, Placement>;
  members: Map<number, number>;
  lastAppliedRelaySeq: number;
  liveRays: Map<number, LiveRay>;
}

export interface Effect {
  op: string;
  applied: boolean;
  detail?: string;
}

export class OrderingError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "OrderingError";
  }
}

export function initialState(): SessionState {
  return {
    transform: identityTransform(),
    annotations: new Map(),
    sliceStack: [],
    placements: new Map(),
    members: new Map(),
    lastAppliedRelaySeq: 0,
    liveRays: new Map(),
  };
}

/** Golden-angle hue (degrees); distinct for all 16 session peers. */
export function rayColor(peer: number): number {
  return (peer * 137.508) % 360.0;
}

export function applyMessage(state: SessionState, frame: Frame, now: number): Effect[] {
  if (frame.relaySeq !== state.lastAppliedRelaySeq + 1) {
    throw new OrderingError(
      `relay_seq gap: expected ${state.lastAppliedRelaySeq + 1}, got ${frame.relaySeq}`,
    );
  }
  const effects: Effect[] = [];
  switch (frame.msgType) {
    case MsgType.TRANSFORM:
      state.transform = decodeTransform(frame.payload);
      effects.push({ op: "transform", applied: true });
      break;
    case MsgType.ANNOTATION_ADD: {
      const record = decodeAnnotationAdd(frame.payload);
      if (state.annotations.has(record.annotationId)) {
        effects.push({ op: "annotation_add", applied: false, detail: "duplicate id" });
      } else {
        state.annotations.set(record.annotationId, record);
        effects.push({ op: "annotation_add", applied: true });
      }
      break;
    }
    case MsgType.ANNOTATION_REMOVE: {
      const id = decodeAnnotationRemove(frame.payload);
      effects.push({ op: "annotation_remove", applied: state.annotations.delete(id) });
      break;
    }
    case MsgType.SLICE_PUSH:
      state.sliceStack.push(decodeSlicePush(frame.payload));
      effects.push({ op: "slice_push", applied: true });
      break;
    case MsgType.SLICE_POP:
      if (state.sliceStack.length > 0) {
        state.sliceStack.pop();
        effects.push({ op: "slice_pop", applied: true });
      } else {
        effects.push({ op: "slice_pop", applied: false, detail: "empty stack" });
      }
      break;
    case MsgType.PLACE_MODEL: {
      const { groupId, placement } = decodePlaceModel(frame.payload);
      if (state.placements.has(groupId)) {
        effects.push({ op: "place_model", applied: false, detail: "ALREADY_PLACED" });
      } else {
        state.placements.set(groupId, placement);
        effects.push({ op: "place_model", applied: true });
      }
      break;
    }
    case MsgType.POINT_RAY: {
      const ray = decodePointRay(frame.payload);
      state.liveRays.set(frame.senderPeer, { ray, expiresAt: now + ray.ttlMs / 1000.0 });
      effects.push({ op: "point_ray", applied: true });
      break;
    }
    case MsgType.JOIN: {
      const { groupId } = decodeJoin(frame.payload);
      if (state.members.has(frame.senderPeer)) {
        effects.push({ op: "join", applied: false, detail: "already a member" });
        state.members.set(frame.senderPeer, groupId);
      } else if (state.members.size >= MAX_MEMBERS) {
        effects.push({ op: "join", applied: false, detail: "session full" });
      } else {
        effects.push({ op: "join", applied: true });
        state.members.set(frame.senderPeer, groupId);
      }
      break;
    }
    case MsgType.LEAVE:
      state.members.delete(frame.senderPeer);
      state.liveRays.delete(frame.senderPeer);
      effects.push({ op: "leave", applied: true });
      break;
    default:
      throw new PayloadError(`${MsgType[frame.msgType]} frames do not belong in the ordered stream`);
  }
  state.lastAppliedRelaySeq = frame.relaySeq;
  return effects;
}

export function expireRays(state: SessionState, now: number): void {
  for (const [peer, live] of state.liveRays) {
    if (live.expiresAt <= now) {
      state.liveRays.delete(peer);
    }
  }
}

// -- canonical serialization + digest ---------------------------------------

const FNV64_OFFSET = 0xcbf29ce484222325n;
const FNV64_PRIME = 0x100000001b3n;
const U64 = 0xffffffffffffffffn;

export function fnv1a64(data: Uint8Array): bigint {
  let h = FNV64_OFFSET;
  for (const b of data) {
    h ^= BigInt(b);
    h = (h * FNV64_PRIME) & U64;
  }
  return h;
}

function concatBytes(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let offset = 0;
  for (const p of parts) {
    out.set(p, offset);
    offset += p.length;
  }
  return out;
}

function u16le(value: number): Uint8Array {
  const out = new Uint8Array(2);
  new DataView(out.buffer).setUint16(0, value, true);
  return out;
}

export function canonicalStateBytes(state: SessionState): Uint8Array {
  const parts: Uint8Array[] = [encodeTransform(state.transform)];

  const annIds = [...state.annotations.keys()].sort((a, b) => a - b);
  parts.push(u16le(annIds.length));
  for (const id of annIds) {
    parts.push(encodeAnnotationAdd(state.annotations.get(id)!));
  }

  parts.push(u16le(state.sliceStack.length));
  for (const plane of state.sliceStack) {
    parts.push(encodeSlicePush(plane));
  }

  const groupIds = [...state.placements.keys()].sort((a, b) => a - b);
  parts.push(u16le(groupIds.length));
  for (const gid of groupIds) {
    parts.push(encodePlaceModel(gid, state.placements.get(gid)!));
  }
  return concatBytes(parts);
}

export function digestState(state: SessionState): bigint {
  return fnv1a64(canonicalStateBytes(state));
}

export function digestHex(state: SessionState): string {
  return digestState(state).toString(16).padStart(16, "0");
}

/** Rebuild a replica from a snapshot; members and live rays start empty. */
export function restore(data: Uint8Array): SessionState {
  if (data.length < 4) {
    throw new PayloadError(`snapshot too short: ${data.length} bytes`);
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const state = initialState();
  state.lastAppliedRelaySeq = view.getUint32(0, true);
  let pos = 4;

  const take = (n: number, what: string): Uint8Array => {
    if (pos + n > data.length) {
      throw new PayloadError(`snapshot truncated reading ${what} at byte ${pos}`);
    }
    const chunk = data.slice(pos, pos + n);
    pos += n;
    return chunk;
  };

  state.transform = decodeTransform(take(20, "transform"));

  const annCount = new DataView(take(2, "annotation count").buffer).getUint16(0, true);
  for (let i = 0; i < annCount; i++) {
    const head = take(18, "annotation record");
    const labelLen = head[17];
    const record = decodeAnnotationAdd(
      concatBytes([head, take(labelLen, "annotation label")]),
    );
    state.annotations.set(record.annotationId, record);
  }

  const sliceCount = new DataView(take(2, "slice count").buffer).getUint16(0, true);
  for (let i = 0; i < sliceCount; i++) {
    state.sliceStack.push(decodeSlicePush(take(16, "slice plane")));
  }

  const placementCount = new DataView(take(2, "placement count").buffer).getUint16(0, true);
  for (let i = 0; i < placementCount; i++) {
    const { groupId, placement } = decodePlaceModel(take(18, "placement record"));
    state.placements.set(groupId, placement);
  }

  if (pos !== data.length) {
    throw new PayloadError(`${data.length - pos} trailing bytes after snapshot`);
  }
  return state;
}

/** Apply a batch of raw stamped frames (hex) to a fresh state; test helper. */
export function replayFrames(frameBytes: Uint8Array[], now = 0): SessionState {
  const state = initialState();
  for (const raw of frameBytes) {
    applyMessage(state, decodeFrame(raw), now);
  }
  return state;
}
