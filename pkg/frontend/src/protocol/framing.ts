/**
 * Binary wire envelope: 24-byte little-endian header + payload, identical
 * to the relay's framing. One WebSocket binary message carries one frame.
 */

export const MAGIC0 = 0x48; // 'H'
export const MAGIC1 = 0x43; // 'C'
export const VERSION = 1;
export const HEADER_LEN = 24;
export const MAX_PAYLOAD = 0xffff;
export const RELAY_PEER = 0xffff;

export enum MsgType {
  JOIN = 1,
  JOIN_ACK = 2,
  LEAVE = 3,
  PLACE_MODEL = 4,
  TRANSFORM = 5,
  ANNOTATION_ADD = 6,
  ANNOTATION_REMOVE = 7,
  POINT_RAY = 8,
  SLICE_PUSH = 9,
  SLICE_POP = 10,
  HEARTBEAT = 11,
  STATE_SNAPSHOT = 12,
  ERROR = 13,
}

export interface Frame {
  msgType: MsgType;
  sessionId: bigint;
  senderPeer: number;
  relaySeq: number;
  senderSeq: number;
  payload: Uint8Array;
}

export class FrameDecodeError extends Error {
  constructor(public readonly kind: "truncated" | "bad_magic" | "bad_version" | "length_mismatch" | "unknown_msg_type", message: string) {
    super(message);
    this.name = "FrameDecodeError";
  }
}

export function encodeFrame(frame: Frame): Uint8Array {
  if (frame.payload.length > MAX_PAYLOAD) {
    throw new Error(`payload too large: ${frame.payload.length} bytes`);
  }
  const out = new Uint8Array(HEADER_LEN + frame.payload.length);
  const view = new DataView(out.buffer);
  view.setUint8(0, MAGIC0);
  view.setUint8(1, MAGIC1);
  view.setUint8(2, VERSION);
  view.setUint8(3, frame.msgType);
  view.setBigUint64(4, frame.sessionId, true);
  view.setUint16(12, frame.senderPeer, true);
  view.setUint32(14, frame.relaySeq, true);
  view.setUint32(18, frame.senderSeq, true);
  view.setUint16(22, frame.payload.length, true);
  out.set(frame.payload, HEADER_LEN);
  return out;
}

export function decodeFrame(data: Uint8Array): Frame {
  if (data.length < HEADER_LEN) {
    throw new FrameDecodeError("truncated", `frame needs at least ${HEADER_LEN} bytes, got ${data.length}`);
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  if (view.getUint8(0) !== MAGIC0 || view.getUint8(1) !== MAGIC1) {
    throw new FrameDecodeError("bad_magic", "bad magic");
  }
  if (view.getUint8(2) !== VERSION) {
    throw new FrameDecodeError("bad_version", `unsupported version ${view.getUint8(2)}`);
  }
  const payloadLen = view.getUint16(22, true);
  if (data.length !== HEADER_LEN + payloadLen) {
    throw new FrameDecodeError(
      "length_mismatch",
      `declared payload of ${payloadLen} bytes but frame is ${data.length} bytes`,
    );
  }
  const rawType = view.getUint8(3);
  if (!(rawType in MsgType)) {
    throw new FrameDecodeError("unknown_msg_type", `unknown msg_type ${rawType}`);
  }
  return {
    msgType: rawType as MsgType,
    sessionId: view.getBigUint64(4, true),
    senderPeer: view.getUint16(12, true),
    relaySeq: view.getUint32(14, true),
    senderSeq: view.getUint32(18, true),
    payload: data.slice(HEADER_LEN),
  };
}

export function bytesToHex(data: Uint8Array): string {
  return Array.from(data, (b) => b.toString(16).padStart(2, "0")).join("");
}

export function hexToBytes(hex: string): Uint8Array {
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(hex.slice(i * 2, i * 2 + 2), 16);
  }
  return out;
}
