/**
 * Typed payload codecs (little-endian) mirroring the relay's layouts.
 * Positions and scales travel as f32; reading them back widens to the
 * exact same doubles the other implementations hold.
 */

import { decodeQuat, encodeQuat, QuatTuple } from "./quaternion.js";

export type Vec3 = [number, number, number];

export const TTL_MIN_MS = 100;
export const TTL_MAX_MS = 60000;
export const SCALE_MIN = 0.01;
export const SCALE_MAX = 100.0;
export const MAX_LABEL_BYTES = 255;

export enum ErrorCode {
  SESSION_FULL = 1,
  ALREADY_PLACED = 2,
  BAD_STATE = 3,
}

export interface SharedTransform {
  rotation: QuatTuple;
  translation: Vec3;
  scale: number;
}

export interface AnnotationRecord {
  annotationId: number;
  position: Vec3;
  color: number;
  label: string;
}

export interface SlicePlane {
  normal: Vec3;
  offset: number;
}

export interface Placement {
  rotation: QuatTuple;
  position: Vec3;
}

export class PayloadError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "PayloadError";
  }
}

export function identityTransform(): SharedTransform {
  return { rotation: [0, 0, 0, 1], translation: [0, 0, 0], scale: 1.0 };
}

function writer(size: number): [DataView, Uint8Array] {
  const out = new Uint8Array(size);
  return [new DataView(out.buffer), out];
}

function reader(data: Uint8Array, expected: number | null, what: string): DataView {
  if (expected !== null && data.length !== expected) {
    throw new PayloadError(`${what} payload must be ${expected} bytes, got ${data.length}`);
  }
  return new DataView(data.buffer, data.byteOffset, data.byteLength);
}

function checkFinite(values: number[], what: string): void {
  if (!values.every(Number.isFinite)) {
    throw new PayloadError(`${what} contains non-finite values`);
  }
}

export function encodeTransform(t: SharedTransform): Uint8Array {
  const [view, out] = writer(20);
  view.setUint32(0, encodeQuat(t.rotation), true);
  view.setFloat32(4, t.translation[0], true);
  view.setFloat32(8, t.translation[1], true);
  view.setFloat32(12, t.translation[2], true);
  view.setFloat32(16, t.scale, true);
  return out;
}

export function decodeTransform(data: Uint8Array): SharedTransform {
  const view = reader(data, 20, "TRANSFORM");
  const rotation = decodeQuat(view.getUint32(0, true));
  const translation: Vec3 = [
    view.getFloat32(4, true),
    view.getFloat32(8, true),
    view.getFloat32(12, true),
  ];
  const scale = view.getFloat32(16, true);
  checkFinite([...translation, scale], "TRANSFORM");
  if (scale < SCALE_MIN || scale > SCALE_MAX) {
    throw new PayloadError(`scale ${scale} outside [${SCALE_MIN}, ${SCALE_MAX}]`);
  }
  return { rotation, translation, scale };
}

const utf8Encoder = new TextEncoder();
const utf8Decoder = new TextDecoder("utf-8", { fatal: true });

export function encodeAnnotationAdd(a: AnnotationRecord): Uint8Array {
  const label = utf8Encoder.encode(a.label);
  if (label.length > MAX_LABEL_BYTES) {
    throw new Error(`label exceeds ${MAX_LABEL_BYTES} UTF-8 bytes`);
  }
  const [view, out] = writer(18 + label.length);
  view.setUint32(0, a.annotationId, true);
  view.setFloat32(4, a.position[0], true);
  view.setFloat32(8, a.position[1], true);
  view.setFloat32(12, a.position[2], true);
  view.setUint8(16, a.color);
  view.setUint8(17, label.length);
  out.set(label, 18);
  return out;
}

export function decodeAnnotationAdd(data: Uint8Array): AnnotationRecord {
  if (data.length < 18) {
    throw new PayloadError(`ANNOTATION_ADD payload too short: ${data.length} bytes`);
  }
  const view = reader(data, null, "ANNOTATION_ADD");
  const labelLen = view.getUint8(17);
  if (data.length !== 18 + labelLen) {
    throw new PayloadError("ANNOTATION_ADD label length mismatch");
  }
  const position: Vec3 = [
    view.getFloat32(4, true),
    view.getFloat32(8, true),
    view.getFloat32(12, true),
  ];
  checkFinite(position, "ANNOTATION_ADD position");
  let label: string;
  try {
    label = utf8Decoder.decode(data.slice(18));
  } catch {
    throw new PayloadError("ANNOTATION_ADD label is not valid UTF-8");
  }
  return {
    annotationId: view.getUint32(0, true),
    position,
    color: view.getUint8(16),
    label,
  };
}

export function encodeAnnotationRemove(annotationId: number): Uint8Array {
  const [view, out] = writer(4);
  view.setUint32(0, annotationId, true);
  return out;
}

export function decodeAnnotationRemove(data: Uint8Array): number {
  return reader(data, 4, "ANNOTATION_REMOVE").getUint32(0, true);
}

export interface PointRay {
  origin: Vec3;
  direction: Vec3;
  ttlMs: number;
}

export function encodePointRay(ray: PointRay): Uint8Array {
  if (ray.ttlMs < TTL_MIN_MS || ray.ttlMs > TTL_MAX_MS) {
    throw new Error(`ttl ${ray.ttlMs} outside [${TTL_MIN_MS}, ${TTL_MAX_MS}]`);
  }
  const [view, out] = writer(26);
  for (let i = 0; i < 3; i++) view.setFloat32(i * 4, ray.origin[i], true);
  for (let i = 0; i < 3; i++) view.setFloat32(12 + i * 4, ray.direction[i], true);
  view.setUint16(24, ray.ttlMs, true);
  return out;
}

export function decodePointRay(data: Uint8Array): PointRay {
  const view = reader(data, 26, "POINT_RAY");
  const origin: Vec3 = [view.getFloat32(0, true), view.getFloat32(4, true), view.getFloat32(8, true)];
  const direction: Vec3 = [view.getFloat32(12, true), view.getFloat32(16, true), view.getFloat32(20, true)];
  const ttlMs = view.getUint16(24, true);
  checkFinite([...origin, ...direction], "POINT_RAY");
  if (ttlMs < TTL_MIN_MS || ttlMs > TTL_MAX_MS) {
    throw new PayloadError(`POINT_RAY ttl ${ttlMs} out of range`);
  }
  return { origin, direction, ttlMs };
}

export function encodeSlicePush(plane: SlicePlane): Uint8Array {
  const [view, out] = writer(16);
  view.setFloat32(0, plane.normal[0], true);
  view.setFloat32(4, plane.normal[1], true);
  view.setFloat32(8, plane.normal[2], true);
  view.setFloat32(12, plane.offset, true);
  return out;
}

export function decodeSlicePush(data: Uint8Array): SlicePlane {
  const view = reader(data, 16, "SLICE_PUSH");
  const normal: Vec3 = [view.getFloat32(0, true), view.getFloat32(4, true), view.getFloat32(8, true)];
  const offset = view.getFloat32(12, true);
  checkFinite([...normal, offset], "SLICE_PUSH");
  const n = Math.sqrt(normal[0] * normal[0] + normal[1] * normal[1] + normal[2] * normal[2]);
  if (Math.abs(n - 1.0) > 1e-6) {
    throw new PayloadError(`SLICE_PUSH normal is not unit length`);
  }
  return { normal, offset };
}

export function encodePlaceModel(groupId: number, placement: Placement): Uint8Array {
  const [view, out] = writer(18);
  view.setUint16(0, groupId, true);
  view.setUint32(2, encodeQuat(placement.rotation), true);
  view.setFloat32(6, placement.position[0], true);
  view.setFloat32(10, placement.position[1], true);
  view.setFloat32(14, placement.position[2], true);
  return out;
}

export function decodePlaceModel(data: Uint8Array): { groupId: number; placement: Placement } {
  const view = reader(data, 18, "PLACE_MODEL");
  const position: Vec3 = [view.getFloat32(6, true), view.getFloat32(10, true), view.getFloat32(14, true)];
  checkFinite(position, "PLACE_MODEL position");
  return {
    groupId: view.getUint16(0, true),
    placement: { rotation: decodeQuat(view.getUint32(2, true)), position },
  };
}

export function encodeJoin(groupId: number, autoMatch: boolean): Uint8Array {
  const [view, out] = writer(3);
  view.setUint16(0, groupId, true);
  view.setUint8(2, autoMatch ? 1 : 0);
  return out;
}

export function decodeJoin(data: Uint8Array): { groupId: number; autoMatch: boolean } {
  const view = reader(data, 3, "JOIN");
  return { groupId: view.getUint16(0, true), autoMatch: (view.getUint8(2) & 1) === 1 };
}

export function decodeJoinAck(data: Uint8Array): { assignedPeer: number; sessionId: bigint } {
  const view = reader(data, 10, "JOIN_ACK");
  return { assignedPeer: view.getUint16(0, true), sessionId: view.getBigUint64(2, true) };
}

export function decodeError(data: Uint8Array): { code: ErrorCode; detail: string } {
  if (data.length < 2) {
    throw new PayloadError(`ERROR payload too short: ${data.length} bytes`);
  }
  const view = reader(data, null, "ERROR");
  const detailLen = view.getUint8(1);
  if (data.length !== 2 + detailLen) {
    throw new PayloadError("ERROR detail length mismatch");
  }
  return {
    code: view.getUint8(0) as ErrorCode,
    detail: new TextDecoder().decode(data.slice(2)),
  };
}
