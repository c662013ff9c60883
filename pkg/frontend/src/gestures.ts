/**
 * Pointer gestures to shared-transform intents: drag rotates (arcball),
 * wheel/pinch scales, right-drag or two-finger drag translates. Continuous
 * gestures throttle to 10 Hz on the wire; the final state always sends.
 */

import {
  QuatTuple,
  normalizeQuat,
  quatFromAxisAngle,
  quatMultiply,
} from "./protocol/quaternion.js";
import { SCALE_MAX, SCALE_MIN, SharedTransform, Vec3 } from "./protocol/payloads.js";

export const SEND_INTERVAL_MS = 100; // 10 Hz during continuous gestures

/** Map a pointer position on the canvas to a point on the arcball sphere. */
export function arcballVector(ndcX: number, ndcY: number): Vec3 {
  const d = ndcX * ndcX + ndcY * ndcY;
  if (d <= 1.0) {
    return [ndcX, ndcY, Math.sqrt(1.0 - d)];
  }
  const n = Math.sqrt(d);
  return [ndcX / n, ndcY / n, 0.0];
}

/** Rotation taking arcball point a to b (doubled angle for a full drag). */
export function arcballRotation(a: Vec3, b: Vec3): QuatTuple {
  const cross: Vec3 = [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
  const dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  const cn = Math.sqrt(cross[0] ** 2 + cross[1] ** 2 + cross[2] ** 2);
  if (cn < 1e-12) {
    return [0, 0, 0, 1];
  }
  const angle = Math.atan2(cn, dot) * 2.0;
  return quatFromAxisAngle([cross[0] / cn, cross[1] / cn, cross[2] / cn], angle);
}

export function applyRotation(base: SharedTransform, delta: QuatTuple): SharedTransform {
  return {
    rotation: normalizeQuat(quatMultiply(delta, base.rotation)),
    translation: base.translation,
    scale: base.scale,
  };
}

export function applyScale(base: SharedTransform, factor: number): SharedTransform {
  const scale = Math.min(Math.max(base.scale * factor, SCALE_MIN), SCALE_MAX);
  return { rotation: base.rotation, translation: base.translation, scale };
}

export function applyPan(base: SharedTransform, dx: number, dy: number): SharedTransform {
  return {
    rotation: base.rotation,
    translation: [base.translation[0] + dx, base.translation[1] + dy, base.translation[2]],
    scale: base.scale,
  };
}

/** 10 Hz throttle with guaranteed trailing send at gesture end. */
export class TransformThrottle {
  private lastSent = -Infinity;
  private pending: SharedTransform | null = null;

  constructor(private send: (t: SharedTransform) => void) {}

  update(t: SharedTransform, nowMs: number): void {
    if (nowMs - this.lastSent >= SEND_INTERVAL_MS) {
      this.send(t);
      this.lastSent = nowMs;
      this.pending = null;
    } else {
      this.pending = t;
    }
  }

  finish(): void {
    if (this.pending) {
      this.send(this.pending);
      this.pending = null;
      this.lastSent = -Infinity;
    }
  }
}

export interface GestureCallbacks {
  current(): SharedTransform;
  sendTransform(t: SharedTransform): void;
  tap(ndcX: number, ndcY: number): void;
  longPress(ndcX: number, ndcY: number): void;
}

/** Wire pointer/touch/wheel events on a canvas to gesture intents. */
export function bindGestures(canvas: HTMLCanvasElement, callbacks: GestureCallbacks): void {
  const throttle = new TransformThrottle(callbacks.sendTransform);
  let dragging = false;
  let panning = false;
  let moved = false;
  let lastArc: Vec3 = [0, 0, 1];
  let lastX = 0;
  let lastY = 0;
  let working: SharedTransform | null = null;
  let pressTimer: ReturnType<typeof setTimeout> | null = null;

  const ndc = (e: PointerEvent | WheelEvent): [number, number] => {
    const rect = canvas.getBoundingClientRect();
    return [
      ((e.clientX - rect.left) / rect.width) * 2 - 1,
      -(((e.clientY - rect.top) / rect.height) * 2 - 1),
    ];
  };

  canvas.addEventListener("pointerdown", (e) => {
    canvas.setPointerCapture(e.pointerId);
    const [x, y] = ndc(e);
    dragging = e.button === 0;
    panning = e.button === 2;
    moved = false;
    lastArc = arcballVector(x, y);
    lastX = x;
    lastY = y;
    working = callbacks.current();
    pressTimer = setTimeout(() => {
      pressTimer = null;
      if (!moved) {
        callbacks.longPress(x, y);
        dragging = panning = false;
      }
    }, 550);
  });

  canvas.addEventListener("pointermove", (e) => {
    if (!dragging && !panning) return;
    const [x, y] = ndc(e);
    if (Math.abs(x - lastX) + Math.abs(y - lastY) > 0.01) {
      moved = true;
    }
    if (!working) return;
    if (dragging) {
      const arc = arcballVector(x, y);
      working = applyRotation(working, arcballRotation(lastArc, arc));
      lastArc = arc;
    } else if (panning) {
      working = applyPan(working, (x - lastX) * 1.2, (y - lastY) * 1.2);
    }
    lastX = x;
    lastY = y;
    throttle.update(working, performance.now());
  });

  canvas.addEventListener("pointerup", (e) => {
    if (pressTimer) {
      clearTimeout(pressTimer);
      pressTimer = null;
      if (!moved && e.button === 0) {
        const [x, y] = ndc(e);
        callbacks.tap(x, y);
      }
    }
    if (moved) {
      throttle.finish();
    }
    dragging = panning = false;
    working = null;
  });

  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    const factor = Math.exp(-e.deltaY * 0.001);
    const next = applyScale(callbacks.current(), factor);
    throttle.update(next, performance.now());
    throttle.finish();
  });

  canvas.addEventListener("contextmenu", (e) => e.preventDefault());
}
