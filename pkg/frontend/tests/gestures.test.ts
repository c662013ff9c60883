import { describe, expect, it } from "vitest";

import {
  arcballRotation,
  arcballVector,
  applyPan,
  applyRotation,
  applyScale,
  TransformThrottle,
  SEND_INTERVAL_MS,
} from "../src/gestures.js";
import { identityTransform, SharedTransform } from "../src/protocol/payloads.js";
import { angleBetween, normSq, quatRotate } from "../src/protocol/quaternion.js";

describe("arcball", () => {
  it("maps the center to the sphere front", () => {
    expect(arcballVector(0, 0)).toEqual([0, 0, 1]);
  });

  it("clamps outside points to the equator", () => {
    const v = arcballVector(2, 0);
    expect(v[0]).toBeCloseTo(1);
    expect(v[2]).toBe(0);
  });

  it("no movement produces the identity rotation", () => {
    const a = arcballVector(0.3, 0.2);
    expect(arcballRotation(a, a)).toEqual([0, 0, 0, 1]);
  });

  it("horizontal drag rotates about the vertical axis", () => {
    const q = arcballRotation(arcballVector(0, 0), arcballVector(0.4, 0));
    expect(Math.abs(normSq(q) - 1)).toBeLessThan(1e-12);
    const rotated = quatRotate(q, [0, 0, 1]);
    expect(rotated[1]).toBeCloseTo(0, 10); // stays in the xz plane
    expect(rotated[0]).toBeGreaterThan(0.1);
  });

  it("drag and inverse drag cancel", () => {
    const a = arcballVector(-0.2, 0.1);
    const b = arcballVector(0.3, -0.25);
    const forward = arcballRotation(a, b);
    const back = arcballRotation(b, a);
    let t = applyRotation(identityTransform(), forward);
    t = applyRotation(t, back);
    expect(angleBetween(t.rotation, [0, 0, 0, 1])).toBeLessThan(1e-9);
  });
});

describe("scale and pan", () => {
  it("scale clamps to protocol bounds", () => {
    let t = identityTransform();
    for (let i = 0; i < 200; i++) t = applyScale(t, 2);
    expect(t.scale).toBe(100.0);
    for (let i = 0; i < 400; i++) t = applyScale(t, 0.5);
    expect(t.scale).toBe(0.01);
  });

  it("pan accumulates in the anchor plane", () => {
    const t = applyPan(applyPan(identityTransform(), 0.1, 0), 0.05, -0.2);
    expect(t.translation[0]).toBeCloseTo(0.15);
    expect(t.translation[1]).toBeCloseTo(-0.2);
    expect(t.translation[2]).toBe(0);
  });
});

describe("transform throttle", () => {
  it("limits continuous sends to 10 Hz and always sends the final state", () => {
    const sent: SharedTransform[] = [];
    const throttle = new TransformThrottle((t) => sent.push(t));
    let now = 1000;
    for (let i = 0; i < 50; i++) {
      throttle.update(applyScale(identityTransform(), 1 + i * 0.01), now);
      now += 16; // ~60 fps gesture updates over 800 ms
    }
    expect(sent.length).toBeLessThanOrEqual(Math.ceil(800 / SEND_INTERVAL_MS) + 1);
    expect(sent.length).toBeGreaterThanOrEqual(7);
    const before = sent.length;
    throttle.finish();
    // the gesture-end state always reaches the wire, via the trailing send
    // unless the very last update already went out on a throttle boundary
    expect(sent.length).toBeLessThanOrEqual(before + 1);
    expect(sent[sent.length - 1].scale).toBeCloseTo(1.49);

    // off-boundary finish: the trailing send must fire
    const sent2: SharedTransform[] = [];
    const throttle2 = new TransformThrottle((t) => sent2.push(t));
    throttle2.update(applyScale(identityTransform(), 1.1), 5000);
    throttle2.update(applyScale(identityTransform(), 1.2), 5040);
    expect(sent2.length).toBe(1);
    throttle2.finish();
    expect(sent2.length).toBe(2);
    expect(sent2[1].scale).toBeCloseTo(1.2);
  });
});
