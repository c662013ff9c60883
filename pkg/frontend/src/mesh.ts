/**
 * Model geometry for the viewer: the OBJ v/f subset loader and a built-in
 * procedural stand-in shape matching the headless peers' default model.
 * Visual only; digests never depend on local geometry.
 */

import * as THREE from "three";

export function parseObj(text: string): THREE.BufferGeometry {
  const verts: number[][] = [];
  const tris: number[][] = [];
  text.split("\n").forEach((raw, i) => {
    const line = raw.split("#")[0].trim();
    if (!line) return;
    const fields = line.split(/\s+/);
    if (fields[0] === "v") {
      if (fields.length < 4) throw new Error(`line ${i + 1}: vertex needs 3 coordinates`);
      verts.push(fields.slice(1, 4).map(Number));
    } else if (fields[0] === "f") {
      const idx = fields.slice(1).map((f) => {
        const v = Number(f);
        if (!Number.isInteger(v) || v <= 0) throw new Error(`line ${i + 1}: bad face index ${f}`);
        return v - 1;
      });
      for (let k = 1; k < idx.length - 1; k++) {
        tris.push([idx[0], idx[k], idx[k + 1]]);
      }
    }
  });
  if (tris.length === 0) throw new Error("OBJ contains no faces");
  const positions = new Float32Array(tris.length * 9);
  tris.forEach((tri, t) => {
    tri.forEach((vi, c) => {
      positions.set(verts[vi], t * 9 + c * 3);
    });
  });
  const geometry = new THREE.BufferGeometry();
  geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
  geometry.computeVertexNormals();
  return geometry;
}

/** Bumpy sphere matching the default headless-peer model (radius 0.35-0.65). */
export function makeReferenceGeometry(slices = 100, stacks = 51): THREE.BufferGeometry {
  const positions: number[] = [];
  const vertex = (i: number, j: number): [number, number, number] => {
    const theta = (Math.PI * i) / stacks;
    const phi = (2 * Math.PI * j) / slices;
    const r =
      0.5 *
      (1.0 +
        0.18 * Math.sin(3.0 * phi) * Math.sin(2.0 * theta) +
        0.1 * Math.cos(5.0 * theta + 1.0) * Math.sin(theta));
    return [
      r * Math.sin(theta) * Math.cos(phi),
      r * Math.sin(theta) * Math.sin(phi),
      r * Math.cos(theta),
    ];
  };
  for (let i = 0; i < stacks; i++) {
    for (let j = 0; j < slices; j++) {
      const a = vertex(i, j);
      const b = vertex(i + 1, j);
      const c = vertex(i + 1, j + 1);
      const d = vertex(i, j + 1);
      if (i > 0) positions.push(...a, ...b, ...d);
      if (i < stacks - 1) positions.push(...b, ...c, ...d);
    }
  }
  const geometry = new THREE.BufferGeometry();
  geometry.setAttribute("position", new THREE.BufferAttribute(new Float32Array(positions), 3));
  geometry.computeVertexNormals();
  return geometry;
}
