/**
 * three.js scene mirroring the replica: the shared model under the group's
 * placement and the session transform, annotation spheres with billboard
 * labels, peers' colored pointing rays, and GPU clipping planes for the
 * slice stack.
 */

import * as THREE from "three";

import { SessionState, rayColor } from "./session/state.js";
import { QuatTuple, quatConjugate, quatRotate } from "./protocol/quaternion.js";
import { Vec3 } from "./protocol/payloads.js";

export class Viewer {
  readonly renderer: THREE.WebGLRenderer;
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  private modelRoot = new THREE.Group(); // placement frame
  private modelNode = new THREE.Group(); // shared-transform frame (the mesh lives here)
  private mesh: THREE.Mesh | null = null;
  private annotationNodes = new Map<number, THREE.Object3D>();
  private rayNodes = new Map<number, THREE.Object3D>();
  private groupId: number;

  constructor(canvas: HTMLCanvasElement, groupId: number) {
    this.groupId = groupId;
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.localClippingEnabled = true;
    this.camera = new THREE.PerspectiveCamera(50, 1, 0.01, 100);
    this.camera.position.set(0, 0.6, 2.2);
    this.camera.lookAt(0, 0, 0);
    this.scene.background = new THREE.Color(0x10151c);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.45));
    const key = new THREE.DirectionalLight(0xffffff, 1.1);
    key.position.set(2, 3, 4);
    this.scene.add(key);
    const ground = new THREE.GridHelper(4, 16, 0x2a3442, 0x1d2633);
    ground.position.y = -0.75;
    this.scene.add(ground);
    this.modelRoot.add(this.modelNode);
    this.scene.add(this.modelRoot);
  }

  setMesh(geometry: THREE.BufferGeometry): void {
    if (this.mesh) {
      this.modelNode.remove(this.mesh);
    }
    const material = new THREE.MeshStandardMaterial({
      color: 0xb5453c,
      roughness: 0.55,
      metalness: 0.05,
      side: THREE.DoubleSide,
      clippingPlanes: [],
    });
    this.mesh = new THREE.Mesh(geometry, material);
    this.modelNode.add(this.mesh);
  }

  get model(): THREE.Mesh | null {
    return this.mesh;
  }

  resize(width: number, height: number): void {
    this.renderer.setSize(width, height, false);
    this.camera.aspect = width / height;
    this.camera.updateProjectionMatrix();
  }

  /** Rebuild scene-graph state from the replica; cheap enough per frame. */
  sync(state: SessionState, now: number): void {
    const placement = state.placements.get(this.groupId);
    this.modelRoot.visible = placement !== undefined;
    if (placement) {
      this.modelRoot.position.set(...placement.position);
      this.modelRoot.quaternion.set(...placement.rotation);
    }
    const t = state.transform;
    this.modelNode.position.set(...t.translation);
    this.modelNode.quaternion.set(...t.rotation);
    this.modelNode.scale.setScalar(t.scale);

    this.syncAnnotations(state);
    this.syncRays(state, now);
    this.syncClipping(state);
  }

  private syncAnnotations(state: SessionState): void {
    for (const [id, node] of this.annotationNodes) {
      if (!state.annotations.has(id)) {
        this.modelNode.remove(node);
        this.annotationNodes.delete(id);
      }
    }
    for (const [id, record] of state.annotations) {
      if (this.annotationNodes.has(id)) continue;
      const group = new THREE.Group();
      const hue = rayColor(record.annotationId >>> 16) / 360;
      const sphere = new THREE.Mesh(
        new THREE.SphereGeometry(0.02, 12, 12),
        new THREE.MeshStandardMaterial({ color: new THREE.Color().setHSL(hue, 0.8, 0.55) }),
      );
      group.add(sphere);
      if (record.label) {
        group.add(makeLabelSprite(record.label));
      }
      group.position.set(...record.position);
      this.modelNode.add(group);
      this.annotationNodes.set(id, group);
    }
  }

  private syncRays(state: SessionState, now: number): void {
    for (const [peer, node] of this.rayNodes) {
      const live = state.liveRays.get(peer);
      if (!live || live.expiresAt <= now) {
        this.modelNode.remove(node);
        this.rayNodes.delete(peer);
      }
    }
    for (const [peer, live] of state.liveRays) {
      if (live.expiresAt <= now || this.rayNodes.has(peer)) continue;
      const { origin, direction } = live.ray;
      const points = [
        new THREE.Vector3(...origin),
        new THREE.Vector3(
          origin[0] + direction[0] * 5,
          origin[1] + direction[1] * 5,
          origin[2] + direction[2] * 5,
        ),
      ];
      const color = new THREE.Color().setHSL(rayColor(peer) / 360, 0.9, 0.6);
      const line = new THREE.Line(
        new THREE.BufferGeometry().setFromPoints(points),
        new THREE.LineBasicMaterial({ color, linewidth: 2 }),
      );
      this.modelNode.add(line);
      this.rayNodes.set(peer, line);
    }
  }

  private syncClipping(state: SessionState): void {
    if (!this.mesh) return;
    const material = this.mesh.material as THREE.MeshStandardMaterial;
    // Keep half-space n.x <= offset; three clips where plane.distanceToPoint < 0,
    // i.e. keeps nrm.x + constant >= 0, so pass (-n, offset).
    material.clippingPlanes = state.sliceStack.map((plane) => {
      const world = new THREE.Plane(
        new THREE.Vector3(-plane.normal[0], -plane.normal[1], -plane.normal[2]),
        plane.offset,
      );
      // planes are model-local: transform into world space for the renderer
      this.modelNode.updateMatrixWorld();
      return world.applyMatrix4(this.modelNode.matrixWorld);
    });
    material.needsUpdate = true;
  }

  render(): void {
    this.renderer.render(this.scene, this.camera);
  }

  /**
   * Raycast a pointer position against the visible (unclipped) model
   * surface; returns a model-local hit point or null.
   */
  pickModelPoint(ndcX: number, ndcY: number, sliceStack: { normal: Vec3; offset: number }[]): Vec3 | null {
    if (!this.mesh || !this.modelRoot.visible) return null;
    const caster = new THREE.Raycaster();
    caster.setFromCamera(new THREE.Vector2(ndcX, ndcY), this.camera);
    for (const hit of caster.intersectObject(this.mesh, false)) {
      const local = this.modelNode.worldToLocal(hit.point.clone());
      const kept = sliceStack.every(
        (p) =>
          p.normal[0] * local.x + p.normal[1] * local.y + p.normal[2] * local.z <=
          p.offset + 1e-9,
      );
      if (kept) {
        return [local.x, local.y, local.z];
      }
    }
    return null;
  }
}

function makeLabelSprite(text: string): THREE.Sprite {
  const canvas = document.createElement("canvas");
  const ctx = canvas.getContext("2d")!;
  ctx.font = "28px system-ui, sans-serif";
  const width = Math.ceil(ctx.measureText(text).width) + 16;
  canvas.width = width;
  canvas.height = 40;
  const ctx2 = canvas.getContext("2d")!;
  ctx2.font = "28px system-ui, sans-serif";
  ctx2.fillStyle = "rgba(8, 12, 18, 0.75)";
  ctx2.fillRect(0, 0, width, 40);
  ctx2.fillStyle = "#f4f6f8";
  ctx2.fillText(text, 8, 29);
  const texture = new THREE.CanvasTexture(canvas);
  const sprite = new THREE.Sprite(new THREE.SpriteMaterial({ map: texture, depthTest: false }));
  sprite.scale.set(width / 400, 0.1, 1);
  sprite.position.set(0, 0.05, 0);
  return sprite;
}

/** Rotate a model-local ray out of camera-world space (used for pointing). */
export function worldRayToModel(
  origin: Vec3,
  direction: Vec3,
  placementRotation: QuatTuple,
  placementPosition: Vec3,
  transformRotation: QuatTuple,
  transformTranslation: Vec3,
  transformScale: number,
): { origin: Vec3; direction: Vec3 } {
  const pInv = quatConjugate(placementRotation);
  const afterPlacement = quatRotate(pInv, [
    origin[0] - placementPosition[0],
    origin[1] - placementPosition[1],
    origin[2] - placementPosition[2],
  ]);
  const tInv = quatConjugate(transformRotation);
  const local = quatRotate(tInv, [
    (afterPlacement[0] - transformTranslation[0]) / transformScale,
    (afterPlacement[1] - transformTranslation[1]) / transformScale,
    (afterPlacement[2] - transformTranslation[2]) / transformScale,
  ]);
  let dir = quatRotate(pInv, direction);
  dir = quatRotate(tInv, dir);
  const n = Math.sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
  return { origin: local, direction: [dir[0] / n, dir[1] / n, dir[2] / n] };
}
