/**
 * Browser entry point: connects to the relay over WebSocket (query params:
 * relay, session, group, digest), renders the shared session, and maps
 * gestures to protocol intents.
 */

import { SessionClient, connectWebSocket } from "./net/client.js";
import { MsgType } from "./protocol/framing.js";
import { rayColor } from "./session/state.js";
import { bindGestures } from "./gestures.js";
import { makeReferenceGeometry, parseObj } from "./mesh.js";
import { Viewer, worldRayToModel } from "./viewer.js";
import * as THREE from "three";

const params = new URLSearchParams(window.location.search);
const relayUrl = params.get("relay") ?? `ws://${window.location.hostname}:7778`;
const sessionCode = BigInt(params.get("session") ?? "0");
const groupId = Number(params.get("group") ?? "0");

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const banner = document.getElementById("banner")!;
const memberList = document.getElementById("members")!;
const digestPanel = document.getElementById("digest")!;
const statusLine = document.getElementById("status")!;

function showBanner(text: string, tone: "error" | "info"): void {
  banner.textContent = text;
  banner.className = `banner ${tone}`;
  banner.style.display = "block";
}

const viewer = new Viewer(canvas, groupId);
const modelUrl = params.get("model");
if (modelUrl) {
  fetch(modelUrl)
    .then((r) => r.text())
    .then((text) => viewer.setMesh(parseObj(text)))
    .catch((err) => showBanner(`model load failed: ${err}`, "error"));
} else {
  viewer.setMesh(makeReferenceGeometry());
}

const client = new SessionClient(groupId, {
  onReady: (peerId, sessionId) => {
    statusLine.textContent = `session ${sessionId} — peer ${peerId} (group ${groupId})`;
    statusLine.style.color = `hsl(${rayColor(peerId)}, 80%, 65%)`;
    banner.style.display = "none";
  },
  onSessionFull: (detail) => showBanner(`Session is full — ${detail || "try again later"}`, "error"),
  onError: (_code, detail) => showBanner(`Relay error: ${detail}`, "error"),
  onStateChanged: (state) => {
    digestPanel.textContent = `digest ${client.digestHex()} @ seq ${state.lastAppliedRelaySeq}`;
    const entries = [...state.members.entries()].sort((a, b) => a[0] - b[0]);
    memberList.innerHTML = entries
      .map(
        ([peer, group]) =>
          `<li style="color: hsl(${rayColor(peer)}, 80%, 65%)">peer ${peer} · group ${group}` +
          `${peer === client.peerId ? " (you)" : ""}</li>`,
      )
      .join("");
  },
});

connectWebSocket(relayUrl, client, sessionCode, {
  onDisconnect: () => showBanner("Disconnected from relay — reload to rejoin.", "error"),
});

function currentSlicePlane(): { normal: [number, number, number]; offset: number } {
  const theta = Number((document.getElementById("plane-theta") as HTMLInputElement).value);
  const phi = Number((document.getElementById("plane-phi") as HTMLInputElement).value);
  const offset = Number((document.getElementById("plane-offset") as HTMLInputElement).value);
  const st = Math.sin(theta);
  const normal: [number, number, number] = [
    st * Math.cos(phi),
    st * Math.sin(phi),
    Math.cos(theta),
  ];
  const n = Math.hypot(...normal);
  return { normal: [normal[0] / n, normal[1] / n, normal[2] / n], offset };
}

document.getElementById("place")!.addEventListener("click", () => {
  if (!client.ready) return showBanner("Still joining…", "info");
  if (client.placed) return showBanner("Your group already placed the model.", "info");
  client.placeModel({ rotation: [0, 0, 0, 1], position: [0, 0, 0] });
});
document.getElementById("slice-push")!.addEventListener("click", () => {
  if (client.placed) client.pushSlice(currentSlicePlane());
});
document.getElementById("slice-pop")!.addEventListener("click", () => {
  if (client.placed) client.popSlice();
});

bindGestures(canvas, {
  current: () => client.state.transform,
  sendTransform: (t) => {
    if (client.ready && client.placed) client.submitTransform(t);
    else showBanner("Place the model first (Place button).", "info");
  },
  tap: (x, y) => {
    if (!client.ready || !client.placed) return;
    const hit = viewer.pickModelPoint(x, y, client.state.sliceStack);
    if (!hit) return; // tapping empty background sends nothing
    const label = window.prompt("Annotation label:", "") ?? "";
    if (label.length > 200) return showBanner("Label too long.", "error");
    client.addAnnotation(hit, label, client.peerId % 256);
  },
  longPress: (x, y) => {
    if (!client.ready || !client.placed) return;
    const caster = new THREE.Raycaster();
    caster.setFromCamera(new THREE.Vector2(x, y), viewer.camera);
    const placement = client.state.placements.get(groupId);
    if (!placement) return;
    const t = client.state.transform;
    const ray = worldRayToModel(
      [caster.ray.origin.x, caster.ray.origin.y, caster.ray.origin.z],
      [caster.ray.direction.x, caster.ray.direction.y, caster.ray.direction.z],
      placement.rotation,
      placement.position,
      t.rotation,
      t.translation,
      t.scale,
    );
    client.pointAt({ origin: ray.origin, direction: ray.direction, ttlMs: 3000 });
  },
});

function frame(): void {
  const now = performance.now() / 1000;
  client.expire(now);
  viewer.sync(client.state, now);
  const rect = canvas.getBoundingClientRect();
  viewer.resize(rect.width, rect.height);
  viewer.render();
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
