/**
 * Browser participant core: join handshake, snapshot restore, ordered
 * frame application, and gesture-level intents. Transport-agnostic so the
 * same logic runs under vitest (over a node WebSocket) and in the browser.
 *
 * Replica state changes only when relay-stamped frames arrive; locally
 * initiated gestures take effect on their echo, exactly like the headless
 * peers.
 */

import { decodeFrame, encodeFrame, Frame, MsgType } from "../protocol/framing.js";
import {
  decodeError,
  decodeJoinAck,
  encodeAnnotationAdd,
  encodeAnnotationRemove,
  encodeJoin,
  encodePlaceModel,
  encodePointRay,
  encodeSlicePush,
  encodeTransform,
  ErrorCode,
  Placement,
  PointRay,
  SharedTransform,
  SlicePlane,
} from "../protocol/payloads.js";
import {
  applyMessage,
  digestHex,
  Effect,
  expireRays,
  initialState,
  restore,
  SessionState,
} from "../session/state.js";

export type ClientPhase = "idle" | "joining" | "syncing" | "ready" | "failed";

export interface ClientEvents {
  onReady?: (peerId: number, sessionId: bigint) => void;
  onStateChanged?: (state: SessionState, frame: Frame, effects: Effect[]) => void;
  onSessionFull?: (detail: string) => void;
  onError?: (code: ErrorCode, detail: string) => void;
}

export interface FrameTransport {
  send(data: Uint8Array): void;
}

export class SessionClient {
  phase: ClientPhase = "idle";
  peerId = -1;
  sessionId = 0n;
  state: SessionState = initialState();
  readonly groupId: number;
  private senderSeq = 0;
  private transport: FrameTransport | null = null;
  private events: ClientEvents;

  constructor(groupId: number, events: ClientEvents = {}) {
    this.groupId = groupId;
    this.events = events;
  }

  attach(transport: FrameTransport): void {
    this.transport = transport;
  }

  get ready(): boolean {
    return this.phase === "ready";
  }

  join(sessionCode = 0n): void {
    if (this.phase !== "idle") {
      throw new Error(`cannot join while ${this.phase}`);
    }
    this.phase = "joining";
    this.sendFrame(MsgType.JOIN, encodeJoin(this.groupId, sessionCode === 0n), sessionCode, 0);
  }

  /** Handle one inbound binary message (exactly one frame). */
  onMessage(data: Uint8Array, now: number): void {
    const frame = decodeFrame(data);
    switch (frame.msgType) {
      case MsgType.JOIN_ACK: {
        const ack = decodeJoinAck(frame.payload);
        this.peerId = ack.assignedPeer;
        this.sessionId = ack.sessionId;
        this.phase = "syncing";
        return;
      }
      case MsgType.STATE_SNAPSHOT:
        this.state = restore(frame.payload);
        return;
      case MsgType.ERROR: {
        const err = decodeError(frame.payload);
        if (err.code === ErrorCode.SESSION_FULL) {
          this.phase = "failed";
          this.events.onSessionFull?.(err.detail);
        } else {
          this.events.onError?.(err.code, err.detail);
        }
        return;
      }
      default: {
        const effects = applyMessage(this.state, frame, now);
        if (
          frame.msgType === MsgType.JOIN &&
          this.phase === "syncing" &&
          frame.senderPeer === this.peerId
        ) {
          this.phase = "ready";
          this.events.onReady?.(this.peerId, this.sessionId);
        }
        this.events.onStateChanged?.(this.state, frame, effects);
      }
    }
  }

  expire(now: number): void {
    expireRays(this.state, now);
  }

  digestHex(): string {
    return digestHex(this.state);
  }

  get placed(): boolean {
    return this.state.placements.has(this.groupId);
  }

  // -- intents (all model-local coordinates) -------------------------------

  heartbeat(): void {
    this.requireReady();
    this.sendFrame(MsgType.HEARTBEAT, new Uint8Array(0));
  }

  leave(): void {
    this.requireReady();
    this.sendFrame(MsgType.LEAVE, new Uint8Array(0));
  }

  placeModel(placement: Placement): void {
    this.requireReady();
    this.sendFrame(MsgType.PLACE_MODEL, encodePlaceModel(this.groupId, placement));
  }

  submitTransform(transform: SharedTransform): void {
    this.requireReady();
    this.requirePlaced();
    this.sendFrame(MsgType.TRANSFORM, encodeTransform(transform));
  }

  private annotationCounter = 0;

  /** Position must already be model-local (the viewer raycasts). */
  addAnnotation(position: [number, number, number], label: string, color: number): number {
    this.requireReady();
    this.requirePlaced();
    const annotationId = ((this.peerId << 16) | this.annotationCounter++) >>> 0;
    this.sendFrame(
      MsgType.ANNOTATION_ADD,
      encodeAnnotationAdd({ annotationId, position, color, label }),
    );
    return annotationId;
  }

  removeAnnotation(annotationId: number): void {
    this.requireReady();
    this.sendFrame(MsgType.ANNOTATION_REMOVE, encodeAnnotationRemove(annotationId));
  }

  pointAt(ray: PointRay): void {
    this.requireReady();
    this.requirePlaced();
    this.sendFrame(MsgType.POINT_RAY, encodePointRay(ray));
  }

  pushSlice(plane: SlicePlane): void {
    this.requireReady();
    this.requirePlaced();
    this.sendFrame(MsgType.SLICE_PUSH, encodeSlicePush(plane));
  }

  popSlice(): void {
    this.requireReady();
    this.requirePlaced();
    this.sendFrame(MsgType.SLICE_POP, new Uint8Array(0));
  }

  // -- internals ------------------------------------------------------------

  private requireReady(): void {
    if (this.phase !== "ready") {
      throw new Error(`session not ready (phase ${this.phase})`);
    }
  }

  private requirePlaced(): void {
    if (!this.placed) {
      throw new Error(`group ${this.groupId} has not placed the model`);
    }
  }

  private sendFrame(
    msgType: MsgType,
    payload: Uint8Array,
    sessionId?: bigint,
    senderPeer?: number,
  ): void {
    if (!this.transport) {
      throw new Error("no transport attached");
    }
    this.senderSeq += 1;
    const frame: Frame = {
      msgType,
      sessionId: sessionId ?? this.sessionId,
      senderPeer: senderPeer ?? this.peerId,
      relaySeq: 0,
      senderSeq: this.senderSeq,
      payload,
    };
    this.transport.send(encodeFrame(frame));
  }
}

export interface ConnectionCallbacks extends ClientEvents {
  onDisconnect?: () => void;
}

/**
 * Browser WebSocket wrapper. Messages are queued and applied in arrival
 * order; the relay guarantees stamping order per session.
 */
export function connectWebSocket(
  url: string,
  client: SessionClient,
  sessionCode = 0n,
  callbacks: ConnectionCallbacks = {},
): WebSocket {
  const ws = new WebSocket(url);
  ws.binaryType = "arraybuffer";
  // our frames are always plain ArrayBuffer-backed; satisfy the DOM overload
  client.attach({ send: (data) => ws.send(data as Uint8Array<ArrayBuffer>) });
  ws.onopen = () => client.join(sessionCode);
  ws.onmessage = (event) => {
    client.onMessage(new Uint8Array(event.data as ArrayBuffer), performance.now() / 1000);
  };
  ws.onclose = () => callbacks.onDisconnect?.();
  const heartbeat = setInterval(() => {
    if (ws.readyState === WebSocket.OPEN && client.ready) {
      client.heartbeat();
      client.expire(performance.now() / 1000);
    }
  }, 1000);
  ws.addEventListener("close", () => clearInterval(heartbeat));
  return ws;
}
