"""Headless session participant.

:class:`PeerCore` is the transport-free protocol brain: it tracks the join
handshake, runs a session replica fed by relay-stamped frames, models
co-located-group anchor alignment, and turns gesture-level intents into
frames to send.  The virtual-time simulator drives it directly.

:class:`PeerClient` wraps a core with a real TCP connection, a reader
thread, 1 Hz heartbeats, and an optional digest endpoint; the ``peer``
console script runs one headless.

Coordinate frames: a device's own world frame maps into its group's anchor
frame via the registered anchor pose; the group placement maps the placed
model frame into the anchor frame; the shared transform maps model-local
coordinates into the placed frame.  Annotations, pointing rays, and slice
planes travel model-local so every participant sees them ride the model.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import socket
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from hybridsync import payloads
from hybridsync.digest import digest_state
from hybridsync.framing import (
    Frame,
    MsgType,
    StreamParser,
    decode_frame,
    encode_frame,
)
from hybridsync.geometry import (
    Ray,
    RigidPose,
    SlicePlane,
    TriangleMesh,
    clip_mesh,
    estimate_rigid_transform,
    invert_pose,
    load_mesh_path,
    make_reference_mesh,
    ray_intersect,
    transform_ray,
)
from hybridsync.geometry.raycast import RayHit
from hybridsync.geometry.registration import DegenerateInputError
from hybridsync.payloads import ErrorCode
from hybridsync.session import Effect, OrderingError, apply_message, expire_rays, restore
from hybridsync.state import MAX_LABEL_BYTES, SessionState, SharedTransform

logger = logging.getLogger(__name__)

HEARTBEAT_INTERVAL = 1.0


class ClientError(Exception):
    pass


class BadStateError(ClientError):
    """A local precondition failed; nothing was sent."""


class SessionFullError(ClientError):
    pass


class OrderingGapError(ClientError):
    """The relay stream skipped a sequence number; the replica is unusable."""


class AnchorError(ClientError):
    pass


@dataclass(frozen=True)
class FeatureCloud:
    """Feature points observed in one device's own world frame."""

    points: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        pts = tuple(tuple(float(c) for c in p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 3:
            raise ValueError(f"feature cloud needs at least 3 points, got {len(pts)}")
        if not all(math.isfinite(c) for p in pts for c in p):
            raise ValueError("feature cloud contains non-finite coordinates")

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=float)


@dataclass
class GroupContext:
    group_id: int
    local_world_to_anchor: RigidPose = field(default_factory=RigidPose.identity)
    anchor_established: bool = False
    is_group_reference: bool = False


@dataclass(frozen=True)
class ClientEvent:
    kind: str  # joined | restored | ready | applied | error | member_change
    frame: Frame | None = None
    effects: tuple[Effect, ...] = ()
    error_code: ErrorCode | None = None
    detail: str = ""


class PeerCore:
    """Protocol state machine for one participant (no I/O)."""

    def __init__(self, group_id: int, mesh: TriangleMesh | None = None):
        self.group_id = group_id
        self.mesh = mesh
        self.group = GroupContext(group_id=group_id)
        self.peer_id: int | None = None
        self.session_id: int | None = None
        self.replica: SessionState | None = None
        self.phase = "idle"  # idle -> joining -> syncing -> ready
        self.last_error: payloads.ErrorPayload | None = None
        self._sender_seq = 0
        self._annotation_counter = 0
        self._clipped_cache: tuple[int, TriangleMesh] | None = None

    # -- handshake ----------------------------------------------------------

    def make_join(self, *, auto_match: bool = True, session_code: int = 0) -> bytes:
        if self.phase != "idle":
            raise BadStateError(f"cannot join while {self.phase}")
        self.phase = "joining"
        return self._frame_bytes(
            MsgType.JOIN,
            payloads.encode_join(self.group_id, auto_match=auto_match),
            session_id=session_code,
            sender_peer=0,
        )

    @property
    def ready(self) -> bool:
        return self.phase == "ready"

    # -- inbound ------------------------------------------------------------

    def on_frame(self, frame: Frame, now: float) -> list[ClientEvent]:
        mt = frame.msg_type
        if mt == MsgType.JOIN_ACK:
            ack = payloads.decode_join_ack(frame.payload)
            self.peer_id = ack.assigned_peer
            self.session_id = ack.session_id
            self.phase = "syncing"
            return [ClientEvent("joined", frame=frame)]
        if mt == MsgType.STATE_SNAPSHOT:
            self.replica = restore(frame.payload)
            return [ClientEvent("restored", frame=frame)]
        if mt == MsgType.ERROR:
            err = payloads.decode_error(frame.payload)
            self.last_error = err
            return [ClientEvent("error", frame=frame, error_code=err.code, detail=err.detail)]

        # Everything else is the relay-stamped stream.
        if self.replica is None:
            raise OrderingGapError(f"stamped {mt.name} frame before the snapshot")
        expected = self.replica.last_applied_relay_seq + 1
        if frame.relay_seq != expected:
            raise OrderingGapError(
                f"relay_seq gap: expected {expected}, got {frame.relay_seq}"
            )
        self.replica, effects = apply_message(self.replica, frame, now)
        events = [ClientEvent("applied", frame=frame, effects=tuple(effects))]
        if mt in (MsgType.SLICE_PUSH, MsgType.SLICE_POP):
            self._clipped_cache = None
        if mt in (MsgType.JOIN, MsgType.LEAVE):
            self._refresh_group_role()
            events.append(ClientEvent("member_change", frame=frame))
            if (
                mt == MsgType.JOIN
                and self.phase == "syncing"
                and frame.sender_peer == self.peer_id
            ):
                self.phase = "ready"
                self._maybe_self_anchor()
                events.append(ClientEvent("ready", frame=frame))
        return events

    def expire(self, now: float) -> None:
        if self.replica is not None:
            self.replica = expire_rays(self.replica, now)

    def _refresh_group_role(self) -> None:
        if self.replica is None or self.peer_id is None:
            return
        group_peers = [p for p, g in self.replica.members.items() if g == self.group_id]
        self.group.is_group_reference = bool(group_peers) and min(group_peers) == self.peer_id

    def _maybe_self_anchor(self) -> None:
        """A solo founder is its own reference: identity anchor, immediately."""
        group_peers = [p for p, g in self.replica.members.items() if g == self.group_id]
        if group_peers == [self.peer_id]:
            self.group.local_world_to_anchor = RigidPose.identity()
            self.group.anchor_established = True

    # -- anchor -------------------------------------------------------------

    def establish_anchor(self, own: FeatureCloud, reference: FeatureCloud) -> RigidPose:
        """Register this device's observed points to the group reference's.

        The reference device itself uses the identity pose by definition.
        """
        if self.group.is_group_reference:
            pose = RigidPose.identity()
        else:
            try:
                pose = estimate_rigid_transform(own.as_array(), reference.as_array())
            except DegenerateInputError as exc:
                raise AnchorError(f"anchor registration failed: {exc}") from exc
        self.group.local_world_to_anchor = pose
        self.group.anchor_established = True
        return pose

    # -- intents ------------------------------------------------------------

    def make_heartbeat(self) -> bytes:
        self._require_session()
        return self._frame_bytes(MsgType.HEARTBEAT, b"")

    def make_leave(self) -> bytes:
        self._require_session()
        return self._frame_bytes(MsgType.LEAVE, b"")

    def make_place_model(self, pose: RigidPose) -> bytes:
        self._require_ready()
        return self._frame_bytes(MsgType.PLACE_MODEL, payloads.encode_place_model(self.group_id, pose))

    def make_transform(self, transform: SharedTransform) -> bytes:
        self._require_ready()
        self._require_placed()
        return self._frame_bytes(MsgType.TRANSFORM, payloads.encode_transform(transform))

    def make_annotation(
        self, world_ray: Ray, label: str, color: int = 0, now: float = 0.0
    ) -> tuple[bytes | None, RayHit | None]:
        """Raycast in model space; returns (frame, hit) or (None, None) on miss."""
        self._require_ready()
        self._require_placed()
        self._require_anchor()
        if self.mesh is None:
            raise BadStateError("no mesh loaded")
        if len(label.encode("utf-8")) > MAX_LABEL_BYTES:
            raise ValueError(f"label exceeds {MAX_LABEL_BYTES} UTF-8 bytes")
        model_ray = self.world_to_model_ray(world_ray)
        hit = ray_intersect(self._visible_mesh(), model_ray)
        if hit is None:
            return None, None
        if self._annotation_counter > 0xFFFF:
            raise ClientError("annotation counter exhausted")
        ann_id = (self.peer_id << 16) | self._annotation_counter
        self._annotation_counter += 1
        record = payloads.AnnotationRecord(ann_id, hit.point, color, label)
        return self._frame_bytes(MsgType.ANNOTATION_ADD, payloads.encode_annotation_add(record)), hit

    def make_annotation_remove(self, annotation_id: int) -> bytes:
        self._require_ready()
        return self._frame_bytes(
            MsgType.ANNOTATION_REMOVE, payloads.encode_annotation_remove(annotation_id)
        )

    def make_point(self, world_ray: Ray, ttl_ms: int) -> bytes:
        self._require_ready()
        self._require_placed()
        self._require_anchor()
        model_ray = self.world_to_model_ray(world_ray)
        return self._frame_bytes(MsgType.POINT_RAY, payloads.encode_point_ray(model_ray, ttl_ms))

    def make_slice_push(self, plane: SlicePlane) -> bytes:
        self._require_ready()
        self._require_placed()
        return self._frame_bytes(MsgType.SLICE_PUSH, payloads.encode_slice_push(plane))

    def make_slice_pop(self) -> bytes:
        # Popping an empty stack is legal to send; it is a no-op at apply time.
        self._require_ready()
        self._require_placed()
        return self._frame_bytes(MsgType.SLICE_POP, b"")

    # -- coordinates ---------------------------------------------------------

    def world_to_anchor_ray(self, ray: Ray) -> Ray:
        self._require_anchor()
        return transform_ray(self.group.local_world_to_anchor, ray)

    def anchor_to_world_ray(self, ray: Ray) -> Ray:
        self._require_anchor()
        return transform_ray(invert_pose(self.group.local_world_to_anchor), ray)

    def world_to_model_ray(self, ray: Ray) -> Ray:
        self._require_placed()
        anchor_ray = self.world_to_anchor_ray(ray)
        placement = self.replica.placements[self.group_id]
        placed_ray = transform_ray(invert_pose(placement), anchor_ray)
        return self.replica.transform.invert_ray(placed_ray)

    def _visible_mesh(self) -> TriangleMesh:
        stack = self.replica.slice_stack
        key = len(stack)
        if self._clipped_cache is not None and self._clipped_cache[0] == key:
            return self._clipped_cache[1]
        visible = clip_mesh(self.mesh, stack) if stack else self.mesh
        self._clipped_cache = (key, visible)
        return visible

    # -- observability --------------------------------------------------------

    def digest(self) -> int:
        self._require_session()
        return digest_state(self.replica)

    def digest_hex(self) -> str:
        return f"{self.digest():016x}"

    # -- internals -------------------------------------------------------------

    def _require_session(self) -> None:
        if self.replica is None or self.peer_id is None:
            raise BadStateError("not connected to a session")

    def _require_ready(self) -> None:
        self._require_session()
        if self.phase != "ready":
            raise BadStateError(f"session not ready (phase {self.phase})")

    def _require_placed(self) -> None:
        self._require_session()
        if self.group_id not in self.replica.placements:
            raise BadStateError(f"group {self.group_id} has not placed the model")

    def _require_anchor(self) -> None:
        if not self.group.anchor_established:
            raise BadStateError("group anchor not established")

    def _frame_bytes(
        self, msg_type: MsgType, payload: bytes, session_id: int | None = None, sender_peer: int | None = None
    ) -> bytes:
        self._sender_seq += 1
        return encode_frame(
            Frame(
                msg_type,
                session_id=self.session_id if session_id is None else session_id,
                sender_peer=self.peer_id if sender_peer is None else sender_peer,
                relay_seq=0,
                sender_seq=self._sender_seq,
                payload=payload,
            )
        )


class PeerClient:
    """Socket-backed participant running a :class:`PeerCore`.

    A reader thread applies inbound frames, a timer thread heartbeats at
    1 Hz and expires pointing rays; callers' intents are serialized with
    the reader through one lock.  Reads of replica state return values
    (digests, copies), never live references.
    """

    def __init__(self, sock: socket.socket, core: PeerCore):
        self._sock = sock
        self._core = core
        self._lock = threading.RLock()
        self._parser = StreamParser()
        self._ready = threading.Event()
        self._failed: BaseException | None = None
        self._closed = False
        self._apply_hooks: list = []
        self._echo_times: dict[int, float] = {}
        self.echo_latencies: list[float] = []
        self.last_sent_seq: int = 0  # most recent tracked intent's sender_seq
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._ticker = threading.Thread(target=self._tick_loop, daemon=True)
        self._digest_server: socket.socket | None = None

    # -- lifecycle ------------------------------------------------------------

    @classmethod
    def connect(
        cls,
        host: str,
        port: int,
        *,
        group_id: int = 0,
        session_code: int = 0,
        auto_match: bool | None = None,
        mesh: TriangleMesh | None = None,
        timeout: float = 10.0,
        digest_port: int | None = None,
    ) -> "PeerClient":
        if auto_match is None:
            auto_match = session_code == 0
        sock = socket.create_connection((host, port), timeout=timeout)
        sock.settimeout(0.2)
        core = PeerCore(group_id=group_id, mesh=mesh)
        client = cls(sock, core)
        sock.sendall(core.make_join(auto_match=auto_match, session_code=session_code))
        client._reader.start()
        if not client._ready.wait(timeout):
            client.close()
            raise ClientError("timed out waiting for session join")
        if client._failed is not None:
            client.close()
            raise client._failed
        client._ticker.start()
        if digest_port is not None:
            client._start_digest_server(digest_port)
        return client

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
        try:
            self._sock.close()
        except OSError:
            pass
        if self._digest_server is not None:
            try:
                self._digest_server.close()
            except OSError:
                pass

    def leave(self) -> None:
        self._send(self._core.make_leave())
        self.close()

    # -- intents ----------------------------------------------------------------

    def submit_transform(self, transform: SharedTransform) -> int:
        return self._send_tracked(self._core.make_transform(transform))

    def place_model(self, pose: RigidPose) -> int:
        return self._send_tracked(self._core.make_place_model(pose))

    def tap_annotate(self, world_ray: Ray, label: str, color: int = 0) -> int | None:
        """Returns the annotation id, or None when the ray misses the model."""
        with self._lock:
            data, _hit = self._core.make_annotation(world_ray, label, color, now=time.time())
        if data is None:
            return None
        self._send_tracked(data)
        return payloads.decode_annotation_add(decode_frame(data).payload).annotation_id

    def remove_annotation(self, annotation_id: int) -> int:
        return self._send_tracked(self._core.make_annotation_remove(annotation_id))

    def point_at(self, world_ray: Ray, ttl_ms: int) -> int:
        return self._send_tracked(self._core.make_point(world_ray, ttl_ms))

    def push_slice(self, plane: SlicePlane) -> int:
        return self._send_tracked(self._core.make_slice_push(plane))

    def pop_slice(self) -> int:
        return self._send_tracked(self._core.make_slice_pop())

    def establish_anchor(self, own: FeatureCloud, reference: FeatureCloud) -> RigidPose:
        with self._lock:
            return self._core.establish_anchor(own, reference)

    # -- observability ------------------------------------------------------------

    @property
    def peer_id(self) -> int:
        with self._lock:
            return self._core.peer_id

    @property
    def session_id(self) -> int:
        with self._lock:
            return self._core.session_id

    def digest(self) -> int:
        with self._lock:
            return self._core.digest()

    def digest_hex(self) -> str:
        with self._lock:
            return self._core.digest_hex()

    def last_applied_seq(self) -> int:
        with self._lock:
            return self._core.replica.last_applied_relay_seq

    def replica_snapshot(self) -> SessionState:
        with self._lock:
            return self._core.replica.clone()

    def failure(self) -> BaseException | None:
        with self._lock:
            return self._failed

    def add_apply_hook(self, hook) -> None:
        """hook(frame, monotonic_now) runs after each stamped frame applies."""
        with self._lock:
            self._apply_hooks.append(hook)

    def wait_for_seq(self, seq: int, timeout: float = 10.0) -> bool:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._lock:
                if self._core.replica is not None and self._core.replica.last_applied_relay_seq >= seq:
                    return True
            time.sleep(0.002)
        return False

    # -- internals ------------------------------------------------------------------

    def _send(self, data: bytes) -> None:
        with self._lock:
            if self._failed is not None:
                raise self._failed
            self._sock.sendall(data)

    def _send_tracked(self, data: bytes) -> int:
        frame = decode_frame(data)
        with self._lock:
            if self._failed is not None:
                raise self._failed
            self._echo_times[frame.sender_seq] = time.monotonic()
            self._sock.sendall(data)
            self.last_sent_seq = frame.sender_seq
        return frame.sender_seq

    def _read_loop(self) -> None:
        try:
            while True:
                try:
                    chunk = self._sock.recv(65536)
                except socket.timeout:
                    continue
                except OSError:
                    break
                if not chunk:
                    break
                for raw in self._parser.feed(chunk):
                    self._handle_frame(decode_frame(raw))
        except BaseException as exc:  # surfaced to callers on next access
            with self._lock:
                if self._failed is None:
                    self._failed = exc
            self._ready.set()
            logger.warning("reader stopped: %s", exc)

    def _handle_frame(self, frame: Frame) -> None:
        now = time.time()
        with self._lock:
            events = self._core.on_frame(frame, now)
            if frame.relay_seq > 0 and frame.sender_peer == self._core.peer_id:
                sent_at = self._echo_times.pop(frame.sender_seq, None)
                if sent_at is not None:
                    self.echo_latencies.append(time.monotonic() - sent_at)
            hooks = list(self._apply_hooks)
        for ev in events:
            if ev.kind == "ready":
                self._ready.set()
            elif ev.kind == "error":
                if ev.error_code is ErrorCode.SESSION_FULL:
                    with self._lock:
                        self._failed = SessionFullError(ev.detail or "session is full")
                    self._ready.set()
                else:
                    logger.warning("relay error %s: %s", ev.error_code, ev.detail)
            if ev.kind == "applied":
                for hook in hooks:
                    hook(ev.frame, time.monotonic())

    def _tick_loop(self) -> None:
        while not self._closed and self._failed is None:
            time.sleep(HEARTBEAT_INTERVAL)
            if self._closed:
                return
            try:
                with self._lock:
                    data = self._core.make_heartbeat()
                    self._sock.sendall(data)
                    self._core.expire(time.time())
            except (OSError, ClientError):
                return

    def _start_digest_server(self, port: int) -> None:
        server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind(("127.0.0.1", port))
        server.listen(8)
        self._digest_server = server

        def serve():
            while not self._closed:
                try:
                    conn, _ = server.accept()
                except OSError:
                    return
                try:
                    conn.settimeout(0.25)
                    try:
                        probe = conn.recv(1024)
                    except socket.timeout:
                        probe = b""
                    body = (self.digest_hex() + "\n").encode()
                    if probe.startswith(b"GET"):
                        conn.sendall(
                            b"HTTP/1.0 200 OK\r\nContent-Type: text/plain\r\n"
                            b"Access-Control-Allow-Origin: *\r\n"
                            + f"Content-Length: {len(body)}\r\n\r\n".encode()
                            + body
                        )
                    else:
                        conn.sendall(body)
                finally:
                    conn.close()

        threading.Thread(target=serve, daemon=True).start()

    @property
    def digest_port(self) -> int | None:
        if self._digest_server is None:
            return None
        return self._digest_server.getsockname()[1]


def _parse_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host:
        raise ValueError(f"expected host:port, got {text!r}")
    return host, int(port)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="peer", description="Headless session participant")
    parser.add_argument("--relay", required=True, help="relay address host:port")
    parser.add_argument("--session", type=int, default=0, help="session code (0 = auto-match)")
    parser.add_argument("--group", type=int, required=True, help="co-located group id")
    parser.add_argument("--scenario", help="script of actions to perform (peer column ignored)")
    parser.add_argument("--model", help="mesh file (.stl or .obj); default: built-in model")
    parser.add_argument("--digest-port", type=int, help="expose the replica digest on this port")
    parser.add_argument("--log", default=os.environ.get("HYBRIDSYNC_LOG", "info"))
    args = parser.parse_args(argv)

    logging.basicConfig(level=args.log.upper(), format="%(asctime)s %(name)s %(levelname)s %(message)s")
    mesh = load_mesh_path(args.model) if args.model else make_reference_mesh()
    host, port = _parse_addr(args.relay)
    client = PeerClient.connect(
        host, port,
        group_id=args.group,
        session_code=args.session,
        mesh=mesh,
        digest_port=args.digest_port,
    )
    logger.info("joined session %d as peer %d", client.session_id, client.peer_id)

    try:
        if args.scenario:
            from hybridsync.sim.realtime import run_peer_script

            with open(args.scenario) as fh:
                run_peer_script(client, fh.read())
        while client.failure() is None:
            time.sleep(0.5)
        logger.error("connection failed: %s", client.failure())
        return 1
    except KeyboardInterrupt:
        client.leave()
        return 0
    finally:
        client.close()


if __name__ == "__main__":
    raise SystemExit(main())
