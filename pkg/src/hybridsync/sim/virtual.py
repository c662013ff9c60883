"""Deterministic virtual-time simulation of relay plus peers.

A single event heap (ordered by time, ties by insertion) carries scripted
actions, frame deliveries on latency-injected links, heartbeat and sweep
timers, and anchor-cloud exchanges.  Heartbeats never gate quiescence: an
``assert converged`` barrier waits until no state-bearing event remains in
flight, then compares every replica digest against the relay's.

The relay core and the peer cores are the production state machines; the
simulator only provides transport and time.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import random
from dataclasses import dataclass, field

from hybridsync.client import BadStateError, ClientError, PeerCore
from hybridsync.framing import Frame, MsgType, decode_frame
from hybridsync.geometry import RigidPose, TriangleMesh, make_reference_mesh, transform_ray
from hybridsync.quaternion import Quaternion
from hybridsync.relay import RelayCore
from hybridsync.client import FeatureCloud
from hybridsync.sim.metrics import MessageRow, MetricsReport
from hybridsync.sim.scenario import Action, parse_scenario
from hybridsync.sim.topology import Link, TopologyConfig, make_link

logger = logging.getLogger(__name__)

HEARTBEAT_PERIOD = 1.0
SWEEP_PERIOD = 1.0


class SimulationError(Exception):
    pass


class ScenarioRuntimeError(SimulationError):
    pass


@dataclass
class RestoreProbe:
    peer: int
    snapshot_seq: int
    replica_digest: int
    relay_digest: int

    @property
    def matched(self) -> bool:
        return self.replica_digest == self.relay_digest


@dataclass
class BarrierResult:
    t: float
    session_digests: dict[int, int]
    peer_count: int


@dataclass
class SimResult:
    report: MetricsReport
    barriers: list[BarrierResult] = field(default_factory=list)
    restore_probes: list[RestoreProbe] = field(default_factory=list)
    annotation_misses: int = 0
    final_digests: dict[str, int] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)


@dataclass
class _PendingSend:
    t_ms: float
    peer: int
    msg_type: str
    bytes: int = 0
    remaining: int = -1
    last_delivery: float = 0.0


@dataclass
class _GroupRecord:
    founder: int | None = None
    anchor_points: tuple = ()


class _VirtualPeer:
    def __init__(self, index: int, group_id: int, mesh: TriangleMesh):
        self.index = index
        self.core = PeerCore(group_id=group_id, mesh=mesh)
        self.world_from_anchor: RigidPose | None = None  # fixed when the relay admits us
        self.left = False
        self.heartbeating = False

    @property
    def conn_id(self) -> str:
        return f"peer{self.index}"


class VirtualSim:
    def __init__(
        self,
        topology: TopologyConfig,
        script: list[Action] | str,
        mesh: TriangleMesh | None = None,
    ):
        self.topology = topology
        self.script = parse_scenario(script) if isinstance(script, str) else list(script)
        self.mesh = mesh if mesh is not None else make_reference_mesh()
        self.relay = RelayCore()
        self.peers = [
            _VirtualPeer(i, topology.group_of(i), self.mesh) for i in range(topology.peers)
        ]
        self.now = 0.0
        self._heap: list = []
        self._counter = itertools.count()
        self._pending_state = 0
        self._uplinks = [make_link(topology.relay_link, topology.seed, f"up{i}") for i in range(topology.peers)]
        self._downlinks = [make_link(topology.relay_link, topology.seed, f"down{i}") for i in range(topology.peers)]
        self._intra = [make_link(topology.intra_link, topology.seed, f"intra{i}") for i in range(topology.peers)]
        self._groups: dict[int, _GroupRecord] = {}
        self._trackers: dict[int, _PendingSend] = {}
        self._tracker_ids = itertools.count(1)
        self._digest_history: dict[tuple[int, int], int] = {}
        self._scheduled_bytes = 0
        self._delivered_bytes = 0
        self._last_action_time = 0.0
        self._last_state_delivery = 0.0
        self.result = SimResult(report=MetricsReport())

    # -- event plumbing -------------------------------------------------------

    def _push(self, t: float, kind: str, data: tuple = ()) -> None:
        heapq.heappush(self._heap, (t, next(self._counter), kind, data))

    def _push_state(self, t: float, kind: str, data: tuple = ()) -> None:
        self._pending_state += 1
        self._push(t, kind, data)

    def run(self) -> SimResult:
        self._push(SWEEP_PERIOD, "sweep")
        idx = 0
        phase_start = 0.0
        while idx < len(self.script):
            action = self.script[idx]
            idx += 1
            if action.verb == "assert_converged":
                self._drain()
                self.now = max(self.now, action.t)
                self._assert_converged(action)
                phase_start = self.now
            else:
                if action.peer is not None and action.peer >= len(self.peers):
                    raise ScenarioRuntimeError(
                        f"line {action.line_no}: peer {action.peer} outside topology "
                        f"of {len(self.peers)} peers"
                    )
                self._push_state(max(action.t, phase_start), "action", (action,))
        self._drain()
        if self._scheduled_bytes != self._delivered_bytes:
            raise SimulationError(
                f"transport byte counters disagree at quiescence: scheduled "
                f"{self._scheduled_bytes}, delivered {self._delivered_bytes}"
            )
        self.result.report.finalize(
            total_bytes=self._delivered_bytes,
            convergence_ms=(self._last_state_delivery - self._last_action_time) * 1000.0,
        )
        self.result.final_digests = self._current_digests()
        return self.result

    def _drain(self) -> None:
        while self._pending_state > 0:
            if not self._heap:
                raise SimulationError(
                    f"event heap empty with {self._pending_state} state events pending"
                )
            t, _, kind, data = heapq.heappop(self._heap)
            self.now = max(self.now, t)
            getattr(self, f"_on_{kind}")(*data)

    # -- event handlers ---------------------------------------------------------

    def _on_action(self, action: Action) -> None:
        self._pending_state -= 1
        self._last_action_time = max(self._last_action_time, self.now)
        peer = self.peers[action.peer]
        core = peer.core
        try:
            if action.verb == "join":
                session = action.args["session"]
                data = core.make_join(auto_match=session == 0, session_code=session)
                self._send_from_peer(peer, data)
            elif action.verb == "leave":
                data = core.make_leave()
                peer.left = True
                self._send_from_peer(peer, data)
            elif action.verb == "place":
                self._send_from_peer(peer, core.make_place_model(action.args["pose"]))
            elif action.verb == "transform":
                self._send_from_peer(peer, core.make_transform(action.args["transform"]))
            elif action.verb == "annotate":
                world_ray = transform_ray(peer.world_from_anchor, action.args["ray"])
                data, hit = core.make_annotation(
                    world_ray, action.args["label"], action.args["color"], now=self.now
                )
                if data is None:
                    self.result.annotation_misses += 1
                else:
                    self._send_from_peer(peer, data)
            elif action.verb == "point":
                world_ray = transform_ray(peer.world_from_anchor, action.args["ray"])
                self._send_from_peer(peer, core.make_point(world_ray, action.args["ttl"]))
            elif action.verb == "slice_push":
                self._send_from_peer(peer, core.make_slice_push(action.args["plane"]))
            elif action.verb == "slice_pop":
                self._send_from_peer(peer, core.make_slice_pop())
            else:
                raise ScenarioRuntimeError(f"line {action.line_no}: unhandled verb {action.verb}")
        except (BadStateError, ClientError, ValueError) as exc:
            raise ScenarioRuntimeError(
                f"line {action.line_no}: peer {action.peer} cannot {action.verb}: {exc}"
            ) from exc

    def _send_from_peer(self, peer: _VirtualPeer, data: bytes, heartbeat: bool = False) -> None:
        delivery = self._uplinks[peer.index].delivery_time(self.now)
        if heartbeat:
            self._push(delivery, "to_relay", (peer.index, data, None))
            return
        frame = decode_frame(data)
        tracker_id = next(self._tracker_ids)
        self._trackers[tracker_id] = _PendingSend(
            t_ms=self.now * 1000.0, peer=peer.index, msg_type=frame.msg_type.name
        )
        self._push_state(delivery, "to_relay", (peer.index, data, tracker_id))

    def _on_to_relay(self, peer_index: int, data: bytes, tracker_id: int | None) -> None:
        if tracker_id is not None:
            self._pending_state -= 1
        peer = self.peers[peer_index]
        actions = self.relay.on_frame(peer.conn_id, data, self.now)

        tracker = self._trackers.get(tracker_id) if tracker_id is not None else None
        matching: list = []
        if tracker is not None:
            sent = decode_frame(data)
            matching = [
                out
                for out in actions.sends
                if out.frame.relay_seq > 0
                and out.frame.msg_type == sent.msg_type
                and out.frame.sender_seq == sent.sender_seq
            ]
            if matching:
                tracker.remaining = len(matching)
                tracker.bytes = len(matching[0].data)
            else:
                del self._trackers[tracker_id]  # rejected or not broadcast

            if sent.msg_type == MsgType.JOIN and matching:
                self._note_admission(peer, matching[0].frame)

        for out in actions.sends:
            target = self._peer_by_conn(out.conn_id)
            if target is None or target.left:
                continue
            delivery = self._downlinks[target.index].delivery_time(self.now)
            self._scheduled_bytes += len(out.data)
            is_tracked = tracker_id is not None and any(out is m for m in matching)
            self._push_state(
                delivery, "to_peer", (target.index, out.data, tracker_id if is_tracked else None)
            )

        for closed in actions.closes:
            dropped = self._peer_by_conn(closed)
            if dropped is not None and not dropped.left:
                dropped.left = True
                self.result.errors.append(f"relay closed peer {dropped.index}")

        sid = self.relay.session_of(peer.conn_id)
        if sid is not None:
            record = self.relay.sessions[sid]
            self._digest_history[(sid, record.state.last_applied_relay_seq)] = (
                self.relay.session_digest(sid)
            )

    def _note_admission(self, peer: _VirtualPeer, join_frame: Frame) -> None:
        """Fix the peer's physical frame the moment the relay admits it."""
        gid = peer.core.group_id
        group = self._groups.get(gid)
        if group is None:
            rng = random.Random(f"{self.topology.seed}/group{gid}")
            pts = tuple(
                (rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))
                for _ in range(self.topology.feature_points)
            )
            group = _GroupRecord(founder=peer.index, anchor_points=pts)
            self._groups[gid] = group
            peer.world_from_anchor = RigidPose.identity()
        elif peer.world_from_anchor is None:
            rng = random.Random(f"{self.topology.seed}/pose{peer.index}")
            rotation = Quaternion.normalized(
                rng.gauss(0, 1), rng.gauss(0, 1), rng.gauss(0, 1), rng.gauss(0, 1)
            )
            peer.world_from_anchor = RigidPose(
                rotation, (rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2))
            )

    def _on_to_peer(self, peer_index: int, data: bytes, tracker_id: int | None) -> None:
        self._pending_state -= 1  # every relay->peer delivery is a state event
        peer = self.peers[peer_index]
        frame = decode_frame(data)
        self._delivered_bytes += len(data)
        if peer.left:
            return

        events = peer.core.on_frame(frame, self.now)

        if tracker_id is not None:
            tracker = self._trackers.get(tracker_id)
            if tracker is not None:
                tracker.remaining -= 1
                tracker.last_delivery = self.now
                if tracker.remaining == 0:
                    self.result.report.rows.append(
                        MessageRow(
                            t_ms=tracker.t_ms,
                            peer=tracker.peer,
                            msg_type=tracker.msg_type,
                            bytes=tracker.bytes,
                            e2e_ms=(self.now - tracker.t_ms / 1000.0) * 1000.0,
                        )
                    )
                    del self._trackers[tracker_id]
        self._last_state_delivery = max(self._last_state_delivery, self.now)

        for ev in events:
            if ev.kind == "restored":
                sid = peer.core.session_id
                seq = peer.core.replica.last_applied_relay_seq
                relay_digest = self._digest_history.get((sid, seq))
                if relay_digest is None and seq == 0:
                    from hybridsync.state import SessionState
                    from hybridsync.digest import digest_state

                    relay_digest = digest_state(SessionState.initial())
                self.result.restore_probes.append(
                    RestoreProbe(
                        peer=peer.index,
                        snapshot_seq=seq,
                        replica_digest=peer.core.digest(),
                        relay_digest=relay_digest if relay_digest is not None else -1,
                    )
                )
            elif ev.kind == "ready":
                if not peer.heartbeating:
                    peer.heartbeating = True
                    self._push(self.now + HEARTBEAT_PERIOD, "hb", (peer.index,))
                if not peer.core.group.anchor_established:
                    delivery = self._intra[peer.index].delivery_time(self.now)
                    self._push_state(delivery, "cloud", (peer.index,))
            elif ev.kind == "error":
                self.result.errors.append(
                    f"peer {peer.index}: {ev.error_code.name if ev.error_code else '?'} {ev.detail}"
                )

    def _on_cloud(self, peer_index: int) -> None:
        self._pending_state -= 1
        peer = self.peers[peer_index]
        if peer.left:
            return
        group = self._groups[peer.core.group_id]
        noise_rng = random.Random(f"{self.topology.seed}/noise{peer_index}")
        sigma = self.topology.anchor_noise_m
        own_pts = []
        for p in group.anchor_points:
            w = peer.world_from_anchor.apply(p)
            if sigma > 0:
                w = (
                    w[0] + noise_rng.gauss(0, sigma),
                    w[1] + noise_rng.gauss(0, sigma),
                    w[2] + noise_rng.gauss(0, sigma),
                )
            own_pts.append(w)
        peer.core.establish_anchor(
            FeatureCloud(tuple(own_pts)), FeatureCloud(group.anchor_points)
        )

    def _on_hb(self, peer_index: int) -> None:
        peer = self.peers[peer_index]
        if peer.left or not peer.core.ready:
            return
        peer.core.expire(self.now)
        self._send_from_peer(peer, peer.core.make_heartbeat(), heartbeat=True)
        self._push(self.now + HEARTBEAT_PERIOD, "hb", (peer_index,))

    def _on_sweep(self) -> None:
        actions = self.relay.sweep(self.now)
        for closed in actions.closes:
            evicted = self._peer_by_conn(closed)
            if evicted is not None and not evicted.left:
                evicted.left = True
                self.result.errors.append(f"relay evicted peer {evicted.index}")
        for out in actions.sends:
            target = self._peer_by_conn(out.conn_id)
            if target is None or target.left:
                continue
            delivery = self._downlinks[target.index].delivery_time(self.now)
            self._scheduled_bytes += len(out.data)
            self._push_state(delivery, "to_peer", (target.index, out.data, None))
        self._push(self.now + SWEEP_PERIOD, "sweep")

    # -- assertions ---------------------------------------------------------------

    def _peer_by_conn(self, conn_id) -> _VirtualPeer | None:
        if isinstance(conn_id, str) and conn_id.startswith("peer"):
            return self.peers[int(conn_id[4:])]
        return None

    def _current_digests(self) -> dict[str, int]:
        digests: dict[str, int] = {}
        for sid, record in self.relay.sessions.items():
            if record.peers:
                digests[f"relay:{sid}"] = self.relay.session_digest(sid)
        for peer in self.peers:
            if peer.core.ready and not peer.left:
                digests[f"peer{peer.index}"] = peer.core.digest()
        return digests

    def _assert_converged(self, action: Action) -> None:
        sessions: dict[int, dict[str, int]] = {}
        for peer in self.peers:
            if peer.core.ready and not peer.left:
                sid = peer.core.session_id
                sessions.setdefault(sid, {})[f"peer{peer.index}"] = peer.core.digest()
        session_digests: dict[int, int] = {}
        for sid, replicas in sessions.items():
            relay_digest = self.relay.session_digest(sid)
            values = set(replicas.values()) | {relay_digest}
            if len(values) != 1:
                detail = ", ".join(f"{name}={d:016x}" for name, d in sorted(replicas.items()))
                raise SimulationError(
                    f"line {action.line_no}: digests diverged in session {sid} at "
                    f"t={self.now * 1000:.1f} ms: relay={relay_digest:016x}, {detail}"
                )
            seqs = {
                self.peers[int(name[4:])].core.replica.last_applied_relay_seq
                for name in replicas
            }
            seqs.add(self.relay.sessions[sid].state.last_applied_relay_seq)
            if len(seqs) != 1:
                raise SimulationError(
                    f"line {action.line_no}: applied seq diverged in session {sid}: {seqs}"
                )
            session_digests[sid] = relay_digest
        self.result.barriers.append(
            BarrierResult(
                t=self.now,
                session_digests=session_digests,
                peer_count=sum(len(r) for r in sessions.values()),
            )
        )


def run_scenario(
    topology: TopologyConfig,
    script: list[Action] | str,
    mesh: TriangleMesh | None = None,
) -> MetricsReport:
    """Run a script in virtual time and return its metrics report.

    Raises :class:`SimulationError` if any convergence barrier fails.
    """
    return VirtualSim(topology, script, mesh).run().report
