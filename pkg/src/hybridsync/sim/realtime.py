"""Wall-clock execution against real sockets on loopback.

The same relay and client implementations as production runs; the harness
only schedules script actions at wall-clock offsets and measures.  Echo
latency (send to relay-stamped echo arrival) bounds the relay's added
latency on loopback.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass

import numpy as np

from hybridsync.client import FeatureCloud, OrderingGapError, PeerClient, PeerCore
from hybridsync.framing import HEADER_LEN, StreamParser, decode_frame
from hybridsync.geometry import RigidPose, TriangleMesh, make_reference_mesh
from hybridsync.quaternion import Quaternion
from hybridsync.relay_server import RelayServer
from hybridsync.sim.metrics import MessageRow, MetricsReport, nearest_rank_percentile
from hybridsync.sim.scenario import Action, parse_scenario
from hybridsync.sim.topology import TopologyConfig
from hybridsync.sim.virtual import BarrierResult, SimResult, SimulationError
from hybridsync.state import SharedTransform

logger = logging.getLogger(__name__)


@dataclass
class LoadResult:
    sent: int
    duration_s: float
    relay_p50_ms: float
    relay_p95_ms: float
    relay_p99_ms: float
    echo_p95_ms: float
    gaps: int
    digests: dict[str, int]
    relay_digest: int

    @property
    def converged(self) -> bool:
        return len(set(self.digests.values()) | {self.relay_digest}) == 1


def _wait_all_applied(clients: list[PeerClient], relay: RelayServer, timeout: float = 20.0) -> bool:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        sessions = [s for s in relay.core.sessions.values() if s.peers]
        if len(sessions) == 1:
            target = sessions[0].state.last_applied_relay_seq
            if all(c.last_applied_seq() >= target for c in clients):
                return True
        time.sleep(0.01)
    return False


def _spawn_relay(stats_path: str):
    """Relay in its own process so measurements do not share our GIL."""
    import re
    import subprocess
    import sys

    proc = subprocess.Popen(
        [
            sys.executable, "-m", "hybridsync.relay_server",
            "--listen", "127.0.0.1:0", "--stats", stats_path,
            "--announce", "--log", "warning",
        ],
        stdout=subprocess.PIPE,
        text=True,
    )
    line = proc.stdout.readline()
    match = re.match(r"LISTENING (\S+) (\d+)", line)
    if not match:
        proc.terminate()
        raise SimulationError(f"relay did not announce its address: {line!r}")
    return proc, match.group(1), int(match.group(2))


def _parse_relay_stats(stats_path: str) -> tuple[list[float], dict[int, tuple[int, int]]]:
    latencies_ms: list[float] = []
    sessions: dict[int, tuple[int, int]] = {}
    with open(stats_path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# session"):
                parts = line.split()
                sid = int(parts[2])
                digest = int(parts[3].split("=", 1)[1], 16)
                seq = int(parts[4].split("=", 1)[1])
                sessions[sid] = (digest, seq)
            elif line and not line.startswith("#"):
                latencies_ms.append(float(line))
    return latencies_ms, sessions


class _LoadPeer:
    """One peer of the load harness: a production PeerCore over a raw socket."""

    def __init__(self, index: int, host: str, port: int):
        import socket as socket_mod

        self.index = index
        self.core = PeerCore(group_id=0)
        self.sock = socket_mod.create_connection((host, port))
        self.sock.setsockopt(socket_mod.IPPROTO_TCP, socket_mod.TCP_NODELAY, 1)
        self.sock.setblocking(False)
        self.parser = StreamParser()
        self.send_times: dict[int, float] = {}
        self.echo_ms: list[float] = []
        self.gap_error: BaseException | None = None

    def send(self, data: bytes) -> None:
        # uplink traffic is tiny; a full buffer would be a harness bug
        view = memoryview(data)
        while view:
            try:
                n = self.sock.send(view)
            except BlockingIOError:
                time.sleep(0.0005)
                continue
            view = view[n:]

    def pump_inbound(self, now: float) -> None:
        while True:
            try:
                chunk = self.sock.recv(65536)
            except BlockingIOError:
                return
            if not chunk:
                raise SimulationError(f"peer {self.index}: relay closed the connection")
            for raw in self.parser.feed(chunk):
                frame = decode_frame(raw)
                try:
                    self.core.on_frame(frame, now)
                except OrderingGapError as exc:
                    if self.gap_error is None:
                        self.gap_error = exc
                    continue
                if frame.relay_seq > 0 and frame.sender_peer == self.core.peer_id:
                    sent_at = self.send_times.pop(frame.sender_seq, None)
                    if sent_at is not None:
                        self.echo_ms.append((time.monotonic() - sent_at) * 1000.0)


def run_transform_load(
    peers: int = 16,
    rate_hz: float = 30.0,
    duration_s: float = 30.0,
    seed: int = 1,
) -> LoadResult:
    """Every peer submits TRANSFORMs at the given rate against a relay
    running in its own process on loopback.

    The harness is single-threaded: one loop paces all sends and drains all
    sockets through a selector, so thread scheduling never distorts the
    measurement or the send rate.  The relay reports the latency it adds
    per frame (arrival to fan-out writes issued) through its stats file;
    ordering gaps, digests, and echo latency come from the peers.
    """
    import os
    import selectors
    import tempfile

    stats_path = os.path.join(tempfile.mkdtemp(prefix="hybridsync-load-"), "relay-stats.txt")
    proc, host, port = _spawn_relay(stats_path)
    loaders: list[_LoadPeer] = []
    selector = selectors.DefaultSelector()
    try:
        for i in range(peers):
            loaders.append(_LoadPeer(i, host, port))
            selector.register(loaders[i].sock, selectors.EVENT_READ, loaders[i])

        def drain(timeout: float) -> None:
            for key, _ in selector.select(timeout):
                key.data.pump_inbound(time.monotonic())

        def drain_until(predicate, timeout: float, what: str) -> None:
            deadline = time.monotonic() + timeout
            next_heartbeat = time.monotonic() + 1.0
            while not predicate():
                if time.monotonic() > deadline:
                    raise SimulationError(f"timed out waiting for {what}")
                drain(0.05)
                if time.monotonic() >= next_heartbeat:
                    for lp in loaders:
                        if lp.core.ready:
                            lp.send(lp.core.make_heartbeat())
                    next_heartbeat += 1.0

        for lp in loaders:
            lp.send(lp.core.make_join(auto_match=True))
        drain_until(lambda: all(lp.core.ready for lp in loaders), 15.0, "joins")

        join_stamps = peers * (peers + 1) // 2  # refreshers + announce per join
        loaders[0].send(loaders[0].core.make_place_model(RigidPose.identity()))
        target = join_stamps + 1
        drain_until(
            lambda: all(lp.core.replica.last_applied_relay_seq >= target for lp in loaders),
            15.0, "placement",
        )

        rng = np.random.default_rng(seed)
        period = 1.0 / rate_hz
        ticks = int(round(duration_s * rate_hz))
        workload = [
            [
                SharedTransform(
                    Quaternion.normalized(*rng.normal(size=4)),
                    tuple(rng.uniform(-0.3, 0.3, 3)),
                    float(rng.uniform(0.8, 1.25)),
                )
                for _ in range(peers)
            ]
            for _ in range(ticks)
        ]

        sent = 0
        started = time.monotonic()
        next_tick = started
        for tick_transforms in workload:
            for lp, transform in zip(loaders, tick_transforms):
                data = lp.core.make_transform(transform)
                lp.send_times[decode_frame(data).sender_seq] = time.monotonic()
                lp.send(data)
                sent += 1
            next_tick += period
            while True:
                remaining = next_tick - time.monotonic()
                if remaining <= 0:
                    break
                drain(remaining)
        elapsed = time.monotonic() - started

        final_target = join_stamps + 1 + sent
        drain_until(
            lambda: all(
                lp.core.replica.last_applied_relay_seq >= final_target for lp in loaders
            ),
            20.0, "quiescence",
        )

        gaps = sum(1 for lp in loaders if lp.gap_error is not None)
        digests = {f"peer{lp.index}": lp.core.digest() for lp in loaders}
        echo_ms = [value for lp in loaders for value in lp.echo_ms]

        proc.terminate()
        proc.wait(timeout=10)
        relay_ms, sessions = _parse_relay_stats(stats_path)
        if len(sessions) != 1:
            raise SimulationError(f"expected one relay session, found {sorted(sessions)}")
        relay_digest, relay_seq = next(iter(sessions.values()))
        if relay_seq != final_target:
            raise SimulationError(f"relay stamped {relay_seq} frames, expected {final_target}")

        return LoadResult(
            sent=sent,
            duration_s=elapsed,
            relay_p50_ms=nearest_rank_percentile(relay_ms, 50),
            relay_p95_ms=nearest_rank_percentile(relay_ms, 95),
            relay_p99_ms=nearest_rank_percentile(relay_ms, 99),
            echo_p95_ms=nearest_rank_percentile(echo_ms, 95),
            gaps=gaps,
            digests=digests,
            relay_digest=relay_digest,
        )
    finally:
        selector.close()
        for lp in loaders:
            try:
                lp.sock.close()
            except OSError:
                pass
        if proc.poll() is None:
            proc.terminate()
            try:
                proc.wait(timeout=5)
            except Exception:
                proc.kill()


class _Collector:
    """Cross-client measurement: send time to last member apply, plus bytes."""

    def __init__(self):
        self.lock = threading.Lock()
        self.sends: dict[tuple[int, int], tuple[float, str, int]] = {}
        self.applies: dict[tuple[int, int], float] = {}
        self.sizes: dict[tuple[int, int], int] = {}
        self.delivered_bytes = 0

    def note_send(self, peer_id: int, sender_seq: int, msg_type: str, script_peer: int):
        with self.lock:
            self.sends[(peer_id, sender_seq)] = (time.monotonic(), msg_type, script_peer)

    def hook(self, frame, now: float):
        with self.lock:
            self.delivered_bytes += HEADER_LEN + len(frame.payload)
            key = (frame.sender_peer, frame.sender_seq)
            self.applies[key] = max(self.applies.get(key, 0.0), now)
            self.sizes[key] = HEADER_LEN + len(frame.payload)

    def rows(self, t0: float) -> list[MessageRow]:
        out = []
        with self.lock:
            sizes = self.sizes
            for key, (sent_at, msg_type, script_peer) in sorted(
                self.sends.items(), key=lambda kv: kv[1][0]
            ):
                applied = self.applies.get(key)
                if applied is None:
                    continue
                out.append(
                    MessageRow(
                        t_ms=(sent_at - t0) * 1000.0,
                        peer=script_peer,
                        msg_type=msg_type,
                        bytes=sizes.get(key, 0),
                        e2e_ms=(applied - sent_at) * 1000.0,
                    )
                )
        return out


def run_scenario_realtime(
    topology: TopologyConfig,
    script: list[Action] | str,
    mesh: TriangleMesh | None = None,
) -> SimResult:
    """Execute a scenario with real sockets, pacing actions by wall clock.

    Device world frames are identity in this mode (anchor registration
    still runs, on identical clouds), so scripted anchor-frame rays serve
    directly as world rays.  Barriers wait for quiescence, then compare
    every client digest with the relay's.
    """
    actions = parse_scenario(script) if isinstance(script, str) else list(script)
    mesh = mesh if mesh is not None else make_reference_mesh()
    collector = _Collector()
    result = SimResult(report=MetricsReport())
    rng = np.random.default_rng(topology.seed)
    cloud = FeatureCloud(tuple(map(tuple, rng.uniform(-1, 1, size=(topology.feature_points, 3)))))

    with RelayServer() as relay:
        clients: dict[int, PeerClient] = {}
        t0 = time.monotonic()
        last_action_wall = t0
        try:
            for action in actions:
                delay = (t0 + action.t) - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                last_action_wall = time.monotonic()

                if action.verb == "assert_converged":
                    live = list(clients.values())
                    if live and not _wait_all_applied(live, relay):
                        raise SimulationError("barrier timed out waiting for quiescence")
                    digests = {p: c.digest() for p, c in clients.items()}
                    relay_digest = relay.digest_of_only_session()
                    if len(set(digests.values()) | {relay_digest}) != 1:
                        detail = ", ".join(f"peer{p}={v:016x}" for p, v in digests.items())
                        raise SimulationError(
                            f"line {action.line_no}: digests diverged: "
                            f"relay={relay_digest:016x}, {detail}"
                        )
                    result.barriers.append(
                        BarrierResult(t=action.t, session_digests={0: relay_digest}, peer_count=len(digests))
                    )
                    continue

                peer = action.peer
                if action.verb == "join":
                    client = PeerClient.connect(
                        "127.0.0.1", relay.port,
                        group_id=action.args["group"],
                        session_code=action.args["session"],
                        mesh=mesh,
                    )
                    client.add_apply_hook(collector.hook)
                    client.establish_anchor(cloud, cloud)
                    clients[peer] = client
                    continue
                client = clients.get(peer)
                if client is None:
                    raise SimulationError(f"line {action.line_no}: peer {peer} has not joined")
                if action.verb == "leave":
                    client.leave()
                    del clients[peer]
                elif action.verb == "place":
                    client.place_model(action.args["pose"])
                    collector.note_send(client.peer_id, client.last_sent_seq, "PLACE_MODEL", peer)
                elif action.verb == "transform":
                    client.submit_transform(action.args["transform"])
                    collector.note_send(client.peer_id, client.last_sent_seq, "TRANSFORM", peer)
                elif action.verb == "annotate":
                    ann = client.tap_annotate(action.args["ray"], action.args["label"], action.args["color"])
                    if ann is None:
                        result.annotation_misses += 1
                    else:
                        collector.note_send(client.peer_id, client.last_sent_seq, "ANNOTATION_ADD", peer)
                elif action.verb == "point":
                    client.point_at(action.args["ray"], action.args["ttl"])
                    collector.note_send(client.peer_id, client.last_sent_seq, "POINT_RAY", peer)
                elif action.verb == "slice_push":
                    client.push_slice(action.args["plane"])
                    collector.note_send(client.peer_id, client.last_sent_seq, "SLICE_PUSH", peer)
                elif action.verb == "slice_pop":
                    client.pop_slice()
                    collector.note_send(client.peer_id, client.last_sent_seq, "SLICE_POP", peer)

            live = list(clients.values())
            if live and not _wait_all_applied(live, relay):
                raise SimulationError("run did not reach quiescence")
            result.report.rows = collector.rows(t0)
            result.report.finalize(
                total_bytes=collector.delivered_bytes,
                convergence_ms=(time.monotonic() - last_action_wall) * 1000.0,
            )
            result.final_digests = {f"peer{p}": c.digest() for p, c in clients.items()}
            return result
        finally:
            for c in clients.values():
                c.close()


def run_peer_script(client: PeerClient, script: str) -> None:
    """Drive one connected headless peer from a scenario script.

    The peer column is ignored (every action is performed by this client);
    join lines and barriers are skipped.
    """
    actions = parse_scenario(script)
    t0 = time.monotonic()
    for action in actions:
        delay = (t0 + action.t) - time.monotonic()
        if delay > 0:
            time.sleep(delay)
        if action.verb in ("join", "assert_converged"):
            continue
        if action.verb == "leave":
            client.leave()
            return
        if action.verb == "place":
            client.place_model(action.args["pose"])
        elif action.verb == "transform":
            client.submit_transform(action.args["transform"])
        elif action.verb == "annotate":
            client.tap_annotate(action.args["ray"], action.args["label"], action.args["color"])
        elif action.verb == "point":
            client.point_at(action.args["ray"], action.args["ttl"])
        elif action.verb == "slice_push":
            client.push_slice(action.args["plane"])
        elif action.verb == "slice_pop":
            client.pop_slice()
