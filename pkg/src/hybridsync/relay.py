"""Relay core: matchmaking, the 16-peer session cap, relay-sequenced
broadcast, late-join snapshots, and heartbeat eviction.

The core is transport-agnostic: callers feed it raw frame bytes plus a
timestamp and get back the frames to deliver (and connections to close).
The socket server and the virtual-time simulator both drive the same core,
so ordering behavior is identical in tests and production.

Every session is a single serialization point: the relay stamps each
accepted frame with the session's next relay_seq, applies it to its own
authoritative replica, then fans the stamped bytes out to every member --
including the sender, which applies state only on this echo.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from hybridsync import payloads
from hybridsync.digest import digest_state
from hybridsync.framing import (
    RELAY_PEER,
    Frame,
    FrameError,
    MsgType,
    decode_frame,
    encode_frame,
    rewrite_sender_peer,
    rewrite_session_id,
    stamp_relay_seq,
)
from hybridsync.payloads import ErrorCode, PayloadError
from hybridsync.session import STATE_MSG_TYPES, apply_message, snapshot
from hybridsync.state import SessionState

logger = logging.getLogger(__name__)

HEARTBEAT_TIMEOUT = 5.0  # seconds of silence before eviction
SESSION_GRACE = 60.0  # empty sessions linger this long before destruction
DEFAULT_MAX_PEERS = 16

ConnId = object  # any hashable connection handle


@dataclass(frozen=True)
class OutFrame:
    conn_id: object
    data: bytes
    frame: Frame


@dataclass
class RelayActions:
    sends: list[OutFrame] = field(default_factory=list)
    closes: list[object] = field(default_factory=list)

    def extend(self, other: "RelayActions") -> None:
        self.sends.extend(other.sends)
        self.closes.extend(other.closes)


@dataclass
class PeerInfo:
    conn_id: object
    peer_id: int
    group_id: int
    last_heartbeat: float


@dataclass
class SessionRecord:
    session_id: int
    open: bool
    peers: dict[int, PeerInfo] = field(default_factory=dict)
    state: SessionState = field(default_factory=SessionState.initial)
    next_relay_seq: int = 1
    empty_since: float | None = None


class RelayCore:
    def __init__(
        self,
        max_peers: int = DEFAULT_MAX_PEERS,
        heartbeat_timeout: float = HEARTBEAT_TIMEOUT,
        session_grace: float = SESSION_GRACE,
    ):
        if not 1 <= max_peers <= 16:
            raise ValueError("max_peers must be within [1, 16]")
        self.max_peers = max_peers
        self.heartbeat_timeout = heartbeat_timeout
        self.session_grace = session_grace
        self.sessions: dict[int, SessionRecord] = {}
        self._bindings: dict[object, tuple[int, int]] = {}  # conn -> (session, peer)
        self._next_auto_session_id = 1

    # -- public API ---------------------------------------------------------

    def on_frame(self, conn_id, data: bytes, now: float) -> RelayActions:
        try:
            frame = decode_frame(data)
        except FrameError as exc:
            logger.warning("undecodable frame from %r: %s", conn_id, exc)
            return self._protocol_violation(conn_id, f"undecodable frame: {exc}")

        if frame.relay_seq != 0:
            return self._reject(conn_id, frame, f"client frames must carry relay_seq 0, got {frame.relay_seq}")

        if frame.msg_type == MsgType.JOIN:
            return self._handle_join(conn_id, frame, data, now)

        binding = self._bindings.get(conn_id)
        if binding is None:
            # Non-members may not send anything but JOIN.
            return self._protocol_violation(conn_id, "not a session member")

        session = self.sessions[binding[0]]
        peer = session.peers[binding[1]]
        peer.last_heartbeat = now  # any traffic proves liveness

        if frame.sender_peer != peer.peer_id:
            return self._reject(conn_id, frame, f"sender_peer {frame.sender_peer} is not yours")
        if frame.session_id != session.session_id:
            return self._reject(conn_id, frame, f"wrong session_id {frame.session_id}")

        if frame.msg_type == MsgType.HEARTBEAT:
            return RelayActions()
        if frame.msg_type == MsgType.LEAVE:
            actions = RelayActions()
            self._remove_peer(session, peer, now, actions, broadcast_sender_seq=frame.sender_seq)
            return actions
        if frame.msg_type in STATE_MSG_TYPES:
            return self._relay_broadcast(session, frame, data, now)
        return self._reject(conn_id, frame, f"{frame.msg_type.name} is not a client message")

    def on_disconnect(self, conn_id, now: float) -> RelayActions:
        actions = RelayActions()
        binding = self._bindings.get(conn_id)
        if binding is None:
            return actions
        session = self.sessions[binding[0]]
        peer = session.peers[binding[1]]
        self._remove_peer(session, peer, now, actions, notify_leaver=False)
        return actions

    def sweep(self, now: float) -> RelayActions:
        """Evict silent peers and destroy long-empty sessions."""
        actions = RelayActions()
        for session in sorted(self.sessions.values(), key=lambda s: s.session_id):
            for peer_id in sorted(session.peers):
                peer = session.peers[peer_id]
                if now - peer.last_heartbeat > self.heartbeat_timeout:
                    logger.info(
                        "evicting peer %d from session %d after %.0f ms of silence",
                        peer.peer_id, session.session_id, (now - peer.last_heartbeat) * 1000,
                    )
                    self._remove_peer(session, peer, now, actions)
                    actions.closes.append(peer.conn_id)
        for sid in [s for s, rec in self.sessions.items()
                    if rec.empty_since is not None and now - rec.empty_since >= self.session_grace]:
            logger.info("destroying empty session %d", sid)
            del self.sessions[sid]
        return actions

    def session_digest(self, session_id: int) -> int:
        return digest_state(self.sessions[session_id].state)

    def session_of(self, conn_id) -> int | None:
        binding = self._bindings.get(conn_id)
        return binding[0] if binding else None

    # -- join / leave -------------------------------------------------------

    def _handle_join(self, conn_id, frame: Frame, data: bytes, now: float) -> RelayActions:
        if conn_id in self._bindings:
            return self._protocol_violation(conn_id, "already joined")
        try:
            join = payloads.decode_join(frame.payload)
        except PayloadError as exc:
            return self._reject(conn_id, frame, f"bad JOIN payload: {exc}")

        session = self._select_session(frame.session_id, join.auto_match)
        if len(session.peers) >= self.max_peers:
            logger.info("session %d full, rejecting join", session.session_id)
            return RelayActions(
                sends=[self._error_frame(conn_id, session.session_id, ErrorCode.SESSION_FULL,
                                         f"session has {len(session.peers)} peers")]
            )

        peer_id = min(set(range(self.max_peers)) - set(session.peers))
        peer = PeerInfo(conn_id=conn_id, peer_id=peer_id, group_id=join.group_id, last_heartbeat=now)
        existing = [session.peers[p] for p in sorted(session.peers)]
        session.peers[peer_id] = peer
        session.empty_since = None
        self._bindings[conn_id] = (session.session_id, peer_id)
        logger.info("peer %d joined session %d (group %d)", peer_id, session.session_id, join.group_id)

        actions = RelayActions()
        ack = Frame(
            MsgType.JOIN_ACK,
            session_id=session.session_id,
            sender_peer=RELAY_PEER,
            payload=payloads.encode_join_ack(peer_id, session.session_id),
        )
        actions.sends.append(OutFrame(conn_id, encode_frame(ack), ack))
        snap = Frame(
            MsgType.STATE_SNAPSHOT,
            session_id=session.session_id,
            sender_peer=RELAY_PEER,
            relay_seq=session.state.last_applied_relay_seq,
            payload=snapshot(session.state),
        )
        actions.sends.append(OutFrame(conn_id, encode_frame(snap), snap))

        # Refresh the membership of everyone already present (stamped, so
        # the new joiner's replica learns the full member list through the
        # ordered stream), then announce the newcomer itself.
        for member in existing:
            refresher = Frame(
                MsgType.JOIN,
                session_id=session.session_id,
                sender_peer=member.peer_id,
                payload=payloads.encode_join(member.group_id, auto_match=False),
            )
            actions.extend(self._relay_broadcast(session, refresher, encode_frame(refresher), now))
        announce = rewrite_session_id(rewrite_sender_peer(data, peer_id), session.session_id)
        actions.extend(self._relay_broadcast(session, decode_frame(announce), announce, now))
        return actions

    def _select_session(self, session_id: int, auto_match: bool) -> SessionRecord:
        if session_id == 0 and auto_match:
            for session in self.sessions.values():  # insertion order = creation order
                if session.open and len(session.peers) < self.max_peers:
                    return session
            return self._create_session(self._alloc_session_id(), open_session=True)
        if session_id == 0:
            return self._create_session(self._alloc_session_id(), open_session=False)
        existing = self.sessions.get(session_id)
        if existing is not None:
            return existing
        return self._create_session(session_id, open_session=False)

    def _alloc_session_id(self) -> int:
        while self._next_auto_session_id in self.sessions:
            self._next_auto_session_id += 1
        sid = self._next_auto_session_id
        self._next_auto_session_id += 1
        return sid

    def _create_session(self, session_id: int, open_session: bool) -> SessionRecord:
        record = SessionRecord(session_id=session_id, open=open_session)
        self.sessions[session_id] = record
        logger.info("created session %d (open=%s)", session_id, open_session)
        return record

    def _remove_peer(
        self,
        session: SessionRecord,
        peer: PeerInfo,
        now: float,
        actions: RelayActions,
        notify_leaver: bool = True,
        broadcast_sender_seq: int = 0,
    ) -> None:
        del session.peers[peer.peer_id]
        self._bindings.pop(peer.conn_id, None)
        leave = Frame(
            MsgType.LEAVE,
            session_id=session.session_id,
            sender_peer=peer.peer_id,
            sender_seq=broadcast_sender_seq,
        )
        actions.extend(self._relay_broadcast(session, leave, encode_frame(leave), now))
        if not session.peers:
            session.empty_since = now
        logger.info("peer %d left session %d", peer.peer_id, session.session_id)

    # -- ordered broadcast ----------------------------------------------------

    def _relay_broadcast(self, session: SessionRecord, frame: Frame, data: bytes, now: float) -> RelayActions:
        """Stamp, apply to the authoritative replica, fan out to every member."""
        try:
            payloads.decode_payload(frame.msg_type, frame.payload)
        except PayloadError as exc:
            return self._reject(
                self.sessions[session.session_id].peers[frame.sender_peer].conn_id
                if frame.sender_peer in session.peers
                else None,
                frame,
                f"invalid {frame.msg_type.name} payload: {exc}",
            )

        seq = session.next_relay_seq
        stamped = stamp_relay_seq(data, seq)
        stamped_frame = decode_frame(stamped)
        new_state, _ = apply_message(session.state, stamped_frame, now)
        session.state = new_state
        session.next_relay_seq = seq + 1

        actions = RelayActions()
        for peer_id in sorted(session.peers):
            actions.sends.append(OutFrame(session.peers[peer_id].conn_id, stamped, stamped_frame))
        return actions

    # -- errors ---------------------------------------------------------------

    def _error_frame(self, conn_id, session_id: int, code: ErrorCode, detail: str) -> OutFrame:
        frame = Frame(
            MsgType.ERROR,
            session_id=session_id,
            sender_peer=RELAY_PEER,
            payload=payloads.encode_error(code, detail),
        )
        return OutFrame(conn_id, encode_frame(frame), frame)

    def _reject(self, conn_id, frame: Frame, detail: str) -> RelayActions:
        """Invalid traffic from a live connection: ERROR to the sender only."""
        logger.warning("rejecting frame from %r: %s", conn_id, detail)
        if conn_id is None:
            return RelayActions()
        return RelayActions(
            sends=[self._error_frame(conn_id, frame.session_id, ErrorCode.BAD_STATE, detail)]
        )

    def _protocol_violation(self, conn_id, detail: str) -> RelayActions:
        """Unrecoverable connection misuse: ERROR then close."""
        logger.warning("closing %r: %s", conn_id, detail)
        return RelayActions(
            sends=[self._error_frame(conn_id, 0, ErrorCode.BAD_STATE, detail)],
            closes=[conn_id],
        )
