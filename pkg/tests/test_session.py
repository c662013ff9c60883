import copy

import numpy as np
import pytest

from hybridsync.digest import digest_state
from hybridsync.framing import Frame, MsgType
from hybridsync.geometry import Ray, RigidPose, SlicePlane
from hybridsync.payloads import PayloadError
from hybridsync import payloads
from hybridsync.quaternion import Quaternion
from hybridsync.session import (
    OrderingError,
    SnapshotError,
    apply_message,
    expire_rays,
    ray_color,
    restore,
    snapshot,
)
from hybridsync.state import AnnotationRecord, SessionState, SharedTransform

# Frozen from the reference implementation; the canonical byte layout is
# pinned independently in test_digest.
EMPTY_SNAPSHOT_HEX = "00000000000208e00000000000000000000000000000803f000000000000"


def stamped(msg_type, payload, relay_seq, sender=0):
    return Frame(
        msg_type, session_id=1, sender_peer=sender, relay_seq=relay_seq, payload=payload
    )


def transform_payload(scale=1.0, tz=0.0):
    return payloads.encode_transform(
        SharedTransform(Quaternion.identity(), (0.0, 0.0, tz), scale)
    )


class TestApplyMessage:
    def test_last_writer_wins(self):
        s0 = SessionState.initial()
        s1, _ = apply_message(s0, stamped(MsgType.TRANSFORM, transform_payload(scale=2.0), 5), 0.0)
        s2, _ = apply_message(s1, stamped(MsgType.TRANSFORM, transform_payload(scale=3.0), 7), 0.0)
        assert s2.transform.scale == 3.0
        assert s2.last_applied_relay_seq == 7

    def test_out_of_order_rejected(self):
        s0 = SessionState.initial()
        s1, _ = apply_message(s0, stamped(MsgType.TRANSFORM, transform_payload(), 5), 0.0)
        with pytest.raises(OrderingError):
            apply_message(s1, stamped(MsgType.TRANSFORM, transform_payload(), 5), 0.0)
        with pytest.raises(OrderingError):
            apply_message(s1, stamped(MsgType.TRANSFORM, transform_payload(), 3), 0.0)

    def test_duplicate_annotation_is_noop(self):
        rec = AnnotationRecord(42, (0.1, 0.2, 0.3), 1, "left atrium")
        data = payloads.encode_annotation_add(rec)
        s0 = SessionState.initial()
        s1, e1 = apply_message(s0, stamped(MsgType.ANNOTATION_ADD, data, 1), 0.0)
        assert e1[0].applied
        s2, e2 = apply_message(s1, stamped(MsgType.ANNOTATION_ADD, data, 2), 0.0)
        assert not e2[0].applied
        assert digest_state(s1) == digest_state(s2)

    def test_remove_missing_annotation_is_noop(self):
        s0 = SessionState.initial()
        s1, effects = apply_message(
            s0, stamped(MsgType.ANNOTATION_REMOVE, payloads.encode_annotation_remove(9), 1), 0.0
        )
        assert not effects[0].applied
        assert digest_state(s1) == digest_state(s0)

    def test_slice_push_pop_returns_to_prior_digest(self):
        s0 = SessionState.initial()
        d0 = digest_state(s0)
        push = payloads.encode_slice_push(SlicePlane((0, 0, 1), 0.5))
        s1, _ = apply_message(s0, stamped(MsgType.SLICE_PUSH, push, 1), 0.0)
        assert digest_state(s1) != d0
        s2, _ = apply_message(s1, stamped(MsgType.SLICE_POP, b"", 2), 0.0)
        assert digest_state(s2) == d0
        assert s2.slice_stack == []

    def test_slice_pop_on_empty_stack_is_noop(self):
        s0 = SessionState.initial()
        s1, effects = apply_message(s0, stamped(MsgType.SLICE_POP, b"", 1), 0.0)
        assert not effects[0].applied
        assert s1.slice_stack == []

    def test_place_model_first_wins(self):
        pose_a = payloads.encode_place_model(2, RigidPose(Quaternion.identity(), (1, 0, 0)))
        pose_b = payloads.encode_place_model(2, RigidPose(Quaternion.identity(), (0, 9, 0)))
        s0 = SessionState.initial()
        s1, e1 = apply_message(s0, stamped(MsgType.PLACE_MODEL, pose_a, 1), 0.0)
        assert e1[0].applied
        s2, e2 = apply_message(s1, stamped(MsgType.PLACE_MODEL, pose_b, 2), 0.0)
        assert not e2[0].applied
        assert e2[0].detail == "ALREADY_PLACED"
        assert s2.placements[2].translation == (1.0, 0.0, 0.0)

    def test_point_ray_replaces_previous(self):
        ray1 = payloads.encode_point_ray(Ray((0, 0, 0), (0, 0, 1)), 1000)
        ray2 = payloads.encode_point_ray(Ray((0, 0, 0), (0, 1, 0)), 2000)
        s0 = SessionState.initial()
        s1, _ = apply_message(s0, stamped(MsgType.POINT_RAY, ray1, 1, sender=3), 10.0)
        s2, _ = apply_message(s1, stamped(MsgType.POINT_RAY, ray2, 2, sender=3), 11.0)
        assert len(s2.live_rays) == 1
        assert s2.live_rays[3].ray.direction == (0.0, 1.0, 0.0)
        assert s2.live_rays[3].expires_at == pytest.approx(13.0)

    def test_join_and_leave_update_members(self):
        s0 = SessionState.initial()
        s1, _ = apply_message(s0, stamped(MsgType.JOIN, payloads.encode_join(2), 1, sender=4), 0.0)
        assert s1.members == {4: 2}
        s2, _ = apply_message(s1, stamped(MsgType.LEAVE, b"", 2, sender=4), 0.0)
        assert s2.members == {}
        assert digest_state(s2) == digest_state(s0)

    def test_malformed_payload_leaves_state_unchanged(self):
        s0 = SessionState.initial()
        with pytest.raises(PayloadError):
            apply_message(s0, stamped(MsgType.SLICE_PUSH, b"\x00" * 7, 1), 0.0)
        assert s0.last_applied_relay_seq == 0
        assert digest_state(s0) == digest_state(SessionState.initial())

    def test_non_state_frame_rejected(self):
        s0 = SessionState.initial()
        with pytest.raises(PayloadError):
            apply_message(s0, stamped(MsgType.JOIN_ACK, payloads.encode_join_ack(0, 1), 1), 0.0)

    def test_apply_is_pure(self):
        s0 = SessionState.initial()
        s0_snapshot = copy.deepcopy(s0)
        apply_message(s0, stamped(MsgType.SLICE_PUSH, payloads.encode_slice_push(SlicePlane((0, 0, 1), 0.1)), 1), 0.0)
        apply_message(s0, stamped(MsgType.TRANSFORM, transform_payload(scale=5.0), 1), 0.0)
        assert s0.transform == s0_snapshot.transform
        assert s0.slice_stack == s0_snapshot.slice_stack
        assert s0.last_applied_relay_seq == 0

    def test_replica_determinism_over_random_sequences(self):
        rng = np.random.default_rng(31)
        frames = []
        seq = 0
        for _ in range(120):
            seq += 1
            choice = rng.integers(0, 6)
            if choice == 0:
                payload = transform_payload(scale=float(rng.uniform(0.5, 2.0)))
                frames.append(stamped(MsgType.TRANSFORM, payload, seq))
            elif choice == 1:
                rec = AnnotationRecord(int(rng.integers(0, 50)), (0.1, 0.2, 0.3), 0, "a")
                frames.append(
                    stamped(MsgType.ANNOTATION_ADD, payloads.encode_annotation_add(rec), seq)
                )
            elif choice == 2:
                frames.append(
                    stamped(
                        MsgType.ANNOTATION_REMOVE,
                        payloads.encode_annotation_remove(int(rng.integers(0, 50))),
                        seq,
                    )
                )
            elif choice == 3:
                plane = SlicePlane((0, 0, 1), float(rng.uniform(-0.5, 0.5)))
                frames.append(stamped(MsgType.SLICE_PUSH, payloads.encode_slice_push(plane), seq))
            elif choice == 4:
                frames.append(stamped(MsgType.SLICE_POP, b"", seq))
            else:
                ray = payloads.encode_point_ray(Ray((0, 0, 0), (0, 0, 1)), 500)
                frames.append(stamped(MsgType.POINT_RAY, ray, seq, sender=int(rng.integers(0, 4))))

        replica_a = SessionState.initial()
        replica_b = SessionState.initial()
        for f in frames:
            replica_a, _ = apply_message(replica_a, f, 0.0)
        for f in frames:
            replica_b, _ = apply_message(replica_b, f, 0.0)
            assert digest_state(replica_b) == digest_state(replica_b)  # self-consistent
        assert digest_state(replica_a) == digest_state(replica_b)


class TestSnapshotRestore:
    def test_empty_snapshot_golden(self):
        assert snapshot(SessionState.initial()).hex() == EMPTY_SNAPSHOT_HEX

    def test_restore_empty(self):
        state = restore(bytes.fromhex(EMPTY_SNAPSHOT_HEX))
        assert digest_state(state) == digest_state(SessionState.initial())
        assert state.members == {} and state.live_rays == {}

    def test_round_trip_random_states(self):
        rng = np.random.default_rng(32)
        state = SessionState.initial()
        seq = 0
        for _ in range(60):
            seq += 1
            kind = rng.integers(0, 4)
            if kind == 0:
                payload = transform_payload(scale=float(rng.uniform(0.5, 2.0)), tz=float(rng.uniform(-1, 1)))
                state, _ = apply_message(state, stamped(MsgType.TRANSFORM, payload, seq), 0.0)
            elif kind == 1:
                rec = AnnotationRecord(
                    int(rng.integers(0, 2**32)), tuple(rng.uniform(-1, 1, 3)), int(rng.integers(0, 256)), "note"
                )
                state, _ = apply_message(
                    state, stamped(MsgType.ANNOTATION_ADD, payloads.encode_annotation_add(rec), seq), 0.0
                )
            elif kind == 2:
                n = rng.normal(size=3)
                n /= np.linalg.norm(n)
                plane = SlicePlane(tuple(n), float(rng.uniform(-0.4, 0.4)))
                state, _ = apply_message(
                    state, stamped(MsgType.SLICE_PUSH, payloads.encode_slice_push(plane), seq), 0.0
                )
            else:
                pose = payloads.encode_place_model(
                    int(rng.integers(0, 8)), RigidPose(Quaternion.identity(), tuple(rng.uniform(-1, 1, 3)))
                )
                state, _ = apply_message(state, stamped(MsgType.PLACE_MODEL, pose, seq), 0.0)
            restored = restore(snapshot(state))
            assert digest_state(restored) == digest_state(state)
            assert restored.last_applied_relay_seq == state.last_applied_relay_seq

    def test_snapshot_insensitive_to_annotation_insertion_order(self):
        r1 = AnnotationRecord(10, (0.1, 0.2, 0.3), 1, "one")
        r2 = AnnotationRecord(4, (0.4, 0.5, 0.6), 2, "two")
        a = SessionState.initial()
        a.annotations = {10: r1, 4: r2}
        b = SessionState.initial()
        b.annotations = {4: r2, 10: r1}
        assert snapshot(a) == snapshot(b)

    def test_truncated_snapshot_rejected(self):
        data = snapshot(SessionState.initial())
        for cut in (0, 3, len(data) - 1):
            with pytest.raises(SnapshotError):
                restore(data[:cut])

    def test_trailing_garbage_rejected(self):
        with pytest.raises(SnapshotError):
            restore(snapshot(SessionState.initial()) + b"\x00")

    def test_restore_resumes_ordering(self):
        s0 = SessionState.initial()
        s1, _ = apply_message(s0, stamped(MsgType.TRANSFORM, transform_payload(2.0), 10), 0.0)
        restored = restore(snapshot(s1))
        with pytest.raises(OrderingError):
            apply_message(restored, stamped(MsgType.TRANSFORM, transform_payload(), 10), 0.0)
        s2, _ = apply_message(restored, stamped(MsgType.TRANSFORM, transform_payload(3.0), 11), 0.0)
        assert s2.transform.scale == 3.0


class TestExpireRays:
    def make_state_with_ray(self, ttl_ms=500, sent_at=100.0):
        payload = payloads.encode_point_ray(Ray((0, 0, 0), (0, 0, 1)), ttl_ms)
        s, _ = apply_message(
            SessionState.initial(), stamped(MsgType.POINT_RAY, payload, 1, sender=2), sent_at
        )
        return s

    def test_expires_after_ttl(self):
        s = self.make_state_with_ray(ttl_ms=500, sent_at=100.0)
        assert 2 in expire_rays(s, 100.499).live_rays
        assert 2 not in expire_rays(s, 100.501).live_rays

    def test_idempotent(self):
        s = self.make_state_with_ray()
        once = expire_rays(s, 101.0)
        twice = expire_rays(once, 101.0)
        assert once.live_rays == twice.live_rays == {}

    def test_digest_unaffected(self):
        s = self.make_state_with_ray()
        assert digest_state(s) == digest_state(expire_rays(s, 9999.0))


class TestRayColor:
    def test_reference_values(self):
        assert ray_color(0) == 0.0
        assert ray_color(1) == pytest.approx(137.508)

    def test_sixteen_distinct_hues(self):
        hues = [ray_color(p) for p in range(16)]
        assert all(0.0 <= h < 360.0 for h in hues)
        for i in range(16):
            for j in range(i + 1, 16):
                diff = abs(hues[i] - hues[j])
                circular = min(diff, 360.0 - diff)
                assert circular >= 8.0
