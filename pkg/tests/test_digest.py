import struct

import numpy as np
import pytest

from hybridsync.digest import (
    FNV64_OFFSET,
    FNV64_PRIME,
    canonical_state_bytes,
    digest_state,
    fnv1a64,
)
from hybridsync.geometry import Ray, RigidPose, SlicePlane
from hybridsync.quaternion import Quaternion, encode_quat
from hybridsync.state import AnnotationRecord, LiveRay, SessionState, SharedTransform

# Golden values, frozen from the reference implementation after verifying
# them against the independent byte construction and FNV below.
EMPTY_STATE_DIGEST = 0x94E91D1966047E56
IDENTITY_QUAT_CODE = 0xE0080200


def independent_fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def build_state(**kw) -> SessionState:
    s = SessionState.initial()
    for k, v in kw.items():
        setattr(s, k, v)
    return s


def test_fnv_constants_and_agreement():
    assert FNV64_OFFSET == 0xCBF29CE484222325
    assert FNV64_PRIME == 0x100000001B3
    for data in (b"", b"a", b"hello world", bytes(range(256))):
        assert fnv1a64(data) == independent_fnv1a64(data)


def test_empty_state_canonical_form_built_by_hand():
    # transform section (identity) + three zero section counts
    hand = struct.pack(
        "<I3ff", IDENTITY_QUAT_CODE, 0.0, 0.0, 0.0, 1.0
    ) + struct.pack("<HHH", 0, 0, 0)
    assert canonical_state_bytes(SessionState.initial()) == hand
    assert independent_fnv1a64(hand) == EMPTY_STATE_DIGEST


def test_empty_state_digest_golden():
    assert digest_state(SessionState.initial()) == EMPTY_STATE_DIGEST


def test_identity_quat_code_golden():
    assert encode_quat(Quaternion.identity()) == IDENTITY_QUAT_CODE


def test_live_rays_excluded():
    a = SessionState.initial()
    b = build_state(
        live_rays={3: LiveRay(Ray((0, 0, 0), (0, 0, 1)), expires_at=99.0)}
    )
    assert digest_state(a) == digest_state(b)


def test_members_excluded():
    b = build_state(members={0: 0, 1: 0, 5: 2})
    assert digest_state(b) == EMPTY_STATE_DIGEST


def test_last_applied_seq_excluded():
    b = build_state(last_applied_relay_seq=1234)
    assert digest_state(b) == EMPTY_STATE_DIGEST


def test_annotation_order_insensitive():
    r1 = AnnotationRecord(10, (0.1, 0.2, 0.3), 1, "one")
    r2 = AnnotationRecord(4, (0.4, 0.5, 0.6), 2, "two")
    a = build_state(annotations={10: r1, 4: r2})
    b = build_state(annotations={4: r2, 10: r1})
    assert list(a.annotations) != list(b.annotations)
    assert digest_state(a) == digest_state(b)


def test_placement_order_insensitive():
    p1 = RigidPose(Quaternion.identity(), (1, 0, 0))
    p2 = RigidPose(Quaternion.identity(), (0, 1, 0))
    a = build_state(placements={2: p1, 0: p2})
    b = build_state(placements={0: p2, 2: p1})
    assert digest_state(a) == digest_state(b)


def test_slice_stack_order_sensitive():
    pa = SlicePlane((0, 0, 1), 0.1)
    pb = SlicePlane((1, 0, 0), 0.2)
    a = build_state(slice_stack=[pa, pb])
    b = build_state(slice_stack=[pb, pa])
    assert digest_state(a) != digest_state(b)


class TestMutationsChangeDigest:
    def test_transform(self):
        s = build_state(
            transform=SharedTransform(Quaternion.identity(), (0.0, 0.0, 0.25), 1.0)
        )
        assert digest_state(s) != EMPTY_STATE_DIGEST

    def test_scale_only(self):
        s = build_state(
            transform=SharedTransform(Quaternion.identity(), (0.0, 0.0, 0.0), 2.0)
        )
        assert digest_state(s) != EMPTY_STATE_DIGEST

    def test_annotation_field_mutations(self):
        base = AnnotationRecord(7, (0.1, 0.2, 0.3), 1, "x")
        d0 = digest_state(build_state(annotations={7: base}))
        assert d0 != EMPTY_STATE_DIGEST
        variants = [
            AnnotationRecord(8, (0.1, 0.2, 0.3), 1, "x"),
            AnnotationRecord(7, (0.1, 0.2, 0.375), 1, "x"),
            AnnotationRecord(7, (0.1, 0.2, 0.3), 2, "x"),
            AnnotationRecord(7, (0.1, 0.2, 0.3), 1, "y"),
        ]
        for v in variants:
            assert digest_state(build_state(annotations={v.annotation_id: v})) != d0

    def test_slice_and_placement(self):
        s1 = build_state(slice_stack=[SlicePlane((0, 0, 1), 0.5)])
        s2 = build_state(placements={0: RigidPose.identity()})
        assert len({digest_state(s1), digest_state(s2), EMPTY_STATE_DIGEST}) == 3

    def test_random_mutation_sweep(self):
        rng = np.random.default_rng(99)
        seen = {EMPTY_STATE_DIGEST}
        for _ in range(200):
            s = build_state(
                transform=SharedTransform(
                    Quaternion.normalized(*rng.normal(size=4)),
                    tuple(rng.uniform(-1, 1, 3)),
                    float(rng.uniform(0.5, 2.0)),
                )
            )
            d = digest_state(s)
            assert d not in seen
            seen.add(d)
