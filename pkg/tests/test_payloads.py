import math
import struct

import pytest

from hybridsync import payloads
from hybridsync.framing import MsgType
from hybridsync.geometry import Ray, RigidPose, SlicePlane
from hybridsync.payloads import ErrorCode, PayloadError, decode_payload
from hybridsync.quaternion import Quaternion, decode_quat, encode_quat
from hybridsync.state import AnnotationRecord, SharedTransform


def test_transform_payload_is_20_bytes_and_round_trips():
    t = SharedTransform(
        Quaternion.from_axis_angle((0, 1, 0), 0.4), (0.25, -0.5, 1.0), 1.5
    )
    data = payloads.encode_transform(t)
    assert len(data) == 20
    out = payloads.decode_transform(data)
    # translation/scale survive exactly (they are f32-representable here)
    assert out.translation == t.translation
    assert out.scale == t.scale
    assert out.rotation.angle_to(t.rotation) < math.radians(0.25)
    # a decoded transform re-encodes to identical bytes (codec fixed point)
    assert payloads.encode_transform(out) == data


def test_transform_scale_bounds_enforced():
    good = payloads.encode_transform(SharedTransform.identity())
    bad = good[:16] + struct.pack("<f", 0.001)
    with pytest.raises(PayloadError):
        payloads.decode_transform(bad)
    bad = good[:16] + struct.pack("<f", 101.0)
    with pytest.raises(PayloadError):
        payloads.decode_transform(bad)


def test_transform_rejects_non_finite():
    good = payloads.encode_transform(SharedTransform.identity())
    bad = good[:4] + struct.pack("<f", math.nan) + good[8:]
    with pytest.raises(PayloadError):
        payloads.decode_transform(bad)


def test_transform_wrong_size():
    with pytest.raises(PayloadError):
        payloads.decode_transform(b"\x00" * 19)


def test_annotation_round_trip():
    rec = AnnotationRecord((3 << 16) | 7, (0.5, 0.25, -0.125), 9, "apex")
    data = payloads.encode_annotation_add(rec)
    assert len(data) == 18 + 4
    out = payloads.decode_annotation_add(data)
    assert out == rec


def test_annotation_empty_and_unicode_labels():
    for label in ("", "x" * 255, "αορτή"):
        rec = AnnotationRecord(1, (0, 0, 0), 0, label)
        assert payloads.decode_annotation_add(payloads.encode_annotation_add(rec)) == rec


def test_annotation_label_too_long_rejected_at_construction():
    with pytest.raises(ValueError):
        AnnotationRecord(1, (0, 0, 0), 0, "x" * 256)


def test_annotation_label_length_mismatch():
    rec = AnnotationRecord(1, (0, 0, 0), 0, "ok")
    data = payloads.encode_annotation_add(rec)
    with pytest.raises(PayloadError):
        payloads.decode_annotation_add(data + b"!")
    with pytest.raises(PayloadError):
        payloads.decode_annotation_add(data[:-1])


def test_annotation_bad_utf8():
    head = struct.pack("<I3fBB", 1, 0, 0, 0, 0, 2)
    with pytest.raises(PayloadError):
        payloads.decode_annotation_add(head + b"\xff\xfe")


def test_point_ray_round_trip_and_ttl_bounds():
    ray = Ray((0, 0, -2), (0, 0, 1))
    data = payloads.encode_point_ray(ray, 2000)
    assert len(data) == 26
    out = payloads.decode_point_ray(data)
    assert out.ttl_ms == 2000
    assert out.ray.origin == (0.0, 0.0, -2.0)
    for bad_ttl in (0, 99, 60001):
        with pytest.raises(ValueError):
            payloads.encode_point_ray(ray, bad_ttl)
    bad = data[:24] + struct.pack("<H", 50)
    with pytest.raises(PayloadError):
        payloads.decode_point_ray(bad)


def test_point_ray_non_unit_direction_rejected():
    data = struct.pack("<3f3fH", 0, 0, 0, 0, 0, 2.0, 500)
    with pytest.raises(PayloadError):
        payloads.decode_point_ray(data)


def test_slice_push_round_trip():
    plane = SlicePlane((0, 0, 1), 0.5)
    data = payloads.encode_slice_push(plane)
    assert len(data) == 16
    out = payloads.decode_slice_push(data)
    assert out == plane


def test_slice_push_wrong_size():
    with pytest.raises(PayloadError):
        payloads.decode_slice_push(b"\x00" * 7)


def test_place_model_round_trip():
    pose = RigidPose(Quaternion.from_axis_angle((0, 0, 1), 0.3), (1.0, 2.0, 3.0))
    data = payloads.encode_place_model(4, pose)
    assert len(data) == 18
    out = payloads.decode_place_model(data)
    assert out.group_id == 4
    assert out.pose.translation == (1.0, 2.0, 3.0)
    assert out.pose.rotation.angle_to(pose.rotation) < math.radians(0.25)


def test_join_and_ack_round_trip():
    data = payloads.encode_join(3, auto_match=True)
    assert len(data) == 3
    out = payloads.decode_join(data)
    assert out.group_id == 3 and out.auto_match
    out2 = payloads.decode_join(payloads.encode_join(0, auto_match=False))
    assert not out2.auto_match

    ack = payloads.decode_join_ack(payloads.encode_join_ack(5, 123456789))
    assert ack.assigned_peer == 5 and ack.session_id == 123456789


def test_error_round_trip():
    out = payloads.decode_error(payloads.encode_error(ErrorCode.SESSION_FULL, "full up"))
    assert out.code is ErrorCode.SESSION_FULL
    assert out.detail == "full up"


def test_empty_payload_types_reject_content():
    for mt in (MsgType.SLICE_POP, MsgType.HEARTBEAT, MsgType.LEAVE):
        assert decode_payload(mt, b"") is None
        with pytest.raises(PayloadError):
            decode_payload(mt, b"\x00")


def test_quat_code_survives_payload_round_trip():
    # wire code -> decoded rotation -> re-encode must reproduce the code,
    # otherwise digests would disagree across replicas
    q = Quaternion.normalized(0.3, -0.2, 0.8, 0.4)
    code = encode_quat(q)
    assert encode_quat(decode_quat(code)) == code
