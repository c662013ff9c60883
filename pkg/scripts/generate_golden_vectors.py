"""Produce cross-implementation parity vectors for the browser client.

Everything digests and codes in the browser must match these values bit
for bit; regenerate after any protocol change:

    python3 scripts/generate_golden_vectors.py
"""

import json
import pathlib

import numpy as np

from hybridsync import payloads
from hybridsync.digest import digest_state, fnv1a64
from hybridsync.framing import Frame, MsgType, encode_frame
from hybridsync.geometry import Ray, RigidPose, SlicePlane
from hybridsync.quaternion import Quaternion, decode_quat, encode_quat
from hybridsync.session import apply_message, snapshot
from hybridsync.state import AnnotationRecord, SessionState, SharedTransform

OUT = pathlib.Path(__file__).resolve().parent.parent / "frontend" / "tests" / "golden" / "golden.json"


def quat_vectors():
    rng = np.random.default_rng(20260401)
    comps = rng.normal(size=(300, 4))
    comps /= np.linalg.norm(comps, axis=1, keepdims=True)
    rows = []
    for row in comps:
        q = Quaternion(*row)
        code = encode_quat(q)
        d = decode_quat(code)
        rows.append(
            {
                "q": [q.x, q.y, q.z, q.w],
                "code": code,
                "decoded": [d.x, d.y, d.z, d.w],
            }
        )
    # adversarial decodes: arbitrary codes must decode then re-encode stably
    codes = [0, 3 << 30, 0xFFFFFFFF, 0xE0080200]
    codes += [int(c) for c in rng.integers(0, 2**32, size=60, dtype=np.uint64)]
    decode_rows = []
    for code in codes:
        d = decode_quat(code)
        decode_rows.append({"code": code, "decoded": [d.x, d.y, d.z, d.w]})
    return rows, decode_rows


def frame_vectors():
    frames = [
        Frame(MsgType.HEARTBEAT, session_id=1, sender_peer=2, relay_seq=0, sender_seq=3),
        Frame(
            MsgType.TRANSFORM,
            session_id=0x1122334455667788,
            sender_peer=7,
            relay_seq=41,
            sender_seq=9,
            payload=payloads.encode_transform(
                SharedTransform(
                    Quaternion.from_axis_angle((0, 1, 0), 0.7), (0.25, -0.5, 1.0), 1.5
                )
            ),
        ),
        Frame(
            MsgType.ANNOTATION_ADD,
            session_id=5,
            sender_peer=1,
            relay_seq=6,
            sender_seq=2,
            payload=payloads.encode_annotation_add(
                AnnotationRecord((1 << 16) | 4, (0.5, 0.25, -0.125), 9, "left atrium")
            ),
        ),
    ]
    return [{"hex": encode_frame(f).hex(), "msg_type": int(f.msg_type)} for f in frames]


def state_vectors():
    states = []

    empty = SessionState.initial()
    states.append(
        {
            "name": "empty",
            "frames": [],
            "digest": f"{digest_state(empty):016x}",
            "snapshot_hex": snapshot(empty).hex(),
        }
    )

    # replay-based state: the TS mirror applies the same stamped frames
    frames = []
    seq = 0

    def stamped(msg_type, payload, sender=0):
        nonlocal seq
        seq += 1
        return Frame(msg_type, session_id=9, sender_peer=sender, relay_seq=seq, payload=payload)

    frames.append(stamped(MsgType.JOIN, payloads.encode_join(0), sender=0))
    frames.append(stamped(MsgType.JOIN, payloads.encode_join(1), sender=1))
    frames.append(
        stamped(
            MsgType.PLACE_MODEL,
            payloads.encode_place_model(
                0, RigidPose(Quaternion.from_axis_angle((0, 0, 1), 0.25), (0.1, 0.0, 0.0))
            ),
        )
    )
    frames.append(
        stamped(
            MsgType.TRANSFORM,
            payloads.encode_transform(
                SharedTransform(
                    Quaternion.from_axis_angle((1, 2, 3), 1.1), (0.05, -0.4, 0.75), 1.25
                )
            ),
            sender=1,
        )
    )
    frames.append(
        stamped(
            MsgType.ANNOTATION_ADD,
            payloads.encode_annotation_add(
                AnnotationRecord((1 << 16) | 0, (0.31, -0.07, 0.44), 3, "mitral valve")
            ),
            sender=1,
        )
    )
    frames.append(
        stamped(
            MsgType.ANNOTATION_ADD,
            payloads.encode_annotation_add(AnnotationRecord(5, (0.0, 0.1, 0.2), 255, "αορτή")),
        )
    )
    frames.append(stamped(MsgType.ANNOTATION_REMOVE, payloads.encode_annotation_remove(5)))
    frames.append(
        stamped(MsgType.SLICE_PUSH, payloads.encode_slice_push(SlicePlane((0, 0, 1), 0.2)))
    )
    frames.append(
        stamped(
            MsgType.SLICE_PUSH,
            payloads.encode_slice_push(
                SlicePlane((0.6, -0.64, 0.48000000000000004), -0.05)
            ),
        )
    )
    frames.append(stamped(MsgType.SLICE_POP, b""))
    frames.append(
        stamped(
            MsgType.POINT_RAY,
            payloads.encode_point_ray(Ray((0, 0, -3), (0, 0, 1)), 2000),
            sender=1,
        )
    )
    frames.append(stamped(MsgType.LEAVE, b"", sender=1))

    state = SessionState.initial()
    for f in frames:
        state, _ = apply_message(state, f, 100.0)
    states.append(
        {
            "name": "replayed",
            "frames": [encode_frame(f).hex() for f in frames],
            "digest": f"{digest_state(state):016x}",
            "snapshot_hex": snapshot(state).hex(),
        }
    )
    return states


def main():
    rng_rows, decode_rows = quat_vectors()
    golden = {
        "fnv": [
            {"data_hex": data.hex(), "hash": f"{fnv1a64(data):016x}"}
            for data in (b"", b"a", b"hello world", bytes(range(256)))
        ],
        "quat_round_trips": rng_rows,
        "quat_decodes": decode_rows,
        "frames": frame_vectors(),
        "states": state_vectors(),
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(golden, indent=1))
    print(f"wrote {OUT} ({OUT.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
