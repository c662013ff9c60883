import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridsync.framing import (
    HEADER_LEN,
    BadMagic,
    BadVersion,
    Frame,
    LengthMismatch,
    MsgType,
    StreamParser,
    Truncated,
    UnknownMsgType,
    decode_frame,
    encode_frame,
    rewrite_sender_peer,
    stamp_relay_seq,
)


def test_header_is_24_bytes():
    data = encode_frame(Frame(MsgType.HEARTBEAT))
    assert len(data) == 24


def test_transform_frame_is_44_bytes():
    data = encode_frame(Frame(MsgType.TRANSFORM, payload=b"\x00" * 20))
    assert len(data) == 44


def test_exact_byte_layout():
    f = Frame(
        MsgType.TRANSFORM,
        session_id=0x1122334455667788,
        sender_peer=0x0102,
        relay_seq=0x0A0B0C0D,
        sender_seq=0x01020304,
        payload=b"abc",
    )
    data = encode_frame(f)
    assert data[0:2] == b"HC"
    assert data[2] == 1
    assert data[3] == 5
    assert data[4:12] == bytes.fromhex("8877665544332211")
    assert data[12:14] == bytes.fromhex("0201")
    assert data[14:18] == bytes.fromhex("0d0c0b0a")
    assert data[18:22] == bytes.fromhex("04030201")
    assert data[22:24] == bytes.fromhex("0300")
    assert data[24:] == b"abc"


class TestDecodeErrors:
    def test_truncated(self):
        with pytest.raises(Truncated):
            decode_frame(b"HC\x01\x05")

    def test_bad_magic(self):
        data = bytearray(encode_frame(Frame(MsgType.HEARTBEAT)))
        data[1] = 0x44
        with pytest.raises(BadMagic):
            decode_frame(bytes(data))

    def test_bad_version(self):
        data = bytearray(encode_frame(Frame(MsgType.HEARTBEAT)))
        data[2] = 9
        with pytest.raises(BadVersion):
            decode_frame(bytes(data))

    def test_length_mismatch(self):
        data = encode_frame(Frame(MsgType.HEARTBEAT)) + b"x"
        with pytest.raises(LengthMismatch):
            decode_frame(data)

    def test_unknown_msg_type(self):
        data = bytearray(encode_frame(Frame(MsgType.HEARTBEAT)))
        data[3] = 200
        with pytest.raises(UnknownMsgType):
            decode_frame(bytes(data))

    def test_errors_are_values_not_crashes(self):
        for bad in (b"", b"\x00" * 23, b"XX" + b"\x00" * 22, b"HC\x07" + b"\x00" * 21):
            with pytest.raises(ValueError):
                decode_frame(bad)


def test_valid_transform_frame_decodes():
    payload = bytes(range(20))
    f = Frame(MsgType.TRANSFORM, session_id=7, sender_peer=3, sender_seq=9, payload=payload)
    out = decode_frame(encode_frame(f))
    assert out.msg_type == MsgType.TRANSFORM
    assert out.payload == payload
    assert len(out.payload) == 20


def test_oversize_payload_rejected():
    with pytest.raises(ValueError):
        Frame(MsgType.TRANSFORM, payload=b"\x00" * 65536)


def test_stamp_relay_seq_touches_only_that_field():
    f = Frame(MsgType.TRANSFORM, session_id=5, sender_peer=2, sender_seq=11, payload=b"abcd")
    original = encode_frame(f)
    stamped = stamp_relay_seq(original, 0xDEADBEEF)
    assert len(stamped) == len(original)
    assert stamped[:14] == original[:14]
    assert stamped[18:] == original[18:]
    assert decode_frame(stamped).relay_seq == 0xDEADBEEF


def test_rewrite_sender_peer():
    f = Frame(MsgType.JOIN, payload=b"\x00\x00\x01")
    data = rewrite_sender_peer(encode_frame(f), 7)
    out = decode_frame(data)
    assert out.sender_peer == 7
    assert out.payload == f.payload


frame_strategy = st.builds(
    Frame,
    msg_type=st.sampled_from(list(MsgType)),
    session_id=st.integers(0, 2**64 - 1),
    sender_peer=st.integers(0, 2**16 - 1),
    relay_seq=st.integers(0, 2**32 - 1),
    sender_seq=st.integers(0, 2**32 - 1),
    payload=st.binary(max_size=200),
)


@settings(max_examples=300, deadline=None)
@given(frame_strategy)
def test_property_frame_round_trip(frame):
    data = encode_frame(frame)
    assert len(data) == HEADER_LEN + len(frame.payload)
    assert decode_frame(data) == frame


class TestStreamParser:
    def test_incremental_feed(self):
        f1 = encode_frame(Frame(MsgType.HEARTBEAT, sender_seq=1))
        f2 = encode_frame(Frame(MsgType.TRANSFORM, sender_seq=2, payload=b"\x01" * 20))
        parser = StreamParser()
        assert parser.feed(f1[:10]) == []
        assert parser.feed(f1[10:] + f2[:30]) == [f1]
        assert parser.feed(f2[30:]) == [f2]
        assert parser.pending == 0

    def test_many_frames_at_once(self):
        frames = [
            encode_frame(Frame(MsgType.HEARTBEAT, sender_seq=i)) for i in range(5)
        ]
        parser = StreamParser()
        assert parser.feed(b"".join(frames)) == frames

    def test_garbage_raises(self):
        parser = StreamParser()
        with pytest.raises(BadMagic):
            parser.feed(b"\x00" * 24)
