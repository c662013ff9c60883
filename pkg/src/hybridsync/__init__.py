"""Collaborative 3D-model synchronization: protocol, relay, peers, and simulator."""

from hybridsync.quaternion import Quaternion, decode_quat, encode_quat

__all__ = ["Quaternion", "encode_quat", "decode_quat"]

__version__ = "0.1.0"
