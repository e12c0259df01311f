"""Length-prefixed binary frames exchanged between parties, dealer and clients.

Layout (after a 4-byte big-endian frame length)::

    session id   16 bytes
    round         4 bytes, big-endian
    kind          1 byte
    count         4 bytes, big-endian
    payload       count * 8 bytes, little-endian field elements
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

from ..field import ProtocolAbort

_HEAD = struct.Struct(">16sIBI")
_LEN = struct.Struct(">I")
_ELEM = np.dtype("<u8")


class Kind(enum.IntEnum):
    SHARE_INGEST = 1
    OPEN_VALUE = 2
    FLAG = 3
    VERDICT = 4
    TRIPLE_DELIVERY = 5


class FrameError(ProtocolAbort):
    pass


@dataclass
class Frame:
    session: bytes
    round: int
    kind: Kind
    payload: np.ndarray

    def __post_init__(self):
        if len(self.session) != 16:
            raise FrameError("session id must be 16 bytes")
        payload = np.asarray(self.payload)
        if payload.dtype.kind not in "ui":
            raise FrameError(f"payload must hold integers, got {payload.dtype}")
        self.payload = np.ascontiguousarray(payload, dtype=np.uint64).ravel()

    def encode(self) -> bytes:
        body = _HEAD.pack(self.session, self.round, int(self.kind), self.payload.size)
        data = self.payload.astype(_ELEM, copy=False).tobytes()
        return _LEN.pack(len(body) + len(data)) + body + data


def decode_body(body: bytes) -> Frame:
    if len(body) < _HEAD.size:
        raise FrameError("truncated frame header")
    session, rnd, kind, count = _HEAD.unpack_from(body)
    if len(body) != _HEAD.size + 8 * count:
        raise FrameError(f"payload length mismatch: header says {count} elements")
    try:
        kind = Kind(kind)
    except ValueError:
        raise FrameError(f"unknown frame kind {kind}") from None
    payload = np.frombuffer(body, dtype=_ELEM, offset=_HEAD.size, count=count).astype(np.uint64)
    return Frame(session, rnd, kind, payload)


def decode(data: bytes) -> Frame:
    if len(data) < _LEN.size:
        raise FrameError("truncated length prefix")
    (length,) = _LEN.unpack_from(data)
    if len(data) != _LEN.size + length:
        raise FrameError("length prefix does not match frame size")
    return decode_body(data[_LEN.size:])


def read_frame(recv_exact) -> Frame:
    """Read one frame using ``recv_exact(n) -> bytes``."""
    (length,) = _LEN.unpack(recv_exact(_LEN.size))
    return decode_body(recv_exact(length))
