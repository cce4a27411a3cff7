"""Six-element wire frames and the byte channels that carry them.

One frame per output tick, ASCII, newline-terminated, no spaces:

    B,S,E,W,R,G\\n

Six base-10 integer angles in joint order (base, shoulder, elbow, wrist,
wrist rotation, gripper). Angles are rounded half-away-from-zero when
encoded; internal joint state stays real-valued so sub-degree breath
increments accumulate instead of vanishing in rounding.

The stream is self-synchronizing: receivers split on newlines, so after
arbitrary garbage the next well-formed line decodes normally. Malformed
lines are dropped and counted, never fatal.
"""

from __future__ import annotations

import math
import re
import socket
import threading
from dataclasses import dataclass

from .motion import JOINT_ORDER, JointId, JointLimits, JointVector

FIELD_COUNT = len(JOINT_ORDER)
_INT_TOKEN = re.compile(rb"^-?\d+$")


class FrameError(ValueError):
    """A received line is not a well-formed six-integer frame."""


def round_half_away(value: float) -> int:
    """Round to nearest integer with ties away from zero (servo-style)."""
    if value >= 0.0:
        return int(math.floor(value + 0.5))
    return int(math.ceil(value - 0.5))


def encode_frame(pose: JointVector) -> bytes:
    """Serialize a joint vector into one wire line."""
    return (
        ",".join(str(round_half_away(pose[j])) for j in JOINT_ORDER) + "\n"
    ).encode("ascii")


@dataclass
class DecodeWarning:
    joint: JointId
    received: int
    clamped: int


def decode_frame(
    data: bytes,
    limits: JointLimits | None = None,
    warnings: list[DecodeWarning] | None = None,
) -> JointVector:
    """Parse one wire line back into a joint vector.

    With ``limits`` given, out-of-range angles are clamped and reported
    through ``warnings``. Raises :class:`FrameError` for a missing
    newline, wrong field count, or non-integer tokens.
    """
    if not data.endswith(b"\n"):
        raise FrameError(f"missing newline terminator: {data!r}")
    line = data[:-1]
    if line.endswith(b"\r"):
        line = line[:-1]
    tokens = line.split(b",")
    if len(tokens) != FIELD_COUNT:
        raise FrameError(f"expected {FIELD_COUNT} fields, got {len(tokens)}: {data!r}")
    angles = []
    for joint, token in zip(JOINT_ORDER, tokens):
        if not _INT_TOKEN.match(token):
            raise FrameError(f"non-integer token {token!r} in {data!r}")
        value = int(token)
        if limits is not None:
            clamped = limits[joint].clamp(float(value))
            if clamped != value and warnings is not None:
                warnings.append(DecodeWarning(joint, value, int(clamped)))
            value = clamped
        angles.append(float(value))
    return JointVector(tuple(angles))


class LineAssembler:
    """Reassembles newline-delimited lines from an arbitrary byte stream."""

    def __init__(self, max_line_bytes: int = 4096) -> None:
        self._buffer = bytearray()
        self._max = max_line_bytes
        self.overflow_count = 0

    def feed(self, data: bytes) -> list[bytes]:
        """Absorb bytes; return every complete line (newline included)."""
        self._buffer.extend(data)
        lines: list[bytes] = []
        while True:
            idx = self._buffer.find(b"\n")
            if idx < 0:
                if len(self._buffer) > self._max:
                    # Runaway garbage with no newline; drop it and resync.
                    self._buffer.clear()
                    self.overflow_count += 1
                return lines
            lines.append(bytes(self._buffer[: idx + 1]))
            del self._buffer[: idx + 1]


class FrameDecoder:
    """Stateful frame receiver: line assembly + decode + error counting."""

    def __init__(self, limits: JointLimits | None = None) -> None:
        self.limits = limits
        self.assembler = LineAssembler()
        self.frame_errors = 0
        self.clamp_warnings: list[DecodeWarning] = []

    def feed(self, data: bytes) -> list[JointVector]:
        frames: list[JointVector] = []
        for line in self.assembler.feed(data):
            try:
                frames.append(decode_frame(line, self.limits, self.clamp_warnings))
            except FrameError:
                self.frame_errors += 1
        return frames


class LoopbackTransport:
    """In-process byte channel standing in for the serial line."""

    def __init__(self) -> None:
        self._buffer = bytearray()
        self._lock = threading.Lock()
        self._data_ready = threading.Condition(self._lock)
        self._closed = False

    def write(self, data: bytes) -> None:
        with self._data_ready:
            if self._closed:
                raise OSError("transport closed")
            self._buffer.extend(data)
            self._data_ready.notify_all()

    def read(self, timeout_s: float | None = 0.0) -> bytes:
        """Drain all buffered bytes, waiting up to ``timeout_s`` if empty."""
        with self._data_ready:
            if not self._buffer and timeout_s:
                self._data_ready.wait(timeout_s)
            data = bytes(self._buffer)
            self._buffer.clear()
            return data

    def close(self) -> None:
        with self._data_ready:
            self._closed = True
            self._data_ready.notify_all()

    @property
    def closed(self) -> bool:
        return self._closed


class TcpTransport:
    """Client-side TCP byte channel (host end of the stand-in serial line)."""

    def __init__(self, host: str, port: int, connect_timeout_s: float = 5.0) -> None:
        self._sock = socket.create_connection((host, port), timeout=connect_timeout_s)
        self._sock.settimeout(None)
        self._lock = threading.Lock()
        self._closed = False

    def write(self, data: bytes) -> None:
        with self._lock:
            self._sock.sendall(data)

    def read(self, timeout_s: float | None = 0.0) -> bytes:
        self._sock.settimeout(timeout_s if timeout_s else 0.000001)
        try:
            return self._sock.recv(4096)
        except (TimeoutError, socket.timeout):
            return b""

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            try:
                self._sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._sock.close()

    @property
    def closed(self) -> bool:
        return self._closed
