"""Simulated arm endpoint and the fixed-rate output loop.

The output loop is a dedicated periodic worker: each tick it takes an
atomic snapshot of the shared joint state, encodes exactly one wire
frame, and writes it to the transport. Tick jitter is recorded so rate
fidelity can be audited offline.

The simulated arm emulates the servo side: it parses incoming frames and
slews each joint toward the commanded angle at a bounded rate, clamped
to mechanical limits, regardless of what the command stream asks for.
"""

from __future__ import annotations

import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

from .motion import JOINT_ORDER, JointLimits, JointVector
from .wire import FrameDecoder, encode_frame


@dataclass
class ReceivedFrame:
    t_s: float
    pose: JointVector


class SimulatedArm:
    """Servo emulation: bounded-rate motion toward the latest command."""

    def __init__(
        self,
        limits: JointLimits | None = None,
        slew_rate_deg_s: float | tuple[float, ...] = 90.0,
    ) -> None:
        self.limits = limits or JointLimits.default()
        if isinstance(slew_rate_deg_s, (int, float)):
            self.slew_rates = tuple(float(slew_rate_deg_s) for _ in JOINT_ORDER)
        else:
            if len(slew_rate_deg_s) != len(JOINT_ORDER):
                raise ValueError(f"need {len(JOINT_ORDER)} slew rates")
            self.slew_rates = tuple(float(s) for s in slew_rate_deg_s)
        self.pose = self.limits.neutral_pose()
        self.command: JointVector | None = None
        self.frame_log: list[ReceivedFrame] = []
        self.decoder = FrameDecoder(self.limits)

    def feed(self, data: bytes, t_s: float) -> None:
        """Consume raw transport bytes; latest decoded frame becomes the command."""
        for frame in self.decoder.feed(data):
            self.command = frame
            self.frame_log.append(ReceivedFrame(t_s, frame))

    def step(self, dt_s: float) -> JointVector:
        """Advance the servos by ``dt_s`` toward the current command."""
        if self.command is None or dt_s <= 0.0:
            return self.pose
        angles = []
        for joint in JOINT_ORDER:
            max_step = self.slew_rates[joint] * dt_s
            current = self.pose[joint]
            target = self.command[joint]
            delta = target - current
            if delta > max_step:
                delta = max_step
            elif delta < -max_step:
                delta = -max_step
            angles.append(self.limits[joint].clamp(current + delta))
        self.pose = JointVector(tuple(angles))
        return self.pose


class ArmEndpoint(threading.Thread):
    """Independent worker consuming the byte stream into a simulated arm."""

    def __init__(self, arm: SimulatedArm, transport, poll_s: float = 0.005) -> None:
        super().__init__(name="arm-endpoint", daemon=True)
        self.arm = arm
        self.transport = transport
        self.poll_s = poll_s
        self._stop_event = threading.Event()
        self._start_time = time.monotonic()

    def run(self) -> None:
        last = time.monotonic()
        while not self._stop_event.is_set():
            data = self.transport.read(timeout_s=self.poll_s)
            now = time.monotonic()
            if data:
                self.arm.feed(data, now - self._start_time)
            self.arm.step(now - last)
            last = now

    def stop(self) -> None:
        self._stop_event.set()
        self.join(timeout=2.0)


class TcpArmServer(threading.Thread):
    """TCP endpoint hosting a simulated arm (remote stand-in serial line).

    Accepts one host connection at a time and feeds the byte stream into
    the arm, stepping the servos between reads.
    """

    def __init__(self, arm: SimulatedArm, host: str = "127.0.0.1", port: int = 0) -> None:
        super().__init__(name="tcp-arm", daemon=True)
        self.arm = arm
        self._server = socket.create_server((host, port))
        self._server.settimeout(0.2)
        self._stop_event = threading.Event()
        self._start_time = time.monotonic()

    @property
    def port(self) -> int:
        return self._server.getsockname()[1]

    def run(self) -> None:
        while not self._stop_event.is_set():
            try:
                conn, _addr = self._server.accept()
            except (TimeoutError, socket.timeout):
                continue
            except OSError:
                break
            conn.settimeout(0.05)
            last = time.monotonic()
            with conn:
                while not self._stop_event.is_set():
                    try:
                        data = conn.recv(4096)
                        if not data:
                            break
                    except (TimeoutError, socket.timeout):
                        data = b""
                    except OSError:
                        break
                    now = time.monotonic()
                    if data:
                        self.arm.feed(data, now - self._start_time)
                    self.arm.step(now - last)
                    last = now

    def stop(self) -> None:
        self._stop_event.set()
        self._server.close()
        self.join(timeout=2.0)


@dataclass
class TickStats:
    """Timing record of an output loop run."""

    periods_s: list[float] = field(default_factory=list)
    frames_sent: int = 0
    write_failures: int = 0

    @property
    def mean_period_s(self) -> float:
        return sum(self.periods_s) / len(self.periods_s) if self.periods_s else 0.0


class OutputLoop(threading.Thread):
    """Fixed-rate frame emitter reading snapshots of the shared joint state.

    ``tick`` is called once per period with the loop's session time and
    must return the joint vector to transmit; it is the composer hook in
    the live host and a plain snapshot getter in simpler setups.
    """

    def __init__(
        self,
        tick: Callable[[float], JointVector],
        transport,
        rate_hz: float = 20.0,
        on_frame: Callable[[float, JointVector, bytes], None] | None = None,
    ) -> None:
        super().__init__(name="output-loop", daemon=True)
        if rate_hz <= 0:
            raise ValueError(f"rate_hz must be positive, got {rate_hz}")
        self.tick = tick
        self.transport = transport
        self.period_s = 1.0 / rate_hz
        self.on_frame = on_frame
        self.stats = TickStats()
        self._stop_event = threading.Event()

    def run(self) -> None:
        start = time.monotonic()
        n = 0
        last_t = None
        while not self._stop_event.is_set():
            target = start + n * self.period_s
            now = time.monotonic()
            if target > now:
                if self._stop_event.wait(target - now):
                    break
            t = time.monotonic() - start
            pose = self.tick(t)
            data = encode_frame(pose)
            try:
                self.transport.write(data)
                self.stats.frames_sent += 1
                if self.on_frame is not None:
                    self.on_frame(t, pose, data)
            except OSError:
                self.stats.write_failures += 1
            if last_t is not None:
                self.stats.periods_s.append(t - last_t)
            last_t = t
            n += 1

    def stop(self) -> None:
        self._stop_event.set()
        self.join(timeout=2.0)
