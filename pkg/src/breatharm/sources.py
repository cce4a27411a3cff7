"""Respiration sample sources: live datagrams, recordings, playback, synth.

Three interchangeable sources feed the pipeline:

- a UDP listener for live sensor packets (ASCII ``seq,timestamp_ms,value``,
  one sample per datagram),
- a playback engine that concatenates four randomly chosen 30 s segments
  from pre-recorded breathing into a 2-minute loop (the non-synced
  condition's stimulus),
- a seeded synthetic breath generator for tests and demos.

Live ingest pushes into an ordered queue; playback and synth are pulled
on the consumer's clock. Either way the pipeline sees samples with
strictly increasing sequence numbers.
"""

from __future__ import annotations

import json
import math
import random
import socket
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .pipeline import RespirationSample

DEFAULT_UDP_PORT = 4210
SEGMENT_DURATION_S = 30.0
SEGMENT_COUNT = 4
PLAN_DURATION_S = SEGMENT_DURATION_S * SEGMENT_COUNT


class PacketError(ValueError):
    """A datagram payload is not a well-formed sample."""


class PlanError(ValueError):
    """A playback plan cannot be built from the given recording pool."""


class RecordingError(ValueError):
    """A recording file is malformed."""


def encode_packet(sample: RespirationSample) -> bytes:
    """Sensor-side payload format: ``seq,timestamp_ms,value`` ASCII."""
    return f"{sample.seq},{sample.timestamp_ms!r},{sample.value!r}".encode("ascii")


class PacketParser:
    """Parses sensor datagrams and enforces in-order delivery.

    Every input is either a sample, a counted drop (duplicate or
    reordered sequence number), or a counted error; arbitrary bytes never
    raise out of :meth:`parse`.
    """

    def __init__(self) -> None:
        self.error_count = 0
        self.reorder_count = 0
        self.duplicate_count = 0
        self.last_seq: int | None = None

    def parse(self, payload: bytes) -> RespirationSample | None:
        try:
            text = payload.decode("ascii")
            fields = text.split(",")
            if len(fields) != 3:
                raise PacketError(f"expected 3 fields, got {len(fields)}")
            seq = int(fields[0])
            timestamp_ms = float(fields[1])
            value = float(fields[2])
            if math.isnan(value) or math.isinf(value):
                raise PacketError(f"non-finite value {fields[2]!r}")
        except (PacketError, ValueError, UnicodeDecodeError):
            self.error_count += 1
            return None
        if self.last_seq is not None:
            if seq == self.last_seq:
                self.duplicate_count += 1
                return None
            if seq < self.last_seq:
                self.reorder_count += 1
                return None
        self.last_seq = seq
        return RespirationSample(seq=seq, timestamp_ms=timestamp_ms, value=value)


class UdpListener(threading.Thread):
    """Dedicated ingest worker: one datagram in, one parsed sample out."""

    def __init__(
        self,
        on_sample: Callable[[RespirationSample], None],
        host: str = "127.0.0.1",
        port: int = DEFAULT_UDP_PORT,
    ) -> None:
        super().__init__(name="udp-ingest", daemon=True)
        self.parser = PacketParser()
        self.on_sample = on_sample
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind((host, port))
        self._sock.settimeout(0.2)
        self._stop_event = threading.Event()

    @property
    def port(self) -> int:
        return self._sock.getsockname()[1]

    def run(self) -> None:
        while not self._stop_event.is_set():
            try:
                payload, _addr = self._sock.recvfrom(1024)
            except (TimeoutError, socket.timeout):
                continue
            except OSError:
                break
            sample = self.parser.parse(payload)
            if sample is not None:
                self.on_sample(sample)

    def stop(self) -> None:
        self._stop_event.set()
        self.join(timeout=2.0)
        self._sock.close()


@dataclass
class Recording:
    """A stored breathing signal, segment-eligible at >= 30 s duration."""

    id: str
    subject_label: str
    sample_rate_hz: float
    values: list[float] = field(default_factory=list)

    @property
    def duration_s(self) -> float:
        return len(self.values) / self.sample_rate_hz

    def value_at(self, t_s: float) -> float:
        """Linear interpolation at time ``t_s``, clamped to the recording."""
        if not self.values:
            raise RecordingError(f"recording {self.id} is empty")
        pos = t_s * self.sample_rate_hz
        i0 = int(math.floor(pos))
        if i0 < 0:
            return self.values[0]
        if i0 >= len(self.values) - 1:
            return self.values[-1]
        frac = pos - i0
        return self.values[i0] * (1.0 - frac) + self.values[i0 + 1] * frac


def save_recording(recording: Recording, path: str | Path) -> None:
    """Recording file: one JSON header line, then one sample per line."""
    path = Path(path)
    with path.open("w", encoding="ascii") as fh:
        header = {
            "id": recording.id,
            "subject_label": recording.subject_label,
            "sample_rate_hz": recording.sample_rate_hz,
        }
        fh.write(json.dumps(header) + "\n")
        period_ms = 1000.0 / recording.sample_rate_hz
        for seq, value in enumerate(recording.values):
            fh.write(json.dumps({"seq": seq, "t_ms": seq * period_ms, "v": value}) + "\n")


def load_recording(path: str | Path) -> Recording:
    path = Path(path)
    with path.open("r", encoding="ascii") as fh:
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise RecordingError(f"{path}: bad header line: {exc}") from exc
        for key in ("id", "subject_label", "sample_rate_hz"):
            if key not in header:
                raise RecordingError(f"{path}: header missing {key!r}")
        values: list[float] = []
        last_seq = -1
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                seq = int(row["seq"])
                value = float(row["v"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise RecordingError(f"{path}:{lineno}: bad sample line: {exc}") from exc
            if seq <= last_seq:
                raise RecordingError(f"{path}:{lineno}: seq {seq} not increasing")
            last_seq = seq
            values.append(value)
    return Recording(
        id=str(header["id"]),
        subject_label=str(header["subject_label"]),
        sample_rate_hz=float(header["sample_rate_hz"]),
        values=values,
    )


def load_pool(directory: str | Path) -> list[Recording]:
    """Load every ``*.jsonl`` recording in a directory, sorted by filename."""
    directory = Path(directory)
    paths = sorted(directory.glob("*.jsonl"))
    if not paths:
        raise PlanError(f"no recordings found in {directory}")
    return [load_recording(p) for p in paths]


@dataclass(frozen=True)
class PlanSegment:
    recording_id: str
    start_offset_s: float
    duration_s: float = SEGMENT_DURATION_S


@dataclass(frozen=True)
class PlaybackPlan:
    """Four 30 s segments, shuffled, forming a seamless 2-minute loop."""

    segments: tuple[PlanSegment, ...]
    order: tuple[int, ...]
    rng_seed: int

    @property
    def total_duration_s(self) -> float:
        return sum(seg.duration_s for seg in self.segments)

    def to_dict(self) -> dict:
        return {
            "rng_seed": self.rng_seed,
            "order": list(self.order),
            "segments": [
                {
                    "recording_id": seg.recording_id,
                    "start_offset_s": seg.start_offset_s,
                    "duration_s": seg.duration_s,
                }
                for seg in self.segments
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PlaybackPlan":
        return cls(
            segments=tuple(
                PlanSegment(
                    recording_id=seg["recording_id"],
                    start_offset_s=float(seg["start_offset_s"]),
                    duration_s=float(seg["duration_s"]),
                )
                for seg in data["segments"]
            ),
            order=tuple(int(i) for i in data["order"]),
            rng_seed=int(data["rng_seed"]),
        )


def build_playback_plan(pool: list[Recording], seed: int) -> PlaybackPlan:
    """Draw four random 30 s segments from the pool and shuffle their order.

    Each segment's recording and start offset are chosen uniformly at
    random with the full 30 s window inside the recording. Deterministic
    for a given seed.
    """
    eligible = [rec for rec in pool if rec.duration_s >= SEGMENT_DURATION_S]
    if not eligible:
        raise PlanError(
            f"pool has no recording of at least {SEGMENT_DURATION_S:.0f} s "
            f"(pool size {len(pool)})"
        )
    rng = random.Random(seed)
    draws = []
    for _ in range(SEGMENT_COUNT):
        rec = rng.choice(eligible)
        offset = rng.uniform(0.0, rec.duration_s - SEGMENT_DURATION_S)
        draws.append(PlanSegment(recording_id=rec.id, start_offset_s=offset))
    order = list(range(SEGMENT_COUNT))
    rng.shuffle(order)
    return PlaybackPlan(
        segments=tuple(draws[i] for i in order),
        order=tuple(order),
        rng_seed=seed,
    )


class PlaybackSource:
    """Pull-based playback of a plan, looped, at the consumer's sample rate.

    ``sample(n)`` returns the n-th sample on the consumer clock; the
    synthesized timestamps run continuously across segment joins and loop
    wraps. Segment joins are hard cuts (no crossfade) by design.
    """

    def __init__(
        self,
        plan: PlaybackPlan,
        pool: list[Recording],
        sample_rate_hz: float,
    ) -> None:
        by_id = {rec.id: rec for rec in pool}
        missing = [seg.recording_id for seg in plan.segments if seg.recording_id not in by_id]
        if missing:
            raise PlanError(f"plan references recordings not in pool: {missing}")
        self.plan = plan
        self.sample_rate_hz = sample_rate_hz
        self._recordings = [by_id[seg.recording_id] for seg in plan.segments]
        self._starts = [seg.start_offset_s for seg in plan.segments]
        self._seg_dur = [seg.duration_s for seg in plan.segments]
        # Integer loop length makes sample-level loop consistency exact:
        # sample(n) and sample(n + k*samples_per_loop) are bitwise equal.
        self.samples_per_loop = int(round(plan.total_duration_s * sample_rate_hz))

    def value_at(self, t_s: float) -> float:
        pos = math.fmod(t_s, self.plan.total_duration_s)
        if pos < 0.0:
            pos += self.plan.total_duration_s
        for idx, dur in enumerate(self._seg_dur):
            if pos < dur or idx == len(self._seg_dur) - 1:
                return self._recordings[idx].value_at(self._starts[idx] + min(pos, dur))
            pos -= dur
        raise AssertionError("unreachable")

    def sample(self, n: int) -> RespirationSample:
        t_s = n / self.sample_rate_hz
        local_t = (n % self.samples_per_loop) / self.sample_rate_hz
        return RespirationSample(
            seq=n,
            timestamp_ms=t_s * 1000.0,
            value=self.value_at(local_t),
        )


@dataclass(frozen=True)
class SynthBreath:
    """Synthetic breath configuration; frequency within human range."""

    base_freq_hz: float = 0.25
    amplitude: float = 1.0
    noise_std: float = 0.0
    waveform: str = "sinusoid"

    def __post_init__(self) -> None:
        if not 0.05 < self.base_freq_hz < 1.0:
            raise ValueError(
                f"base_freq_hz must be in (0.05, 1.0), got {self.base_freq_hz}"
            )
        if self.waveform not in ("sinusoid", "asymmetric-ramp"):
            raise ValueError(f"unknown waveform {self.waveform!r}")


def synth_value(cfg: SynthBreath, t_s: float) -> float:
    """Noise-free waveform value at time ``t_s`` (pure, periodic in 1/f)."""
    phase = cfg.base_freq_hz * t_s
    if cfg.waveform == "sinusoid":
        return cfg.amplitude * math.sin(2.0 * math.pi * phase)
    # Asymmetric ramp: quick inhale (40% of the cycle), slower exhale.
    frac = phase - math.floor(phase)
    rise = 0.4
    if frac < rise:
        level = -1.0 + 2.0 * frac / rise
    else:
        level = 1.0 - 2.0 * (frac - rise) / (1.0 - rise)
    return cfg.amplitude * level


class SynthSource:
    """Pull-based synthetic breath stream, reproducible for a given seed."""

    def __init__(
        self,
        cfg: SynthBreath,
        sample_rate_hz: float,
        seed: int = 0,
    ) -> None:
        self.cfg = cfg
        self.sample_rate_hz = sample_rate_hz
        self._rng = random.Random(seed)
        self._next_n = 0

    def sample(self, n: int) -> RespirationSample:
        if n != self._next_n:
            raise ValueError(f"samples must be pulled in order: asked {n}, expected {self._next_n}")
        self._next_n += 1
        t_s = n / self.sample_rate_hz
        value = synth_value(self.cfg, t_s)
        if self.cfg.noise_std > 0.0:
            value += self._rng.gauss(0.0, self.cfg.noise_std)
        return RespirationSample(seq=n, timestamp_ms=t_s * 1000.0, value=value)


def synth_recording(
    cfg: SynthBreath,
    duration_s: float,
    sample_rate_hz: float,
    seed: int,
    rec_id: str,
    subject_label: str = "synth",
) -> Recording:
    """Render a synthetic stream into a recording (for pools and tests)."""
    source = SynthSource(cfg, sample_rate_hz, seed)
    count = int(round(duration_s * sample_rate_hz))
    values = [source.sample(n).value for n in range(count)]
    return Recording(
        id=rec_id,
        subject_label=subject_label,
        sample_rate_hz=sample_rate_hz,
        values=values,
    )


def stream_packets(
    samples: Iterable[RespirationSample],
    host: str,
    port: int,
    rate_hz: float,
    stop: threading.Event | None = None,
) -> int:
    """Send samples as UDP datagrams paced at ``rate_hz``; returns count sent."""
    import time as _time

    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sent = 0
    start = _time.monotonic()
    try:
        for i, sample in enumerate(samples):
            if stop is not None and stop.is_set():
                break
            target = start + i / rate_hz
            delay = target - _time.monotonic()
            if delay > 0:
                _time.sleep(delay)
            sock.sendto(encode_packet(sample), (host, port))
            sent += 1
    finally:
        sock.close()
    return sent
