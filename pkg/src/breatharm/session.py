"""Session orchestration: condition and phase machines, record, replay.

The engine reacts to four stimuli (live samples, playback samples,
controller events, and output ticks) and owns the condition mode
(off / synced / non-synced), the experiment phase machine, the shared
joint state, and the append-only event log.

Two drivers exist. :func:`run_session` executes a fully scripted session
on a virtual clock: every sample, tick, and input lands at an exact
simulated time, so a session is reproducible bit-for-bit from its seeds
and script. The live host (:mod:`breatharm.host`) drives the same engine
from real threads and a wall clock for interactive use.

A record holds enough to reconstruct every transmitted wire frame:
replaying the logged breath frames, intents, and mode changes through
the motion mapping reproduces the frame stream exactly.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .config import CalibrationSpec, EngineConfig, SessionConfig
from .controller import ControllerEvent, EventMapper
from .motion import (
    JOINT_ORDER,
    BreathDisplacement,
    JointId,
    JointIntent,
    JointVector,
    compose_tick,
    map_displacement,
)
from .pipeline import (
    BreathPipeline,
    NormalizationBounds,
    RespirationSample,
    calibrate_bounds,
)
from .sources import (
    PlaybackPlan,
    PlaybackSource,
    Recording,
    SynthBreath,
    SynthSource,
    build_playback_plan,
    load_pool,
    synth_recording,
)
from .wire import encode_frame, round_half_away

# Condition modes
OFF = "off"
SYNCED = "synced"
NON_SYNCED = "non_synced"

# Phases
IDLE = "idle"
INTRO = "intro"
ACCLIMATIZATION = "acclimatization"
TASK_BLOCK = "task_block"
QUESTIONNAIRE_PAUSE = "questionnaire_pause"
COMPLETE = "complete"

_DISPLACEMENT_SOURCE = {SYNCED: "live", NON_SYNCED: "playback"}


class PhaseError(RuntimeError):
    """An illegal phase transition was requested."""


class RecordError(ValueError):
    """A stored session record is unreadable."""


class SourceError(RuntimeError):
    """A sample source failed; the session cannot continue."""


@dataclass(frozen=True)
class Event:
    """One timestamped log entry; ``seq`` breaks timestamp ties."""

    seq: int
    t: float
    kind: str
    data: dict


@dataclass
class SessionRecord:
    session_id: str
    seed: int
    condition_order: tuple[str, ...]
    config: dict
    created_at: float = 0.0
    complete: bool = False
    partial_reason: str | None = None
    events: list[Event] = field(default_factory=list)

    def core_dict(self) -> dict:
        """Everything except wall-clock fields, for determinism checks."""
        return {
            "session_id": self.session_id,
            "seed": self.seed,
            "condition_order": list(self.condition_order),
            "config": self.config,
            "complete": self.complete,
            "partial_reason": self.partial_reason,
            "events": [
                {"seq": e.seq, "t": e.t, "kind": e.kind, "data": e.data}
                for e in self.events
            ],
        }

    def events_of(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]


class PhaseMachine:
    """Experiment phase per condition: acclimatize, do tasks, questionnaire.

    After the final condition's questionnaire the only move left is to
    Complete. Illegal requests raise and leave the state untouched.
    """

    def __init__(self, total_conditions: int = 2) -> None:
        if total_conditions < 1:
            raise ValueError("need at least one condition")
        self.phase = IDLE
        self.total_conditions = total_conditions
        self.conditions_completed = 0

    def advance(self) -> str:
        phase = self.phase
        if phase == IDLE:
            nxt = INTRO
        elif phase == INTRO:
            nxt = ACCLIMATIZATION
        elif phase == ACCLIMATIZATION:
            nxt = TASK_BLOCK
        elif phase == TASK_BLOCK:
            nxt = QUESTIONNAIRE_PAUSE
        elif phase == QUESTIONNAIRE_PAUSE:
            if self.conditions_completed < self.total_conditions:
                nxt = ACCLIMATIZATION
            else:
                nxt = COMPLETE
        else:
            raise PhaseError(f"no transition from {phase!r}")
        if nxt == QUESTIONNAIRE_PAUSE:
            self.conditions_completed += 1
        self.phase = nxt
        return nxt


def compose_step(
    state: JointVector,
    displacements: list[tuple[float, float]],
    held_axes: dict[JointId, float],
    manual_enabled: bool,
    dt_s: float,
    config: EngineConfig,
):
    """One composer update: manual jog plus queued breath displacements.

    Shared by the engine and the replayer so both walk the exact same
    float operations. ``displacements`` are movement-space
    (shoulder_deg, elbow_deg) pairs in arrival order.
    """
    manual = []
    if manual_enabled:
        for joint in JOINT_ORDER:
            value = held_axes[joint]
            if value != 0.0:
                manual.append(JointIntent(joint=joint, axis_value=value))
    breath = None
    if displacements:
        shoulder = 0.0
        elbow = 0.0
        for sh, el in displacements:
            shoulder += sh
            elbow += el
        breath = BreathDisplacement(window_index=0, shoulder_deg=shoulder, elbow_deg=elbow)
    return compose_tick(state, breath, manual, dt_s, config.limits, config.motion)


class SessionEngine:
    """Reactive core shared by the simulated and live drivers.

    All entry points take the session time ``t`` (seconds since start).
    Thread-safe: live workers serialize through one lock, which also
    fixes the total order of the event log.
    """

    def __init__(
        self,
        config: EngineConfig,
        session_id: str = "session",
        seed: int = 0,
        condition_order: tuple[str, ...] = (SYNCED, NON_SYNCED),
        sink: Callable[[Event], None] | None = None,
        tasks: tuple[str, ...] = (),
        total_conditions: int | None = None,
    ) -> None:
        self.config = config
        self.session_id = session_id
        self.lock = threading.RLock()
        self.record = SessionRecord(
            session_id=session_id,
            seed=seed,
            condition_order=tuple(condition_order),
            config=config.to_dict(),
            created_at=time.time(),
        )
        self._sink = sink
        self._seq = 0
        self.tasks = tuple(tasks)

        if isinstance(config.bounds, CalibrationSpec):
            self.calibrating: CalibrationSpec | None = config.bounds
            self.bounds = NormalizationBounds(-1e18, 1e18)
        else:
            self.calibrating = None
            self.bounds = config.bounds
        self._calibration_deltas: list[float] = []

        self.live_pipeline = BreathPipeline(config.pipeline, self.bounds)
        self.playback_pipeline: BreathPipeline | None = None
        self.playback_source: PlaybackSource | None = None
        self.playback_plan: PlaybackPlan | None = None
        self.playback_pool: list[Recording] = []
        self._playback_t0 = 0.0
        self._playback_count = 0

        self.phases = PhaseMachine(
            total_conditions=total_conditions or max(1, len(condition_order))
        )
        self.condition = OFF
        self.manual_enabled = True
        self.accl_duration_s = 60.0
        self._accl_entered_t: float | None = None
        self.mapper = EventMapper(deadzone=config.deadzone)
        self.held_axes: dict[JointId, float] = {j: 0.0 for j in JOINT_ORDER}
        self.joints = config.limits.neutral_pose()
        self._pending: deque[tuple[str, float, float]] = deque()
        self._last_tick_t = 0.0
        self.counters = {
            "samples": 0,
            "breath_frames": 0,
            "frames_tx": 0,
            "clamps": 0,
            "intents": 0,
            "errors": 0,
        }

    # -- logging ------------------------------------------------------------

    def _log(self, t: float, kind: str, data: dict) -> None:
        event = Event(seq=self._seq, t=t, kind=kind, data=data)
        self._seq += 1
        self.record.events.append(event)
        if self._sink is not None:
            self._sink(event)

    # -- playback setup -----------------------------------------------------

    def configure_playback(self, plan: PlaybackPlan, pool: list[Recording]) -> None:
        self.playback_plan = plan
        self.playback_pool = pool

    def playback_next_t(self) -> float | None:
        """Session time at which the next playback sample is due."""
        with self.lock:
            if self.playback_source is None:
                return None
            rate = self.config.pipeline.sample_rate_hz
            return self._playback_t0 + self._playback_count / rate

    def pull_playback(self, t: float) -> None:
        """Generate the next playback sample and process it."""
        with self.lock:
            if self.playback_source is None:
                return
            sample = self.playback_source.sample(self._playback_count)
            self._playback_count += 1
            self._process_sample("playback", sample, t)

    # -- stimuli ------------------------------------------------------------

    def on_sample(self, source: str, sample: RespirationSample, t: float) -> None:
        with self.lock:
            self._process_sample(source, sample, t)

    def _process_sample(self, source: str, sample: RespirationSample, t: float) -> None:
        self.counters["samples"] += 1
        self._log(
            t,
            "sample",
            {
                "source": source,
                "seq": sample.seq,
                "t_ms": sample.timestamp_ms,
                "value": sample.value,
            },
        )
        pipeline = self.live_pipeline if source == "live" else self.playback_pipeline
        if pipeline is None:
            return
        frame = pipeline.push(sample)
        if frame is None:
            return
        if self.calibrating is not None and source == "live":
            self._calibration_deltas.append(frame.delta)
            if t >= self.calibrating.duration_s and len(self._calibration_deltas) >= 2:
                bounds = calibrate_bounds(
                    self._calibration_deltas, self.calibrating.percentile
                )
                self.bounds = bounds
                self.live_pipeline.bounds = bounds
                if self.playback_pipeline is not None:
                    self.playback_pipeline.bounds = bounds
                self.calibrating = None
                self._log(
                    t,
                    "bounds_ready",
                    {
                        "delta_min": bounds.delta_min,
                        "delta_max": bounds.delta_max,
                        "source": bounds.source,
                    },
                )
            return
        if self.calibrating is not None:
            # Bounds not established yet; suppress frames from any source.
            return
        displacement = map_displacement(
            frame.delta_norm,
            frame.window_index,
            self.config.motion.shoulder_max_deg,
            self.config.motion.elbow_max_deg,
        )
        self.counters["breath_frames"] += 1
        self._log(
            t,
            "breath_frame",
            {
                "source": source,
                "window_index": frame.window_index,
                "integration": frame.integration,
                "delta": frame.delta,
                "delta_norm": frame.delta_norm,
                "t_ms": frame.timestamp_ms,
                "clamped": frame.clamped,
                "shoulder_deg": displacement.shoulder_deg,
                "elbow_deg": displacement.elbow_deg,
            },
        )
        self._pending.append((source, displacement.shoulder_deg, displacement.elbow_deg))

    def on_controller_event(self, event: ControllerEvent, t: float) -> None:
        with self.lock:
            for intent in self.mapper.map_event(event):
                self.held_axes[intent.joint] = intent.axis_value
                self.counters["intents"] += 1
                self._log(
                    t,
                    "intent",
                    {"joint": intent.joint.key, "value": intent.axis_value},
                )

    def on_output_tick(self, t: float) -> tuple[JointVector, bytes]:
        """Compose one tick; returns the new pose and its wire frame."""
        with self.lock:
            dt = t - self._last_tick_t
            self._last_tick_t = t
            active = _DISPLACEMENT_SOURCE.get(self.condition)
            displacements = [
                (sh, el) for source, sh, el in self._pending if source == active
            ]
            self._pending.clear()
            self.joints, clamps = compose_step(
                self.joints,
                displacements,
                self.held_axes,
                self.manual_enabled,
                dt,
                self.config,
            )
            for clamp in clamps:
                self.counters["clamps"] += 1
                self._log(
                    t,
                    "clamp",
                    {
                        "joint": clamp.joint.key,
                        "requested": clamp.requested_deg,
                        "clamped": clamp.clamped_deg,
                    },
                )
            self._log(t, "joint_snapshot", {"angles": list(self.joints.angles)})
            data = encode_frame(self.joints)
            ints = [round_half_away(self.joints[j]) for j in JOINT_ORDER]
            self.counters["frames_tx"] += 1
            self._log(t, "frame_tx", {"angles": ints})
            return self.joints, data

    def on_error(self, t: float, error_type: str, detail: str) -> None:
        with self.lock:
            self.counters["errors"] += 1
            self._log(t, "error", {"type": error_type, "detail": detail})

    def log_task_marker(self, t: float, label: str, index: int) -> None:
        with self.lock:
            self._log(t, "task_marker", {"label": label, "index": index})

    # -- control ------------------------------------------------------------

    def set_condition(self, mode: str, t: float) -> dict:
        if mode not in (OFF, SYNCED, NON_SYNCED):
            raise ValueError(f"unknown condition mode {mode!r}")
        with self.lock:
            if mode == self.condition:
                return self.snapshot_state(t)
            previous = self.condition
            plan_data = None
            if mode == NON_SYNCED:
                if self.playback_plan is None or not self.playback_pool:
                    raise SourceError("no playback plan configured for non-synced mode")
                self.playback_source = PlaybackSource(
                    self.playback_plan,
                    self.playback_pool,
                    self.config.pipeline.sample_rate_hz,
                )
                self.playback_pipeline = BreathPipeline(
                    self.config.pipeline, self.bounds
                )
                self._playback_t0 = t
                self._playback_count = 0
                plan_data = self.playback_plan.to_dict()
            else:
                self.playback_source = None
                self.playback_pipeline = None
            self.condition = mode
            self._log(
                t,
                "condition_change",
                {"from": previous, "to": mode, "plan": plan_data},
            )
            return self.snapshot_state(t)

    def advance_phase(self, t: float) -> dict:
        with self.lock:
            previous = self.phases.phase
            new_phase = self.phases.advance()  # raises PhaseError when illegal
            data: dict = {"from": previous, "to": new_phase}
            if new_phase == ACCLIMATIZATION:
                self.manual_enabled = False
                self._accl_entered_t = t
                data["duration_s"] = self.accl_duration_s
            else:
                self.manual_enabled = True
                self._accl_entered_t = None
            if new_phase == TASK_BLOCK and self.tasks:
                data["tasks"] = list(self.tasks)
            self._log(t, "phase_change", data)
            if new_phase == QUESTIONNAIRE_PAUSE:
                self.set_condition(OFF, t)
            return self.snapshot_state(t)

    def snapshot_state(self, t: float) -> dict:
        with self.lock:
            remaining = None
            if self._accl_entered_t is not None:
                remaining = max(0.0, self.accl_duration_s - (t - self._accl_entered_t))
            return {
                "session_id": self.session_id,
                "t": t,
                "phase": self.phases.phase,
                "phase_remaining_s": remaining,
                "condition": self.condition,
                "conditions_completed": self.phases.conditions_completed,
                "manual_enabled": self.manual_enabled,
                "joints": list(self.joints.angles),
                "bounds": None
                if self.calibrating is not None
                else {"min": self.bounds.delta_min, "max": self.bounds.delta_max},
                "counters": dict(self.counters),
            }


def default_pool(
    sample_rate_hz: float = 50.0,
    duration_s: float = 60.0,
    base_seed: int = 100,
    freqs: tuple[float, ...] = (0.20, 0.24, 0.28, 0.32),
) -> list[Recording]:
    """Synthesize a four-recording stand-in pool (two male, two female labels)."""
    labels = ("pretest-M1", "pretest-M2", "pretest-F1", "pretest-F2")
    pool = []
    for i, (freq, label) in enumerate(zip(freqs, labels)):
        cfg = SynthBreath(base_freq_hz=freq, amplitude=1.0, noise_std=0.0)
        pool.append(
            synth_recording(
                cfg,
                duration_s,
                sample_rate_hz,
                seed=base_seed + i,
                rec_id=f"rec-{i}",
                subject_label=label,
            )
        )
    return pool


def run_session(cfg: SessionConfig) -> SessionRecord:
    """Execute a fully scripted session on a virtual clock.

    Deterministic: identical config, seeds, and script produce an
    identical event log (wall-clock header field aside). Simulated time
    means a two-condition session runs in well under a second of real
    time. The simulated arm endpoint consumes the actual wire bytes so
    the whole transmit path is exercised.
    """
    from .arm import SimulatedArm  # local import to avoid cycle at module load

    fs = cfg.engine.pipeline.sample_rate_hz
    out_rate = cfg.engine.output_rate_hz
    d = cfg.durations

    if cfg.pool_dir is not None:
        pool = load_pool(cfg.pool_dir)
    else:
        pool = default_pool(sample_rate_hz=fs, base_seed=cfg.seed + 100)
    plan = build_playback_plan(pool, cfg.plan_seed)

    engine = SessionEngine(
        cfg.engine,
        session_id=cfg.session_id,
        seed=cfg.seed,
        condition_order=cfg.condition_order,
        tasks=cfg.tasks,
    )
    engine.accl_duration_s = d.acclimatization_s
    engine.configure_playback(plan, pool)

    synth = SynthSource(cfg.live_synth, fs, seed=cfg.synth_seed)
    arm = SimulatedArm(limits=cfg.engine.limits)
    tick_period = 1.0 / out_rate

    # Control schedule: phase advances, condition switches, task markers.
    controls: list[tuple[float, Callable[[float], None]]] = []
    controls.append((0.0, lambda t: engine.advance_phase(t)))  # idle -> intro
    cursor = d.intro_s
    for index, mode in enumerate(cfg.condition_order):
        controls.append((cursor, lambda t, m=mode: engine.set_condition(m, t)))
        controls.append((cursor, lambda t: engine.advance_phase(t)))  # -> acclimatization
        cursor += d.acclimatization_s
        controls.append((cursor, lambda t: engine.advance_phase(t)))  # -> task block
        if cfg.tasks:
            step = d.task_block_s / len(cfg.tasks)
            for i, label in enumerate(cfg.tasks):
                controls.append(
                    (
                        cursor + i * step,
                        lambda t, lbl=label, idx=i: engine.log_task_marker(t, lbl, idx),
                    )
                )
        cursor += d.task_block_s
        controls.append((cursor, lambda t: engine.advance_phase(t)))  # -> questionnaire
        cursor += d.questionnaire_s
    t_end = cursor
    controls.append((t_end, lambda t: engine.advance_phase(t)))  # -> complete
    controls.sort(key=lambda item: item[0])

    script = sorted(cfg.script, key=lambda e: e.t_s)
    control_i = 0
    script_i = 0
    n_live = 0
    m_tick = 0

    # Priority at equal times: controls, then script input, then samples,
    # then playback, then the output tick. Fixed order keeps runs identical.
    while True:
        candidates: list[tuple[float, int, str]] = []
        if control_i < len(controls):
            candidates.append((controls[control_i][0], 0, "control"))
        if script_i < len(script) and script[script_i].t_s < t_end:
            candidates.append((script[script_i].t_s, 1, "script"))
        t_live = n_live / fs
        if t_live < t_end:
            candidates.append((t_live, 2, "live"))
        t_pb = engine.playback_next_t()
        if t_pb is not None and t_pb < t_end:
            candidates.append((t_pb, 3, "playback"))
        t_tick = m_tick / out_rate
        if t_tick < t_end:
            candidates.append((t_tick, 4, "tick"))
        if not candidates:
            break
        t, _prio, kind = min(candidates)
        if kind == "control":
            controls[control_i][1](t)
            control_i += 1
        elif kind == "script":
            engine.on_controller_event(script[script_i], t)
            script_i += 1
        elif kind == "live":
            try:
                sample = synth.sample(n_live)
            except Exception as exc:  # pragma: no cover - synth is total
                engine.on_error(t, "source_failure", str(exc))
                engine.record.partial_reason = f"live source failed: {exc}"
                break
            engine.on_sample("live", sample, t)
            n_live += 1
        elif kind == "playback":
            engine.pull_playback(t)
        else:  # tick
            _pose, data = engine.on_output_tick(t)
            arm.feed(data, t)
            arm.step(tick_period)
            m_tick += 1

    engine.record.complete = (
        engine.phases.phase == COMPLETE and engine.record.partial_reason is None
    )
    return engine.record


# -- persistence -------------------------------------------------------------

RECORD_FORMAT = "breatharm-record/1"


def persist_record(record: SessionRecord, path: str | Path) -> None:
    """Write a record as JSON lines: one header line, one line per event."""
    path = Path(path)
    with path.open("w", encoding="ascii") as fh:
        header = {
            "format": RECORD_FORMAT,
            "session_id": record.session_id,
            "seed": record.seed,
            "condition_order": list(record.condition_order),
            "config": record.config,
            "created_at": record.created_at,
            "complete": record.complete,
            "partial_reason": record.partial_reason,
        }
        fh.write(json.dumps(header) + "\n")
        for event in record.events:
            fh.write(
                json.dumps(
                    {"seq": event.seq, "t": event.t, "kind": event.kind, "data": event.data}
                )
                + "\n"
            )


def load_record(path: str | Path) -> SessionRecord:
    """Read a persisted record; a truncated file reports the last valid line."""
    path = Path(path)
    with path.open("r", encoding="ascii") as fh:
        first = fh.readline()
        if not first:
            raise RecordError(f"{path}: empty file")
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise RecordError(f"{path}: bad header line: {exc}") from exc
        if header.get("format") != RECORD_FORMAT:
            raise RecordError(f"{path}: unknown format {header.get('format')!r}")
        record = SessionRecord(
            session_id=header["session_id"],
            seed=header["seed"],
            condition_order=tuple(header["condition_order"]),
            config=header["config"],
            created_at=header["created_at"],
            complete=header["complete"],
            partial_reason=header.get("partial_reason"),
        )
        last_valid = 1
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                record.events.append(
                    Event(
                        seq=int(row["seq"]),
                        t=float(row["t"]),
                        kind=str(row["kind"]),
                        data=row["data"],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise RecordError(
                    f"{path}: corrupt or truncated at line {lineno} "
                    f"(last valid line {last_valid}): {exc}"
                ) from exc
            last_valid = lineno
    return record


# -- replay -------------------------------------------------------------------

def replay_frames(record: SessionRecord) -> list[list[int]]:
    """Recompute the transmitted frame stream from the event log alone."""
    cfg = EngineConfig.from_dict(record.config)
    state = cfg.limits.neutral_pose()
    held = {j: 0.0 for j in JOINT_ORDER}
    manual_enabled = True
    condition = OFF
    pending: list[tuple[str, float, float]] = []
    last_t = 0.0
    frames: list[list[int]] = []
    joint_by_key = {j.key: j for j in JOINT_ORDER}

    for event in record.events:
        if event.kind == "intent":
            held[joint_by_key[event.data["joint"]]] = event.data["value"]
        elif event.kind == "breath_frame":
            pending.append(
                (event.data["source"], event.data["shoulder_deg"], event.data["elbow_deg"])
            )
        elif event.kind == "condition_change":
            condition = event.data["to"]
        elif event.kind == "phase_change":
            manual_enabled = event.data["to"] != ACCLIMATIZATION
        elif event.kind == "frame_tx":
            dt = event.t - last_t
            last_t = event.t
            active = _DISPLACEMENT_SOURCE.get(condition)
            displacements = [(sh, el) for src, sh, el in pending if src == active]
            pending.clear()
            state, _clamps = compose_step(
                state, displacements, held, manual_enabled, dt, cfg
            )
            frames.append([round_half_away(state[j]) for j in JOINT_ORDER])
    return frames


def verify_replay(record: SessionRecord) -> tuple[bool, int]:
    """Compare the replayed frame stream against the logged one.

    Returns (ok, mismatch_count); also False when the stream is empty.
    """
    logged = [e.data["angles"] for e in record.events if e.kind == "frame_tx"]
    replayed = replay_frames(record)
    if not logged or len(logged) != len(replayed):
        return False, max(len(logged), len(replayed))
    mismatches = sum(1 for a, b in zip(logged, replayed) if a != b)
    return mismatches == 0, mismatches
