"""Configuration for the pipeline, motion mapping, host, and sessions.

Everything is plain dataclasses with JSON-friendly to/from dict
conversion; the session record embeds the engine config snapshot so a
stored log can be replayed without the original config file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .motion import JointLimits, JointRange, MotionConfig, JOINT_ORDER
from .pipeline import NormalizationBounds, PipelineConfig
from .sources import DEFAULT_UDP_PORT, SynthBreath


class ConfigError(ValueError):
    """A configuration file or dict is invalid."""


@dataclass(frozen=True)
class CalibrationSpec:
    """Derive normalization bounds from the first seconds of live signal."""

    duration_s: float = 30.0
    percentile: float = 0.95


@dataclass
class EngineConfig:
    """Everything the session engine needs, and all a replay needs."""

    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    bounds: NormalizationBounds | CalibrationSpec = field(
        default_factory=lambda: NormalizationBounds(-4.0, 4.0)
    )
    motion: MotionConfig = field(default_factory=MotionConfig)
    limits: JointLimits = field(default_factory=JointLimits.default)
    output_rate_hz: float = 20.0
    deadzone: float = 0.08

    def to_dict(self) -> dict:
        bounds: dict
        if isinstance(self.bounds, NormalizationBounds):
            bounds = {
                "static": {"min": self.bounds.delta_min, "max": self.bounds.delta_max}
            }
        else:
            bounds = {
                "calibrate": {
                    "duration_s": self.bounds.duration_s,
                    "percentile": self.bounds.percentile,
                }
            }
        return {
            "pipeline": {
                "sample_rate_hz": self.pipeline.sample_rate_hz,
                "filter_alpha": self.pipeline.filter_alpha,
                "window_size": self.pipeline.window_size,
                "window_stride": self.pipeline.window_stride,
            },
            "bounds": bounds,
            "motion": {
                "shoulder_max_deg": self.motion.shoulder_max_deg,
                "elbow_max_deg": self.motion.elbow_max_deg,
                "manual_rate_deg_s": self.motion.manual_rate_deg_s,
                "signs": list(self.motion.signs),
            },
            "limits": [
                {"min": r.min_deg, "max": r.max_deg, "neutral": r.neutral_deg}
                for r in self.limits.ranges
            ],
            "output_rate_hz": self.output_rate_hz,
            "deadzone": self.deadzone,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        cfg = cls()
        try:
            pl = data.get("pipeline", {})
            pipeline = PipelineConfig(
                sample_rate_hz=float(pl.get("sample_rate_hz", 50.0)),
                filter_alpha=float(pl.get("filter_alpha", 0.12)),
                window_size=int(pl.get("window_size", 10)),
                window_stride=(
                    int(pl["window_stride"]) if pl.get("window_stride") else None
                ),
            )
            bounds_data = data.get("bounds", {"static": {"min": -4.0, "max": 4.0}})
            bounds: NormalizationBounds | CalibrationSpec
            if "static" in bounds_data:
                bounds = NormalizationBounds(
                    float(bounds_data["static"]["min"]),
                    float(bounds_data["static"]["max"]),
                )
            elif "calibrate" in bounds_data:
                cal = bounds_data["calibrate"]
                bounds = CalibrationSpec(
                    duration_s=float(cal.get("duration_s", 30.0)),
                    percentile=float(cal.get("percentile", 0.95)),
                )
            else:
                raise ConfigError("bounds must give either 'static' or 'calibrate'")
            mo = data.get("motion", {})
            motion = MotionConfig(
                shoulder_max_deg=float(mo.get("shoulder_max_deg", 6.0)),
                elbow_max_deg=float(mo.get("elbow_max_deg", 4.0)),
                manual_rate_deg_s=float(mo.get("manual_rate_deg_s", 30.0)),
                signs=tuple(int(s) for s in mo.get("signs", (1, 1, -1, 1, 1, 1))),
            )
            if "limits" in data:
                rows = data["limits"]
                if len(rows) != len(JOINT_ORDER):
                    raise ConfigError(f"limits must list {len(JOINT_ORDER)} joints")
                limits = JointLimits(
                    ranges=tuple(
                        JointRange(float(r["min"]), float(r["max"]), float(r["neutral"]))
                        for r in rows
                    )
                )
            else:
                limits = JointLimits.default()
            return cls(
                pipeline=pipeline,
                bounds=bounds,
                motion=motion,
                limits=limits,
                output_rate_hz=float(data.get("output_rate_hz", 20.0)),
                deadzone=float(data.get("deadzone", cfg.deadzone)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad engine config: {exc}") from exc


@dataclass
class PhaseDurations:
    """Scripted-session schedule; acclimatization is one minute by default."""

    intro_s: float = 0.0
    acclimatization_s: float = 60.0
    task_block_s: float = 180.0
    questionnaire_s: float = 15.0


DEFAULT_TASKS = ("draw-shape", "gesture-yes-no", "gesture-hi-bye", "high-five")


@dataclass
class SessionConfig:
    """Inputs for a deterministic scripted session run."""

    engine: EngineConfig = field(default_factory=EngineConfig)
    session_id: str = "session"
    seed: int = 0
    condition_order: tuple[str, ...] = ("synced", "non_synced")
    durations: PhaseDurations = field(default_factory=PhaseDurations)
    live_synth: SynthBreath = field(default_factory=SynthBreath)
    synth_seed: int = 1
    plan_seed: int = 2
    pool_dir: str | None = None
    tasks: tuple[str, ...] = DEFAULT_TASKS
    script: list = field(default_factory=list)  # list[ControllerEvent]

    def __post_init__(self) -> None:
        for mode in self.condition_order:
            if mode not in ("synced", "non_synced"):
                raise ConfigError(f"unknown condition {mode!r} in order")


@dataclass
class HostConfig:
    """Live host wiring: source, transport, and experimenter API."""

    engine: EngineConfig = field(default_factory=EngineConfig)
    session_id: str = "live"
    source: str = "synth"  # "synth" | "udp"
    synth: SynthBreath = field(default_factory=SynthBreath)
    synth_seed: int = 1
    udp_port: int = DEFAULT_UDP_PORT
    transport: str = "loopback"  # "loopback" | "tcp"
    tcp_host: str = "127.0.0.1"
    tcp_port: int = 7800
    api_host: str = "127.0.0.1"
    api_port: int = 7761
    plan_seed: int = 2
    pool_dir: str | None = None
    condition_count: int = 2
    record_path: str | None = None
    arm_slew_deg_s: float = 90.0
    stdin_jog: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "HostConfig":
        try:
            engine = EngineConfig.from_dict(data.get("engine", {}))
            synth_data = data.get("synth", {})
            synth = SynthBreath(
                base_freq_hz=float(synth_data.get("base_freq_hz", 0.25)),
                amplitude=float(synth_data.get("amplitude", 1.0)),
                noise_std=float(synth_data.get("noise_std", 0.0)),
                waveform=str(synth_data.get("waveform", "sinusoid")),
            )
            return cls(
                engine=engine,
                session_id=str(data.get("session_id", "live")),
                source=str(data.get("source", "synth")),
                synth=synth,
                synth_seed=int(data.get("synth_seed", 1)),
                udp_port=int(data.get("udp_port", DEFAULT_UDP_PORT)),
                transport=str(data.get("transport", "loopback")),
                tcp_host=str(data.get("tcp_host", "127.0.0.1")),
                tcp_port=int(data.get("tcp_port", 7800)),
                api_host=str(data.get("api_host", "127.0.0.1")),
                api_port=int(data.get("api_port", 7761)),
                plan_seed=int(data.get("plan_seed", 2)),
                pool_dir=data.get("pool_dir"),
                condition_count=int(data.get("condition_count", 2)),
                record_path=data.get("record_path"),
                arm_slew_deg_s=float(data.get("arm_slew_deg_s", 90.0)),
                stdin_jog=bool(data.get("stdin_jog", False)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad host config: {exc}") from exc


def load_host_config(path: str | Path) -> HostConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return HostConfig.from_dict(data)
