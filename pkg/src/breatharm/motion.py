"""Joint state and the breath/manual motion mapping.

The normalized integration difference dI* drives two joints:

    shoulder displacement = dI* * shoulder_max_deg   (default 6 degrees)
    elbow displacement    = dI* * elbow_max_deg      (default 4 degrees)

Displacements are defined in movement space (positive = upward). A
per-joint sign convention translates movement space into motor angles;
by default the elbow motor runs opposite to the shoulder so the two
balance each other's reach. Each displacement is added incrementally to
the joint's current angle; the remaining four joints are never touched
by breath. Manual joystick input is rate-based: full deflection jogs the
selected joint at ``manual_rate_deg_s``.

The JointVector is the single piece of shared mutable state in the whole
system. Exactly one writer (the output-tick composer) replaces it; every
reader gets an immutable snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum


class JointId(IntEnum):
    """The six joints, in wire-frame serialization order."""

    BASE = 0
    SHOULDER = 1
    ELBOW = 2
    WRIST = 3
    WRIST_ROTATION = 4
    GRIPPER = 5

    @property
    def key(self) -> str:
        return self.name.lower()


JOINT_ORDER = tuple(JointId)


@dataclass(frozen=True)
class JointRange:
    min_deg: float
    max_deg: float
    neutral_deg: float

    def __post_init__(self) -> None:
        if not self.min_deg <= self.neutral_deg <= self.max_deg:
            raise ValueError(
                f"neutral {self.neutral_deg} outside [{self.min_deg}, {self.max_deg}]"
            )

    def clamp(self, angle: float) -> float:
        return min(self.max_deg, max(self.min_deg, angle))


@dataclass(frozen=True)
class JointLimits:
    """Per-joint mechanical range plus the startup pose."""

    ranges: tuple[JointRange, ...]

    def __post_init__(self) -> None:
        if len(self.ranges) != len(JOINT_ORDER):
            raise ValueError(f"expected {len(JOINT_ORDER)} joint ranges")

    def __getitem__(self, joint: JointId) -> JointRange:
        return self.ranges[joint]

    @classmethod
    def default(cls) -> "JointLimits":
        # Conventional hobby six-DoF servo ranges; gripper travel is narrower.
        return cls(
            ranges=(
                JointRange(0.0, 180.0, 90.0),   # base
                JointRange(15.0, 165.0, 90.0),  # shoulder
                JointRange(0.0, 180.0, 90.0),   # elbow
                JointRange(0.0, 180.0, 90.0),   # wrist
                JointRange(0.0, 180.0, 90.0),   # wrist rotation
                JointRange(10.0, 73.0, 40.0),   # gripper
            )
        )

    def neutral_pose(self) -> "JointVector":
        return JointVector(tuple(r.neutral_deg for r in self.ranges))


@dataclass(frozen=True)
class JointVector:
    """Six absolute joint angles in degrees, indexed by :class:`JointId`."""

    angles: tuple[float, float, float, float, float, float]

    def __getitem__(self, joint: JointId) -> float:
        return self.angles[joint]

    def replace(self, joint: JointId, angle: float) -> "JointVector":
        angles = list(self.angles)
        angles[joint] = angle
        return JointVector(tuple(angles))

    def within(self, limits: JointLimits) -> bool:
        return all(
            limits[j].min_deg <= self.angles[j] <= limits[j].max_deg
            for j in JOINT_ORDER
        )


@dataclass(frozen=True)
class BreathDisplacement:
    """Angular displacement of shoulder and elbow for one window, in
    movement space: positive values mean upward for both joints."""

    window_index: int
    shoulder_deg: float
    elbow_deg: float


@dataclass(frozen=True)
class ClampEvent:
    """A joint update hit its mechanical limit and was clamped."""

    joint: JointId
    requested_deg: float
    clamped_deg: float


@dataclass(frozen=True)
class JointIntent:
    """Manual jog request: axis deflection in [-1, 1] for one joint."""

    joint: JointId
    axis_value: float


@dataclass(frozen=True)
class MotionConfig:
    shoulder_max_deg: float = 6.0
    elbow_max_deg: float = 4.0
    manual_rate_deg_s: float = 30.0
    # Movement-space to motor-space polarity; elbow opposes shoulder so the
    # two balance while producing a coherent rise and fall.
    signs: tuple[int, int, int, int, int, int] = (1, 1, -1, 1, 1, 1)

    def sign(self, joint: JointId) -> int:
        return self.signs[joint]


def map_displacement(
    delta_norm: float,
    window_index: int = 0,
    shoulder_max_deg: float = 6.0,
    elbow_max_deg: float = 4.0,
) -> BreathDisplacement:
    """Map a normalized integration difference to joint displacements.

    Proportional in both joints with the elbow deliberately restricted to
    a smaller range; the sign of ``delta_norm`` sets the direction.
    """
    return BreathDisplacement(
        window_index=window_index,
        shoulder_deg=delta_norm * shoulder_max_deg,
        elbow_deg=delta_norm * elbow_max_deg,
    )


def _clamped_update(
    state: JointVector,
    joint: JointId,
    delta: float,
    limits: JointLimits,
    clamps: list[ClampEvent],
) -> JointVector:
    if delta == 0.0:
        return state
    requested = state[joint] + delta
    clamped = limits[joint].clamp(requested)
    if clamped != requested:
        clamps.append(ClampEvent(joint, requested, clamped))
    return state.replace(joint, clamped)


def apply_breath(
    state: JointVector,
    displacement: BreathDisplacement,
    limits: JointLimits,
    config: MotionConfig = MotionConfig(),
) -> tuple[JointVector, list[ClampEvent]]:
    """Add one breath displacement to the shoulder and elbow angles.

    Only those two joints change; results are clamped to their limits and
    any clamp is reported for telemetry.
    """
    clamps: list[ClampEvent] = []
    state = _clamped_update(
        state,
        JointId.SHOULDER,
        config.sign(JointId.SHOULDER) * displacement.shoulder_deg,
        limits,
        clamps,
    )
    state = _clamped_update(
        state,
        JointId.ELBOW,
        config.sign(JointId.ELBOW) * displacement.elbow_deg,
        limits,
        clamps,
    )
    return state, clamps


def apply_manual(
    state: JointVector,
    intent: JointIntent,
    dt_s: float,
    limits: JointLimits,
    config: MotionConfig = MotionConfig(),
) -> tuple[JointVector, list[ClampEvent]]:
    """Integrate one manual jog over ``dt_s`` seconds and clamp."""
    clamps: list[ClampEvent] = []
    delta = intent.axis_value * config.manual_rate_deg_s * dt_s
    state = _clamped_update(state, intent.joint, delta, limits, clamps)
    return state, clamps


def compose_tick(
    state: JointVector,
    breath: BreathDisplacement | None,
    manual: list[JointIntent],
    dt_s: float,
    limits: JointLimits,
    config: MotionConfig = MotionConfig(),
) -> tuple[JointVector, list[ClampEvent]]:
    """One atomic joint-state update combining manual and breath motion.

    Manual intents contribute first, then the breath displacement; per
    joint the contributions sum before a single clamp, so a transient
    over-limit intermediate does not eat part of an opposing delta.
    """
    deltas = [0.0] * len(JOINT_ORDER)
    for intent in manual:
        deltas[intent.joint] += intent.axis_value * config.manual_rate_deg_s * dt_s
    if breath is not None:
        deltas[JointId.SHOULDER] += (
            config.sign(JointId.SHOULDER) * breath.shoulder_deg
        )
        deltas[JointId.ELBOW] += config.sign(JointId.ELBOW) * breath.elbow_deg

    clamps: list[ClampEvent] = []
    new_angles = list(state.angles)
    for joint in JOINT_ORDER:
        if deltas[joint] == 0.0:
            continue
        requested = new_angles[joint] + deltas[joint]
        clamped = limits[joint].clamp(requested)
        if clamped != requested:
            clamps.append(ClampEvent(joint, requested, clamped))
        new_angles[joint] = clamped
    return JointVector(tuple(new_angles)), clamps
