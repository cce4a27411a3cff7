"""Gamepad abstraction: buttons select a joint, sticks jog joints.

Mapping (PlayStation-style pad):

- X / Square / Triangle select the shoulder / elbow / wrist joint
  (press-down edge only; releases are ignored).
- Left stick horizontal always jogs the base; left stick vertical jogs
  whichever joint is selected.
- Right stick horizontal jogs wrist rotation, vertical opens/closes the
  gripper; both are independent of the selection.

The input worker emits timestamped :class:`JointIntent` values into the
composer's queue; it never touches joint state itself. Real-gamepad
support is a pluggable backend; scripted event files are the normative
test input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .motion import JointId, JointIntent

AXIS_NAMES = ("left_x", "left_y", "right_x", "right_y")
BUTTON_NAMES = ("X", "Square", "Triangle")

_BUTTON_SELECTS = {
    "X": JointId.SHOULDER,
    "Square": JointId.ELBOW,
    "Triangle": JointId.WRIST,
}
_FIXED_AXES = {
    "left_x": JointId.BASE,
    "right_x": JointId.WRIST_ROTATION,
    "right_y": JointId.GRIPPER,
}
DEFAULT_DEADZONE = 0.08


@dataclass(frozen=True)
class ControllerEvent:
    """One input event: an axis move or a button edge."""

    t_s: float
    kind: str  # "axis" | "button"
    name: str
    value: float = 0.0   # axis deflection in [-1, 1]
    pressed: bool = False

    @classmethod
    def axis(cls, t_s: float, name: str, value: float) -> "ControllerEvent":
        value = max(-1.0, min(1.0, value))
        return cls(t_s=t_s, kind="axis", name=name, value=value)

    @classmethod
    def button(cls, t_s: float, name: str, pressed: bool = True) -> "ControllerEvent":
        return cls(t_s=t_s, kind="button", name=name, pressed=pressed)


class SelectionState:
    """Which joint the left stick's vertical axis currently drives."""

    def __init__(self, selected: JointId = JointId.SHOULDER) -> None:
        if selected not in _BUTTON_SELECTS.values():
            raise ValueError(f"selectable joints are shoulder/elbow/wrist, got {selected}")
        self.selected = selected


def apply_deadzone(value: float, deadzone: float = DEFAULT_DEADZONE) -> float:
    """Suppress stick drift; rescale so the output stays continuous.

    Odd, continuous, and monotone on [-1, 1]; endpoints map to exactly
    +/-1 and anything within the deadzone maps to 0.
    """
    if not 0.0 <= deadzone < 1.0:
        raise ValueError(f"deadzone must be in [0, 1), got {deadzone}")
    magnitude = abs(value)
    if magnitude <= deadzone:
        return 0.0
    scaled = (magnitude - deadzone) / (1.0 - deadzone)
    return scaled if value > 0 else -scaled


class EventMapper:
    """Maps raw controller events to joint intents, tracking selection."""

    def __init__(
        self,
        selection: SelectionState | None = None,
        deadzone: float = DEFAULT_DEADZONE,
    ) -> None:
        self.selection = selection or SelectionState()
        self.deadzone = deadzone
        self.ignored_count = 0

    def map_event(self, event: ControllerEvent) -> list[JointIntent]:
        """Return the intents an event produces (possibly none).

        Button presses change the selection and emit nothing; axis moves
        emit one intent for the mapped joint. Unknown events are ignored
        and counted.
        """
        if event.kind == "button":
            target = _BUTTON_SELECTS.get(event.name)
            if target is None:
                self.ignored_count += 1
                return []
            if event.pressed:
                self.selection.selected = target
            return []
        if event.kind == "axis":
            if event.name == "left_y":
                joint = self.selection.selected
            else:
                joint = _FIXED_AXES.get(event.name)
            if joint is None:
                self.ignored_count += 1
                return []
            value = apply_deadzone(event.value, self.deadzone)
            return [JointIntent(joint=joint, axis_value=value)]
        self.ignored_count += 1
        return []


def save_script(events: list[ControllerEvent], path: str | Path) -> None:
    """Scripted-input file: JSON lines with session-relative timestamps."""
    path = Path(path)
    with path.open("w", encoding="ascii") as fh:
        for event in events:
            row: dict = {"t": event.t_s, "kind": event.kind, "name": event.name}
            if event.kind == "axis":
                row["value"] = event.value
            else:
                row["pressed"] = event.pressed
            fh.write(json.dumps(row) + "\n")


def load_script(path: str | Path) -> list[ControllerEvent]:
    path = Path(path)
    events: list[ControllerEvent] = []
    with path.open("r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                kind = row["kind"]
                if kind == "axis":
                    events.append(
                        ControllerEvent.axis(float(row["t"]), str(row["name"]), float(row["value"]))
                    )
                elif kind == "button":
                    events.append(
                        ControllerEvent.button(
                            float(row["t"]), str(row["name"]), bool(row.get("pressed", True))
                        )
                    )
                else:
                    raise ValueError(f"unknown event kind {kind!r}")
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad script line: {exc}") from exc
    events.sort(key=lambda e: e.t_s)
    return events
