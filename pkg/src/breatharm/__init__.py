"""Breath-synchronized robot-arm teleoperation.

A desk-scale end-to-end system: respiration ingestion, the breath-to-joint
mapping pipeline, simultaneous gamepad teleoperation, a simulated six-joint
arm behind a line-based wire protocol, and a session host running the
synced / non-synced experimental conditions under experimenter control.
"""

from .motion import JointId, JointLimits, JointVector
from .pipeline import BreathFrame, BreathPipeline, NormalizationBounds, RespirationSample
from .session import SessionRecord, run_session

__version__ = "0.1.0"

__all__ = [
    "BreathFrame",
    "BreathPipeline",
    "JointId",
    "JointLimits",
    "JointVector",
    "NormalizationBounds",
    "RespirationSample",
    "SessionRecord",
    "run_session",
    "__version__",
]
