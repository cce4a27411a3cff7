"""Respiration signal pipeline: filtering, windowed integration, normalization.

Turns a stream of raw breath-amplitude samples into normalized
integration differences. The stages, applied per sample in arrival order:

1. First-order exponential low-pass:  y_t = alpha*x_t + (1-alpha)*y_{t-1}
2. Windowed integration over non-overlapping windows of N samples:
   I_k = sum of the N filtered values in window k
3. Integration difference between consecutive windows: dI_k = I_k - I_{k-1}
4. Normalization against reference bounds, clamped to [-1, 1]:
   dI*_k = clamp(2*(dI_k - dI_min)/(dI_max - dI_min) - 1, -1, 1)

The pipeline is a single-owner state machine: one worker feeds samples in
order. Emitted :class:`BreathFrame` values are immutable snapshots that are
safe to hand to other threads.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np


class CalibrationError(ValueError):
    """Raised when reference bounds cannot be derived from observed data."""


@dataclass(frozen=True)
class RespirationSample:
    """One timestamped raw breath-amplitude reading.

    ``seq`` is strictly increasing within a stream and ``timestamp_ms``
    is non-decreasing; sources are responsible for enforcing both.
    """

    seq: int
    timestamp_ms: float
    value: float


@dataclass(frozen=True)
class BreathFrame:
    """Per-window pipeline result.

    Emitted once per completed window from the second window on (the first
    window has no predecessor to difference against). ``delta_norm`` is
    always within [-1, 1]; out-of-range differences are clamped, and
    ``clamped`` records that this happened.
    """

    window_index: int
    integration: float
    delta: float
    delta_norm: float
    timestamp_ms: float
    clamped: bool = False


class FirstOrderFilter:
    """Exponential low-pass:  y_t = alpha*x_t + (1-alpha)*y_{t-1}.

    The first sample seeds the filter and is returned unchanged.
    ``alpha`` must be in (0, 1]; alpha=1 disables smoothing entirely.
    """

    __slots__ = ("alpha", "last_output", "initialized")

    def __init__(self, alpha: float) -> None:
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {alpha!r}")
        self.alpha = float(alpha)
        self.last_output = 0.0
        self.initialized = False

    def update(self, raw: float) -> float:
        if not self.initialized:
            self.last_output = float(raw)
            self.initialized = True
        else:
            self.last_output = self.alpha * raw + (1.0 - self.alpha) * self.last_output
        return self.last_output

    def reset(self) -> None:
        self.last_output = 0.0
        self.initialized = False


class WindowAccumulator:
    """Sliding-window integrator with configurable stride.

    Buffers filtered values; every time the buffer reaches ``capacity``
    samples it emits their sum and drops the oldest ``stride`` samples.
    The default stride equals the capacity (non-overlapping windows).
    """

    __slots__ = ("capacity", "stride", "buffer", "window_index", "prev_integration")

    def __init__(self, capacity: int = 10, stride: int | None = None) -> None:
        if capacity < 1:
            raise ValueError(f"window capacity must be >= 1, got {capacity}")
        stride = capacity if stride is None else stride
        if not 1 <= stride <= capacity:
            raise ValueError(f"stride must be in [1, {capacity}], got {stride}")
        self.capacity = capacity
        self.stride = stride
        self.buffer: deque[float] = deque()
        self.window_index = 0
        self.prev_integration: float | None = None

    def push(self, filtered: float) -> float | None:
        """Accept one filtered value; return I_k when a window completes."""
        self.buffer.append(filtered)
        if len(self.buffer) < self.capacity:
            return None
        integration = math.fsum(self.buffer)
        for _ in range(self.stride):
            self.buffer.popleft()
        self.window_index += 1
        return integration

    def difference(self, integration: float) -> float | None:
        """Return dI_k = I_k - I_{k-1}, or None for the very first window."""
        prev = self.prev_integration
        self.prev_integration = integration
        if prev is None:
            return None
        return integration - prev

    def reset(self) -> None:
        self.buffer.clear()
        self.window_index = 0
        self.prev_integration = None


@dataclass(frozen=True)
class NormalizationBounds:
    """Reference minimum and maximum for the integration difference."""

    delta_min: float
    delta_max: float
    source: str = "static-config"

    def __post_init__(self) -> None:
        if not self.delta_min < self.delta_max:
            raise CalibrationError(
                f"degenerate bounds: min {self.delta_min!r} must be < max {self.delta_max!r}"
            )

    def normalize(self, delta: float) -> tuple[float, bool]:
        """Map ``delta`` into [-1, 1]; returns (value, clamped?)."""
        span = self.delta_max - self.delta_min
        raw = (delta - self.delta_min) / span * 2.0 - 1.0
        if raw > 1.0:
            return 1.0, True
        if raw < -1.0:
            return -1.0, True
        return raw, False


def normalize_delta(bounds: NormalizationBounds, delta: float) -> float:
    """Normalized integration difference, clamped to [-1, 1]."""
    return bounds.normalize(delta)[0]


def calibrate_bounds(
    deltas: list[float] | tuple[float, ...],
    percentile: float = 1.0,
) -> NormalizationBounds:
    """Derive reference bounds from observed integration differences.

    ``delta_max`` is the ``percentile`` quantile of the observations and
    ``delta_min`` the ``1 - percentile`` quantile. If the two magnitudes
    differ, the narrower side is widened to match the wider one so that a
    zero breath-change maps near 0 after normalization.

    Raises :class:`CalibrationError` for fewer than 2 observations or a
    degenerate (min >= max) result.
    """
    if not 0.5 < percentile <= 1.0:
        raise ValueError(f"percentile must be in (0.5, 1.0], got {percentile!r}")
    if len(deltas) < 2:
        raise CalibrationError(f"need >= 2 delta observations, got {len(deltas)}")

    arr = np.asarray(deltas, dtype=float)
    hi = float(np.quantile(arr, percentile))
    lo = float(np.quantile(arr, 1.0 - percentile))
    if abs(lo) < abs(hi):
        lo = -abs(hi)
    elif abs(hi) < abs(lo):
        hi = abs(lo)
    if not lo < hi:
        raise CalibrationError(
            f"degenerate calibration: observed deltas span [{lo!r}, {hi!r}]"
        )
    return NormalizationBounds(lo, hi, source="calibration")


@dataclass
class PipelineConfig:
    """Tunable parameters for the sample-to-frame pipeline.

    The default alpha gives roughly a 1 Hz cutoff at the default 50 Hz
    sample rate. Stride defaults to the window size (non-overlapping).
    """

    sample_rate_hz: float = 50.0
    filter_alpha: float = 0.12
    window_size: int = 10
    window_stride: int | None = None

    @property
    def window_period_s(self) -> float:
        stride = self.window_stride or self.window_size
        return stride / self.sample_rate_hz


class BreathPipeline:
    """Streaming sample-to-frame pipeline.

    Feed samples via :meth:`push`; a :class:`BreathFrame` comes back once
    per completed window from the second window onward. Deterministic:
    the same sample stream and config always yield the same frames.
    """

    def __init__(self, config: PipelineConfig, bounds: NormalizationBounds) -> None:
        self.config = config
        self.bounds = bounds
        self.filter = FirstOrderFilter(config.filter_alpha)
        self.accumulator = WindowAccumulator(config.window_size, config.window_stride)
        self._last_seq: int | None = None

    def push(self, sample: RespirationSample) -> BreathFrame | None:
        if self._last_seq is not None and sample.seq <= self._last_seq:
            raise ValueError(
                f"sample seq must be strictly increasing: {sample.seq} after {self._last_seq}"
            )
        self._last_seq = sample.seq
        filtered = self.filter.update(sample.value)
        integration = self.accumulator.push(filtered)
        if integration is None:
            return None
        delta = self.accumulator.difference(integration)
        if delta is None:
            return None
        delta_norm, clamped = self.bounds.normalize(delta)
        return BreathFrame(
            window_index=self.accumulator.window_index,
            integration=integration,
            delta=delta,
            delta_norm=delta_norm,
            timestamp_ms=sample.timestamp_ms,
            clamped=clamped,
        )

    def reset(self) -> None:
        """Clear all stream state; the next push starts a fresh stream."""
        self.filter.reset()
        self.accumulator.reset()
        self._last_seq = None
