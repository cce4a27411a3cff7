"""Offline analysis of session records: synchrony, latency, clamp stats.

Quantifies how faithfully the arm's breath overlay tracked the live
respiration signal. The live normalized integration differences and the
shoulder's per-window motion are resampled onto the window-emission
grid (sample_rate / window_size, 5 Hz at defaults), then compared by
normalized cross-correlation and dominant-frequency estimation.

All functions are pure: the same record always produces bit-identical
reports.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .config import EngineConfig
from .session import OFF, SessionRecord


class AnalysisError(ValueError):
    """The record lacks the streams needed for analysis."""


class ConstantSeriesError(AnalysisError):
    """Correlation or spectral analysis of a constant series is undefined."""


def cross_correlate(
    a,
    b,
    rate_hz: float,
    max_lag_s: float,
) -> tuple[float, float]:
    """Peak normalized cross-correlation of two equal-rate series.

    Both series are z-scored (zero mean, unit variance); the correlation
    at each lag is the mean product over the overlap, scanned over lags
    in [-max_lag_s, +max_lag_s]. Positive lag means ``b`` trails ``a``.

    Returns (peak, lag_at_peak_s). Raises :class:`ConstantSeriesError`
    when either series has zero variance.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise AnalysisError(f"series must be 1-D and equal length, got {a.shape} vs {b.shape}")
    max_lag = int(round(max_lag_s * rate_hz))
    n = len(a)
    if n < max(2, 2 * max_lag):
        raise AnalysisError(f"series too short ({n}) for max lag {max_lag} samples")
    std_a = a.std()
    std_b = b.std()
    if std_a == 0.0 or std_b == 0.0:
        raise ConstantSeriesError("cannot correlate a constant series")
    za = (a - a.mean()) / std_a
    zb = (b - b.mean()) / std_b

    best_peak = -np.inf
    best_lag = 0
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            prod = za[: n - lag] * zb[lag:]
        else:
            prod = za[-lag:] * zb[: n + lag]
        value = float(prod.mean())
        if value > best_peak:
            best_peak = value
            best_lag = lag
    return best_peak, best_lag / rate_hz


def dominant_frequency(series, rate_hz: float) -> float:
    """Frequency of the largest non-DC spectral magnitude.

    Uses a plain FFT magnitude spectrum after mean removal; resolution
    is one FFT bin (rate / length). Raises :class:`ConstantSeriesError`
    for a constant input.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 1 or len(series) < 64:
        raise AnalysisError(f"need a 1-D series of >= 64 samples, got {series.shape}")
    if np.ptp(series) == 0.0:
        raise ConstantSeriesError("constant series has no spectral peak")
    x = series - series.mean()
    mags = np.abs(np.fft.rfft(x))
    peak_bin = int(np.argmax(mags[1:])) + 1
    return peak_bin * rate_hz / len(series)


@dataclass(frozen=True)
class SynchronyReport:
    """Per-block synchrony summary; fields are None when undefined
    (e.g. correlation against a motionless arm)."""

    condition: str
    t_start: float
    t_end: float
    window_count: int
    peak_cross_correlation: float | None
    lag_at_peak_s: float | None
    live_freq_hz: float | None
    motion_freq_hz: float | None
    motion_std_deg: float
    clamp_count: int
    mean_output_period_s: float | None
    schema_version: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


def condition_blocks(record: SessionRecord) -> list[tuple[str, float, float]]:
    """Contiguous (condition, t_start, t_end) spans covering the record."""
    if not record.events:
        return []
    end_t = record.events[-1].t
    blocks: list[tuple[str, float, float]] = []
    current = OFF
    start = record.events[0].t
    for event in record.events:
        if event.kind != "condition_change":
            continue
        if event.t > start:
            blocks.append((current, start, event.t))
        current = event.data["to"]
        start = event.t
    if end_t > start:
        blocks.append((current, start, end_t))
    return blocks


def _block_series(
    record: SessionRecord,
    t0: float,
    t1: float,
    window_period_s: float,
):
    """Live delta-norm and per-window shoulder motion series for a span."""
    snap_t = []
    snap_shoulder = []
    for event in record.events:
        if event.kind == "joint_snapshot":
            snap_t.append(event.t)
            snap_shoulder.append(event.data["angles"][1])
    if not snap_t:
        raise AnalysisError("record has no joint snapshots")
    snap_t_arr = np.asarray(snap_t)
    snap_s_arr = np.asarray(snap_shoulder)

    def shoulder_at(t: float) -> float | None:
        idx = int(np.searchsorted(snap_t_arr, t, side="right")) - 1
        if idx < 0:
            return None
        return float(snap_s_arr[idx])

    frames = [
        e
        for e in record.events
        if e.kind == "breath_frame"
        and e.data["source"] == "live"
        and t0 <= e.t < t1
    ]
    if not frames:
        raise AnalysisError(f"no live breath frames in block [{t0}, {t1})")

    half = window_period_s / 2.0
    deltas: list[float] = []
    motions: list[float] = []
    prev_mid_shoulder: float | None = None
    last_snap_t = float(snap_t_arr[-1])
    for frame in frames:
        mid = frame.t + half
        if mid > t1 or mid > last_snap_t:
            # The displacement's applying tick lies outside the block (or
            # the record ends first); its motion cannot be observed.
            break
        here = shoulder_at(mid)
        if here is None:
            prev_mid_shoulder = None
            continue
        if prev_mid_shoulder is not None:
            deltas.append(frame.data["delta_norm"])
            motions.append(here - prev_mid_shoulder)
        prev_mid_shoulder = here
    return np.asarray(deltas), np.asarray(motions)


def analyze_record(
    record: SessionRecord,
    condition: str | None = None,
    max_lag_s: float = 2.0,
) -> SynchronyReport:
    """Synchrony report for one condition block (the first matching one).

    With ``condition=None`` the whole record is analyzed as one span.
    """
    if condition is None:
        if not record.events:
            raise AnalysisError("empty record")
        t0, t1, label = record.events[0].t, record.events[-1].t + 1e-9, "all"
    else:
        for mode, b0, b1 in condition_blocks(record):
            if mode == condition:
                t0, t1, label = b0, b1, condition
                break
        else:
            raise AnalysisError(f"record has no {condition!r} block")
    return _analyze_span(record, label, t0, t1, max_lag_s)


def analyze_blocks(record: SessionRecord, max_lag_s: float = 2.0) -> list[SynchronyReport]:
    """One report per condition block that has enough data to analyze."""
    reports = []
    for mode, t0, t1 in condition_blocks(record):
        try:
            reports.append(
                _analyze_span(record, mode, t0, t1, max_lag_s)
            )
        except AnalysisError:
            continue
    return reports


def _analyze_span(
    record: SessionRecord, label: str, t0: float, t1: float, max_lag_s: float
) -> SynchronyReport:
    cfg = EngineConfig.from_dict(record.config)
    stride = cfg.pipeline.window_stride or cfg.pipeline.window_size
    window_period_s = stride / cfg.pipeline.sample_rate_hz
    window_rate_hz = 1.0 / window_period_s
    deltas, motions = _block_series(record, t0, t1, window_period_s)
    if len(deltas) < 4:
        raise AnalysisError("too few windows")
    motion_std = float(motions.std())
    # Short blocks get a proportionally smaller lag scan.
    fit_lag_s = min(max_lag_s, (len(deltas) // 2 - 1) / window_rate_hz)
    peak = lag = None
    try:
        peak, lag = cross_correlate(deltas, motions, window_rate_hz, fit_lag_s)
    except ConstantSeriesError:
        pass
    try:
        live_freq = dominant_frequency(deltas, window_rate_hz)
    except (AnalysisError, ConstantSeriesError):
        live_freq = None
    try:
        motion_freq = dominant_frequency(motions, window_rate_hz)
    except (AnalysisError, ConstantSeriesError):
        motion_freq = None
    clamp_count = sum(1 for e in record.events if e.kind == "clamp" and t0 <= e.t < t1)
    tx_times = [e.t for e in record.events if e.kind == "frame_tx" and t0 <= e.t < t1]
    mean_period = None
    if len(tx_times) >= 2:
        mean_period = float(np.diff(np.asarray(tx_times)).mean())
    return SynchronyReport(
        condition=label,
        t_start=t0,
        t_end=t1,
        window_count=len(deltas),
        peak_cross_correlation=peak,
        lag_at_peak_s=lag,
        live_freq_hz=live_freq,
        motion_freq_hz=motion_freq,
        motion_std_deg=motion_std,
        clamp_count=clamp_count,
        mean_output_period_s=mean_period,
    )
