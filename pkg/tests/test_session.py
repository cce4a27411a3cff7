import copy

import pytest

from breatharm.config import (
    CalibrationSpec,
    EngineConfig,
    PhaseDurations,
    SessionConfig,
)
from breatharm.controller import ControllerEvent
from breatharm.motion import JointId
from breatharm.pipeline import NormalizationBounds, PipelineConfig
from breatharm.session import (
    ACCLIMATIZATION,
    COMPLETE,
    INTRO,
    NON_SYNCED,
    OFF,
    QUESTIONNAIRE_PAUSE,
    SYNCED,
    TASK_BLOCK,
    Event,
    PhaseError,
    PhaseMachine,
    SessionEngine,
    default_pool,
    load_record,
    persist_record,
    replay_frames,
    run_session,
    verify_replay,
)
from breatharm.sources import SynthBreath, SynthSource, build_playback_plan


def engine_config(bounds=(-4.0, 4.0), alpha=1.0):
    return EngineConfig(
        pipeline=PipelineConfig(sample_rate_hz=50.0, filter_alpha=alpha, window_size=10),
        bounds=NormalizationBounds(*bounds),
    )


def quick_session_config(**overrides):
    defaults = dict(
        engine=engine_config(),
        session_id="t",
        seed=11,
        condition_order=(SYNCED, NON_SYNCED),
        durations=PhaseDurations(
            intro_s=0.0, acclimatization_s=3.0, task_block_s=4.0, questionnaire_s=1.0
        ),
        live_synth=SynthBreath(base_freq_hz=0.25),
        synth_seed=5,
        plan_seed=6,
        tasks=("a", "b"),
    )
    defaults.update(overrides)
    return SessionConfig(**defaults)


class TestPhaseMachine:
    def test_full_two_condition_path(self):
        m = PhaseMachine(total_conditions=2)
        path = [m.advance() for _ in range(8)]
        assert path == [
            INTRO,
            ACCLIMATIZATION,
            TASK_BLOCK,
            QUESTIONNAIRE_PAUSE,
            ACCLIMATIZATION,
            TASK_BLOCK,
            QUESTIONNAIRE_PAUSE,
            COMPLETE,
        ]

    def test_no_advance_past_complete(self):
        m = PhaseMachine(total_conditions=1)
        for _ in range(5):
            m.advance()
        assert m.phase == COMPLETE
        with pytest.raises(PhaseError):
            m.advance()

    def test_illegal_jump_is_impossible(self):
        # The machine only exposes advance(); a task block can never return
        # directly to acclimatization.
        m = PhaseMachine(total_conditions=2)
        m.advance(), m.advance(), m.advance()
        assert m.phase == TASK_BLOCK
        assert m.advance() == QUESTIONNAIRE_PAUSE


class DrivenEngine:
    """Hand-cranked engine: feed synth samples and ticks on a virtual clock."""

    def __init__(self, config=None, synth=None):
        self.config = config or engine_config()
        self.engine = SessionEngine(self.config, session_id="unit", seed=0)
        pool = default_pool(sample_rate_hz=50.0)
        self.engine.configure_playback(build_playback_plan(pool, 3), pool)
        self.synth = SynthSource(synth or SynthBreath(base_freq_hz=0.25), 50.0, seed=4)
        self.n = 0
        self.m = 0

    def run_for(self, seconds):
        fs, out = 50.0, self.engine.config.output_rate_hz
        end = max(self.n / fs, self.m / out) + seconds
        while True:
            t_live = self.n / fs
            t_tick = self.m / out
            t_pb = self.engine.playback_next_t()
            candidates = [(t_live, 2, "live"), (t_tick, 4, "tick")]
            if t_pb is not None:
                candidates.append((t_pb, 3, "pb"))
            t, _, kind = min(candidates)
            if t >= end:
                return
            if kind == "live":
                self.engine.on_sample("live", self.synth.sample(self.n), t)
                self.n += 1
            elif kind == "pb":
                self.engine.pull_playback(t)
            else:
                self.engine.on_output_tick(t)
                self.m += 1

    @property
    def now(self):
        return max(self.n / 50.0, self.m / self.engine.config.output_rate_hz)


class TestConditionSwitching:
    def test_off_to_synced_moves_within_one_window(self):
        d = DrivenEngine()
        d.run_for(2.0)  # warm pipeline while off
        shoulder_before = d.engine.joints[JointId.SHOULDER]
        assert shoulder_before == 90.0  # off: no displacement applied
        d.engine.set_condition(SYNCED, d.now)
        d.run_for(0.3)  # one window (0.2 s) + one tick
        assert d.engine.joints[JointId.SHOULDER] != shoulder_before

    def test_synced_to_non_synced_playback_starts_at_zero(self):
        d = DrivenEngine()
        d.run_for(1.0)
        d.engine.set_condition(SYNCED, d.now)
        d.run_for(1.0)
        switch_t = d.now
        d.engine.set_condition(NON_SYNCED, switch_t)
        d.run_for(0.5)
        pb_samples = [
            e for e in d.engine.record.events
            if e.kind == "sample" and e.data["source"] == "playback"
        ]
        assert pb_samples
        assert pb_samples[0].data["seq"] == 0
        assert pb_samples[0].data["t_ms"] == 0.0
        assert pb_samples[0].t >= switch_t

    def test_non_synced_to_off_holds_pose(self):
        d = DrivenEngine()
        d.engine.set_condition(NON_SYNCED, 0.0)
        d.run_for(3.0)
        d.engine.set_condition(OFF, d.now)
        frozen = d.engine.joints
        d.run_for(2.0)
        assert d.engine.joints == frozen

    def test_switching_never_touches_uncoupled_joints(self):
        d = DrivenEngine()
        untouched = (JointId.BASE, JointId.WRIST, JointId.WRIST_ROTATION, JointId.GRIPPER)
        baseline = {j: d.engine.joints[j] for j in untouched}
        for mode in (SYNCED, NON_SYNCED, OFF, NON_SYNCED, SYNCED):
            d.engine.set_condition(mode, d.now)
            d.run_for(1.5)
            for j in untouched:
                assert d.engine.joints[j] == baseline[j]

    def test_set_condition_same_mode_is_noop(self):
        d = DrivenEngine()
        d.engine.set_condition(SYNCED, 0.0)
        events_before = len(d.engine.record.events_of("condition_change"))
        d.engine.set_condition(SYNCED, 1.0)
        assert len(d.engine.record.events_of("condition_change")) == events_before


class TestCalibration:
    def test_bounds_ready_after_duration(self):
        config = EngineConfig(
            pipeline=PipelineConfig(sample_rate_hz=50.0, filter_alpha=1.0),
            bounds=CalibrationSpec(duration_s=2.0, percentile=1.0),
        )
        d = DrivenEngine(config=config)
        d.run_for(3.0)
        ready = d.engine.record.events_of("bounds_ready")
        assert len(ready) == 1
        assert ready[0].data["delta_min"] < 0 < ready[0].data["delta_max"]
        # No breath frames logged before bounds existed.
        first_frame = d.engine.record.events_of("breath_frame")[0]
        assert first_frame.t > ready[0].t


class TestRunSession:
    def test_condition_blocks_and_phase_events(self):
        record = run_session(quick_session_config())
        phase_events = record.events_of("phase_change")
        in_condition = [
            e for e in phase_events
            if e.data["to"] in (ACCLIMATIZATION, TASK_BLOCK, QUESTIONNAIRE_PAUSE)
        ]
        assert len(in_condition) == 6
        assert phase_events[-1].data["to"] == COMPLETE
        assert record.complete

        cond_events = record.events_of("condition_change")
        modes = [e.data["to"] for e in cond_events]
        assert modes == [SYNCED, OFF, NON_SYNCED, OFF]

    def test_counterbalanced_order_mirrors(self):
        record = run_session(
            quick_session_config(condition_order=(NON_SYNCED, SYNCED))
        )
        modes = [e.data["to"] for e in record.events_of("condition_change")]
        assert modes == [NON_SYNCED, OFF, SYNCED, OFF]

    def test_deterministic_given_seeds(self):
        cfg_a = quick_session_config(script=[
            ControllerEvent.button(3.5, "Square"),
            ControllerEvent.axis(3.6, "left_y", 0.7),
            ControllerEvent.axis(5.0, "left_y", 0.0),
        ])
        cfg_b = copy.deepcopy(cfg_a)
        rec_a = run_session(cfg_a)
        rec_b = run_session(cfg_b)
        assert rec_a.core_dict() == rec_b.core_dict()
        assert rec_a.created_at != 0.0

    def test_manual_disabled_during_acclimatization(self):
        # Stick hard over from the very start; base must not move until the
        # task block begins.
        cfg = quick_session_config(script=[ControllerEvent.axis(0.0, "left_x", 1.0)])
        record = run_session(cfg)
        task_start = next(
            e.t for e in record.events_of("phase_change") if e.data["to"] == TASK_BLOCK
        )
        for event in record.events_of("joint_snapshot"):
            base = event.data["angles"][JointId.BASE]
            if event.t < task_start:
                assert base == 90.0
            elif event.t > task_start + 0.1:
                assert base != 90.0
                break

    def test_task_markers_logged(self):
        record = run_session(quick_session_config())
        markers = record.events_of("task_marker")
        assert [m.data["label"] for m in markers] == ["a", "b", "a", "b"]

    def test_samples_cover_both_sources(self):
        record = run_session(quick_session_config())
        sources = {e.data["source"] for e in record.events_of("sample")}
        assert sources == {"live", "playback"}

    def test_breath_frames_exist_for_both_sources(self):
        record = run_session(quick_session_config())
        sources = {e.data["source"] for e in record.events_of("breath_frame")}
        assert sources == {"live", "playback"}


class TestPersistence:
    def test_round_trip(self, tmp_path):
        record = run_session(quick_session_config())
        path = tmp_path / "rec.jsonl"
        persist_record(record, path)
        loaded = load_record(path)
        assert loaded.core_dict() == record.core_dict()
        assert loaded.created_at == record.created_at

    def test_empty_record_round_trip(self, tmp_path):
        from breatharm.session import SessionRecord

        record = SessionRecord(
            session_id="empty", seed=0, condition_order=(SYNCED,), config={}
        )
        path = tmp_path / "empty.jsonl"
        persist_record(record, path)
        assert path.read_text().count("\n") == 1  # header only
        loaded = load_record(path)
        assert loaded.events == []

    def test_truncated_file_names_last_valid_line(self, tmp_path):
        record = run_session(quick_session_config())
        path = tmp_path / "rec.jsonl"
        persist_record(record, path)
        text = path.read_text()
        path.write_text(text[: int(len(text) * 0.6)])
        from breatharm.session import RecordError

        with pytest.raises(RecordError, match="last valid line"):
            load_record(path)


class TestReplay:
    def test_replay_reproduces_frames(self):
        cfg = quick_session_config(
            script=[
                ControllerEvent.axis(3.1, "left_x", 0.4),
                ControllerEvent.button(3.2, "Square"),
                ControllerEvent.axis(3.3, "left_y", -0.6),
                ControllerEvent.axis(5.5, "left_y", 0.0),
                ControllerEvent.axis(9.0, "right_y", 0.3),
            ]
        )
        record = run_session(cfg)
        ok, mismatches = verify_replay(record)
        assert ok, f"{mismatches} frames diverged"

    def test_replay_after_persist_round_trip(self, tmp_path):
        record = run_session(quick_session_config())
        path = tmp_path / "rec.jsonl"
        persist_record(record, path)
        ok, mismatches = verify_replay(load_record(path))
        assert ok, f"{mismatches} frames diverged after round trip"

    def test_replay_detects_tampering(self):
        record = run_session(quick_session_config())
        tx = record.events_of("frame_tx")
        tx[len(tx) // 2].data["angles"][1] += 1
        ok, mismatches = verify_replay(record)
        assert not ok and mismatches >= 1

    def test_replay_frame_count(self):
        record = run_session(quick_session_config())
        assert len(replay_frames(record)) == len(record.events_of("frame_tx"))
