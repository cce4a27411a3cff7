"""Live session host: five concurrent workers around one engine.

Worker layout mirrors the deterministic driver but on a wall clock:

1. ingest          - UDP listener or paced synth feeder -> sample queue
2. processing      - drains the sample queue into the pipeline
3. storage         - drains the event stream to disk and to the API
4. input           - scripted or stdin jog controller events
5. output          - fixed-rate composer tick -> wire frames

A playback pacer joins them while the non-synced condition is active,
and the experimenter API runs as a coordination worker that only issues
control messages. The engine lock keeps every state update atomic; the
composer remains the only writer of joint state.
"""

from __future__ import annotations

import json
import queue
import sys
import threading
import time
from pathlib import Path

from .api import EventBroadcaster, ExperimenterApi
from .arm import ArmEndpoint, OutputLoop, SimulatedArm
from .config import HostConfig
from .controller import ControllerEvent
from .pipeline import RespirationSample
from .session import (
    Event,
    NON_SYNCED,
    SYNCED,
    SessionEngine,
    default_pool,
    persist_record,
)
from .sources import SynthSource, UdpListener, build_playback_plan, load_pool
from .wire import LoopbackTransport, TcpTransport


class SynthFeeder(threading.Thread):
    """Paces a synthetic breath stream at the configured sample rate."""

    def __init__(self, source: SynthSource, out_queue: queue.Queue, rate_hz: float) -> None:
        super().__init__(name="synth-ingest", daemon=True)
        self.source = source
        self.out_queue = out_queue
        self.rate_hz = rate_hz
        self._stop_event = threading.Event()

    def run(self) -> None:
        start = time.monotonic()
        n = 0
        while not self._stop_event.is_set():
            target = start + n / self.rate_hz
            delay = target - time.monotonic()
            if delay > 0 and self._stop_event.wait(delay):
                break
            self.out_queue.put(self.source.sample(n))
            n += 1

    def stop(self) -> None:
        self._stop_event.set()
        self.join(timeout=2.0)


class StdinJog(threading.Thread):
    """Minimal interactive input backend.

    Commands on stdin: ``select shoulder|elbow|wrist``, ``<axis> <value>``
    with axis in left_x/left_y/right_x/right_y, or ``stop`` (zero all axes).
    """

    def __init__(self, on_event) -> None:
        super().__init__(name="stdin-jog", daemon=True)
        self.on_event = on_event
        self._stop_event = threading.Event()

    def run(self) -> None:
        select_buttons = {"shoulder": "X", "elbow": "Square", "wrist": "Triangle"}
        for line in sys.stdin:
            if self._stop_event.is_set():
                break
            parts = line.strip().split()
            if not parts:
                continue
            if parts[0] == "select" and len(parts) == 2 and parts[1] in select_buttons:
                self.on_event(ControllerEvent.button(0.0, select_buttons[parts[1]]))
            elif parts[0] == "stop":
                for axis in ("left_x", "left_y", "right_x", "right_y"):
                    self.on_event(ControllerEvent.axis(0.0, axis, 0.0))
            elif len(parts) == 2:
                try:
                    self.on_event(ControllerEvent.axis(0.0, parts[0], float(parts[1])))
                except ValueError:
                    print(f"? unrecognized jog command: {line.strip()}", file=sys.stderr)

    def stop(self) -> None:
        self._stop_event.set()


class ScriptPlayer(threading.Thread):
    """Replays a controller script against the wall clock."""

    def __init__(self, events: list[ControllerEvent], on_event) -> None:
        super().__init__(name="script-input", daemon=True)
        self.events = sorted(events, key=lambda e: e.t_s)
        self.on_event = on_event
        self._stop_event = threading.Event()

    def run(self) -> None:
        start = time.monotonic()
        for event in self.events:
            delay = start + event.t_s - time.monotonic()
            if delay > 0 and self._stop_event.wait(delay):
                return
            self.on_event(event)

    def stop(self) -> None:
        self._stop_event.set()
        self.join(timeout=2.0)


class LiveHost:
    """Wires sources, engine, output, storage, and the experimenter API."""

    def __init__(self, config: HostConfig, script: list[ControllerEvent] | None = None):
        self.config = config
        fs = config.engine.pipeline.sample_rate_hz

        if config.pool_dir:
            pool = load_pool(config.pool_dir)
        else:
            pool = default_pool(sample_rate_hz=fs, base_seed=config.plan_seed + 100)
        plan = build_playback_plan(pool, config.plan_seed)

        self._event_queue: queue.Queue[Event | None] = queue.Queue()
        self.engine = SessionEngine(
            config.engine,
            session_id=config.session_id,
            seed=config.plan_seed,
            condition_order=(SYNCED, NON_SYNCED),
            total_conditions=config.condition_count,
            sink=self._event_queue.put,
        )
        self.engine.configure_playback(plan, pool)

        self._t0: float | None = None
        self._sample_queue: queue.Queue[RespirationSample | None] = queue.Queue()
        self._stop_event = threading.Event()

        # Output transport and (for loopback) the in-process arm endpoint.
        self.arm: SimulatedArm | None = None
        self.arm_endpoint: ArmEndpoint | None = None
        if config.transport == "loopback":
            self.transport = LoopbackTransport()
            self.arm = SimulatedArm(config.engine.limits, config.arm_slew_deg_s)
            self.arm_endpoint = ArmEndpoint(self.arm, self.transport)
        elif config.transport == "tcp":
            self.transport = TcpTransport(config.tcp_host, config.tcp_port)
        else:
            raise ValueError(f"unknown transport {config.transport!r}")

        self.output_loop = OutputLoop(
            tick=self._compose_tick,
            transport=self.transport,
            rate_hz=config.engine.output_rate_hz,
        )

        # Ingest source.
        self.listener: UdpListener | None = None
        self.synth_feeder: SynthFeeder | None = None
        if config.source == "udp":
            self.listener = UdpListener(
                on_sample=self._sample_queue.put, port=config.udp_port
            )
        elif config.source == "synth":
            synth = SynthSource(config.synth, fs, seed=config.synth_seed)
            self.synth_feeder = SynthFeeder(synth, self._sample_queue, fs)
        else:
            raise ValueError(f"unknown source {config.source!r}")

        self.script_player = ScriptPlayer(script, self._on_controller) if script else None
        self.stdin_jog = StdinJog(self._on_controller) if config.stdin_jog else None

        self.broadcaster = EventBroadcaster(sample_period_s=1.0 / fs)
        self.api = ExperimenterApi(
            config.api_host,
            config.api_port,
            get_state=lambda: self.engine.snapshot_state(self.now()),
            set_condition=lambda mode: self.engine.set_condition(mode, self.now()),
            advance_phase=lambda: self.engine.advance_phase(self.now()),
            broadcaster=self.broadcaster,
        )

        self._processing = threading.Thread(
            target=self._processing_loop, name="processing", daemon=True
        )
        self._storage = threading.Thread(
            target=self._storage_loop, name="storage", daemon=True
        )
        self._playback_pacer = threading.Thread(
            target=self._playback_loop, name="playback-pacer", daemon=True
        )
        self._record_stream = None

    # -- clock ----------------------------------------------------------------

    def now(self) -> float:
        if self._t0 is None:
            return 0.0
        return time.monotonic() - self._t0

    # -- worker bodies ----------------------------------------------------------

    def _compose_tick(self, _loop_t: float):
        pose, _data = self.engine.on_output_tick(self.now())
        return pose

    def _on_controller(self, event: ControllerEvent) -> None:
        self.engine.on_controller_event(event, self.now())

    def _processing_loop(self) -> None:
        while not self._stop_event.is_set():
            try:
                sample = self._sample_queue.get(timeout=0.1)
            except queue.Empty:
                continue
            if sample is None:
                break
            self.engine.on_sample("live", sample, self.now())

    def _playback_loop(self) -> None:
        while not self._stop_event.is_set():
            t_next = self.engine.playback_next_t()
            if t_next is None:
                self._stop_event.wait(0.02)
                continue
            delay = t_next - self.now()
            if delay > 0:
                self._stop_event.wait(min(delay, 0.05))
                continue
            self.engine.pull_playback(t_next)

    def _storage_loop(self) -> None:
        while True:
            try:
                event = self._event_queue.get(timeout=0.1)
            except queue.Empty:
                if self._stop_event.is_set():
                    break
                continue
            if event is None:
                break
            if self._record_stream is not None:
                self._record_stream.write(
                    json.dumps(
                        {"seq": event.seq, "t": event.t, "kind": event.kind, "data": event.data}
                    )
                    + "\n"
                )
            self.broadcaster.publish(event)

    # -- lifecycle ----------------------------------------------------------------

    def start(self) -> None:
        self._t0 = time.monotonic()
        if self.config.record_path:
            stream_path = Path(self.config.record_path).with_suffix(".stream.jsonl")
            self._record_stream = stream_path.open("w", encoding="ascii")
        self.broadcaster.start()
        self._storage.start()
        if self.arm_endpoint is not None:
            self.arm_endpoint.start()
        self.output_loop.start()
        self._processing.start()
        self._playback_pacer.start()
        if self.listener is not None:
            self.listener.start()
        if self.synth_feeder is not None:
            self.synth_feeder.start()
        if self.script_player is not None:
            self.script_player.start()
        if self.stdin_jog is not None:
            self.stdin_jog.start()
        self.api.start()

    def stop(self) -> None:
        self._stop_event.set()
        if self.stdin_jog is not None:
            self.stdin_jog.stop()
        if self.script_player is not None:
            self.script_player.stop()
        if self.synth_feeder is not None:
            self.synth_feeder.stop()
        if self.listener is not None:
            self.listener.stop()
        self.output_loop.stop()
        if self.arm_endpoint is not None:
            self.arm_endpoint.stop()
        self._playback_pacer.join(timeout=2.0)
        self._sample_queue.put(None)
        self._processing.join(timeout=2.0)
        self._event_queue.put(None)
        self._storage.join(timeout=2.0)
        self.broadcaster.stop()
        self.api.stop()
        self.transport.close()
        if self._record_stream is not None:
            self._record_stream.close()
        if self.config.record_path:
            persist_record(self.engine.record, self.config.record_path)
