"""Command-line entry points.

    breatharm synth ...        render a synthetic breath recording
    breatharm sensor ...       stream synthetic sensor packets over UDP
    breatharm record ...       capture live UDP packets into a recording
    breatharm plan ...         build a playback plan from a recording pool
    breatharm play-script ...  validate and print a controller script
    breatharm simulate ...     run a deterministic scripted session
    breatharm host run ...     start the live host (threads, API, arm)
    breatharm host replay ...  verify a record reproduces its frame stream
    breatharm arm serve ...    run a simulated arm behind a TCP port
    breatharm analyze ...      synchrony metrics from a session record
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import time
from pathlib import Path

from . import metrics as metrics_mod
from .config import (
    EngineConfig,
    HostConfig,
    PhaseDurations,
    SessionConfig,
    load_host_config,
)
from .controller import load_script
from .pipeline import NormalizationBounds, RespirationSample
from .session import load_record, persist_record, run_session, verify_replay
from .sources import (
    DEFAULT_UDP_PORT,
    Recording,
    SynthBreath,
    SynthSource,
    UdpListener,
    build_playback_plan,
    load_pool,
    save_recording,
    stream_packets,
    synth_recording,
)


def _cmd_synth(args: argparse.Namespace) -> int:
    cfg = SynthBreath(
        base_freq_hz=args.freq,
        amplitude=args.amp,
        noise_std=args.noise,
        waveform=args.waveform,
    )
    recording = synth_recording(
        cfg, args.duration, args.rate, args.seed,
        rec_id=args.id, subject_label=args.label,
    )
    save_recording(recording, args.out)
    print(f"wrote {args.out}: {recording.duration_s:.1f} s at {args.rate:g} Hz")
    return 0


def _cmd_sensor(args: argparse.Namespace) -> int:
    cfg = SynthBreath(
        base_freq_hz=args.freq,
        amplitude=args.amp,
        noise_std=args.noise,
        waveform=args.waveform,
    )
    source = SynthSource(cfg, args.rate, seed=args.seed)
    count = int(args.duration * args.rate)
    samples = (source.sample(n) for n in range(count))
    sent = stream_packets(samples, args.host, args.port, args.rate)
    print(f"sent {sent} packets to udp://{args.host}:{args.port}")
    return 0


def _cmd_record(args: argparse.Namespace) -> int:
    samples: list[RespirationSample] = []
    listener = UdpListener(on_sample=samples.append, port=args.port)
    listener.start()
    print(f"listening on udp port {listener.port} for {args.duration:g} s ...")
    try:
        time.sleep(args.duration)
    finally:
        listener.stop()
    recording = Recording(
        id=args.id,
        subject_label=args.label,
        sample_rate_hz=args.rate,
        values=[s.value for s in samples],
    )
    save_recording(recording, args.out)
    print(
        f"wrote {args.out}: {len(samples)} samples "
        f"(errors {listener.parser.error_count}, reorders {listener.parser.reorder_count})"
    )
    return 0


def _cmd_plan(args: argparse.Namespace) -> int:
    pool = load_pool(args.pool_dir)
    plan = build_playback_plan(pool, args.seed)
    text = json.dumps(plan.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _cmd_play_script(args: argparse.Namespace) -> int:
    events = load_script(args.file)
    for event in events:
        if event.kind == "axis":
            print(f"{event.t_s:8.3f}  axis   {event.name:8s} {event.value:+.3f}")
        else:
            edge = "press" if event.pressed else "release"
            print(f"{event.t_s:8.3f}  button {event.name:8s} {edge}")
    print(f"{len(events)} events, span {events[-1].t_s:.3f} s" if events else "empty script")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    engine = EngineConfig()
    if args.bounds:
        lo, hi = (float(x) for x in args.bounds.split(","))
        engine.bounds = NormalizationBounds(lo, hi)
    cfg = SessionConfig(
        engine=engine,
        session_id=args.id,
        seed=args.seed,
        condition_order=tuple(args.order.split(",")),
        durations=PhaseDurations(
            acclimatization_s=args.acclimatization,
            task_block_s=args.task_block,
            questionnaire_s=args.questionnaire,
        ),
        live_synth=SynthBreath(base_freq_hz=args.freq, noise_std=args.noise),
        synth_seed=args.seed + 1,
        plan_seed=args.seed + 2,
        pool_dir=args.pool_dir,
        script=load_script(args.script) if args.script else [],
    )
    record = run_session(cfg)
    persist_record(record, args.out)
    print(
        f"wrote {args.out}: {len(record.events)} events, "
        f"complete={record.complete}"
    )
    return 0


def _cmd_host_run(args: argparse.Namespace) -> int:
    from .host import LiveHost

    config = load_host_config(args.config) if args.config else HostConfig()
    if args.api_port is not None:
        config.api_port = args.api_port
    script = load_script(args.script) if args.script else None
    host = LiveHost(config, script=script)
    host.start()
    print(f"API: ws://{host.api.host}:{host.api.port}", flush=True)
    print("host running; ctrl-c to stop", flush=True)

    stopping = []

    def handle_signal(_sig, _frame):
        stopping.append(True)

    signal.signal(signal.SIGINT, handle_signal)
    signal.signal(signal.SIGTERM, handle_signal)
    try:
        while not stopping:
            time.sleep(0.1)
    finally:
        host.stop()
        if config.record_path:
            print(f"record written to {config.record_path}")
    return 0


def _cmd_arm_serve(args: argparse.Namespace) -> int:
    from .arm import SimulatedArm, TcpArmServer

    arm = SimulatedArm(slew_rate_deg_s=args.slew)
    server = TcpArmServer(arm, host=args.host, port=args.port)
    server.start()
    print(f"simulated arm listening on tcp://{args.host}:{server.port}", flush=True)
    stopping = []
    signal.signal(signal.SIGINT, lambda *_: stopping.append(True))
    signal.signal(signal.SIGTERM, lambda *_: stopping.append(True))
    try:
        while not stopping:
            time.sleep(0.2)
    finally:
        server.stop()
        print(f"final pose: {','.join(f'{a:.1f}' for a in arm.pose.angles)}")
    return 0


def _cmd_host_replay(args: argparse.Namespace) -> int:
    record = load_record(args.record)
    ok, mismatches = verify_replay(record)
    frames = len(record.events_of("frame_tx"))
    if ok:
        print(f"replay OK: {frames} frames reproduced exactly")
        return 0
    print(f"replay FAILED: {mismatches} mismatching frames of {frames}")
    return 1


def _cmd_analyze(args: argparse.Namespace) -> int:
    record = load_record(args.record)
    reports = metrics_mod.analyze_blocks(record)
    if args.json:
        print(json.dumps([r.to_dict() for r in reports], indent=2))
        return 0
    if not reports:
        print("no analyzable condition blocks in record")
        return 1
    headers = ("condition", "span", "windows", "peak corr", "lag s", "live Hz", "motion Hz", "clamps", "period s")
    print(" | ".join(f"{h:>10s}" for h in headers))
    for r in reports:
        def fmt(x, spec=".3f"):
            return "-" if x is None else format(x, spec)
        print(
            " | ".join(
                [
                    f"{r.condition:>10s}",
                    f"{r.t_start:5.0f}-{r.t_end:4.0f}",
                    f"{r.window_count:>10d}",
                    f"{fmt(r.peak_cross_correlation):>10s}",
                    f"{fmt(r.lag_at_peak_s):>10s}",
                    f"{fmt(r.live_freq_hz):>10s}",
                    f"{fmt(r.motion_freq_hz):>10s}",
                    f"{r.clamp_count:>10d}",
                    f"{fmt(r.mean_output_period_s, '.4f'):>10s}",
                ]
            )
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="breatharm",
        description="Breath-synchronized robot-arm teleoperation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic breath recording")
    p.add_argument("--freq", type=float, default=0.25, help="breath frequency Hz")
    p.add_argument("--amp", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.0, help="gaussian noise std")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=60.0, help="seconds")
    p.add_argument("--rate", type=float, default=50.0, help="sample rate Hz")
    p.add_argument("--waveform", choices=["sinusoid", "asymmetric-ramp"], default="sinusoid")
    p.add_argument("--id", default="synth-0")
    p.add_argument("--label", default="synth")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("sensor", help="stream synthetic sensor packets over UDP")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=DEFAULT_UDP_PORT)
    p.add_argument("--freq", type=float, default=0.25)
    p.add_argument("--amp", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--rate", type=float, default=50.0)
    p.add_argument("--waveform", choices=["sinusoid", "asymmetric-ramp"], default="sinusoid")
    p.set_defaults(func=_cmd_sensor)

    p = sub.add_parser("record", help="capture live UDP packets into a recording")
    p.add_argument("--out", required=True)
    p.add_argument("--port", type=int, default=DEFAULT_UDP_PORT)
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--rate", type=float, default=50.0)
    p.add_argument("--id", default="capture-0")
    p.add_argument("--label", default="participant")
    p.set_defaults(func=_cmd_record)

    p = sub.add_parser("plan", help="build a playback plan from a recording pool")
    p.add_argument("--pool-dir", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("play-script", help="validate and print a controller script")
    p.add_argument("--file", required=True)
    p.set_defaults(func=_cmd_play_script)

    p = sub.add_parser("simulate", help="run a deterministic scripted session")
    p.add_argument("--out", required=True)
    p.add_argument("--id", default="sim")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--order", default="synced,non_synced")
    p.add_argument("--freq", type=float, default=0.25, help="live synth frequency")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--bounds", help="static normalization bounds as 'min,max'")
    p.add_argument("--acclimatization", type=float, default=60.0)
    p.add_argument("--task-block", type=float, default=180.0)
    p.add_argument("--questionnaire", type=float, default=15.0)
    p.add_argument("--pool-dir")
    p.add_argument("--script", help="controller script file")
    p.set_defaults(func=_cmd_simulate)

    host_parser = sub.add_parser("host", help="live host commands")
    host_sub = host_parser.add_subparsers(dest="host_command", required=True)

    p = host_sub.add_parser("run", help="start the live host")
    p.add_argument("--config", help="host config JSON file")
    p.add_argument("--api-port", type=int, help="override API port")
    p.add_argument("--script", help="controller script to play against the wall clock")
    p.set_defaults(func=_cmd_host_run)

    p = host_sub.add_parser("replay", help="verify a record against its frame stream")
    p.add_argument("--record", required=True)
    p.set_defaults(func=_cmd_host_replay)

    arm_parser = sub.add_parser("arm", help="simulated arm endpoint commands")
    arm_sub = arm_parser.add_subparsers(dest="arm_command", required=True)
    p = arm_sub.add_parser("serve", help="run a simulated arm behind a TCP port")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7800)
    p.add_argument("--slew", type=float, default=90.0, help="deg/s per joint")
    p.set_defaults(func=_cmd_arm_serve)

    p = sub.add_parser("analyze", help="synchrony metrics from a session record")
    p.add_argument("--record", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--json", action="store_true")
    group.add_argument("--table", action="store_true")
    p.set_defaults(func=_cmd_analyze)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
