import json
import socket
import time

import pytest
from websockets.sync.client import connect

from breatharm.config import EngineConfig, HostConfig
from breatharm.host import LiveHost
from breatharm.pipeline import NormalizationBounds, PipelineConfig
from breatharm.session import ACCLIMATIZATION, COMPLETE, INTRO, SYNCED
from breatharm.sources import SynthBreath


def make_host(**overrides):
    engine = EngineConfig(
        pipeline=PipelineConfig(sample_rate_hz=50.0, filter_alpha=1.0),
        bounds=NormalizationBounds(-4.0, 4.0),
    )
    defaults = dict(
        engine=engine,
        source="synth",
        synth=SynthBreath(base_freq_hz=0.25),
        transport="loopback",
        api_port=0,
    )
    defaults.update(overrides)
    return LiveHost(HostConfig(**defaults))


class ApiClient:
    def __init__(self, host):
        self.ws = connect(f"ws://{host.api.host}:{host.api.port}", open_timeout=5)
        self._id = 0

    def cmd(self, command, **kwargs):
        self._id += 1
        self.ws.send(json.dumps({"id": self._id, "cmd": command, **kwargs}))
        while True:
            reply = json.loads(self.ws.recv(timeout=5))
            if reply.get("id") == self._id:
                return reply

    def next_event(self, timeout=5):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            message = json.loads(self.ws.recv(timeout=timeout))
            if "event" in message:
                return message
        raise TimeoutError("no event received")

    def close(self):
        self.ws.close()


@pytest.fixture
def live_host():
    host = make_host()
    host.start()
    yield host
    host.stop()


class TestExperimenterApi:
    def test_get_state_initial(self, live_host):
        client = ApiClient(live_host)
        try:
            reply = client.cmd("get_state")
            assert reply["ok"]
            state = reply["state"]
            assert state["phase"] == "idle"
            assert state["condition"] == "off"
            assert state["joints"] == [90.0, 90.0, 90.0, 90.0, 90.0, 40.0]
        finally:
            client.close()

    def test_set_condition_drives_motion(self, live_host):
        client = ApiClient(live_host)
        try:
            reply = client.cmd("set_condition", mode="synced")
            assert reply["ok"] and reply["state"]["condition"] == "synced"
            deadline = time.monotonic() + 5
            moved = False
            while time.monotonic() < deadline:
                state = client.cmd("get_state")["state"]
                if state["joints"][1] != 90.0:
                    moved = True
                    break
                time.sleep(0.1)
            assert moved, "shoulder never moved in synced mode"
        finally:
            client.close()

    def test_subscribe_streams_events(self, live_host):
        client = ApiClient(live_host)
        try:
            assert client.cmd("subscribe")["ok"]
            kinds = set()
            deadline = time.monotonic() + 5
            while time.monotonic() < deadline and not {"samples", "joint_snapshot"} <= kinds:
                kinds.add(client.next_event()["event"])
            assert "samples" in kinds
            assert "joint_snapshot" in kinds
        finally:
            client.close()

    def test_push_rate_capped(self, live_host):
        client = ApiClient(live_host)
        try:
            client.cmd("subscribe")
            client.next_event()
            count = 0
            start = time.monotonic()
            while time.monotonic() - start < 2.0:
                client.next_event()
                count += 1
            assert count <= 2.0 * 30 * 1.2  # 30 msg/s budget plus slack
        finally:
            client.close()

    def test_phase_walk_and_illegal_advance(self, live_host):
        client = ApiClient(live_host)
        try:
            phases = []
            for _ in range(8):
                reply = client.cmd("advance_phase")
                assert reply["ok"]
                phases.append(reply["state"]["phase"])
            assert phases[0] == INTRO
            assert phases[1] == ACCLIMATIZATION
            assert reply["state"]["phase"] == COMPLETE
            reply = client.cmd("advance_phase")
            assert not reply["ok"]
            assert "complete" in reply["error"]
        finally:
            client.close()

    def test_acclimatization_disables_manual(self, live_host):
        client = ApiClient(live_host)
        try:
            client.cmd("advance_phase")  # intro
            state = client.cmd("advance_phase")["state"]  # acclimatization
            assert state["phase"] == ACCLIMATIZATION
            assert state["manual_enabled"] is False
            assert state["phase_remaining_s"] == pytest.approx(60.0, abs=1.0)
            state = client.cmd("advance_phase")["state"]  # task block
            assert state["manual_enabled"] is True
        finally:
            client.close()

    def test_unknown_command_and_bad_json(self, live_host):
        client = ApiClient(live_host)
        try:
            reply = client.cmd("warp_core_eject")
            assert not reply["ok"]
            client.ws.send("this is not json")
            reply = json.loads(client.ws.recv(timeout=5))
            assert not reply["ok"]
        finally:
            client.close()


class TestUdpHost:
    def test_udp_ingest_feeds_pipeline(self):
        host = make_host(source="udp", udp_port=0)
        host.start()
        try:
            port = host.listener.port
            sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            for n in range(120):
                sock.sendto(f"{n},{n * 20},{0.01 * n}".encode(), ("127.0.0.1", port))
                time.sleep(0.002)
            sock.close()
            deadline = time.monotonic() + 3
            while time.monotonic() < deadline:
                if host.engine.counters["breath_frames"] >= 5:
                    break
                time.sleep(0.05)
            assert host.engine.counters["samples"] >= 100
            assert host.engine.counters["breath_frames"] >= 5
        finally:
            host.stop()


class TestTcpTransportHost:
    def test_host_drives_remote_arm_over_tcp(self):
        from breatharm.arm import SimulatedArm, TcpArmServer
        from breatharm.motion import JointLimits

        arm = SimulatedArm(JointLimits.default(), slew_rate_deg_s=360.0)
        server = TcpArmServer(arm, port=0)
        server.start()
        host = make_host(transport="tcp", tcp_port=server.port)
        host.start()
        try:
            host.engine.set_condition(SYNCED, host.now())
            deadline = time.monotonic() + 6
            while time.monotonic() < deadline:
                if arm.pose.angles[1] != 90.0:
                    break
                time.sleep(0.1)
            assert arm.pose.angles[1] != 90.0, "remote arm never followed the host"
        finally:
            host.stop()
            server.stop()


class TestHostLifecycle:
    def test_frames_flow_to_simulated_arm(self, live_host):
        time.sleep(1.0)
        assert live_host.arm is not None
        assert len(live_host.arm.frame_log) >= 10
        assert live_host.output_loop.stats.frames_sent >= 10

    def test_record_persisted_on_stop(self, tmp_path):
        path = tmp_path / "live-record.jsonl"
        host = make_host(record_path=str(path))
        host.start()
        time.sleep(0.8)
        host.stop()
        from breatharm.session import load_record, verify_replay

        record = load_record(path)
        assert record.events_of("frame_tx")
        ok, mismatches = verify_replay(record)
        assert ok, f"live record replay diverged in {mismatches} frames"
