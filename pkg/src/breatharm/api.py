"""Experimenter API: WebSocket JSON commands plus a pushed event stream.

Commands (request/response, matched by ``id``):

    {"id": 1, "cmd": "get_state"}
    {"id": 2, "cmd": "set_condition", "mode": "synced" | "non_synced" | "off"}
    {"id": 3, "cmd": "advance_phase"}
    {"id": 4, "cmd": "subscribe"}

Responses are ``{"id": n, "ok": true, "state": {...}}`` or
``{"id": n, "ok": false, "error": "..."}``. After ``subscribe``, the
connection also receives ``{"event": "...", ...}`` messages mirroring
the session log, decimated to stay under ~30 messages per second:
raw samples are batched, joint snapshots are rate-limited, and breath
frames and state changes pass through as they happen.
"""

from __future__ import annotations

import json
import queue
import threading
from typing import Callable

from websockets.sync.server import serve

from .session import Event, PhaseError, SourceError

SNAPSHOT_PUSH_HZ = 10.0
SAMPLE_BATCH_S = 0.2


class EventBroadcaster(threading.Thread):
    """Fans the engine's event stream out to subscribers, decimated."""

    def __init__(self, sample_period_s: float = 0.02) -> None:
        super().__init__(name="api-broadcast", daemon=True)
        self.sample_period_s = sample_period_s
        self._in: queue.Queue[Event | None] = queue.Queue()
        self._subscribers: set[queue.Queue] = set()
        self._sub_lock = threading.Lock()
        self._stop_event = threading.Event()
        self._sample_batch: list[float] = []
        self._batch_t0: float | None = None
        self._batch_source = "live"
        self._latest_snapshot: Event | None = None
        self._last_snapshot_push = -1.0

    def publish(self, event: Event) -> None:
        self._in.put(event)

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=256)
        with self._sub_lock:
            self._subscribers.add(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._sub_lock:
            self._subscribers.discard(q)

    def _send_all(self, message: dict) -> None:
        with self._sub_lock:
            targets = list(self._subscribers)
        for q in targets:
            try:
                q.put_nowait(message)
            except queue.Full:
                # Slow consumer: drop, the stream is advisory for UIs.
                pass

    def _flush_samples(self) -> None:
        if self._batch_t0 is None or not self._sample_batch:
            return
        self._send_all(
            {
                "event": "samples",
                "t0": self._batch_t0,
                "dt": self.sample_period_s,
                "source": self._batch_source,
                "values": self._sample_batch,
            }
        )
        self._sample_batch = []
        self._batch_t0 = None

    def _handle(self, event: Event) -> None:
        if event.kind == "sample":
            if event.data["source"] != "live":
                return
            if self._batch_t0 is None:
                self._batch_t0 = event.t
                self._batch_source = event.data["source"]
            self._sample_batch.append(event.data["value"])
            if event.t - self._batch_t0 >= SAMPLE_BATCH_S:
                self._flush_samples()
            return
        if event.kind == "joint_snapshot":
            self._latest_snapshot = event
            if event.t - self._last_snapshot_push >= 1.0 / SNAPSHOT_PUSH_HZ:
                self._last_snapshot_push = event.t
                self._send_all(
                    {"event": "joint_snapshot", "t": event.t, **event.data}
                )
            return
        if event.kind == "frame_tx":
            return  # redundant with snapshots for UI purposes
        self._flush_samples()
        self._send_all({"event": event.kind, "t": event.t, **event.data})

    def run(self) -> None:
        while not self._stop_event.is_set():
            try:
                event = self._in.get(timeout=0.1)
            except queue.Empty:
                continue
            if event is None:
                break
            self._handle(event)

    def stop(self) -> None:
        self._stop_event.set()
        self._in.put(None)
        self.join(timeout=2.0)


class ExperimenterApi:
    """WebSocket server exposing host control and the event stream."""

    def __init__(
        self,
        host: str,
        port: int,
        get_state: Callable[[], dict],
        set_condition: Callable[[str], dict],
        advance_phase: Callable[[], dict],
        broadcaster: EventBroadcaster,
    ) -> None:
        self._get_state = get_state
        self._set_condition = set_condition
        self._advance_phase = advance_phase
        self._broadcaster = broadcaster
        self._server = serve(self._handler, host, port)
        self.host = host
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="api-server", daemon=True
        )

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._thread.join(timeout=2.0)

    # -- connection handling --------------------------------------------------

    def _handler(self, connection) -> None:
        outbound: queue.Queue = queue.Queue(maxsize=512)
        subscription: queue.Queue | None = None
        stop_sender = threading.Event()

        def sender() -> None:
            while not stop_sender.is_set():
                try:
                    message = outbound.get(timeout=0.1)
                except queue.Empty:
                    continue
                if message is None:
                    break
                try:
                    connection.send(json.dumps(message))
                except Exception:
                    break

        sender_thread = threading.Thread(target=sender, daemon=True)
        sender_thread.start()

        def pump_subscription(sub: queue.Queue) -> None:
            while not stop_sender.is_set():
                try:
                    message = sub.get(timeout=0.1)
                except queue.Empty:
                    continue
                try:
                    outbound.put(message, timeout=0.5)
                except queue.Full:
                    pass

        pump_thread: threading.Thread | None = None
        try:
            for raw in connection:
                response = self._dispatch(raw)
                if response.pop("_subscribe", False) and subscription is None:
                    subscription = self._broadcaster.subscribe()
                    pump_thread = threading.Thread(
                        target=pump_subscription, args=(subscription,), daemon=True
                    )
                    pump_thread.start()
                outbound.put(response)
        except Exception:
            pass
        finally:
            stop_sender.set()
            outbound.put(None)
            if subscription is not None:
                self._broadcaster.unsubscribe(subscription)
            sender_thread.join(timeout=1.0)
            if pump_thread is not None:
                pump_thread.join(timeout=1.0)

    def _dispatch(self, raw) -> dict:
        try:
            request = json.loads(raw)
            if not isinstance(request, dict):
                raise ValueError("request must be a JSON object")
        except ValueError as exc:
            return {"id": None, "ok": False, "error": f"bad request: {exc}"}
        req_id = request.get("id")
        cmd = request.get("cmd")
        try:
            if cmd == "get_state":
                return {"id": req_id, "ok": True, "state": self._get_state()}
            if cmd == "set_condition":
                state = self._set_condition(request.get("mode"))
                return {"id": req_id, "ok": True, "state": state}
            if cmd == "advance_phase":
                state = self._advance_phase()
                return {"id": req_id, "ok": True, "state": state}
            if cmd == "subscribe":
                return {"id": req_id, "ok": True, "_subscribe": True}
            return {"id": req_id, "ok": False, "error": f"unknown command {cmd!r}"}
        except (PhaseError, SourceError, ValueError) as exc:
            return {"id": req_id, "ok": False, "error": str(exc)}
