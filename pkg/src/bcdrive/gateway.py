"""Browser-facing service: stream frames and telemetry, accept commands.

One authoritative simulation loop advances the world at a fixed tick.
Clients talk JSON over a websocket at /ws: the server pushes one telemetry
message per tick and answers every control message with an ack (or an
error). Steering is sticky, like an RC remote's held button: the last
STEER value persists until replaced.

Modes: MANUAL (the held steer drives), EXPERT (the scripted controller
drives), AUTONOMOUS (the loaded network drives). While recording, every
tick appends (frame, applied command) to the run directory in the same
format `bcdrive collect` produces.
"""

from __future__ import annotations

import asyncio
import base64
import contextlib
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from . import nn, steer
from .data import DatasetRecorder, encode_pgm
from .errors import ContractError
from .sim import (CameraSpec, DEFAULT_DT, DEFAULT_GAINS, DEFAULT_SPEED,
                  ExpertGains, Track, car_step, expert_policy,
                  make_default_track, render_camera, start_state, track_frame)
from .train import predict_class

MODES = ("MANUAL", "AUTONOMOUS", "EXPERT")
CONTROL_KINDS = ("STEER", "SET_MODE", "SET_RECORDING", "RESET")

DEFAULT_TICK_HZ = 20.0


@dataclass
class GatewayConfig:
    track: Track = field(default_factory=make_default_track)
    camera: CameraSpec = field(default_factory=CameraSpec)
    gains: ExpertGains = DEFAULT_GAINS
    dt: float = DEFAULT_DT
    speed: float = DEFAULT_SPEED
    mode: str = "MANUAL"
    out_dir: Path | None = None
    model: nn.NetworkParams | None = None
    tick_hz: float = DEFAULT_TICK_HZ

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "AUTONOMOUS" and self.model is None:
            raise ContractError("AUTONOMOUS mode requires a loaded model")


class SimulationLoop:
    """The single-writer simulation state machine.

    apply_control() and tick() are safe to call from different threads;
    a lock makes each tick atomic, so snapshots never expose a
    half-applied step.
    """

    def __init__(self, cfg: GatewayConfig):
        self.cfg = cfg
        self._lock = threading.Lock()
        self._state = start_state(cfg.track, speed=cfg.speed)
        self._step = 0
        self._mode = cfg.mode
        self._held_steer = steer.STRAIGHT
        self._last_cmd = steer.STRAIGHT
        self._recording = False
        self._recorder: DatasetRecorder | None = None
        self._telemetry = None

    # -- control ---------------------------------------------------------

    def apply_control(self, message: dict) -> dict:
        """Apply one ControlMessage; returns the ack (or error) to send."""
        with self._lock:
            try:
                return self._apply_control_locked(message)
            except (ContractError, FileExistsError, KeyError, TypeError, ValueError) as exc:
                return {"kind": "error", "message": str(exc)}

    def _apply_control_locked(self, message: dict) -> dict:
        kind = str(message.get("kind", "")).upper()
        if kind not in CONTROL_KINDS:
            return {"kind": "error", "message": f"unknown control kind {message.get('kind')!r}"}
        if kind == "STEER":
            self._held_steer = steer.validate(message["steer"])
        elif kind == "SET_MODE":
            mode = str(message.get("mode", "")).upper()
            if mode not in MODES:
                return {"kind": "error", "message": f"unknown mode {message.get('mode')!r}"}
            if mode == "AUTONOMOUS" and self.cfg.model is None:
                return {"kind": "error",
                        "message": "cannot switch to AUTONOMOUS: no model loaded"}
            self._mode = mode
        elif kind == "SET_RECORDING":
            want = bool(message["recording"])
            if want and self._recorder is None:
                if self.cfg.out_dir is None:
                    return {"kind": "error",
                            "message": "recording requires the server to be started with an output directory"}
                self._recorder = DatasetRecorder(self.cfg.out_dir)
            self._recording = want
        elif kind == "RESET":
            self._state = start_state(self.cfg.track, speed=self.cfg.speed)
            self._held_steer = steer.STRAIGHT
            self._last_cmd = steer.STRAIGHT
        return {"kind": "ack", "of": kind}

    # -- simulation ------------------------------------------------------

    def tick(self) -> dict:
        """Advance one step and return the telemetry message for it."""
        with self._lock:
            frame = render_camera(self.cfg.track, self._state, self.cfg.camera)
            if self._mode == "MANUAL":
                command = self._held_steer
            elif self._mode == "EXPERT":
                command = expert_policy(self.cfg.track, self._state, self.cfg.gains)
            else:
                command = predict_class(self.cfg.model, frame)
            if self._recording and self._recorder is not None:
                self._recorder.add(frame, command)
            self._state = car_step(self._state, command, self.cfg.dt)
            self._step += 1
            self._last_cmd = command

            error, _, _ = track_frame(self.cfg.track, (self._state.x, self._state.y))
            counts = (self._recorder.class_counts() if self._recorder is not None
                      else {label: 0 for label in steer.CLASSES})
            self._telemetry = {
                "kind": "telemetry",
                "step": self._step,
                "frame": base64.b64encode(encode_pgm(frame)).decode("ascii"),
                "pose": [self._state.x, self._state.y, self._state.heading],
                "offset": error,
                "mode": self._mode,
                "recording": self._recording,
                "last_cmd": command,
                "dataset_counts": {str(label): counts[label] for label in steer.CLASSES},
            }
            return self._telemetry

    def snapshot(self) -> dict | None:
        """Latest telemetry, assembled at a tick boundary."""
        with self._lock:
            return self._telemetry

    @property
    def step_count(self) -> int:
        with self._lock:
            return self._step

    @property
    def mode(self) -> str:
        with self._lock:
            return self._mode

    def close(self):
        with self._lock:
            if self._recorder is not None:
                self._recorder.close()


class Gateway:
    """SimulationLoop plus fan-out of telemetry to websocket subscribers."""

    def __init__(self, cfg: GatewayConfig):
        self.sim = SimulationLoop(cfg)
        self.cfg = cfg
        self._subscribers: set[queue.Queue] = set()
        self._sub_lock = threading.Lock()

    def subscribe(self) -> queue.Queue:
        q = queue.Queue(maxsize=256)
        with self._sub_lock:
            self._subscribers.add(q)
        return q

    def unsubscribe(self, q: queue.Queue):
        with self._sub_lock:
            self._subscribers.discard(q)

    def tick(self) -> dict:
        telemetry = self.sim.tick()
        with self._sub_lock:
            subscribers = list(self._subscribers)
        for q in subscribers:
            try:
                q.put_nowait(telemetry)
            except queue.Full:
                pass  # slow client: drop, never block the loop
        return telemetry

    def control(self, message: dict) -> dict:
        return self.sim.apply_control(message)

    def config_view(self) -> dict:
        cfg = self.cfg
        return {
            "mode": self.sim.mode,
            "tick_hz": cfg.tick_hz,
            "dt": cfg.dt,
            "speed": cfg.speed,
            "camera": {
                "resolution": cfg.camera.resolution,
                "near_offset": cfg.camera.near_offset,
                "window_side": cfg.camera.window_side,
            },
            "track": {
                "points": len(cfg.track.points),
                "width": cfg.track.width,
                "total_length": cfg.track.total_length,
            },
            "model_loaded": cfg.model is not None,
            "out_dir": str(cfg.out_dir) if cfg.out_dir is not None else None,
        }

    def close(self):
        self.sim.close()


def create_app(gateway: Gateway, *, run_ticker: bool = True, ui_dir=None) -> FastAPI:
    """FastAPI app exposing /healthz, /config and the /ws stream.

    With run_ticker the simulation advances on its own at cfg.tick_hz;
    tests disable it and call gateway.tick() directly.
    """

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(_ticker(gateway)) if run_ticker else None
        try:
            yield
        finally:
            if task is not None:
                task.cancel()
                with contextlib.suppress(asyncio.CancelledError):
                    await task
            gateway.close()

    app = FastAPI(lifespan=lifespan)
    app.state.gateway = gateway

    @app.get("/healthz")
    def healthz():
        return PlainTextResponse("ok")

    @app.get("/config")
    def config():
        return gateway.config_view()

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        q = gateway.subscribe()
        outbox: asyncio.Queue = asyncio.Queue()

        async def pump():
            # Telemetry arrives on a thread-safe queue (ticks may run on
            # another thread); acks are posted locally. Merge both onto
            # the socket from this single task.
            while True:
                sent = False
                while True:
                    try:
                        await ws.send_json(q.get_nowait())
                        sent = True
                    except queue.Empty:
                        break
                while True:
                    try:
                        await ws.send_json(outbox.get_nowait())
                        sent = True
                    except asyncio.QueueEmpty:
                        break
                if not sent:
                    await asyncio.sleep(0.002)

        pump_task = asyncio.create_task(pump())
        try:
            while True:
                message = await ws.receive_json()
                await outbox.put(gateway.control(message))
        except WebSocketDisconnect:
            pass
        finally:
            pump_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await pump_task
            gateway.unsubscribe(q)

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app


async def _ticker(gateway: Gateway):
    interval = 1.0 / gateway.cfg.tick_hz
    loop = asyncio.get_running_loop()
    next_tick = loop.time()
    while True:
        gateway.tick()
        next_tick += interval
        await asyncio.sleep(max(0.0, next_tick - loop.time()))


def serve(cfg: GatewayConfig, host: str, port: int, ui_dir=None):
    """Run the gateway under uvicorn until interrupted."""
    import uvicorn

    gateway = Gateway(cfg)
    app = create_app(gateway, run_ticker=True, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
