"""Live rendering service: wall-clock sampling, WebSocket frame streaming.

Camera input events apply the instant they arrive; the next sampler
iteration (six samples later at most) traces with the new pose, with no
frame boundary in between. Reconstruction runs at the configured refresh
and pushes binary frame packets to every connected client; a slow client
never stalls the pipeline because per-client queues drop oldest frames.

Wire protocol on /stream:
  - text frames, client -> server: JSON input events
      {"type": "input", "yaw": r, "pitch": r, "move": [x, y, z], "ts": ms}
    (optionally {"type": "input", "pose": {"eye": [..], "yaw": r, "pitch": r}})
  - binary frames, server -> client: little-endian header
      u32 seq | u64 ts_ms | u16 w | u16 h, then w*h*3 bytes of RGB
  - text frames, server -> client: JSON stats
      {"type": "stats", "seq": n, "samples_per_second": s, "tile_count": n,
       "overhead_fraction": f}
"""

from __future__ import annotations

import asyncio
import json
import math
import struct
import sys
import threading
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .channel import SpscChannel
from .clock import VirtualClock
from .geometry import CameraPose
from .reconstructor import Reconstructor, to_srgb_u8
from .sampler import Sampler, SamplerConfig
from .scene import Scene
from .tracer import SceneWorld

HEADER = struct.Struct("<IQHH")
MAX_EVENTS_PER_SECOND = 250
PITCH_LIMIT = math.pi / 2 - 0.01


class ProtocolError(ValueError):
    pass


@dataclass
class ServiceConfig:
    scene: str
    budget: float
    width: int = 64
    height: int = 64
    refresh_hz: float = 30.0
    port: int = 8765
    seed: int = 1


class CameraState:
    """Interactive camera: eye plus yaw/pitch, swapped atomically."""

    def __init__(self, eye, yaw: float, pitch: float, fov: float):
        self._lock = threading.Lock()
        self.eye = tuple(eye)
        self.yaw = yaw
        self.pitch = pitch
        self.fov = fov
        self.version = 0

    @classmethod
    def from_pose(cls, pose: CameraPose) -> "CameraState":
        fx, fy, fz = pose.forward
        pitch = math.asin(max(-1.0, min(1.0, fy)))
        yaw = math.atan2(fx, -fz)
        return cls(pose.eye, yaw, pitch, pose.fov)

    def pose(self) -> CameraPose:
        with self._lock:
            eye, yaw, pitch, fov = self.eye, self.yaw, self.pitch, self.fov
        cp = math.cos(pitch)
        forward = (math.sin(yaw) * cp, math.sin(pitch), -math.cos(yaw) * cp)
        look_at = (eye[0] + forward[0], eye[1] + forward[1], eye[2] + forward[2])
        from .geometry import make_pose
        return make_pose(eye, look_at, (0.0, 1.0, 0.0), fov)

    def apply(self, event: dict) -> None:
        """Compose a validated input event onto the camera."""
        pose_abs = event.get("pose")
        with self._lock:
            if pose_abs is not None:
                eye = pose_abs.get("eye", self.eye)
                yaw = float(pose_abs.get("yaw", self.yaw))
                pitch = float(pose_abs.get("pitch", self.pitch))
                self.eye = (float(eye[0]), float(eye[1]), float(eye[2]))
                self.yaw = yaw
            else:
                yaw = self.yaw + float(event.get("yaw", 0.0))
                pitch = self.pitch + float(event.get("pitch", 0.0))
                move = event.get("move", (0.0, 0.0, 0.0))
                cp = math.cos(self.pitch)
                forward = (math.sin(self.yaw) * cp, math.sin(self.pitch),
                           -math.cos(self.yaw) * cp)
                right = (math.cos(self.yaw), 0.0, math.sin(self.yaw))
                up = (0.0, 1.0, 0.0)
                self.eye = (
                    self.eye[0] + move[0] * right[0] + move[1] * up[0] + move[2] * forward[0],
                    self.eye[1] + move[0] * right[1] + move[1] * up[1] + move[2] * forward[1],
                    self.eye[2] + move[0] * right[2] + move[1] * up[2] + move[2] * forward[2],
                )
                self.yaw = yaw
            self.pitch = max(-PITCH_LIMIT, min(PITCH_LIMIT, pitch))
            self.version += 1


def validate_event(raw: str) -> dict:
    try:
        event = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"malformed event: {e}") from e
    if not isinstance(event, dict) or event.get("type") != "input":
        raise ProtocolError("events must be JSON objects with type='input'")
    values = [event.get("yaw", 0.0), event.get("pitch", 0.0), event.get("ts", 0.0)]
    values.extend(event.get("move", [0.0, 0.0, 0.0]))
    pose = event.get("pose")
    if pose is not None:
        values.extend(pose.get("eye", [0, 0, 0]))
        values.extend([pose.get("yaw", 0.0), pose.get("pitch", 0.0)])
    for v in values:
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ProtocolError(f"non-finite value in event: {v!r}")
    return event


def encode_frame(seq: int, ts_ms: int, image_u8: np.ndarray) -> bytes:
    h, w, _ = image_u8.shape
    return HEADER.pack(seq, ts_ms, w, h) + image_u8.tobytes()


class LiveService:
    """Owns the sampler/reconstructor threads and per-client frame queues."""

    def __init__(self, scene: Scene, cfg: ServiceConfig):
        self.cfg = cfg
        self.scene = scene
        w, h = cfg.width, cfg.height
        if scene.camera_path is None:
            raise ValueError("live scenes need a camera path for the start pose")
        self.camera = CameraState.from_pose(scene.camera_path.evaluate(0.0))
        self.clock = VirtualClock(cfg.budget, mode="wall")
        self.samples = SpscChannel()
        self.packets = SpscChannel()
        self.world = SceneWorld(scene, w, h, pose_fn=lambda t: self.camera.pose())
        self.pose_log: deque = deque(maxlen=4096)   # (sample_index, camera version)
        self.lock = threading.Lock()
        self.sampler = Sampler(
            self.world, w, h, self.clock,
            SamplerConfig(refresh_hz=cfg.refresh_hz), cfg.seed,
            sample_sink=self.samples.put, packet_sink=self.packets.put,
            on_sample=self._log_sample)
        self.recon = Reconstructor(w, h, scene.background)
        self.clients: dict[int, deque] = {}
        self._next_client = 0
        self._seq = 0
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self.frames_built = 0

    def _log_sample(self, sample) -> None:
        self.pose_log.append((self.sampler.counts["new"], self.camera.version))

    # -- pipeline threads ----------------------------------------------------

    def _sampling_loop(self) -> None:
        with self.lock:
            self.sampler.initialize()
        behind_streak = 0
        while not self._stop.is_set():
            with self.lock:
                self.sampler.step()
            ahead = self.clock.charged_seconds - self.clock.now
            if ahead > 0.002:
                behind_streak = 0
                time.sleep(min(ahead, 0.05))
            else:
                # budget exceeds what this host sustains; yield periodically so
                # reconstruction and client I/O stay live
                behind_streak += 1
                if behind_streak >= 64:
                    behind_streak = 0
                    time.sleep(0.002)

    def _recon_loop(self) -> None:
        interval = 1.0 / self.cfg.refresh_hz
        next_tick = time.monotonic() + interval
        while not self._stop.is_set():
            delay = next_tick - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            # never spiral: skip ticks the host could not keep up with
            next_tick = max(next_tick + interval, time.monotonic())
            self.recon.ingest(self.samples.drain())
            for pkt in self.packets.drain():
                self.recon.apply_packet(pkt)
            pose = self.camera.pose()
            frame = self.recon.reconstruct(pose, self.clock.now)
            img = to_srgb_u8(frame.color)
            self._seq += 1
            self.frames_built += 1
            payload = encode_frame(self._seq, int(time.time() * 1000), img)
            stats = json.dumps({"type": "stats", "seq": self._seq, **self.stats()})
            for q in list(self.clients.values()):
                q.append((payload, stats))          # deque(maxlen=2): drop-oldest

    def start(self) -> None:
        self._stop.clear()
        for fn in (self._sampling_loop, self._recon_loop):
            t = threading.Thread(target=fn, daemon=True)
            t.start()
            self._threads.append(t)

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=2.0)
        self._threads.clear()

    # -- clients ---------------------------------------------------------------

    def register_client(self) -> tuple[int, deque]:
        cid = self._next_client
        self._next_client += 1
        q: deque = deque(maxlen=2)
        self.clients[cid] = q
        return cid, q

    def drop_client(self, cid: int) -> None:
        self.clients.pop(cid, None)

    def stats(self) -> dict:
        elapsed = max(self.clock.now, 1e-9)
        return {
            "samples_per_second": self.clock.samples_charged / elapsed,
            "tile_count": len(self.sampler.tree.tiles),
            "overhead_fraction": self.clock.overhead_fraction(),
            "clients": len(self.clients),
        }

    def tile_dump(self) -> list[dict]:
        with self.lock:
            return self.sampler.tile_snapshot()


def create_app(service: LiveService) -> FastAPI:
    app = FastAPI(title="frameless live renderer")

    @app.get("/healthz")
    def healthz():
        return service.stats()

    @app.get("/tiles")
    def tiles():
        return {"tiles": service.tile_dump()}

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        cid, queue = service.register_client()
        window_start = time.monotonic()
        events_in_window = 0

        async def sender():
            while True:
                while queue:
                    payload, stats = queue.popleft()
                    await ws.send_bytes(payload)
                    await ws.send_text(stats)
                await asyncio.sleep(0.004)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                raw = await ws.receive_text()
                now = time.monotonic()
                if now - window_start >= 1.0:
                    window_start = now
                    events_in_window = 0
                events_in_window += 1
                if events_in_window > MAX_EVENTS_PER_SECOND:
                    continue                        # rate limit: drop excess
                try:
                    event = validate_event(raw)
                except ProtocolError:
                    await ws.close(code=1008)
                    break
                service.camera.apply(event)
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            service.drop_client(cid)

    return app


def apply_input(camera: CameraState, event: dict) -> CameraState:
    """Validate and apply one already-parsed input event."""
    validate_event(json.dumps(event))
    camera.apply(event)
    return camera


def serve(cfg: ServiceConfig) -> None:
    import uvicorn

    from .harness import resolve_scene

    scene = resolve_scene(cfg.scene)
    service = LiveService(scene, cfg)
    service.start()
    app = create_app(service)
    try:
        uvicorn.run(app, host="0.0.0.0", port=cfg.port, log_level="warning")
    finally:
        service.stop()
