"""Gold-standard evaluation harness.

Runs a renderer over a scripted animation on the virtual clock and records
the displayed image at every 60 Hz tick. The gold renderer is an ideal:
antialiased, zero cost, sampled exactly at each tick. All other renderers
pay one sample cost per traced ray on the same budget. Per-tick RMS against
gold and the summary table come from `report`.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import SpscChannel
from .clock import VirtualClock
from .reconstructor import Reconstructor, to_srgb_u8
from .sampler import Sampler, SamplerConfig
from .scene import Scene, load_scene
from .scenes import BUILTIN, builtin_scene
from .tracer import SceneWorld, Tracer

GOLD_GRID = 4                     # gold supersampling is GOLD_GRID^2 per pixel
MODES = ("gold", "framed-fullres", "framed-60hz", "frameless", "adaptive")


class ConfigError(ValueError):
    """Invalid run configuration (maps to CLI exit code 2)."""


@dataclass
class RunConfig:
    scene: str                    # builtin name or path to a scene file
    mode: str
    budget: float
    width: int = 64
    height: int = 64
    duration: float = 10.0
    seed: int = 1
    refresh_hz: float = 60.0
    anim: str | None = None       # label; defaults to the scene name
    reprojections: int | None = None   # override sampler r (ablations)
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        if self.budget <= 0:
            raise ConfigError("budget must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; have {MODES}")
        if self.anim is None:
            self.anim = os.path.splitext(os.path.basename(str(self.scene)))[0]


@dataclass
class RunResult:
    config: RunConfig
    frames: np.ndarray            # (T, h, w, 3) uint8, sRGB-encoded
    times: np.ndarray             # (T,) tick times in seconds
    counts: dict = field(default_factory=dict)
    overhead_fraction: float = 0.0
    packets: int = 0


def resolve_scene(spec: str) -> Scene:
    if spec in BUILTIN:
        return builtin_scene(spec)
    return load_scene(spec)


def tick_times(duration: float, hz: float = 60.0) -> np.ndarray:
    n = int(round(duration * hz))
    return (np.arange(n, dtype=float) + 1.0) / hz


def _pixel_centers(w: int, h: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:h, 0:w]
    return xs.ravel() + 0.5, ys.ravel() + 0.5


def run_gold(cfg: RunConfig) -> RunResult:
    """Ideal renderer: stratified supersampling at each tick, zero cost."""
    scene = resolve_scene(cfg.scene)
    w, h = cfg.width, cfg.height
    tracer = Tracer(scene, w, h)
    if scene.camera_path is None:
        raise ConfigError("scene has no camera path")
    rng = np.random.default_rng(cfg.seed)
    times = tick_times(cfg.duration, cfg.refresh_hz)
    g = GOLD_GRID
    ys, xs = np.mgrid[0:h, 0:w]
    sub_y, sub_x = np.mgrid[0:g, 0:g]
    base_x = (xs.ravel()[:, None] + (sub_x.ravel()[None, :]) / g)
    base_y = (ys.ravel()[:, None] + (sub_y.ravel()[None, :]) / g)
    frames = np.empty((len(times), h, w, 3), dtype=np.uint8)
    # one stratified jitter pattern per run, reused at every tick so a
    # static scene yields identical gold frames
    jx = rng.random(base_x.shape) / g
    jy = rng.random(base_y.shape) / g
    xs_flat = (base_x + jx).ravel()
    ys_flat = (base_y + jy).ravel()
    for k, t in enumerate(times):
        pose = scene.camera_path.evaluate(t)
        colors, _, _, _, _ = tracer.trace_batch(pose, float(t), xs_flat, ys_flat)
        img = colors.reshape(h * w, g * g, 3).mean(axis=1).reshape(h, w, 3)
        frames[k] = to_srgb_u8(img)
    return RunResult(config=cfg, frames=frames, times=times,
                     counts={"new": len(times) * w * h * g * g})


def _display_series(times: np.ndarray, frame_log: list[tuple[float, np.ndarray]],
                    background_u8: np.ndarray) -> np.ndarray:
    """Double-buffered readout: at each tick, the last fully completed frame."""
    out = np.empty((len(times),) + background_u8.shape, dtype=np.uint8)
    current = background_u8
    j = 0
    for k, t in enumerate(times):
        while j < len(frame_log) and frame_log[j][0] <= t:
            current = frame_log[j][1]
            j += 1
        out[k] = current
    return out


def run_framed_fullres(cfg: RunConfig) -> RunResult:
    """Full-resolution frames back to back; frame rate set by the budget."""
    scene = resolve_scene(cfg.scene)
    w, h = cfg.width, cfg.height
    tracer = Tracer(scene, w, h)
    clock = VirtualClock(cfg.budget)
    times = tick_times(cfg.duration, cfg.refresh_hz)
    xs, ys = _pixel_centers(w, h)
    frame_log = []
    traced = 0
    while clock.now < cfg.duration:
        t0 = clock.now
        pose = scene.camera_path.evaluate(t0)
        colors, _, _, _, _ = tracer.trace_batch(pose, t0, xs, ys)
        clock.charge_samples(w * h)
        traced += w * h
        frame_log.append((clock.now, to_srgb_u8(colors.reshape(h, w, 3))))
    bg = to_srgb_u8(np.tile(np.asarray(scene.background), (h, w, 1)))
    frames = _display_series(times, frame_log, bg)
    return RunResult(config=cfg, frames=frames, times=times, counts={"new": traced})


def run_framed_60hz(cfg: RunConfig) -> RunResult:
    """Fixed 60 Hz frames at the square resolution the budget affords,
    upscaled nearest-neighbor for comparison."""
    scene = resolve_scene(cfg.scene)
    w, h = cfg.width, cfg.height
    side = int(math.sqrt(cfg.budget / cfg.refresh_hz))
    if side < 1:
        raise ConfigError(f"budget {cfg.budget} cannot sustain 1x1 at {cfg.refresh_hz} Hz")
    side = min(side, max(w, h))
    tracer = Tracer(scene, w, h)
    clock = VirtualClock(cfg.budget)
    times = tick_times(cfg.duration, cfg.refresh_hz)
    # low-res pixel centers mapped onto the full image plane
    ys, xs = np.mgrid[0:side, 0:side]
    lx = (xs.ravel() + 0.5) * (w / side)
    ly = (ys.ravel() + 0.5) * (h / side)
    map_x = (np.arange(w) * side // w).clip(0, side - 1)
    map_y = (np.arange(h) * side // h).clip(0, side - 1)
    frame_log = []
    traced = 0
    k = 0
    interval = 1.0 / cfg.refresh_hz
    while k * interval < cfg.duration:
        t0 = k * interval
        pose = scene.camera_path.evaluate(t0)
        colors, _, _, _, _ = tracer.trace_batch(pose, t0, lx, ly)
        clock.charge_samples(side * side)
        traced += side * side
        low = colors.reshape(side, side, 3)
        up = low[map_y[:, None], map_x[None, :]]
        frame_log.append((t0 + side * side * clock.sample_cost, to_srgb_u8(up)))
        k += 1
    bg = to_srgb_u8(np.tile(np.asarray(scene.background), (h, w, 1)))
    frames = _display_series(times, frame_log, bg)
    return RunResult(config=cfg, frames=frames, times=times,
                     counts={"new": traced, "side": side})


def run_frameless(cfg: RunConfig) -> RunResult:
    """Traditional frameless baseline: random pixels, newest sample wins."""
    scene = resolve_scene(cfg.scene)
    w, h = cfg.width, cfg.height
    tracer = Tracer(scene, w, h)
    clock = VirtualClock(cfg.budget)
    rng = np.random.default_rng(cfg.seed)
    times = tick_times(cfg.duration, cfg.refresh_hz)
    display = np.tile(np.asarray(scene.background), (h, w, 1))
    frames = np.empty((len(times), h, w, 3), dtype=np.uint8)
    total = int(round(cfg.budget * cfg.duration))
    pixels = rng.integers(0, w * h, size=total)
    k = 0
    for p in pixels:
        while k < len(times) and clock.now >= times[k]:
            frames[k] = to_srgb_u8(display)
            k += 1
        t = clock.now
        px = int(p) % w
        py = int(p) // w
        pose = scene.camera_path.evaluate(t)
        res = tracer.trace(pose, px + 0.5, py + 0.5, t)
        display[py, px] = res.color
        clock.charge_samples(1)
    while k < len(times):
        frames[k] = to_srgb_u8(display)
        k += 1
    return RunResult(config=cfg, frames=frames, times=times, counts={"new": total})


def run_adaptive(cfg: RunConfig) -> RunResult:
    """Full pipeline: adaptive sampler feeding the scatter reconstructor."""
    scene = resolve_scene(cfg.scene)
    w, h = cfg.width, cfg.height
    world = SceneWorld(scene, w, h)
    clock = VirtualClock(cfg.budget)
    samples = SpscChannel()
    packets = SpscChannel()
    scfg = SamplerConfig(refresh_hz=cfg.refresh_hz)
    if cfg.reprojections is not None:
        scfg = replace(scfg, reprojections=cfg.reprojections)
    sampler = Sampler(world, w, h, clock, scfg, cfg.seed,
                      sample_sink=samples.put, packet_sink=packets.put)
    recon = Reconstructor(w, h, scene.background)
    times = tick_times(cfg.duration, cfg.refresh_hz)
    frames = np.empty((len(times), h, w, 3), dtype=np.uint8)
    sampler.initialize()
    for k, t in enumerate(times):
        while clock.now < t:
            sampler.step()
        recon.ingest(samples.drain())
        for pkt in packets.drain():
            recon.apply_packet(pkt)
        pose = world.pose(float(t))
        frame = recon.reconstruct(pose, float(t))
        frames[k] = to_srgb_u8(frame.color)
    counts = dict(sampler.counts)
    counts["completed"] = sampler.completed
    return RunResult(config=cfg, frames=frames, times=times, counts=counts,
                     overhead_fraction=clock.overhead_fraction(),
                     packets=sampler.packets_emitted)


_RUNNERS = {
    "gold": run_gold,
    "framed-fullres": run_framed_fullres,
    "framed-60hz": run_framed_60hz,
    "frameless": run_frameless,
    "adaptive": run_adaptive,
}


def run(cfg: RunConfig) -> RunResult:
    result = _RUNNERS[cfg.mode](cfg)
    if cfg.out_dir:
        save_run(result, cfg.out_dir)
    return result


# -- metrics and reports -------------------------------------------------------

def rms(a: np.ndarray, b: np.ndarray) -> float:
    """Root-mean-squared byte difference between two 8-bit images."""
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.sqrt(np.mean(d * d)))


def rms_series(result: RunResult, gold: RunResult) -> np.ndarray:
    if result.frames.shape != gold.frames.shape:
        raise ValueError("run and gold disagree on frame count or size")
    d = result.frames.astype(np.float64) - gold.frames.astype(np.float64)
    return np.sqrt((d * d).mean(axis=(1, 2, 3)))


def report(results: dict[str, RunResult], gold: RunResult) -> tuple[str, str]:
    """CSV of per-tick RMS per renderer plus a mean-RMS summary table."""
    names = list(results)
    series = {n: rms_series(results[n], gold) for n in names}
    lines = ["tick_index,time_s," + ",".join(f"rms_{n}" for n in names)]
    for k, t in enumerate(gold.times):
        row = [str(k), f"{t:.6f}"] + [f"{series[n][k]:.6f}" for n in names]
        lines.append(",".join(row))
    csv_text = "\n".join(lines) + "\n"

    summary = ["renderer,mean_rms,overhead_fraction"]
    for n in names:
        summary.append(f"{n},{float(series[n].mean()):.4f},"
                       f"{results[n].overhead_fraction:.4f}")
    return csv_text, "\n".join(summary) + "\n"


# -- disk I/O -------------------------------------------------------------------

def write_ppm(path: str, image_u8: np.ndarray) -> None:
    h, w, _ = image_u8.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(image_u8.tobytes())


def read_ppm(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P6"):
        raise ValueError(f"{path}: not a binary PPM")
    parts = data.split(b"\n", 3)
    w, h = (int(x) for x in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8, count=w * h * 3).reshape(h, w, 3)


def save_run(result: RunResult, out_dir: str, ppm_every: int = 1) -> None:
    os.makedirs(out_dir, exist_ok=True)
    cfg = result.config
    meta = {
        "scene": cfg.scene, "anim": cfg.anim, "mode": cfg.mode,
        "budget": cfg.budget, "width": cfg.width, "height": cfg.height,
        "duration": cfg.duration, "seed": cfg.seed, "refresh_hz": cfg.refresh_hz,
        "reprojections": cfg.reprojections,
        "counts": result.counts, "overhead_fraction": result.overhead_fraction,
        "packets": result.packets,
    }
    with open(os.path.join(out_dir, "run.json"), "w") as f:
        json.dump(meta, f, indent=1, sort_keys=True)
    np.savez_compressed(os.path.join(out_dir, "frames.npz"),
                        frames=result.frames, times=result.times)
    if ppm_every > 0:
        fdir = os.path.join(out_dir, "frames")
        os.makedirs(fdir, exist_ok=True)
        for k in range(0, result.frames.shape[0], ppm_every):
            write_ppm(os.path.join(fdir, f"tick_{k:05d}.ppm"), result.frames[k])


def load_run(out_dir: str) -> RunResult:
    with open(os.path.join(out_dir, "run.json")) as f:
        meta = json.load(f)
    data = np.load(os.path.join(out_dir, "frames.npz"))
    cfg = RunConfig(scene=meta["scene"], mode=meta["mode"], budget=meta["budget"],
                    width=meta["width"], height=meta["height"],
                    duration=meta["duration"], seed=meta["seed"],
                    refresh_hz=meta["refresh_hz"], anim=meta["anim"],
                    reprojections=meta.get("reprojections"))
    return RunResult(config=cfg, frames=data["frames"], times=data["times"],
                     counts=meta.get("counts", {}),
                     overhead_fraction=meta.get("overhead_fraction", 0.0),
                     packets=meta.get("packets", 0))
