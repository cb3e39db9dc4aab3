"""Closed-loop adaptive sampler.

Each iteration visits a uniformly random tile, completes the crosshair
pending there with five cotemporal samples, reprojects a handful of existing
crosshairs through the current camera (flagging ones that became occluded),
and initiates the next crosshair at a fresh position. New samples stream to
the reconstructor; the tiling is refit after every chunk of completions and
a view/tiling packet is emitted once per display refresh interval.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .buffers import (DEFAULT_DEPTH, Crosshair, DeepBuffer, PendingGrid,
                      PendingSample, Sample, spatial_gradients,
                      temporal_gradient)
from .clock import (RETILE_OVERHEAD_SAMPLES, STATS_OVERHEAD_SAMPLES,
                    VirtualClock)
from .geometry import CameraPose
from .tiling import (GRADIENT_FLOOR, BlockStats, CrosshairPool, Retiler, Tile,
                     TilingTree, block_stats, compute_target_tiles,
                     control_inputs)


@dataclass
class SamplerConfig:
    depth: int = DEFAULT_DEPTH          # per-pixel queue depth b
    reprojections: int = 5              # r crosshairs relocated per iteration
    chunk: int = 25                     # completed crosshairs per retiling
    gain: float = 1.0                   # i, temporal-vs-spatial importance
    kappa: float = 0.6                  # variance share of tile error
    lam: float = 0.2                    # undersampling share of tile error
    undersample_m: float = 2.0          # emptiness multiple that triggers bias
    gradient_floor: float = GRADIENT_FLOOR
    initial_tiles: int = 64
    refresh_hz: float = 60.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.kappa <= 1.0 and 0.0 <= self.lam <= 1.0
                and 0.0 <= self.kappa + self.lam <= 1.0):
            raise ValueError("kappa, lam and their sum must lie in [0, 1]")
        if self.reprojections < 0:
            raise ValueError("reprojections must be >= 0")
        if self.chunk < 1:
            raise ValueError("chunk must be >= 1")

    def tile_bounds(self, w: int, h: int) -> tuple[int, int]:
        wh = w * h
        lo = min(16, wh)
        hi = max(lo, wh // 16)
        return lo, hi


@dataclass
class TileRecord:
    rect: tuple[int, int, int, int]
    gx: float
    gy: float
    gt: float
    rate: float                         # samples per pixel per second


@dataclass
class RefreshPacket:
    timestamp: float
    pose: CameraPose
    tiles: list[TileRecord]


def select_tile(leaves: list[Tile], rng: random.Random) -> Tile:
    """Uniform choice over the current cut."""
    if not leaves:
        raise ValueError("empty tiling cut")
    return leaves[rng.randrange(len(leaves))]


def select_position(tile: Tile, rng: random.Random) -> tuple[float, float]:
    """Uniform sub-pixel position over the tile's continuous area."""
    x0, y0, x1, y1 = tile.rect
    return x0 + rng.random() * (x1 - x0), y0 + rng.random() * (y1 - y0)


class Sampler:
    """Owns the deep buffer, tiling and sampling loop for one view stream.

    `world` supplies pose(t), trace(x, y, t, pose), visible(point, eye, t)
    and project(point, pose). Samples and RefreshPackets go to the two sink
    callables (normally SpscChannel.put).
    """

    def __init__(self, world, width: int, height: int, clock: VirtualClock,
                 config: SamplerConfig, seed: int,
                 sample_sink, packet_sink=None, on_sample=None):
        self.world = world
        self.w = width
        self.h = height
        self.clock = clock
        self.cfg = config
        self.rng = random.Random(seed)
        self.sample_sink = sample_sink
        self.packet_sink = packet_sink
        self.on_sample = on_sample

        self.buffer = DeepBuffer(width, height, config.depth)
        self.pending = PendingGrid(width, height)
        self.pool = CrosshairPool(width * height * config.depth + 8)
        self.tree = TilingTree(width, height, config.initial_tiles)
        self.retiler = Retiler(self.tree, self.pool, config.depth,
                               config.kappa, config.lam, config.undersample_m)
        self._leaves: list[Tile] = []
        self._refresh_leaves()

        self.completed = 0
        self.since_retile = 0
        self.packets_emitted = 0
        self.last_packet_time = 0.0
        self.last_tile: Tile | None = None
        self.last_n_target = config.initial_tiles
        self.counts = {"new": 0, "reprojected": 0, "occlusion_replaced": 0,
                       "deactivated": 0, "retiles": 0}

    # -- bookkeeping -------------------------------------------------------

    def _refresh_leaves(self) -> None:
        self._leaves = list(self.tree.tiles.values())

    def _attach(self, ch: Crosshair) -> None:
        px, py = ch.pixel
        tile = self.tree.tile_at(px, py)
        self.pool.alloc(ch, tile.id)
        tile.n_entries += 1
        if ch.occluded:
            tile.n_occluded += 1

    def _detach(self, ch: Crosshair) -> None:
        tid = int(self.pool.tile_id[ch.slot])
        tile = self.tree.tiles.get(tid)
        if tile is not None:
            tile.n_entries -= 1
            if ch.occluded:
                tile.n_occluded -= 1
        self.pool.free(ch.slot)
        ch.slot = -1

    def _emit(self, sample: Sample) -> None:
        self.counts["new"] += 1
        if self.on_sample is not None:
            self.on_sample(sample)
        self.sample_sink(sample)

    def _trace_sample(self, x: float, y: float, t: float, pose: CameraPose) -> Sample:
        res = self.world.trace(x, y, t, pose)
        self.clock.charge_samples(1)
        return Sample.from_trace(res, x, y, t)

    def _arm_positions(self, x: float, y: float):
        cands = ((x + 1.0, y), (x - 1.0, y), (x, y + 1.0), (x, y - 1.0))
        return [c if 0.0 <= c[0] < self.w and 0.0 <= c[1] < self.h else None
                for c in cands]

    # -- initialization ----------------------------------------------------

    def initialize(self) -> None:
        """Non-adaptive fill: one crosshair per pixel, cotemporal at t = 0."""
        t0 = self.clock.now
        pose = self.world.pose(t0)
        for py in range(self.h):
            for px in range(self.w):
                x = px + 0.5
                y = py + 0.5
                center = self._trace_sample(x, y, t0, pose)
                self._emit(center)
                arms: list[Sample | None] = []
                for apos in self._arm_positions(x, y):
                    if apos is None:
                        arms.append(None)
                        continue
                    s = self._trace_sample(apos[0], apos[1], t0, pose)
                    self._emit(s)
                    arms.append(s)
                ch = Crosshair(center=center, arms=arms, prev_center=center, gt=0.0)
                ch.gx, ch.gy = spatial_gradients(ch)
                self._push_new(ch)
                self._maybe_emit_packet(pose)

    def _push_new(self, ch: Crosshair) -> None:
        evicted = self.buffer.push(ch)
        self._attach(ch)
        if evicted is not None:
            self._detach(evicted)

    # -- one iteration -----------------------------------------------------

    def step(self) -> None:
        t = self.clock.now
        pose = self.world.pose(t)
        tile = select_tile(self._leaves, self.rng)
        self.last_tile = tile

        entry = self._newest_pending(tile)
        if entry is not None:
            self._complete(tile, entry, t, pose)

        for _ in range(self.cfg.reprojections):
            self._reproject_random(tile, pose)

        self._initiate(tile, t, pose)
        self._maybe_emit_packet(pose)

        if self.since_retile >= self.cfg.chunk:
            self.adjust_tiling()

    def _maybe_emit_packet(self, pose: CameraPose) -> None:
        if self.packet_sink is None:
            return
        now = self.clock.now
        interval = 1.0 / self.cfg.refresh_hz
        if now - self.last_packet_time >= interval:
            self.packet_sink(self.refresh_packet(now, pose))
            # advance by whole intervals so the long-run rate stays exact
            intervals = int((now - self.last_packet_time) / interval)
            self.last_packet_time += intervals * interval

    def _newest_pending(self, tile: Tile) -> PendingSample | None:
        best = None
        stale = []
        for px, py in tile.pending:
            e = self.pending.get(px, py)
            if e is None:
                stale.append((px, py))
            elif best is None or e.sample.t > best.sample.t:
                best = e
        for p in stale:
            tile.pending.discard(p)
        if best is not None:
            px, py = int(best.sample.x), int(best.sample.y)
            self.pending.take(px, py)
            tile.pending.discard((px, py))
        return best

    def _complete(self, tile: Tile, entry: PendingSample, t: float, pose: CameraPose) -> None:
        prev = entry.sample
        x, y = prev.x, prev.y
        center = self._trace_sample(x, y, t, pose)
        self._emit(center)
        arms: list[Sample | None] = []
        for apos in self._arm_positions(x, y):
            if apos is None:
                arms.append(None)
                continue
            s = self._trace_sample(apos[0], apos[1], t, pose)
            self._emit(s)
            arms.append(s)
        ch = Crosshair(center=center, arms=arms, prev_center=prev,
                       occluded=entry.occluded)
        ch.gx, ch.gy = spatial_gradients(ch)
        dt = center.t - prev.t
        ch.gt = temporal_gradient(center, prev) if dt > 0 else 0.0
        self._push_new(ch)
        self.completed += 1
        self.since_retile += 1

    def _initiate(self, tile: Tile, t: float, pose: CameraPose) -> None:
        x, y = select_position(tile, self.rng)
        s = self._trace_sample(x, y, t, pose)
        self._emit(s)
        self.pending.put(PendingSample(sample=s))
        tile.pending.add((int(x), int(y)))

    # -- reprojection ------------------------------------------------------

    def _reproject_random(self, tile: Tile, pose: CameraPose) -> None:
        x0, y0, x1, y1 = tile.rect
        px = self.rng.randrange(x0, x1)
        py = self.rng.randrange(y0, y1)
        if not self.buffer.queue(px, py):
            return
        ch = self.buffer.pop_front(px, py)
        self.reproject_crosshair(ch, pose)

    def reproject_crosshair(self, ch: Crosshair, pose: CameraPose) -> str:
        """Relocate one crosshair (already removed from its queue).

        Returns 'moved', 'occluded' or 'offscreen'. Occluded crosshairs are
        dropped and a replacement is scheduled at their relocated position.
        """
        now = self.clock.now
        self.clock.charge_reprojections(1)
        self.counts["reprojected"] += 1

        def advance(s: Sample):
            dt = now - s.t
            return (s.point[0] + s.velocity[0] * dt,
                    s.point[1] + s.velocity[1] * dt,
                    s.point[2] + s.velocity[2] * dt)

        c_world = advance(ch.center)
        proj = self.world.project(c_world, pose)
        if proj is None or not (0.0 <= proj[0] < self.w and 0.0 <= proj[1] < self.h):
            self._detach(ch)
            self.counts["deactivated"] += 1
            return "offscreen"
        nx, ny = proj
        ch.center.x = nx
        ch.center.y = ny
        for i, arm in enumerate(ch.arms):
            if arm is None:
                continue
            ap = self.world.project(advance(arm), pose)
            if ap is None:
                ch.arms[i] = None
            else:
                arm.x, arm.y = ap

        ch.gx, ch.gy = spatial_gradients(ch)
        dest_q = self.buffer.queue(int(nx), int(ny))
        if dest_q:
            newest = dest_q[0].center
            age = now - newest.t
            if age > 0:
                ch.gt = abs(ch.center.lum - newest.lum) / age

        if not self.world.visible(c_world, pose.eye, now):
            self._detach(ch)
            self.counts["occlusion_replaced"] += 1
            replacement = Sample(color=ch.center.color, lum=ch.center.lum,
                                 x=nx, y=ny, t=ch.center.t, point=c_world,
                                 prim=ch.center.prim, velocity=ch.center.velocity)
            self.pending.put(PendingSample(sample=replacement, occluded=True))
            dest_tile = self.tree.tile_at(int(nx), int(ny))
            dest_tile.pending.add((int(nx), int(ny)))
            return "occluded"

        old_tid = int(self.pool.tile_id[ch.slot])
        new_tile = self.tree.tile_at(int(nx), int(ny))
        if ch.occluded:
            # visible again: the occlusion this entry recorded is resolved
            old = self.tree.tiles.get(old_tid)
            if old is not None:
                old.n_occluded -= 1
            ch.occluded = False
        if new_tile.id != old_tid:
            old = self.tree.tiles.get(old_tid)
            if old is not None:
                old.n_entries -= 1
            new_tile.n_entries += 1
            self.pool.tile_id[ch.slot] = new_tile.id
        self.pool.write(ch)
        evicted = self.buffer.insert_by_time(ch)
        if evicted is not None:
            self._detach(evicted)
        return "moved"

    # -- control -----------------------------------------------------------

    def adjust_tiling(self) -> None:
        now = self.clock.now
        stats = block_stats(self.pool, self.tree.tiles, now, self.tree.next_id)
        g_s, g_t, mean_age = control_inputs(stats, self.tree.tiles)
        bounds = self.cfg.tile_bounds(self.w, self.h)
        n_target = compute_target_tiles(g_s, g_t, mean_age, self.cfg.gain,
                                        self.w, self.h, bounds,
                                        self.cfg.gradient_floor)
        self.last_n_target = n_target
        self.retiler.retile(n_target, now, self.buffer.occupancy)
        self.counts["retiles"] += 1
        self.clock.charge_overhead(
            (RETILE_OVERHEAD_SAMPLES + self.since_retile * STATS_OVERHEAD_SAMPLES)
            * self.clock.sample_cost)
        self.since_retile = 0
        self._refresh_leaves()

    def refresh_packet(self, timestamp: float, pose: CameraPose | None = None) -> RefreshPacket:
        if pose is None:
            pose = self.world.pose(timestamp)
        stats = block_stats(self.pool, self.tree.tiles, timestamp, self.tree.next_id)
        min_window = 1.0 / self.cfg.refresh_hz
        records = []
        for tid, tile in self.tree.tiles.items():
            st = stats[tid]
            if st.count > 0:
                window = max(st.t_max - st.t_min, min_window)
                rate = st.weighted_samples / (tile.area * window)
            else:
                rate = 0.0
            records.append(TileRecord(rect=tile.rect, gx=st.gx, gy=st.gy,
                                      gt=st.gt, rate=max(rate, 1e-9)))
        self.packets_emitted += 1
        return RefreshPacket(timestamp=timestamp, pose=pose, tiles=records)

    # -- introspection ------------------------------------------------------

    def tile_snapshot(self) -> list[dict]:
        """Current tiling with stats, for debug overlays and endpoints."""
        stats = block_stats(self.pool, self.tree.tiles, self.clock.now,
                            self.tree.next_id)
        out = []
        for tid, tile in self.tree.tiles.items():
            st = stats[tid]
            out.append({"rect": list(tile.rect), "entries": tile.n_entries,
                        "occluded": tile.n_occluded, "variance": st.variance,
                        "gx": st.gx, "gy": st.gy, "gt": st.gt})
        return out
