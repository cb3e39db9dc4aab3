"""Scatter-based space-time reconstruction.

Keeps the N newest samples in a temporally ordered ring, reprojects them
through the current camera each refresh, and splats them with axis-aligned
Gaussian space-time kernels. Kernel extents solve e_x*G_x = e_y*G_y = e_t*G_t
under the volume constraint e_x*e_y*e_t = V_s, where V_s = 1/R_t is the
expected space-time volume per sample; gradients and local rates come from
the sampler's refresh packets. Splat footprints adapt to the previous
frame's coverage so sparse regions fill and dense regions stay cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .buffers import Sample
from .geometry import CameraPose, project, project_array
from .sampler import RefreshPacket

MIN_RATE = 0.1                   # samples/px/s floor when local rate degenerates
SPATIAL_EXTENT_CLAMP = (0.5, 64.0)   # px
TEMPORAL_EXTENT_CLAMP = (1.0 / 240.0, 2.0)  # s
SPLAT_DEFAULT = 1.5              # px, size assumed where coverage is unseen
SPLAT_CLAMP = (1.0, 32.0)        # px
UNDERSAMPLED_COUNT = 4
UNDERSAMPLED_GROWTH = 4.0
OVERSAMPLED_COUNT = 32
OVERSAMPLED_SHRINK = 0.7


def sample_volume(rate: float) -> float:
    """Expected space-time volume per sample, 1/R_t (px^2 * s)."""
    return 1.0 / max(rate, MIN_RATE)


def filter_extents(v_s: float, g_x: float, g_y: float, g_t: float,
                   floor: float = 1e-4) -> tuple[float, float, float]:
    """Pre-clamp kernel extents spanning equal expected change per axis.

    Closed forms of e_x*G_x = e_y*G_y = e_t*G_t with e_x*e_y*e_t = V_s;
    gradients are floored before use so the product identity always holds.
    """
    gx = max(g_x, floor)
    gy = max(g_y, floor)
    gt = max(g_t, floor)
    e_x = (v_s * gy * gt / (gx * gx)) ** (1.0 / 3.0)
    e_y = (v_s * gx * gt / (gy * gy)) ** (1.0 / 3.0)
    e_t = (v_s * gx * gy / (gt * gt)) ** (1.0 / 3.0)
    return e_x, e_y, e_t


def clamp_extents(e_x: float, e_y: float, e_t: float) -> tuple[float, float, float]:
    lo_s, hi_s = SPATIAL_EXTENT_CLAMP
    lo_t, hi_t = TEMPORAL_EXTENT_CLAMP
    return (min(max(e_x, lo_s), hi_s), min(max(e_y, lo_s), hi_s),
            min(max(e_t, lo_t), hi_t))


def splat_size(count: int, mean_size: float) -> float:
    """Footprint radius from the previous frame's coverage at a pixel."""
    base = mean_size if count > 0 else SPLAT_DEFAULT
    if count < UNDERSAMPLED_COUNT:
        base *= UNDERSAMPLED_GROWTH
    elif count > OVERSAMPLED_COUNT:
        base *= OVERSAMPLED_SHRINK
    return min(max(base, SPLAT_CLAMP[0]), SPLAT_CLAMP[1])


def reproject_sample(sample: Sample, pose: CameraPose, w: int, h: int,
                     t_now: float):
    """Image position of a sample's world point advanced by its velocity.

    Returns (x, y, depth) or None when behind the eye. Only meaningful for
    hit samples; misses are splatted at their creation position instead.
    """
    dt = t_now - sample.t
    p = (sample.point[0] + sample.velocity[0] * dt,
         sample.point[1] + sample.velocity[1] * dt,
         sample.point[2] + sample.velocity[2] * dt)
    return project(pose, w, h, p)


class ReconBuffer:
    """Ring of the N most recent samples, ordered by arrival (and so by t)."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.point = np.zeros((capacity, 3))
        self.velocity = np.zeros((capacity, 3))
        self.color = np.zeros((capacity, 3))
        self.t = np.zeros(capacity)
        self.sx = np.zeros(capacity)
        self.sy = np.zeros(capacity)
        self.hit = np.zeros(capacity, dtype=bool)
        self._head = 0
        self.count = 0

    def append(self, s: Sample) -> None:
        i = self._head
        self.point[i] = s.point
        self.velocity[i] = s.velocity
        self.color[i] = s.color
        self.t[i] = s.t
        self.sx[i] = s.x
        self.sy[i] = s.y
        self.hit[i] = s.prim is not None
        self._head = (i + 1) % self.capacity
        if self.count < self.capacity:
            self.count += 1

    def extend(self, samples) -> None:
        for s in samples:
            self.append(s)

    def active_indices(self) -> np.ndarray:
        if self.count < self.capacity:
            return np.arange(self.count)
        return np.arange(self.capacity)


class TileInfoGrid:
    """Per-pixel gradients and local sampling rate from the latest packet."""

    def __init__(self, w: int, h: int):
        self.w = w
        self.h = h
        self.gx = np.zeros((h, w))
        self.gy = np.zeros((h, w))
        self.gt = np.zeros((h, w))
        self.rate = np.full((h, w), MIN_RATE)
        self.packets_applied = 0

    def apply_packet(self, packet: RefreshPacket) -> None:
        for rec in packet.tiles:
            x0, y0, x1, y1 = rec.rect
            self.gx[y0:y1, x0:x1] = rec.gx
            self.gy[y0:y1, x0:x1] = rec.gy
            self.gt[y0:y1, x0:x1] = rec.gt
            self.rate[y0:y1, x0:x1] = rec.rate
        self.packets_applied += 1


class CoverageMap:
    def __init__(self, w: int, h: int):
        self.count = np.zeros((h, w), dtype=np.int64)
        self.mean_size = np.zeros((h, w))


@dataclass
class FrameImage:
    color: np.ndarray               # (h, w, 3) linear RGB
    weight: np.ndarray              # (h, w) accumulated kernel weight


def to_srgb_u8(linear: np.ndarray) -> np.ndarray:
    """Gamma-1/2.2 encode a linear image to 8-bit."""
    x = np.clip(linear, 0.0, 1.0)
    return (x ** (1.0 / 2.2) * 255.0 + 0.5).astype(np.uint8)


class Reconstructor:
    """Consumes the sample/packet streams; renders frames on demand."""

    def __init__(self, w: int, h: int, background, capacity: int | None = None):
        self.w = w
        self.h = h
        self.background = np.asarray(background, dtype=float)
        self.buffer = ReconBuffer(capacity if capacity is not None else 4 * w * h)
        self.tile_info = TileInfoGrid(w, h)
        self.coverage = CoverageMap(w, h)
        self._last = np.tile(self.background, (h, w, 1))

    def ingest(self, samples) -> None:
        self.buffer.extend(samples)

    def apply_packet(self, packet: RefreshPacket) -> None:
        self.tile_info.apply_packet(packet)

    def reconstruct(self, pose: CameraPose, t_now: float) -> FrameImage:
        w, h = self.w, self.h
        idx = self.buffer.active_indices()
        weight_acc = np.zeros(h * w)
        color_acc = np.zeros((h * w, 3))
        count_acc = np.zeros(h * w, dtype=np.int64)
        size_acc = np.zeros(h * w)
        if idx.size:
            self._splat(idx, pose, t_now, weight_acc, color_acc, count_acc, size_acc)

        covered = weight_acc > 0.0
        frame = self._last.reshape(h * w, 3).copy()
        frame[covered] = color_acc[covered] / weight_acc[covered][:, None]
        frame = frame.reshape(h, w, 3)
        self._last = frame

        self.coverage.count = count_acc.reshape(h, w)
        with np.errstate(invalid="ignore"):
            mean = np.where(count_acc > 0, size_acc / np.maximum(count_acc, 1), 0.0)
        self.coverage.mean_size = mean.reshape(h, w)
        return FrameImage(color=frame, weight=weight_acc.reshape(h, w))

    def _splat(self, idx: np.ndarray, pose: CameraPose, t_now: float,
               weight_acc, color_acc, count_acc, size_acc) -> None:
        w, h = self.w, self.h
        buf = self.buffer
        dt = np.maximum(t_now - buf.t[idx], 0.0)

        # hit samples follow their world point; misses stay where they were made
        pts = buf.point[idx] + buf.velocity[idx] * dt[:, None]
        px, py, depth = project_array(pose, w, h, pts)
        hit = buf.hit[idx]
        x = np.where(hit, px, buf.sx[idx])
        y = np.where(hit, py, buf.sy[idx])
        on = (x >= 0.0) & (x < w) & (y >= 0.0) & (y < h) & (~hit | (depth > 0.0))
        if not on.any():
            return
        idx = idx[on]
        x = x[on]
        y = y[on]
        dt = dt[on]
        ix = x.astype(np.int64)
        iy = y.astype(np.int64)

        gxa = self.tile_info.gx[iy, ix]
        gya = self.tile_info.gy[iy, ix]
        gta = self.tile_info.gt[iy, ix]
        v_s = 1.0 / np.maximum(self.tile_info.rate[iy, ix], MIN_RATE)
        floor = 1e-4
        gx = np.maximum(gxa, floor)
        gy = np.maximum(gya, floor)
        gt = np.maximum(gta, floor)
        e_x = np.cbrt(v_s * gy * gt / (gx * gx))
        e_y = np.cbrt(v_s * gx * gt / (gy * gy))
        e_t = np.cbrt(v_s * gx * gy / (gt * gt))
        lo_s, hi_s = SPATIAL_EXTENT_CLAMP
        lo_t, hi_t = TEMPORAL_EXTENT_CLAMP
        e_x = np.clip(e_x, lo_s, hi_s)
        e_y = np.clip(e_y, lo_s, hi_s)
        e_t = np.clip(e_t, lo_t, hi_t)

        keep = dt < e_t
        if not keep.any():
            return
        idx = idx[keep]
        x = x[keep]
        y = y[keep]
        dt = dt[keep]
        ix = ix[keep]
        iy = iy[keep]
        e_x = e_x[keep]
        e_y = e_y[keep]
        e_t = e_t[keep]

        cnt = self.coverage.count[iy, ix]
        mean = self.coverage.mean_size[iy, ix]
        base = np.where(cnt > 0, mean, SPLAT_DEFAULT)
        radius = np.where(cnt < UNDERSAMPLED_COUNT, base * UNDERSAMPLED_GROWTH,
                          np.where(cnt > OVERSAMPLED_COUNT, base * OVERSAMPLED_SHRINK, base))
        radius = np.clip(radius, SPLAT_CLAMP[0], SPLAT_CLAMP[1])

        half_x = np.minimum(radius, e_x)
        half_y = np.minimum(radius, e_y)
        sig_x = e_x * 0.5
        sig_y = e_y * 0.5
        sig_t = e_t * 0.5
        wt = np.exp(-(dt * dt) / (2.0 * sig_t * sig_t))
        colors = self.buffer.color[idx]

        # ragged expansion of per-sample footprints: pixel columns with
        # |i + 0.5 - x| <= half_x and rows likewise, flattened across all
        # samples so the whole splat pass is loop-free
        x0 = np.maximum(np.ceil(x - half_x - 0.5), 0).astype(np.int64)
        x1 = np.minimum(np.floor(x + half_x - 0.5), w - 1).astype(np.int64)
        y0 = np.maximum(np.ceil(y - half_y - 0.5), 0).astype(np.int64)
        y1 = np.minimum(np.floor(y + half_y - 0.5), h - 1).astype(np.int64)
        nx = np.maximum(x1 - x0 + 1, 0)
        ny = np.maximum(y1 - y0 + 1, 0)
        cnt = nx * ny
        total = int(cnt.sum())
        if total == 0:
            return
        sid = np.repeat(np.arange(cnt.size), cnt)
        starts = np.concatenate(([0], np.cumsum(cnt)[:-1]))
        off = np.arange(total) - starts[sid]
        nx_s = nx[sid]
        tx = x0[sid] + off % nx_s
        ty = y0[sid] + off // nx_s
        dxp = tx + 0.5 - x[sid]
        dyp = ty + 0.5 - y[sid]
        keep = dxp * dxp + dyp * dyp <= radius[sid] ** 2
        if not keep.any():
            return
        sid = sid[keep]
        tx = tx[keep]
        ty = ty[keep]
        dxp = dxp[keep]
        dyp = dyp[keep]
        wgt = wt[sid] * np.exp(-(dxp * dxp / (2.0 * sig_x[sid] ** 2)
                                 + dyp * dyp / (2.0 * sig_y[sid] ** 2)))
        flat = ty * w + tx
        col = colors[sid]
        n_px = h * w
        weight_acc += np.bincount(flat, weights=wgt, minlength=n_px)
        for c in range(3):
            color_acc[:, c] += np.bincount(flat, weights=wgt * col[:, c], minlength=n_px)
        count_acc += np.bincount(flat, minlength=n_px)
        size_acc += np.bincount(flat, weights=radius[sid], minlength=n_px)
