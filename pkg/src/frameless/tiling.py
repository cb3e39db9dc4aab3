"""Image-space tiling: a K-D tree whose leaves partition the image.

Tiles own block statistics over the crosshairs whose centers they cover:
age-weighted luminance variance, age-weighted mean gradients, mean age,
entry and occlusion counts. The tree is refit incrementally: the tile with
the highest error is split at the midpoint of its longest axis, and the
sibling pair with the least summed error is merged, a bounded number of
operations per call.

Per-crosshair scalars live in a flat numpy pool so whole-tiling statistics
reduce to a few bincounts; membership is tracked by a stable tile id per
pool row plus an image-sized tile-id raster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .buffers import AGE_DECAY, Crosshair

GRADIENT_FLOOR = 1e-4


# -- pure per-tile formulas -------------------------------------------------

def tile_variance(lums, times, now: float) -> float:
    """Age-weighted luminance variance of a block's samples.

    Weights are e^(-3.47 * age); an empty block has variance 0.
    """
    lums = list(lums)
    if not lums:
        return 0.0
    ws = [math.exp(-AGE_DECAY * (now - t)) for t in times]
    wsum = sum(ws)
    if wsum <= 0.0:
        return 0.0
    mean = sum(w * l for w, l in zip(ws, lums)) / wsum
    return sum(w * (l - mean) ** 2 for w, l in zip(ws, lums)) / wsum


def tile_undersampling(area: int, depth: int, n_entries: int,
                       buffer_total: int, n_tiles: int, wh: int, m: float) -> float:
    """Share of a tile's emptiness beyond m times the mean tile emptiness."""
    tile_empty = area * depth - n_entries
    if tile_empty <= 0:
        return 0.0
    mean_empty = (wh * depth - buffer_total) / n_tiles
    return 1.0 - min(1.0, m * mean_empty / tile_empty)


def tile_occlusion(n_occluded: int, area: int, depth: int) -> float:
    """Fraction of the block's capacity holding occlusion-flagged entries."""
    return n_occluded / (area * depth)


def tile_error(area: int, v: float, u: float, o: float,
               v_sum: float, u_sum: float, o_sum: float,
               kappa: float, lam: float) -> float:
    """Size-scaled mix of normalized variance, undersampling and occlusion.

    Terms whose global sum is zero contribute nothing.
    """
    e = 0.0
    if v_sum > 0.0:
        e += kappa * v / v_sum
    if u_sum > 0.0:
        e += lam * u / u_sum
    if o_sum > 0.0:
        e += (1.0 - kappa - lam) * o / o_sum
    return area * e


def compute_target_tiles(g_spatial: float, g_temporal: float, mean_age: float,
                         gain: float, w: int, h: int,
                         bounds: tuple[int, int],
                         gradient_floor: float = GRADIENT_FLOOR) -> int:
    """Tile count balancing spatial and temporal color change per tile.

    Solves gs * S = gain * gt * T for the tile width S, then sizes the tiling
    as w*h / S^2, clamped to bounds. Gradients are floored so a static or
    featureless image degenerates to the bound rather than dividing by zero.
    """
    gs = max(g_spatial, gradient_floor)
    gt = max(g_temporal, gradient_floor)
    s_width = gain * gt * mean_age / gs
    if s_width <= 0.0:
        return bounds[1]
    n = round(w * h / (s_width * s_width))
    return max(bounds[0], min(bounds[1], n))


# -- crosshair pool ----------------------------------------------------------

class CrosshairPool:
    """Flat storage of per-crosshair scalars for vectorized tile statistics."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.l5 = np.zeros((capacity, 5))
        self.lmask = np.zeros((capacity, 5), dtype=bool)
        self.t = np.zeros(capacity)
        self.gx = np.zeros(capacity)
        self.gy = np.zeros(capacity)
        self.gt = np.zeros(capacity)
        self.cx = np.zeros(capacity, dtype=np.int32)
        self.cy = np.zeros(capacity, dtype=np.int32)
        self.active = np.zeros(capacity, dtype=bool)
        self.occluded = np.zeros(capacity, dtype=bool)
        self.tile_id = np.full(capacity, -1, dtype=np.int64)
        self._free = list(range(capacity - 1, -1, -1))

    def alloc(self, ch: Crosshair, tile_id: int) -> int:
        if not self._free:
            raise RuntimeError("crosshair pool exhausted")
        slot = self._free.pop()
        ch.slot = slot
        self.write(ch)
        self.active[slot] = True
        self.tile_id[slot] = tile_id
        return slot

    def write(self, ch: Crosshair) -> None:
        """Refresh the pooled scalars from the crosshair object."""
        s = ch.slot
        lums = ch.sample_lums()
        n = len(lums)
        self.l5[s, :n] = lums
        self.l5[s, n:] = 0.0
        self.lmask[s, :n] = True
        self.lmask[s, n:] = False
        self.t[s] = ch.t
        self.gx[s] = ch.gx
        self.gy[s] = ch.gy
        self.gt[s] = ch.gt
        px, py = ch.pixel
        self.cx[s] = px
        self.cy[s] = py
        self.occluded[s] = ch.occluded

    def free(self, slot: int) -> None:
        self.active[slot] = False
        self.tile_id[slot] = -1
        self._free.append(slot)

    @property
    def n_active(self) -> int:
        return int(self.active.sum())


# -- tiles and tree ----------------------------------------------------------

@dataclass
class Tile:
    id: int
    rect: tuple[int, int, int, int]          # x0, y0, x1, y1 (exclusive)
    parent: "Tile | None" = None
    children: "tuple[Tile, Tile] | None" = None
    n_entries: int = 0
    n_occluded: int = 0
    pending: set = field(default_factory=set)  # pixels with initiated samples

    @property
    def area(self) -> int:
        x0, y0, x1, y1 = self.rect
        return (x1 - x0) * (y1 - y0)

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    def contains(self, px: int, py: int) -> bool:
        x0, y0, x1, y1 = self.rect
        return x0 <= px < x1 and y0 <= py < y1


@dataclass
class BlockStats:
    """Aggregates over one tile's block at a fixed observation time."""

    count: int = 0
    n_occluded: int = 0
    n_samples: int = 0
    variance: float = 0.0
    mean_lum: float = 0.0
    gx: float = 0.0
    gy: float = 0.0
    gt: float = 0.0
    mean_age: float = 0.0
    t_min: float = 0.0
    t_max: float = 0.0
    weighted_samples: float = 0.0


class TilingTree:
    """K-D tree over the image rectangle; leaves are the current tiles."""

    def __init__(self, width: int, height: int, initial_tiles: int = 64):
        self.w = width
        self.h = height
        self._next_id = 0
        self.root = Tile(id=self._take_id(), rect=(0, 0, width, height))
        self.tiles: dict[int, Tile] = {self.root.id: self.root}
        self.tile_id_map = np.full((height, width), self.root.id, dtype=np.int64)
        self._build_uniform(initial_tiles)

    def _take_id(self) -> int:
        i = self._next_id
        self._next_id += 1
        return i

    @property
    def next_id(self) -> int:
        return self._next_id

    def _build_uniform(self, n: int) -> None:
        n = max(1, min(n, self.w * self.h))
        while len(self.tiles) * 2 <= n:
            for tile in [t for t in self.tiles.values() if t.area >= 2]:
                self.split(tile)
        while len(self.tiles) < n:
            big = max((t for t in self.tiles.values() if t.area >= 2),
                      key=lambda t: (t.area, -t.id), default=None)
            if big is None:
                break
            self.split(big)

    def tile_at(self, px: int, py: int) -> Tile:
        return self.tiles[int(self.tile_id_map[py, px])]

    def split(self, tile: Tile) -> tuple[Tile, Tile]:
        """Split a leaf at the midpoint of its longest axis."""
        if not tile.is_leaf:
            raise ValueError("can only split leaf tiles")
        x0, y0, x1, y1 = tile.rect
        wx, wy = x1 - x0, y1 - y0
        if max(wx, wy) < 2:
            raise ValueError("cannot split a tile of area 1")
        if wx >= wy:
            mid = (x0 + x1) // 2
            ra = (x0, y0, mid, y1)
            rb = (mid, y0, x1, y1)
        else:
            mid = (y0 + y1) // 2
            ra = (x0, y0, x1, mid)
            rb = (x0, mid, x1, y1)
        a = Tile(id=self._take_id(), rect=ra, parent=tile)
        b = Tile(id=self._take_id(), rect=rb, parent=tile)
        tile.children = (a, b)
        del self.tiles[tile.id]
        self.tiles[a.id] = a
        self.tiles[b.id] = b
        self.tile_id_map[ra[1]:ra[3], ra[0]:ra[2]] = a.id
        self.tile_id_map[rb[1]:rb[3], rb[0]:rb[2]] = b.id
        for px, py in tile.pending:
            (a if a.contains(px, py) else b).pending.add((px, py))
        tile.pending = set()
        return a, b

    def merge(self, a: Tile, b: Tile) -> Tile:
        """Collapse two sibling leaves back into their parent."""
        parent = a.parent
        if parent is None or parent is not b.parent or parent.children is None:
            raise ValueError("merge requires sibling tiles")
        if not (a.is_leaf and b.is_leaf):
            raise ValueError("merge requires leaf tiles")
        parent.children = None
        parent.n_entries = a.n_entries + b.n_entries
        parent.n_occluded = a.n_occluded + b.n_occluded
        parent.pending = a.pending | b.pending
        del self.tiles[a.id]
        del self.tiles[b.id]
        self.tiles[parent.id] = parent
        x0, y0, x1, y1 = parent.rect
        self.tile_id_map[y0:y1, x0:x1] = parent.id
        return parent

    def sibling_pairs(self) -> list[tuple[Tile, Tile]]:
        pairs = []
        seen = set()
        for tile in self.tiles.values():
            p = tile.parent
            if p is None or p.id in seen or p.children is None:
                continue
            a, b = p.children
            if a.is_leaf and b.is_leaf and a.id in self.tiles and b.id in self.tiles:
                pairs.append((a, b))
                seen.add(p.id)
        return pairs

    def check_partition(self) -> bool:
        """Leaves exactly cover the image with no overlap."""
        area = sum(t.area for t in self.tiles.values())
        if area != self.w * self.h:
            return False
        counts = np.zeros((self.h, self.w), dtype=np.int32)
        for t in self.tiles.values():
            x0, y0, x1, y1 = t.rect
            counts[y0:y1, x0:x1] += 1
        return bool((counts == 1).all())


# -- batched statistics -------------------------------------------------------

def block_stats(pool: CrosshairPool, tiles: dict[int, Tile], now: float,
                max_id: int) -> dict[int, BlockStats]:
    """Per-tile aggregates over the whole pool at observation time `now`."""
    dense = list(tiles.values())
    out = {t.id: BlockStats() for t in dense}
    act = np.flatnonzero(pool.active)
    if act.size == 0:
        return out
    id_map = np.full(max_id, -1, dtype=np.int64)
    for i, t in enumerate(dense):
        id_map[t.id] = i
    idsd = id_map[pool.tile_id[act]]
    if (idsd < 0).any():
        raise RuntimeError("pool rows assigned to tiles outside the cut")
    k = len(dense)
    ages = now - pool.t[act]
    u = np.exp(-AGE_DECAY * ages)
    nslot = pool.lmask[act].sum(axis=1)
    s_l = (pool.l5[act] * pool.lmask[act]).sum(axis=1)

    count = np.bincount(idsd, minlength=k)
    occ = np.bincount(idsd, weights=pool.occluded[act].astype(float), minlength=k)
    nsamp = np.bincount(idsd, weights=nslot.astype(float), minlength=k)
    w_samp = np.bincount(idsd, weights=u * nslot, minlength=k)
    w_lum = np.bincount(idsd, weights=u * s_l, minlength=k)
    wsafe = np.where(w_samp > 0.0, w_samp, 1.0)
    mean_lum = np.where(w_samp > 0.0, w_lum / wsafe, 0.0)
    dev2 = ((pool.l5[act] - mean_lum[idsd][:, None]) ** 2 * pool.lmask[act]).sum(axis=1)
    w_var = np.bincount(idsd, weights=u * dev2, minlength=k)
    variance = np.where(w_samp > 0.0, w_var / wsafe, 0.0)

    w_ch = np.bincount(idsd, weights=u, minlength=k)
    wch_safe = np.where(w_ch > 0.0, w_ch, 1.0)
    gx = np.bincount(idsd, weights=u * pool.gx[act], minlength=k) / wch_safe
    gy = np.bincount(idsd, weights=u * pool.gy[act], minlength=k) / wch_safe
    gt = np.bincount(idsd, weights=u * pool.gt[act], minlength=k) / wch_safe

    age_sum = np.bincount(idsd, weights=ages, minlength=k)
    mean_age = np.where(count > 0, age_sum / np.where(count > 0, count, 1), 0.0)
    t_min = np.full(k, np.inf)
    t_max = np.full(k, -np.inf)
    np.minimum.at(t_min, idsd, pool.t[act])
    np.maximum.at(t_max, idsd, pool.t[act])

    for i, t in enumerate(dense):
        if count[i] == 0:
            continue
        out[t.id] = BlockStats(
            count=int(count[i]), n_occluded=int(round(occ[i])), n_samples=int(nsamp[i]),
            variance=float(variance[i]), mean_lum=float(mean_lum[i]),
            gx=float(gx[i]), gy=float(gy[i]), gt=float(gt[i]),
            mean_age=float(mean_age[i]),
            t_min=float(t_min[i]), t_max=float(t_max[i]),
            weighted_samples=float(w_samp[i]),
        )
    return out


def subset_stats(pool: CrosshairPool, slots: np.ndarray, now: float) -> BlockStats:
    """Aggregates over an explicit set of pool rows (one tile's members)."""
    if slots.size == 0:
        return BlockStats()
    ages = now - pool.t[slots]
    u = np.exp(-AGE_DECAY * ages)
    nslot = pool.lmask[slots].sum(axis=1)
    s_l = (pool.l5[slots] * pool.lmask[slots]).sum(axis=1)
    w_samp = float((u * nslot).sum())
    if w_samp > 0.0:
        mean_lum = float((u * s_l).sum() / w_samp)
        dev2 = ((pool.l5[slots] - mean_lum) ** 2 * pool.lmask[slots]).sum(axis=1)
        variance = float((u * dev2).sum() / w_samp)
    else:
        mean_lum = 0.0
        variance = 0.0
    w_ch = float(u.sum())
    inv = 1.0 / w_ch if w_ch > 0.0 else 0.0
    return BlockStats(
        count=int(slots.size),
        n_occluded=int(pool.occluded[slots].sum()),
        n_samples=int(nslot.sum()),
        variance=variance, mean_lum=mean_lum,
        gx=float((u * pool.gx[slots]).sum() * inv),
        gy=float((u * pool.gy[slots]).sum() * inv),
        gt=float((u * pool.gt[slots]).sum() * inv),
        mean_age=float(ages.mean()),
        t_min=float(pool.t[slots].min()),
        t_max=float(pool.t[slots].max()),
        weighted_samples=w_samp,
    )


def control_inputs(stats: dict[int, BlockStats], tiles: dict[int, Tile]) -> tuple[float, float, float]:
    """Area-weighted image-wide mean spatial gradient, temporal gradient, age.

    Empty tiles carry no samples and are skipped.
    """
    g_s = g_t = age = wsum = 0.0
    for tid, st in stats.items():
        if st.count == 0:
            continue
        a = tiles[tid].area
        g_s += a * 0.5 * (st.gx + st.gy)
        g_t += a * st.gt
        age += a * st.mean_age
        wsum += a
    if wsum == 0.0:
        return 0.0, 0.0, 0.0
    return g_s / wsum, g_t / wsum, age / wsum


# -- retiling ------------------------------------------------------------------

MAX_RETILE_OPS = 8
BALANCE_RATIO = 2.0


class Retiler:
    """Split/merge driver keeping per-tile error terms current between ops."""

    def __init__(self, tree: TilingTree, pool: CrosshairPool, depth: int,
                 kappa: float, lam: float, m: float):
        self.tree = tree
        self.pool = pool
        self.depth = depth
        self.kappa = kappa
        self.lam = lam
        self.m = m

    def _tile_slots(self, tile: Tile) -> np.ndarray:
        mask = self.pool.active & (self.pool.tile_id == tile.id)
        return np.flatnonzero(mask)

    def _errors(self, v: dict[int, float], o: dict[int, float],
                buffer_total: int) -> dict[int, float]:
        tiles = self.tree.tiles
        n_tiles = len(tiles)
        wh = self.tree.w * self.tree.h
        u = {tid: tile_undersampling(t.area, self.depth, t.n_entries, buffer_total,
                                     n_tiles, wh, self.m)
             for tid, t in tiles.items()}
        v_sum = sum(v.values())
        u_sum = sum(u.values())
        o_sum = sum(o.values())
        return {tid: tile_error(tiles[tid].area, v[tid], u[tid], o[tid],
                                v_sum, u_sum, o_sum, self.kappa, self.lam)
                for tid in tiles}

    def retile(self, n_target: int, now: float, buffer_total: int,
               max_ops: int = MAX_RETILE_OPS) -> int:
        tree = self.tree
        stats = block_stats(self.pool, tree.tiles, now, tree.next_id)
        v = {tid: st.variance for tid, st in stats.items()}
        o = {tid: tile_occlusion(st.n_occluded, tree.tiles[tid].area, self.depth)
             for tid, st in stats.items()}
        n_target = max(1, min(n_target, tree.w * tree.h))
        ops = 0
        while ops < max_ops:
            errors = self._errors(v, o, buffer_total)
            n = len(tree.tiles)
            if n < n_target:
                if not self._split_max(errors, v, o, now):
                    break
                ops += 1
            elif n > n_target:
                if not self._merge_min(errors, v, o, now):
                    break
                ops += 1
            else:
                ranked = sorted(errors.items(), key=lambda kv: (kv[1], kv[0]))
                lo_e = ranked[0][1]
                hi_e = ranked[-1][1]
                if hi_e <= BALANCE_RATIO * lo_e + 1e-12 or ops + 2 > max_ops:
                    break
                if not self._merge_min(errors, v, o, now):
                    break
                ops += 1
                errors = self._errors(v, o, buffer_total)
                if not self._split_max(errors, v, o, now):
                    break
                ops += 1
        return ops

    def _split_max(self, errors, v, o, now: float) -> bool:
        cands = [t for t in self.tree.tiles.values()
                 if t.area >= 2 and max(t.rect[2] - t.rect[0], t.rect[3] - t.rect[1]) >= 2]
        if not cands:
            return False
        tile = max(cands, key=lambda t: (errors[t.id], -t.id))
        slots = self._tile_slots(tile)
        a, b = self.tree.split(tile)
        if slots.size:
            x0, y0, x1, y1 = a.rect
            in_a = ((self.pool.cx[slots] >= x0) & (self.pool.cx[slots] < x1)
                    & (self.pool.cy[slots] >= y0) & (self.pool.cy[slots] < y1))
            self.pool.tile_id[slots[in_a]] = a.id
            self.pool.tile_id[slots[~in_a]] = b.id
        for child in (a, b):
            cs = slots[self.pool.tile_id[slots] == child.id] if slots.size else slots
            st = subset_stats(self.pool, cs, now)
            child.n_entries = st.count
            child.n_occluded = st.n_occluded
            v[child.id] = st.variance
            o[child.id] = tile_occlusion(st.n_occluded, child.area, self.depth)
        del v[tile.id], o[tile.id]
        return True

    def _merge_min(self, errors, v, o, now: float) -> bool:
        pairs = self.tree.sibling_pairs()
        if not pairs:
            return False
        a, b = min(pairs, key=lambda p: (errors[p[0].id] + errors[p[1].id],
                                         p[0].id))
        slots = np.concatenate([self._tile_slots(a), self._tile_slots(b)])
        parent = self.tree.merge(a, b)
        if slots.size:
            self.pool.tile_id[slots] = parent.id
        st = subset_stats(self.pool, slots, now)
        parent.n_entries = st.count
        parent.n_occluded = st.n_occluded
        for tid in (a.id, b.id):
            del v[tid], o[tid]
        v[parent.id] = st.variance
        o[parent.id] = tile_occlusion(st.n_occluded, parent.area, self.depth)
        return True
