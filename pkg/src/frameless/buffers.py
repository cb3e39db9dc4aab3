"""Samples, crosshairs, and the sampler's temporally deep buffer.

The buffer is a w*h grid of short per-pixel queues (depth b, default 4) whose
entries are whole crosshairs keyed by their center pixel. Queues are kept
newest-first; pushing past the depth evicts the oldest entry. Sample age is
never stored, always derived from the clock, so exponential age weights stay
current.
"""

from __future__ import annotations

import json
import math
from bisect import insort
from dataclasses import dataclass, field

from .geometry import Vec3
from .tracer import TraceResult, luminance

AGE_DECAY = 3.47        # exponent of the age-weighting falloff, per second
DEFAULT_DEPTH = 4


def age_weight(age: float) -> float:
    """Recency weight e^(-3.47 * age); 1 at age 0, strictly decreasing."""
    if age < 0:
        raise ValueError(f"age must be >= 0, got {age}")
    return math.exp(-AGE_DECAY * age)


@dataclass
class Sample:
    """One shaded point sample located in image space and time."""

    __slots__ = ("color", "lum", "x", "y", "t", "point", "prim", "velocity")

    color: Vec3
    lum: float
    x: float
    y: float
    t: float
    point: Vec3
    prim: int | None
    velocity: Vec3

    @classmethod
    def from_trace(cls, res: TraceResult, x: float, y: float, t: float) -> "Sample":
        return cls(color=res.color, lum=luminance(res.color), x=x, y=y, t=t,
                   point=res.point, prim=res.prim if res.hit else None,
                   velocity=res.velocity)


# arm order: +x, -x, +y, -y
ARM_OFFSETS = ((1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0))


@dataclass
class Crosshair:
    """Center sample, up to four cotemporal one-pixel arms, and the earlier
    co-located sample that anchors the temporal gradient."""

    center: Sample
    arms: list[Sample | None]            # [+x, -x, +y, -y]; None where off-image
    prev_center: Sample
    gx: float = 0.0
    gy: float = 0.0
    gt: float = 0.0
    slot: int = -1                       # row in the sampler's stat pool
    occluded: bool = False               # entry records a detected occlusion

    @property
    def t(self) -> float:
        return self.center.t

    @property
    def pixel(self) -> tuple[int, int]:
        return int(self.center.x), int(self.center.y)

    def sample_lums(self) -> list[float]:
        out = [self.center.lum]
        out.extend(a.lum for a in self.arms if a is not None)
        return out

    def samples(self) -> list[Sample]:
        out = [self.center]
        out.extend(a for a in self.arms if a is not None)
        return out


def spatial_gradients(crosshair: Crosshair) -> tuple[float, float]:
    """Average absolute luminance difference per pixel along x and y.

    Arm-to-center image distances are 1 px at creation; after reprojection the
    actual distances are used. Missing arms fall back to the available side;
    a fully missing axis yields 0.
    """
    c = crosshair.center
    gx = _axis_gradient(c, crosshair.arms[0], crosshair.arms[1], axis=0)
    gy = _axis_gradient(c, crosshair.arms[2], crosshair.arms[3], axis=1)
    return gx, gy


def _axis_gradient(center: Sample, plus: Sample | None, minus: Sample | None, axis: int) -> float:
    total = 0.0
    count = 0
    for arm in (plus, minus):
        if arm is None:
            continue
        dist = abs((arm.x - center.x) if axis == 0 else (arm.y - center.y))
        if dist < 1e-9:
            continue
        total += abs(center.lum - arm.lum) / dist
        count += 1
    return total / count if count else 0.0


def temporal_gradient(center: Sample, prev_center: Sample) -> float:
    """Absolute luminance change per second between two co-located samples."""
    dt = center.t - prev_center.t
    if dt <= 0:
        raise ValueError(f"center must be newer than prev_center (dt={dt})")
    return abs(center.lum - prev_center.lum) / dt


class DeepBuffer:
    """Grid of newest-first crosshair queues with bounded depth."""

    def __init__(self, width: int, height: int, depth: int = DEFAULT_DEPTH):
        if depth < 1:
            raise ValueError("depth must be >= 1")
        self.w = width
        self.h = height
        self.depth = depth
        self._queues: list[list[Crosshair]] = [[] for _ in range(width * height)]
        self.occupancy = 0

    def queue(self, px: int, py: int) -> list[Crosshair]:
        return self._queues[py * self.w + px]

    def _check_bounds(self, px: int, py: int) -> None:
        if not (0 <= px < self.w and 0 <= py < self.h):
            raise IndexError(f"pixel ({px}, {py}) outside {self.w}x{self.h} image")

    def push(self, crosshair: Crosshair) -> Crosshair | None:
        """Insert at the front (newest); returns the evicted entry if full."""
        px, py = crosshair.pixel
        self._check_bounds(px, py)
        q = self._queues[py * self.w + px]
        q.insert(0, crosshair)
        self.occupancy += 1
        if len(q) > self.depth:
            evicted = q.pop()
            self.occupancy -= 1
            return evicted
        return None

    def insert_by_time(self, crosshair: Crosshair) -> Crosshair | None:
        """Insert keeping newest-first timestamp order (reprojection moves).

        Entries older than everything present land at the back; the oldest
        entry is evicted when the queue overflows.
        """
        px, py = crosshair.pixel
        self._check_bounds(px, py)
        q = self._queues[py * self.w + px]
        i = 0
        while i < len(q) and q[i].t > crosshair.t:
            i += 1
        q.insert(i, crosshair)
        self.occupancy += 1
        if len(q) > self.depth:
            evicted = q.pop()
            self.occupancy -= 1
            return evicted
        return None

    def pop_front(self, px: int, py: int) -> Crosshair | None:
        self._check_bounds(px, py)
        q = self._queues[py * self.w + px]
        if not q:
            return None
        self.occupancy -= 1
        return q.pop(0)

    def remove(self, crosshair: Crosshair) -> bool:
        px, py = crosshair.pixel
        q = self._queues[py * self.w + px]
        for i, ch in enumerate(q):
            if ch is crosshair:
                q.pop(i)
                self.occupancy -= 1
                return True
        return False

    def __iter__(self):
        for q in self._queues:
            yield from q

    def dump(self, path: str) -> None:
        """Debug dump of queue contents as JSON (test-fixture aid)."""
        doc = []
        for py in range(self.h):
            for px in range(self.w):
                q = self._queues[py * self.w + px]
                if not q:
                    continue
                doc.append({
                    "pixel": [px, py],
                    "entries": [{
                        "t": ch.t, "x": ch.center.x, "y": ch.center.y,
                        "lum": ch.center.lum, "gx": ch.gx, "gy": ch.gy, "gt": ch.gt,
                        "occluded": ch.occluded,
                    } for ch in q],
                })
        with open(path, "w") as f:
            json.dump(doc, f, indent=1)


@dataclass
class PendingSample:
    """An initiated crosshair center awaiting completion."""

    sample: Sample
    occluded: bool = False


class PendingGrid:
    """Image-sized array of initiated crosshair centers, at most one per pixel.

    Pending entries live outside the tiling and contribute nothing to tile
    statistics until their crosshair is completed.
    """

    def __init__(self, width: int, height: int):
        self.w = width
        self.h = height
        self._cells: list[PendingSample | None] = [None] * (width * height)
        self.count = 0

    def get(self, px: int, py: int) -> PendingSample | None:
        return self._cells[py * self.w + px]

    def put(self, entry: PendingSample) -> PendingSample | None:
        """Store an entry; returns any displaced entry at the same pixel."""
        px, py = int(entry.sample.x), int(entry.sample.y)
        if not (0 <= px < self.w and 0 <= py < self.h):
            raise IndexError(f"pending sample at ({px}, {py}) outside image")
        idx = py * self.w + px
        old = self._cells[idx]
        self._cells[idx] = entry
        if old is None:
            self.count += 1
        return old

    def take(self, px: int, py: int) -> PendingSample | None:
        idx = py * self.w + px
        entry = self._cells[idx]
        if entry is not None:
            self._cells[idx] = None
            self.count -= 1
        return entry
