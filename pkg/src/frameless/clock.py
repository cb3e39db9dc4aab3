"""Deterministic virtual time with per-ray budget accounting.

In simulated mode, time advances only when work is charged: a primary sample
costs 1/budget seconds, a reprojection 1/35th of that, and control work
(retiling, statistics) is charged as explicit overhead durations that are
also tallied separately for the overhead-fraction report. Wall-clock mode
reads real time and keeps the same tallies purely for reporting.
"""

from __future__ import annotations

import time

REPROJECT_COST_DIVISOR = 35.0
RETILE_OVERHEAD_SAMPLES = 10.0      # sample-cost equivalents charged per retile call
STATS_OVERHEAD_SAMPLES = 0.05       # sample-cost equivalents per crosshair stats update


class VirtualClock:
    """Single-writer clock; `now` is non-decreasing."""

    def __init__(self, budget: float, mode: str = "simulated"):
        if budget <= 0:
            raise ValueError(f"budget must be positive, got {budget}")
        if mode not in ("simulated", "wall"):
            raise ValueError(f"unknown clock mode {mode!r}")
        self.mode = mode
        self.budget = float(budget)
        self.sample_cost = 1.0 / float(budget)
        self.reproject_cost = self.sample_cost / REPROJECT_COST_DIVISOR
        self._now = 0.0
        self._overhead = 0.0
        self._charged = 0.0
        self._samples = 0
        self._reprojections = 0
        self._wall_start = time.monotonic() if mode == "wall" else 0.0

    @property
    def now(self) -> float:
        if self.mode == "wall":
            return time.monotonic() - self._wall_start
        return self._now

    @property
    def overhead_seconds(self) -> float:
        return self._overhead

    @property
    def charged_seconds(self) -> float:
        """Sum of all charged costs; equals `now` exactly in simulated mode."""
        return self._charged

    @property
    def samples_charged(self) -> int:
        return self._samples

    @property
    def reprojections_charged(self) -> int:
        return self._reprojections

    def charge_samples(self, n: int = 1) -> float:
        cost = n * self.sample_cost
        self._charged += cost
        self._samples += n
        if self.mode == "simulated":
            self._now += cost
        return self.now

    def charge_reprojections(self, n: int = 1) -> float:
        cost = n * self.reproject_cost
        self._charged += cost
        self._reprojections += n
        if self.mode == "simulated":
            self._now += cost
        return self.now

    def charge_overhead(self, duration: float) -> float:
        if duration < 0:
            raise ValueError("overhead duration must be >= 0")
        self._charged += duration
        self._overhead += duration
        if self.mode == "simulated":
            self._now += duration
        return self.now

    def overhead_fraction(self) -> float:
        # In wall mode the denominator is modeled compute, not elapsed real time.
        total = self._now if self.mode == "simulated" else self._charged
        if total <= 0.0:
            return 0.0
        return self._overhead / total
