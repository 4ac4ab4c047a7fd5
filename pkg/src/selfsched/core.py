"""Shared domain types and load-imbalance metrics.

All simulated time is in abstract units; every metric below is a ratio, so
the unit cancels. Costs and times are 64-bit floats, counts are Python ints.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

__all__ = [
    "Workload",
    "SystemModel",
    "ChunkAssignment",
    "LoopRecord",
    "lib_percent",
    "execution_imbalance",
    "cov",
]


@runtime_checkable
class Workload(Protocol):
    """A parallel loop whose iteration costs may evolve across time-steps.

    ``cost_of(t, i)`` must be a pure function of its arguments and an internal
    seed: equal queries return equal values, regardless of query order.
    """

    n_iterations: int
    n_timesteps: int

    def cost_of(self, timestep: int, index: int) -> float: ...

    def costs(self, timestep: int) -> np.ndarray: ...


@dataclass(frozen=True)
class SystemModel:
    """Execution platform for one simulated loop.

    ``speed`` entries multiply iteration cost (1.0 nominal, 2.0 = twice as
    slow).  ``h`` is the overhead charged once per scheduling round.
    ``start_offset`` delays each thread's first work request.  ``noise_sigma``
    is the relative standard deviation of the multiplicative per-chunk
    execution noise; 0 disables noise entirely.
    """

    p: int
    h: float = 0.0
    speed: tuple[float, ...] = ()
    start_offset: tuple[float, ...] = ()
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.h < 0:
            raise ValueError("h must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        speed = tuple(float(s) for s in self.speed) or (1.0,) * self.p
        offset = tuple(float(o) for o in self.start_offset) or (0.0,) * self.p
        if len(speed) != self.p:
            raise ValueError(f"speed needs {self.p} entries, got {len(speed)}")
        if len(offset) != self.p:
            raise ValueError(f"start_offset needs {self.p} entries, got {len(offset)}")
        if any(s <= 0 for s in speed):
            raise ValueError("speed factors must be > 0")
        if any(o < 0 for o in offset):
            raise ValueError("start offsets must be >= 0")
        object.__setattr__(self, "speed", speed)
        object.__setattr__(self, "start_offset", offset)


@dataclass(frozen=True)
class ChunkAssignment:
    """One delivered chunk: thread, iteration range, and its timing."""

    thread_id: int
    start: int
    size: int
    request_time: float
    finish_time: float

    @property
    def end(self) -> int:
        return self.start + self.size


@dataclass(frozen=True)
class LoopRecord:
    """Outcome of simulating one loop instance."""

    assignments: tuple[ChunkAssignment, ...]
    finish: tuple[float, ...]
    t_par: float
    lib_percent: float
    n_rounds: int


def _finish_array(finish: Sequence[float]) -> np.ndarray:
    arr = np.asarray(finish, dtype=float)
    if arr.size == 0:
        raise ValueError("need at least one finishing time")
    if np.any(arr < 0):
        raise ValueError("finishing times must be >= 0")
    if arr.max() <= 0:
        raise ValueError("at least one finishing time must be > 0")
    return arr


def lib_percent(finish: Sequence[float]) -> float:
    """Percent load imbalance: (1 - mean(finish)/max(finish)) * 100.

    Zero iff all finishing times are equal; always in [0, 100).
    """
    arr = _finish_array(finish)
    return float((1.0 - arr.mean() / arr.max()) * 100.0)


def execution_imbalance(finish: Sequence[float], p: int) -> float:
    """Execution imbalance percent: (max - mean)/max * P/(P-1) * 100."""
    if p < 2:
        raise ValueError("execution imbalance needs p >= 2")
    arr = _finish_array(finish)
    mx = arr.max()
    return float((mx - arr.mean()) / mx * (p / (p - 1)) * 100.0)


def cov(values: Sequence[float]) -> float:
    """Coefficient of variation: sample standard deviation over the mean."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("need at least one value")
    mean = arr.mean()
    if mean <= 0:
        raise ValueError("coefficient of variation needs a positive mean")
    if arr.size < 2:
        return 0.0
    return float(arr.std(ddof=1) / mean)
