"""Synthetic workload generators and trace-file ingestion.

Generators are shaped after common loop behaviours: flat cost, mild gaussian
spread, a fixed or time-evolving linear imbalance ramp, a shuffled power-law
tail, and smoothly re-randomized per-step bumps.  Every generator is a pure
function of (timestep, index, seed), so query order never matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WorkloadSpec",
    "WORKLOAD_KINDS",
    "build_workload",
    "load_trace",
    "dump_workload",
    "TraceError",
]

WORKLOAD_KINDS = (
    "uniform",
    "gaussian",
    "constant_imbalance",
    "increasing_imbalance",
    "decreasing_imbalance",
    "powerlaw",
    "timevarying",
    "trace",
)

# Parameters each synthetic kind accepts (all floats; cost defaults to 1.0).
_KIND_PARAMS = {
    "uniform": {"cost"},
    "gaussian": {"cost", "sigma"},
    "constant_imbalance": {"cost", "amplitude"},
    "increasing_imbalance": {"cost", "amplitude"},
    "decreasing_imbalance": {"cost", "amplitude"},
    "powerlaw": {"cost", "exponent"},
    "timevarying": {"cost", "amplitude"},
}

_DEFAULTS = {"cost": 1.0, "sigma": 0.1, "amplitude": 1.0, "exponent": 1.0}


class TraceError(ValueError):
    """Raised for malformed trace files; message names the offending line."""


@dataclass(frozen=True)
class WorkloadSpec:
    """Declarative description of a workload, resolvable by build_workload."""

    kind: str
    n: int = 0
    t: int = 0
    params: dict = field(default_factory=dict)
    seed: int = 0
    path: str | None = None  # trace kind only

    def param(self, name: str) -> float:
        return float(self.params.get(name, _DEFAULTS[name]))

    def validate(self) -> None:
        if self.kind not in WORKLOAD_KINDS:
            raise ValueError(f"unknown workload kind {self.kind!r} (known: {', '.join(WORKLOAD_KINDS)})")
        if self.kind == "trace":
            if not self.path:
                raise ValueError("trace workload needs a path")
            return
        if self.n < 1 or self.t < 1:
            raise ValueError("workload needs n >= 1 and t >= 1")
        allowed = _KIND_PARAMS[self.kind]
        for key in self.params:
            if key not in allowed:
                raise ValueError(f"workload kind {self.kind!r} does not take parameter {key!r}")
        if self.param("cost") <= 0:
            raise ValueError("cost must be > 0")
        if self.kind == "gaussian" and self.param("sigma") < 0:
            raise ValueError("sigma must be >= 0")
        if self.kind == "powerlaw" and self.param("exponent") <= 0:
            raise ValueError("exponent must be > 0")
        if "amplitude" in allowed and self.param("amplitude") < 0:
            raise ValueError("amplitude must be >= 0")


class _CachedRows:
    """Small per-instance row cache; oracle sweeps hit the same step 12+ times."""

    _CAP = 8

    def __init__(self):
        self._rows: dict[int, np.ndarray] = {}

    def get(self, t, build):
        row = self._rows.get(t)
        if row is None:
            row = np.asarray(build(t), dtype=float)
            row.flags.writeable = False
            if len(self._rows) >= self._CAP:
                self._rows.pop(next(iter(self._rows)))
            self._rows[t] = row
        return row


class SyntheticWorkload:
    """Workload realized from a WorkloadSpec; immutable after construction."""

    def __init__(self, spec: WorkloadSpec):
        spec.validate()
        if spec.kind == "trace":
            raise ValueError("trace workloads are built by load_trace")
        self.spec = spec
        self.n_iterations = spec.n
        self.n_timesteps = spec.t
        self._cache = _CachedRows()
        self._base = self._build_base()

    def _build_base(self) -> np.ndarray | None:
        spec = self.spec
        n = spec.n
        cost = spec.param("cost")
        idx = np.arange(n, dtype=float)
        if spec.kind == "uniform":
            return np.full(n, cost)
        if spec.kind == "gaussian":
            rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 0xB0D7)))
            row = rng.normal(cost, spec.param("sigma") * cost, size=n)
            return np.maximum(row, 1e-6 * cost)
        if spec.kind == "powerlaw":
            rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 0xF0)))
            row = cost * (1.0 + idx) ** (-spec.param("exponent"))
            return row[rng.permutation(n)]
        if spec.kind in ("constant_imbalance", "increasing_imbalance", "decreasing_imbalance"):
            # Linear ramp over the iteration space; amplitude may evolve in t.
            return idx / n
        return None

    def _row(self, t: int) -> np.ndarray:
        spec = self.spec
        n, cost = spec.n, spec.param("cost")
        kind = spec.kind
        if kind in ("uniform", "gaussian", "powerlaw"):
            return self._base
        if kind == "constant_imbalance":
            return cost * (1.0 + spec.param("amplitude") * self._base)
        if kind in ("increasing_imbalance", "decreasing_imbalance"):
            denom = max(spec.t - 1, 1)
            frac = t / denom
            if kind == "decreasing_imbalance":
                frac = (spec.t - 1 - t) / denom
            return cost * (1.0 + spec.param("amplitude") * frac * self._base)
        if kind == "timevarying":
            rng = np.random.default_rng(np.random.SeedSequence((spec.seed, t, 0x71E)))
            u = np.arange(n, dtype=float) / n
            bump = np.zeros(n)
            for _ in range(3):
                center = rng.uniform(0.0, 1.0)
                width = rng.uniform(0.05, 0.2)
                height = rng.uniform(0.2, 1.0)
                bump += height * np.exp(-0.5 * ((u - center) / width) ** 2)
            return cost * (1.0 + spec.param("amplitude") * bump)
        raise AssertionError(kind)

    def costs(self, timestep: int) -> np.ndarray:
        if not 0 <= timestep < self.n_timesteps:
            raise ValueError(f"timestep {timestep} outside [0, {self.n_timesteps})")
        return self._cache.get(timestep, self._row)

    def cost_of(self, timestep: int, index: int) -> float:
        if not 0 <= index < self.n_iterations:
            raise ValueError(f"iteration index {index} outside [0, {self.n_iterations})")
        return float(self.costs(timestep)[index])


class TraceWorkload:
    """Workload backed by an explicit (T, N) cost matrix."""

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.size == 0:
            raise ValueError("trace matrix must be 2-D and non-empty")
        if np.any(matrix <= 0):
            raise ValueError("trace costs must be > 0")
        matrix.flags.writeable = False
        self._matrix = matrix
        self.n_timesteps, self.n_iterations = matrix.shape

    def costs(self, timestep: int) -> np.ndarray:
        if not 0 <= timestep < self.n_timesteps:
            raise ValueError(f"timestep {timestep} outside [0, {self.n_timesteps})")
        return self._matrix[timestep]

    def cost_of(self, timestep: int, index: int) -> float:
        if not 0 <= index < self.n_iterations:
            raise ValueError(f"iteration index {index} outside [0, {self.n_iterations})")
        return float(self._matrix[timestep, index])


def build_workload(spec: WorkloadSpec):
    """Resolve a spec into a concrete workload (trace kinds load their file)."""
    spec.validate()
    if spec.kind == "trace":
        return load_trace(spec.path)
    return SyntheticWorkload(spec)


def load_trace(path) -> TraceWorkload:
    """Parse a CSV cost matrix: one row per time-step, N positive columns."""
    rows: list[list[float]] = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise TraceError(f"{path}: line {lineno}: expected {width} columns, got {len(cells)}")
            values = []
            for col, cell in enumerate(cells, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise TraceError(f"{path}: line {lineno}: column {col} is not a number: {cell!r}") from None
                if not np.isfinite(v) or v <= 0:
                    raise TraceError(f"{path}: line {lineno}: column {col} must be a positive cost, got {cell!r}")
                values.append(v)
            rows.append(values)
    if not rows:
        raise TraceError(f"{path}: empty trace file")
    return TraceWorkload(np.asarray(rows))


def dump_workload(workload, path) -> None:
    """Write the full cost matrix in the trace format (lossless round-trip)."""
    with open(path, "w", encoding="utf-8") as fh:
        for t in range(workload.n_timesteps):
            fh.write(",".join(repr(float(v)) for v in workload.costs(t)))
            fh.write("\n")
