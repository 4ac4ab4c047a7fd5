"""The scheduling-algorithm portfolio: chunk-size calculators over shared state.

Twelve algorithms are selectable by the automated selection methods, kept in a
fixed order (portfolio indices 0..11).  Plain factoring (``fac``) and its
fixed-ratio variant (``fac2``) are available as extras for experiments.

Every delivered chunk honours the user chunk parameter as a lower threshold:
``delivered = min(remaining, max(calculated, chunk_param))``.  The simulator
serializes all work requests, so scheduler state never sees concurrent
mutation; chunk computations are deterministic functions of that state.
"""

from __future__ import annotations

import math
from enum import Enum

__all__ = [
    "SchedulerKind",
    "PORTFOLIO",
    "EXTRA_KINDS",
    "ALL_KINDS",
    "portfolio_index",
    "kind_from_name",
    "apply_chunk_threshold",
    "ceil_div",
    "gss_chunk",
    "fac2_batch_chunk",
    "fac_batch_chunk",
    "tss_defaults",
    "af_chunk",
    "exp_chunk",
    "awf_weights",
    "plan_static_blocks",
    "ChunkScheduler",
    "make_scheduler",
]


class SchedulerKind(Enum):
    """Canonical lowercase names, used in configs and CSV output."""

    STATIC = "static"
    SS = "ss"
    GSS = "gss"
    AUTO_LLVM = "auto_llvm"
    TSS = "tss"
    STATIC_STEAL = "static_steal"
    MFAC2 = "mfac2"
    AWF_B = "awf_b"
    AWF_C = "awf_c"
    AWF_D = "awf_d"
    AWF_E = "awf_e"
    MAF = "maf"
    FAC = "fac"
    FAC2 = "fac2"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


# Selection methods draw from exactly this 12-member set, in this order.
PORTFOLIO = (
    SchedulerKind.STATIC,
    SchedulerKind.SS,
    SchedulerKind.GSS,
    SchedulerKind.AUTO_LLVM,
    SchedulerKind.TSS,
    SchedulerKind.STATIC_STEAL,
    SchedulerKind.MFAC2,
    SchedulerKind.AWF_B,
    SchedulerKind.AWF_C,
    SchedulerKind.AWF_D,
    SchedulerKind.AWF_E,
    SchedulerKind.MAF,
)
EXTRA_KINDS = (SchedulerKind.FAC, SchedulerKind.FAC2)
ALL_KINDS = PORTFOLIO + EXTRA_KINDS

_PORTFOLIO_INDEX = {kind: i for i, kind in enumerate(PORTFOLIO)}
_BY_NAME = {kind.value: kind for kind in ALL_KINDS}

# Kinds whose iterations are pre-assigned rather than pulled from a queue.
PREASSIGNED_KINDS = frozenset(
    {SchedulerKind.STATIC, SchedulerKind.AUTO_LLVM, SchedulerKind.STATIC_STEAL}
)


def portfolio_index(kind: SchedulerKind) -> int:
    """Index of ``kind`` within the 12-member portfolio."""
    try:
        return _PORTFOLIO_INDEX[kind]
    except KeyError:
        raise ValueError(f"{kind.value} is not a portfolio member") from None


def kind_from_name(name: str) -> SchedulerKind:
    try:
        return _BY_NAME[name.strip().lower()]
    except KeyError:
        known = ", ".join(sorted(_BY_NAME))
        raise ValueError(f"unknown scheduler {name!r} (known: {known})") from None


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def apply_chunk_threshold(calculated: int, chunk_param: int, remaining: int) -> int:
    """Lift a calculated chunk to the user threshold, clamped to what is left."""
    return min(remaining, max(calculated, chunk_param))


def gss_chunk(remaining: int, p: int) -> int:
    """Guided self-scheduling chunk: ceil(R / P)."""
    return ceil_div(remaining, p)


def fac2_batch_chunk(remaining: int, p: int) -> int:
    """Fixed-ratio factoring batch chunk: ceil(R / 2P)."""
    return ceil_div(remaining, 2 * p)


def fac_batch_chunk(remaining: int, p: int, mu: float, sigma: float, batch_index: int) -> int:
    """Probabilistic factoring batch chunk, ceil(R / (x_j * P)).

    The batch ratio x_j depends on the iteration-time mean/stddev: with
    b = P * sigma / (2 * sqrt(R) * mu), the first batch uses
    x = 1 + b^2 + b*sqrt(b^2 + 2) and later batches x = 2 + b^2 + b*sqrt(b^2 + 4).
    """
    if mu <= 0:
        raise ValueError("factoring needs mu > 0")
    if sigma < 0:
        raise ValueError("factoring needs sigma >= 0")
    b = p / (2.0 * math.sqrt(remaining)) * (sigma / mu)
    if batch_index == 0:
        x = 1.0 + b * b + b * math.sqrt(b * b + 2.0)
    else:
        x = 2.0 + b * b + b * math.sqrt(b * b + 4.0)
    return max(1, math.ceil(remaining / (x * p)))


def tss_defaults(n: int, p: int) -> tuple[int, int]:
    """Recommended trapezoid bounds: first chunk ceil(N / 2P), last chunk 1."""
    return max(1, ceil_div(n, 2 * p)), 1


def af_chunk(remaining: int, mu_hat: float, d_n: float, t_n: float) -> int:
    """Adaptive-factoring chunk for one thread.

    ``d_n`` aggregates per-thread variance-to-mean ratios, ``t_n`` is the
    harmonic aggregate of mean iteration times, ``mu_hat`` the requesting
    thread's own mean.  The chunk solves the factoring equation
    (D + 2*T*R - sqrt(D^2 + 4*D*T*R)) / (2 * mu_hat), rounded up.
    """
    if mu_hat <= 0:
        raise ValueError("af_chunk needs mu_hat > 0")
    num = d_n + 2.0 * t_n * remaining - math.sqrt(d_n * d_n + 4.0 * d_n * t_n * remaining)
    return max(1, math.ceil(num / (2.0 * mu_hat)))


def exp_chunk(n: int, p: int) -> int:
    """Expert chunk parameter at the golden-ratio point of the candidate curve.

    Candidates are ceil(N / (i*P)) for i = 2, 4, 8, ... down to 1 iteration
    (inclusive); the value at index round(0.618 * (K-1)) is returned.  Result
    is always within [1, ceil(N / 2P)].
    """
    if n < 1 or p < 1:
        raise ValueError("exp_chunk needs n >= 1 and p >= 1")
    candidates = []
    i = 2
    while True:
        c = max(1, ceil_div(n, i * p))
        candidates.append(c)
        if c == 1:
            break
        i *= 2
    return candidates[round(0.618 * (len(candidates) - 1))]


def awf_weights(time_sums: list[float], iter_counts: list[int]) -> list[float]:
    """Normalized adaptive weights from per-thread timing accumulators.

    Threads with measurements share weight mass proportionally to their
    inverse time-per-iteration; threads with no history keep weight 1 until
    their first measurement.  Weights always sum to the thread count.
    """
    p = len(time_sums)
    measured = [i for i in range(p) if iter_counts[i] > 0 and time_sums[i] > 0]
    weights = [1.0] * p
    if not measured:
        return weights
    rates = {i: iter_counts[i] / time_sums[i] for i in measured}
    total = sum(rates.values())
    share = float(len(measured))
    for i in measured:
        weights[i] = share * rates[i] / total
    return weights


def plan_static_blocks(n: int, p: int, chunk_param: int = 1) -> list[tuple[int, int]]:
    """Contiguous pre-assigned blocks, one per thread while iterations last.

    Block k goes to thread k.  Sizes are ceil(N/P) lifted to the chunk
    parameter; the final block takes whatever remains.
    """
    size_each = max(ceil_div(n, p), chunk_param)
    blocks: list[tuple[int, int]] = []
    start = 0
    for _ in range(p):
        if start >= n:
            break
        size = min(size_each, n - start)
        blocks.append((start, size))
        start += size
    return blocks


class ChunkScheduler:
    """Chunk source for one loop instance; requests are served one at a time."""

    adaptive = False

    def __init__(self, n: int, p: int, chunk_param: int = 1):
        if n < 1:
            raise ValueError("n must be >= 1")
        if p < 1:
            raise ValueError("p must be >= 1")
        if chunk_param < 1:
            raise ValueError("chunk_param must be >= 1")
        self.n = n
        self.p = p
        self.chunk_param = chunk_param
        self.remaining = n

    def next_chunk(self, thread_id: int) -> int:
        """Deliver the next chunk size (threshold applied, clamped to remaining)."""
        if self.remaining <= 0:
            raise RuntimeError("all iterations already delivered")
        size = apply_chunk_threshold(self._calculated(thread_id), self.chunk_param, self.remaining)
        self.remaining -= size
        return size

    def record_completion(self, thread_id: int, size: int, exec_time: float, total_time: float):
        """Feedback hook for adaptive schedulers; default is a no-op."""

    def _calculated(self, thread_id: int) -> int:
        raise NotImplementedError


class SSScheduler(ChunkScheduler):
    """Pure self-scheduling: one iteration per request (before thresholding)."""

    def _calculated(self, thread_id: int) -> int:
        return 1


class GSSScheduler(ChunkScheduler):
    """Guided self-scheduling: decreasing chunks ceil(R / P)."""

    def _calculated(self, thread_id: int) -> int:
        return gss_chunk(self.remaining, self.p)


class TSSScheduler(ChunkScheduler):
    """Trapezoid self-scheduling: chunks decrease linearly from f to l."""

    def __init__(self, n, p, chunk_param=1, first: int | None = None, last: int = 1):
        super().__init__(n, p, chunk_param)
        f_default, l_default = tss_defaults(n, p)
        self.f = first if first is not None else f_default
        self.l = last if last is not None else l_default
        if self.f < self.l or self.l < 1:
            raise ValueError("trapezoid needs f >= l >= 1")
        self.a = ceil_div(2 * n, self.f + self.l)
        self.delta = (self.f - self.l) / (self.a - 1) if self.a > 1 else 0.0
        self._prev: float | None = None

    def _calculated(self, thread_id: int) -> int:
        if self.a <= 1:
            # Degenerate tiny loop: a single chunk covers it.
            return min(self.f, self.remaining)
        if self._prev is None:
            self._prev = float(self.f)
            return self.f
        self._prev -= self.delta
        return max(self.l, math.floor(self._prev))


class FACScheduler(ChunkScheduler):
    """Probabilistic factoring: batches of P equal chunks sized from mu/sigma."""

    def __init__(self, n, p, chunk_param=1, *, mu: float, sigma: float):
        super().__init__(n, p, chunk_param)
        if mu <= 0:
            raise ValueError("factoring needs mu > 0")
        if sigma < 0:
            raise ValueError("factoring needs sigma >= 0")
        self.mu = mu
        self.sigma = sigma
        self.batch_index = -1
        self._batch_chunk = 0
        self._batch_left = 0

    def _calculated(self, thread_id: int) -> int:
        if self._batch_left == 0:
            self.batch_index += 1
            self._batch_chunk = fac_batch_chunk(
                self.remaining, self.p, self.mu, self.sigma, self.batch_index
            )
            self._batch_left = self.p
        self._batch_left -= 1
        return self._batch_chunk


class FAC2Scheduler(ChunkScheduler):
    """Practical factoring with fixed ratio 2: batch chunks ceil(R_j / 2P).

    The atomic-counter variant (mfac2) computes identical sizes; only the
    runtime synchronization differs, which the simulator folds into the
    per-round overhead.
    """

    def __init__(self, n, p, chunk_param=1):
        super().__init__(n, p, chunk_param)
        self.batch_index = -1
        self._batch_chunk = 0
        self._batch_left = 0

    def _calculated(self, thread_id: int) -> int:
        if self._batch_left == 0:
            self.batch_index += 1
            self._batch_chunk = fac2_batch_chunk(self.remaining, self.p)
            self._batch_left = self.p
        self._batch_left -= 1
        return self._batch_chunk


class AWFScheduler(ChunkScheduler):
    """Adaptive weighted factoring (variants b, c, d, e).

    Per-thread weights are refit from measured time-per-iteration: variants
    b/d refit at batch boundaries, c/e at every completed chunk.  Variants
    d/e measure total chunk time (scheduling overhead included); b/c exclude
    it.  A thread's chunk is ceil(w_i * Cs) over the factoring batch size.
    """

    adaptive = True

    def __init__(self, n, p, chunk_param=1, variant: str = "b"):
        super().__init__(n, p, chunk_param)
        if variant not in ("b", "c", "d", "e"):
            raise ValueError(f"unknown awf variant {variant!r}")
        self.variant = variant
        self._batchwise = variant in ("b", "d")
        self._total_time = variant in ("d", "e")
        self._time_sum = [0.0] * p
        self._iters = [0] * p
        self.weights = [1.0] * p
        self._batch_chunk = 0
        self._batch_left = 0

    def record_completion(self, thread_id, size, exec_time, total_time):
        self._time_sum[thread_id] += total_time if self._total_time else exec_time
        self._iters[thread_id] += size
        if not self._batchwise:
            self.weights = awf_weights(self._time_sum, self._iters)

    def _calculated(self, thread_id: int) -> int:
        if self._batchwise:
            if self._batch_left == 0:
                self.weights = awf_weights(self._time_sum, self._iters)
                self._batch_chunk = fac2_batch_chunk(self.remaining, self.p)
                self._batch_left = self.p
            self._batch_left -= 1
            base = self._batch_chunk
        else:
            base = fac2_batch_chunk(self.remaining, self.p)
        return max(1, math.ceil(self.weights[thread_id] * base))


class AFScheduler(ChunkScheduler):
    """Adaptive factoring: mu/sigma estimated online per thread.

    Until every thread has at least one measurement, requests are served the
    bootstrap chunk of 100 iterations (lifted by the chunk parameter, clamped
    to remaining).  The practical variant (maf) differs only in runtime
    implementation and is simulated identically.
    """

    adaptive = True
    BOOTSTRAP_CHUNK = 100

    def __init__(self, n, p, chunk_param=1):
        super().__init__(n, p, chunk_param)
        self._time_sum = [0.0] * p
        self._time_sq = [0.0] * p
        self._iters = [0] * p

    def record_completion(self, thread_id, size, exec_time, total_time):
        # Each chunk contributes `size` observations of its per-iteration time.
        per_iter = exec_time / size
        self._time_sum[thread_id] += exec_time
        self._time_sq[thread_id] += exec_time * per_iter
        self._iters[thread_id] += size

    def _calculated(self, thread_id: int) -> int:
        if any(c == 0 for c in self._iters):
            return self.BOOTSTRAP_CHUNK
        mus = [self._time_sum[i] / self._iters[i] for i in range(self.p)]
        positive = [m for m in mus if m > 0]
        floor_mu = min(positive) if positive else 1e-12
        mus = [m if m > 0 else floor_mu for m in mus]
        d_n = 0.0
        inv_sum = 0.0
        for i in range(self.p):
            mean_sq = self._time_sq[i] / self._iters[i]
            var = max(0.0, mean_sq - mus[i] * mus[i])
            d_n += var / mus[i]
            inv_sum += 1.0 / mus[i]
        t_n = 1.0 / inv_sum
        return af_chunk(self.remaining, mus[thread_id], d_n, t_n)


def make_scheduler(
    kind: SchedulerKind,
    n: int,
    p: int,
    chunk_param: int = 1,
    mu: float | None = None,
    sigma: float | None = None,
) -> ChunkScheduler:
    """Build the queue-driven scheduler for ``kind``.

    Pre-assigned kinds (static, auto_llvm, static_steal) have no central
    queue and are handled by the simulation engine directly.
    """
    if kind in PREASSIGNED_KINDS:
        raise ValueError(f"{kind.value} uses pre-assigned blocks, not a chunk queue")
    if kind is SchedulerKind.SS:
        return SSScheduler(n, p, chunk_param)
    if kind is SchedulerKind.GSS:
        return GSSScheduler(n, p, chunk_param)
    if kind is SchedulerKind.TSS:
        return TSSScheduler(n, p, chunk_param)
    if kind is SchedulerKind.FAC:
        if mu is None or sigma is None:
            raise ValueError("fac needs the loop's iteration-cost mu and sigma")
        return FACScheduler(n, p, chunk_param, mu=mu, sigma=sigma)
    if kind in (SchedulerKind.FAC2, SchedulerKind.MFAC2):
        return FAC2Scheduler(n, p, chunk_param)
    if kind is SchedulerKind.AWF_B:
        return AWFScheduler(n, p, chunk_param, variant="b")
    if kind is SchedulerKind.AWF_C:
        return AWFScheduler(n, p, chunk_param, variant="c")
    if kind is SchedulerKind.AWF_D:
        return AWFScheduler(n, p, chunk_param, variant="d")
    if kind is SchedulerKind.AWF_E:
        return AWFScheduler(n, p, chunk_param, variant="e")
    if kind is SchedulerKind.MAF:
        return AFScheduler(n, p, chunk_param)
    raise ValueError(f"no scheduler for {kind!r}")
