"""Automated scheduling-algorithm selection over the 12-member portfolio.

Every method is a schedule provider: called once before each loop instance
with the previous instance's record, it returns the (scheduler, chunk_param)
to use next.  Expert methods (randomsel, exhaustivesel, expertsel) encode
search heuristics; the tabular agents (qlearn, sarsa) learn a 12x12
state->action value table, where the state is the scheduler used on the
previous instance.  The oracle replays every portfolio member per time-step
and keeps the per-step minimum as the upper performance bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LoopRecord, SystemModel, Workload
from .schedulers import PORTFOLIO, SchedulerKind, exp_chunk, kind_from_name
from .simulator import SimConfig, simulate_loop

__all__ = [
    "RLConfig",
    "RewardTracker",
    "reward",
    "QTable",
    "sarsa_update",
    "qlearn_update",
    "dump_qtable",
    "load_qtable",
    "explore_first_sequence",
    "SelectionProvider",
    "ConstantProvider",
    "RandomSel",
    "ExhaustiveSel",
    "ExpertSel",
    "ExpertSelConfig",
    "RLProvider",
    "OracleResult",
    "oracle_select",
    "oracle_noise_seed",
    "resolve_chunk_param",
    "SelectionLogEntry",
    "build_selection_log",
    "write_selection_log",
    "read_selection_log",
]

CHUNK_MODES = ("default", "expchunk")


def resolve_chunk_param(chunk_mode: str, n: int, p: int) -> int:
    """Chunk parameter for a mode: 1 for default, the expert value otherwise."""
    if chunk_mode == "default":
        return 1
    if chunk_mode == "expchunk":
        return exp_chunk(n, p)
    raise ValueError(f"unknown chunk mode {chunk_mode!r} (known: {', '.join(CHUNK_MODES)})")


# ---------------------------------------------------------------------------
# Rewards and tabular updates


@dataclass
class RLConfig:
    """Agent hyper-parameters; the learning rate decays after exploration."""

    alpha: float = 0.5
    gamma: float = 0.5
    alpha_decay: float = 0.05
    reward_kind: str = "lt"  # "lt" = loop time, "lib" = imbalance percent
    r_pos: float = 0.01
    r_neutral: float = -2.0
    r_neg: float = -4.0
    policy: str = "explore_first"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be within [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be within [0, 1]")
        if self.alpha_decay < 0:
            raise ValueError("alpha_decay must be >= 0")
        if self.reward_kind not in ("lt", "lib"):
            raise ValueError("reward_kind must be 'lt' or 'lib'")
        if not self.r_pos > self.r_neutral > self.r_neg:
            raise ValueError("need r_pos > r_neutral > r_neg")
        if self.policy != "explore_first":
            raise ValueError("only the explore_first policy is implemented")


class RewardTracker:
    """Running min/max of the reward input across executed loop instances."""

    def __init__(self):
        self.min_x: float | None = None
        self.max_x: float | None = None

    def seeded(self) -> bool:
        return self.min_x is not None


def reward(
    x: float,
    tracker: RewardTracker,
    r_pos: float = 0.01,
    r_neutral: float = -2.0,
    r_neg: float = -4.0,
) -> float:
    """Map a loop observation onto {positive, neutral, negative} feedback.

    Positive when x matches or beats the best value seen so far, negative at
    or beyond the worst, neutral in between.  The very first observation is
    neutral and seeds both bounds.  The tracker updates after classifying.
    """
    if not tracker.seeded():
        tracker.min_x = tracker.max_x = x
        return r_neutral
    if x <= tracker.min_x:
        r = r_pos
    elif x >= tracker.max_x:
        r = r_neg
    else:
        r = r_neutral
    tracker.min_x = min(tracker.min_x, x)
    tracker.max_x = max(tracker.max_x, x)
    return r


class QTable:
    """State->action value table over portfolio indices, zero-initialized."""

    SIZE = len(PORTFOLIO)

    def __init__(self, values: np.ndarray | None = None):
        if values is None:
            values = np.zeros((self.SIZE, self.SIZE))
        values = np.asarray(values, dtype=float)
        if values.shape != (self.SIZE, self.SIZE):
            raise ValueError(f"Q-table must be {self.SIZE}x{self.SIZE}, got {values.shape}")
        self.values = values

    def argmax_action(self, state: int) -> int:
        """Greedy action for a state; ties go to the lowest portfolio index."""
        return int(np.argmax(self.values[state]))

    def copy(self) -> "QTable":
        return QTable(self.values.copy())

    def __eq__(self, other):
        return isinstance(other, QTable) and np.array_equal(self.values, other.values)


def sarsa_update(q: QTable, s: int, a: int, r: float, s2: int, a2: int, alpha: float, gamma: float):
    """On-policy update toward r + gamma * Q(s', a')."""
    q.values[s, a] += alpha * (r + gamma * q.values[s2, a2] - q.values[s, a])


def qlearn_update(q: QTable, s: int, a: int, r: float, s2: int, alpha: float, gamma: float):
    """Off-policy update toward r + gamma * max_a' Q(s', a')."""
    q.values[s, a] += alpha * (r + gamma * q.values[s2].max() - q.values[s, a])


def dump_qtable(q: QTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in q.values:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def load_qtable(path) -> QTable:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != QTable.SIZE:
                raise ValueError(f"{path}: line {lineno}: expected {QTable.SIZE} values, got {len(cells)}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric Q value") from None
    if len(rows) != QTable.SIZE:
        raise ValueError(f"{path}: expected {QTable.SIZE} rows, got {len(rows)}")
    return QTable(np.asarray(rows))


# ---------------------------------------------------------------------------
# Explore-first sequence


def _euler_circuit(vertices: list[int], start: int) -> list[int]:
    """Deterministic Eulerian circuit over the complete digraph with self-loops.

    Hierholzer's algorithm, always advancing along the lowest-indexed unused
    edge; returns the vertex sequence, which starts and ends at ``start``.
    """
    order = {v: sorted(vertices) for v in vertices}
    cursor = {v: 0 for v in vertices}
    stack = [start]
    path: list[int] = []
    while stack:
        v = stack[-1]
        if cursor[v] < len(order[v]):
            nxt = order[v][cursor[v]]
            cursor[v] += 1
            stack.append(nxt)
        else:
            path.append(stack.pop())
    path.reverse()
    return path


def explore_first_sequence(size: int = len(PORTFOLIO)) -> list[int]:
    """Portfolio indices whose 144 transitions cover every ordered pair once.

    The implied initial state is index 0, so the emissions trace an Eulerian
    circuit from vertex 0 over the complete directed graph with self-loops.
    The walk starts 0->0, 0->last, covers every transition among indices
    1..size-1, and saves the remaining passes through vertex 0 for the end.
    By then the reward tracker has seen every algorithm at least once, so in
    a stationary environment only the best algorithm still collects positive
    feedback on those final transitions, which keeps the first greedy pick
    (made in state 0, where the circuit ends) discriminative.
    """
    if size < 1:
        raise ValueError("portfolio must not be empty")
    if size == 1:
        return [0]
    last = size - 1
    walk = _euler_circuit(list(range(1, size)), start=last)  # starts and ends at `last`
    seq = [0, last]
    seq.extend(walk[1:])  # all transitions among 1..size-1
    seq.append(0)  # edge last -> 0
    for b in range(1, last):
        seq.extend((b, 0))  # edges 0->b and b->0
    return seq


# ---------------------------------------------------------------------------
# Providers


@dataclass(frozen=True)
class SelectionLogEntry:
    timestep: int
    method: str
    kind: SchedulerKind
    chunk_param: int
    phase: str
    t_par: float
    lib_percent: float


class SelectionProvider:
    """Base provider: owns the per-step (kind, chunk, phase) choice log."""

    method_name = "provider"

    def __init__(self):
        self.choices: list[tuple[SchedulerKind, int, str]] = []

    def next(self, last: LoopRecord | None) -> tuple[SchedulerKind, int]:
        kind, chunk_param, phase = self._choose(last)
        self.choices.append((kind, chunk_param, phase))
        return kind, chunk_param

    def _choose(self, last: LoopRecord | None) -> tuple[SchedulerKind, int, str]:
        raise NotImplementedError


class ConstantProvider(SelectionProvider):
    """Always the same scheduler; the baseline for factorial campaigns."""

    def __init__(self, kind: SchedulerKind, chunk_param: int = 1):
        super().__init__()
        self.kind = kind
        self.chunk_param = chunk_param
        self.method_name = kind.value

    def _choose(self, last):
        return self.kind, self.chunk_param, "stable"


class RandomSel(SelectionProvider):
    """Jump to a random portfolio member with probability LIB/10.

    The jump probability saturates: any imbalance at or above 10 percent
    forces a fresh uniform draw, which may re-select the current algorithm.
    """

    method_name = "randomsel"

    def __init__(self, chunk_param: int = 1, seed: int = 0, portfolio=PORTFOLIO):
        super().__init__()
        self.chunk_param = chunk_param
        self.portfolio = tuple(portfolio)
        self.rng = np.random.default_rng(np.random.SeedSequence((seed, 0x7A11D)))
        self.current = self.portfolio[0]
        self.n_jumps = 0

    def _choose(self, last):
        if last is not None:
            p_jump = last.lib_percent / 10.0
            if p_jump > self.rng.uniform(0.0, 1.0):
                self.current = self.portfolio[int(self.rng.integers(len(self.portfolio)))]
                self.n_jumps += 1
        return self.current, self.chunk_param, "stable"


class ExhaustiveSel(SelectionProvider):
    """Try every portfolio member once, then stick with the fastest.

    While exploiting, the loop keeps being monitored: if a step's imbalance
    rises more than 10 percentage points above the stable-phase mean, or its
    time exceeds that mean by more than 10 percent, the 12-step trial
    restarts.
    """

    method_name = "exhaustivesel"

    def __init__(self, chunk_param: int = 1, portfolio=PORTFOLIO):
        super().__init__()
        self.chunk_param = chunk_param
        self.portfolio = tuple(portfolio)
        self._trial_pos = 0
        self._trial_times: list[float] = []
        self._best: SchedulerKind | None = None
        self._stable_times: list[float] = []
        self._stable_libs: list[float] = []
        self.n_trials = 0

    def _restart_trial(self):
        self._trial_pos = 0
        self._trial_times = []
        self._best = None
        self._stable_times = []
        self._stable_libs = []

    def _choose(self, last):
        if last is not None:
            if self._best is None:
                self._trial_times.append(last.t_par)
            else:
                if self._stable_times:
                    mean_t = sum(self._stable_times) / len(self._stable_times)
                    mean_lib = sum(self._stable_libs) / len(self._stable_libs)
                    if last.lib_percent > mean_lib + 10.0 or last.t_par > 1.1 * mean_t:
                        self._restart_trial()
                if self._best is not None:
                    self._stable_times.append(last.t_par)
                    self._stable_libs.append(last.lib_percent)
        if self._best is None and self._trial_pos < len(self.portfolio):
            kind = self.portfolio[self._trial_pos]
            if self._trial_pos == 0:
                self.n_trials += 1
            self._trial_pos += 1
            return kind, self.chunk_param, "trial"
        if self._best is None:
            best_i = min(range(len(self._trial_times)), key=lambda i: (self._trial_times[i], i))
            self._best = self.portfolio[best_i]
        return self._best, self.chunk_param, "stable"


@dataclass(frozen=True)
class ExpertSelConfig:
    """Representative member per behaviour class."""

    static_kind: SchedulerKind = SchedulerKind.STATIC
    nonadaptive_kind: SchedulerKind = SchedulerKind.MFAC2
    adaptive_kind: SchedulerKind = SchedulerKind.MAF


def _tri_low(x, lo, hi):
    if x <= lo:
        return 1.0
    if x >= hi:
        return 0.0
    return (hi - x) / (hi - lo)


def _tri_high(x, lo, hi):
    return 1.0 - _tri_low(x, lo, hi)


def _lib_membership(lib: float) -> tuple[float, float, float]:
    """(low, moderate, high) memberships with pivots at 10 and 30 percent."""
    low = _tri_low(lib, 5.0, 15.0)
    high = _tri_high(lib, 25.0, 35.0)
    mod = min(_tri_high(lib, 5.0, 15.0), _tri_low(lib, 25.0, 35.0))
    return low, mod, high


def _dt_membership(dt_percent: float) -> tuple[float, float, float]:
    """(improved, same, worse) memberships; 'same' spans about +-5 percent."""
    improved = _tri_low(dt_percent, -10.0, 0.0)
    worse = _tri_high(dt_percent, 0.0, 10.0)
    same = max(0.0, 1.0 - abs(dt_percent) / 10.0)
    return improved, same, worse


class ExpertSel(SelectionProvider):
    """Fuzzy-rule selection over three behaviour classes.

    The first instance always runs the static baseline to collect reference
    time and imbalance.  The second decision fuzzifies the absolute imbalance;
    later decisions combine the imbalance level with the relative time change
    since the previous instance.  Defuzzification takes the score centroid
    over the class axis (static-like = 0, non-adaptive dynamic = 1,
    adaptive = 2) and picks the configured member of the winning class.
    """

    method_name = "expertsel"

    _CLASS_KEYS = ("static", "nonadaptive", "adaptive")

    def __init__(self, chunk_param: int = 1, config: ExpertSelConfig | None = None):
        super().__init__()
        self.chunk_param = chunk_param
        self.config = config or ExpertSelConfig()
        self._step = 0
        self._prev_t: float | None = None
        self._class = 0

    def _kind_for_class(self, cls: int) -> SchedulerKind:
        return (self.config.static_kind, self.config.nonadaptive_kind, self.config.adaptive_kind)[cls]

    def _defuzzify(self, scores: tuple[float, float, float]) -> int:
        total = sum(scores)
        if total <= 0.0:
            return self._class
        centroid = sum(i * s for i, s in enumerate(scores)) / total
        return min(2, int(math.floor(centroid + 0.5)))

    def _choose(self, last):
        step = self._step
        self._step += 1
        if step == 0:
            return SchedulerKind.STATIC, self.chunk_param, "trial"
        lib = last.lib_percent
        low, mod, high = _lib_membership(lib)
        if step == 1:
            self._class = self._defuzzify((low, mod, high))
        else:
            dt = (last.t_par - self._prev_t) / self._prev_t * 100.0
            imp, same, worse = _dt_membership(dt)
            keep = [0.0, 0.0, 0.0]
            keep[self._class] = 1.0
            scores = (
                imp * low * keep[0] + imp * mod * keep[0] + same * low + worse * low,
                imp * low * keep[1] + imp * mod * keep[1] + same * mod,
                imp * low * keep[2] + imp * mod * keep[2] + imp * high + same * high + worse * mod + worse * high,
            )
            self._class = self._defuzzify(scores)
        self._prev_t = last.t_par
        return self._kind_for_class(self._class), self.chunk_param, "stable"


class RLProvider(SelectionProvider):
    """Tabular agent: explore all scheduler transitions first, then go greedy.

    The state is the portfolio index executed on the previous instance
    (index 0 before the first).  During learning the agent follows the
    precomputed transition-covering sequence; afterwards it picks the
    argmax action for the current state, with the learning rate shrinking by
    ``alpha_decay`` per post-learning instance down to zero.  Loading a saved
    table skips learning entirely.
    """

    def __init__(
        self,
        algorithm: str = "qlearn",
        config: RLConfig | None = None,
        chunk_param: int = 1,
        qtable: QTable | None = None,
        portfolio=PORTFOLIO,
    ):
        super().__init__()
        if algorithm not in ("qlearn", "sarsa"):
            raise ValueError("algorithm must be 'qlearn' or 'sarsa'")
        self.algorithm = algorithm
        self.method_name = algorithm
        self.config = config or RLConfig()
        self.chunk_param = chunk_param
        self.portfolio = tuple(portfolio)
        self.q = qtable.copy() if qtable is not None else QTable()
        self.tracker = RewardTracker()
        self.alpha = self.config.alpha
        self._warm = qtable is not None
        self._sequence = explore_first_sequence(len(self.portfolio))
        self._step = 0
        self._post_steps = 0
        self._state = 0  # scheduler index of the previous instance
        self._pending: tuple[int, int] | None = None  # (state, action) awaiting reward
        self.learning_steps = 0 if self._warm else len(self._sequence)

    @property
    def learning_complete(self) -> bool:
        return self._step >= self.learning_steps

    def _observe(self, last: LoopRecord) -> float:
        x = last.t_par if self.config.reward_kind == "lt" else last.lib_percent
        return reward(x, self.tracker, self.config.r_pos, self.config.r_neutral, self.config.r_neg)

    def _choose(self, last):
        cfg = self.config
        r = None
        if last is not None and self._pending is not None:
            r = self._observe(last)
        learning = self._step < self.learning_steps
        s_now = self._state
        if self.algorithm == "qlearn":
            if r is not None:
                qlearn_update(self.q, *self._pending, r, s_now, self.alpha, cfg.gamma)
            action = self._sequence[self._step] if learning else self.q.argmax_action(s_now)
        else:
            action = self._sequence[self._step] if learning else self.q.argmax_action(s_now)
            if r is not None:
                sarsa_update(self.q, *self._pending, r, s_now, action, self.alpha, cfg.gamma)
        if not learning:
            self._post_steps += 1
            self.alpha = max(0.0, cfg.alpha - self._post_steps * cfg.alpha_decay)
        self._pending = (s_now, action)
        self._state = action
        self._step += 1
        phase = "learning" if learning else "exploiting"
        return self.portfolio[action], self.chunk_param, phase


# ---------------------------------------------------------------------------
# Oracle

_ORACLE_TAG = 0x0AC1E


def oracle_noise_seed(seed: int) -> int:
    """Independent noise stream for the oracle's reference executions.

    The oracle baseline models separately measured runs, so its noise draws
    must not be correlated with the campaign's; with noise disabled the
    stream is irrelevant and the oracle is a strict per-step lower bound.
    """
    return int(np.random.SeedSequence((seed & 0xFFFFFFFFFFFFFFFF, _ORACLE_TAG)).generate_state(1)[0])


@dataclass(frozen=True)
class OracleResult:
    choices: tuple[tuple[SchedulerKind, int], ...]
    step_times: tuple[float, ...]
    step_libs: tuple[float, ...]
    total: float


def oracle_select(
    workload: Workload,
    system: SystemModel,
    portfolio=PORTFOLIO,
    chunk_mode: str = "default",
    seed: int = 0,
    decorrelate_noise: bool = True,
) -> OracleResult:
    """Per-time-step best (kind, chunk) over the portfolio, plus the total.

    Ties go to the lowest portfolio position.  With ``decorrelate_noise`` the
    oracle draws its own noise stream (see oracle_noise_seed).
    """
    portfolio = tuple(portfolio)
    if not portfolio:
        raise ValueError("oracle needs a non-empty portfolio")
    chunk_param = resolve_chunk_param(chunk_mode, workload.n_iterations, system.p)
    sim_seed = oracle_noise_seed(seed) if decorrelate_noise else seed
    choices = []
    times = []
    libs = []
    for t in range(workload.n_timesteps):
        best = None
        for kind in portfolio:
            rec = simulate_loop(
                workload, t, system, SimConfig(kind, chunk_param, record_chunks=False), sim_seed
            )
            if best is None or rec.t_par < best[0]:
                best = (rec.t_par, kind, rec.lib_percent)
        t_par, kind, lib = best
        choices.append((kind, chunk_param))
        times.append(t_par)
        libs.append(lib)
    return OracleResult(tuple(choices), tuple(times), tuple(libs), float(sum(times)))


# ---------------------------------------------------------------------------
# Selection logs


def build_selection_log(method: str, provider: SelectionProvider, records) -> list[SelectionLogEntry]:
    entries = []
    for t, ((kind, chunk_param, phase), rec) in enumerate(zip(provider.choices, records)):
        entries.append(
            SelectionLogEntry(t, method, kind, chunk_param, phase, rec.t_par, rec.lib_percent)
        )
    return entries


def write_selection_log(entries, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("timestep,method,kind,chunk_param,phase,t_par,lib_percent\n")
        for e in entries:
            fh.write(
                f"{e.timestep},{e.method},{e.kind.value},{e.chunk_param},{e.phase},"
                f"{e.t_par:.9f},{e.lib_percent:.9f}\n"
            )


def read_selection_log(path) -> list[SelectionLogEntry]:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        expected = "timestep,method,kind,chunk_param,phase,t_par,lib_percent"
        if header != expected:
            raise ValueError(f"{path}: unexpected selection log header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != 7:
                raise ValueError(f"{path}: line {lineno}: expected 7 columns")
            entries.append(
                SelectionLogEntry(
                    int(cells[0]), cells[1], kind_from_name(cells[2]), int(cells[3]),
                    cells[4], float(cells[5]), float(cells[6]),
                )
            )
    return entries
