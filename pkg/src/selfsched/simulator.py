"""Discrete-event execution of one loop instance under a chosen scheduler.

Threads request chunks as they become available, pay the scheduling overhead
``h`` once per round, and accumulate iteration costs scaled by their speed
factor and a multiplicative noise draw.  A simulation is deterministic for a
fixed (workload, system, config, seed); availability ties break by lowest
thread id.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Protocol

import numpy as np

from .core import ChunkAssignment, LoopRecord, SystemModel, Workload, lib_percent
from .schedulers import (
    SchedulerKind,
    make_scheduler,
    plan_static_blocks,
    ceil_div,
)

__all__ = ["SimConfig", "ScheduleProvider", "simulate_loop", "run_timesteps", "dump_chunk_trace"]


@dataclass(frozen=True)
class SimConfig:
    """Scheduler choice for one loop instance; chunk_param 1 is the default."""

    scheduler: SchedulerKind
    chunk_param: int = 1
    record_chunks: bool = True

    def __post_init__(self):
        if self.chunk_param < 1:
            raise ValueError("chunk_param must be >= 1")


class ScheduleProvider(Protocol):
    """Yields one (scheduler, chunk_param) per time-step, seeing each result."""

    def next(self, last: LoopRecord | None) -> tuple[SchedulerKind, int]: ...


def _noise_factor(seed: int, timestep: int, thread: int, round_index: int, sigma: float) -> float:
    """Multiplicative log-normal factor with unit mean and relative stddev sigma.

    Counter-based: the draw is a pure function of (seed, timestep, thread,
    round), so execution order never perturbs the stream.
    """
    if sigma <= 0.0:
        return 1.0
    ss = np.random.SeedSequence(entropy=(seed & 0xFFFFFFFFFFFFFFFF, timestep, thread, round_index))
    z = float(np.random.Generator(np.random.PCG64(ss)).standard_normal())
    s2 = math.log1p(sigma * sigma)
    return math.exp(-0.5 * s2 + math.sqrt(s2) * z)


def _cost_prefix(workload: Workload, timestep: int) -> np.ndarray:
    costs = workload.costs(timestep)
    prefix = np.empty(len(costs) + 1, dtype=float)
    prefix[0] = 0.0
    np.cumsum(costs, out=prefix[1:])
    return prefix


def _record(assignments, finish, n_rounds) -> LoopRecord:
    finish = tuple(float(f) for f in finish)
    return LoopRecord(
        assignments=tuple(assignments),
        finish=finish,
        t_par=max(finish),
        lib_percent=lib_percent(finish),
        n_rounds=n_rounds,
    )


def simulate_loop(
    workload: Workload,
    timestep: int,
    system: SystemModel,
    config: SimConfig,
    seed: int | None = None,
) -> LoopRecord:
    """Simulate one loop instance and return its record.

    Pre-assigned kinds (static, auto_llvm) execute one block per thread with a
    single scheduling round each; static_steal adds work stealing on top;
    every other kind pulls chunks from the central queue.  Threads arriving
    after all iterations are consumed take no work.
    """
    if not 0 <= timestep < workload.n_timesteps:
        raise ValueError(f"timestep {timestep} outside [0, {workload.n_timesteps})")
    if seed is None:
        seed = system.seed
    prefix = _cost_prefix(workload, timestep)
    kind = config.scheduler
    if kind in (SchedulerKind.STATIC, SchedulerKind.AUTO_LLVM):
        return _simulate_preassigned(workload, timestep, system, config, seed, prefix)
    if kind is SchedulerKind.STATIC_STEAL:
        return _simulate_steal(workload, timestep, system, config, seed, prefix)
    return _simulate_queue(workload, timestep, system, config, seed, prefix)


def _simulate_preassigned(workload, timestep, system, config, seed, prefix) -> LoopRecord:
    n, p = workload.n_iterations, system.p
    blocks = plan_static_blocks(n, p, config.chunk_param)
    finish = list(system.start_offset)
    assignments = []
    for tid, (start, size) in enumerate(blocks):
        request = system.start_offset[tid]
        factor = _noise_factor(seed, timestep, tid, 0, system.noise_sigma)
        exec_time = (prefix[start + size] - prefix[start]) * system.speed[tid] * factor
        done = float(request + system.h + exec_time)
        finish[tid] = done
        if config.record_chunks:
            assignments.append(ChunkAssignment(tid, start, size, float(request), done))
    return _record(assignments, finish, n_rounds=len(blocks))


def _simulate_queue(workload, timestep, system, config, seed, prefix) -> LoopRecord:
    n, p, h = workload.n_iterations, system.p, system.h
    mu = sigma = None
    if config.scheduler is SchedulerKind.FAC:
        costs = workload.costs(timestep)
        mu = float(costs.mean())
        sigma = float(costs.std())
    sched = make_scheduler(config.scheduler, n, p, config.chunk_param, mu=mu, sigma=sigma)

    avail = [(system.start_offset[i], i) for i in range(p)]
    heapq.heapify(avail)
    pending: list[tuple[float, int, int, float, float]] = []  # finish, tid, size, exec, total
    finish = [0.0] * p
    rounds = [0] * p
    n_rounds = 0
    next_start = 0
    assignments = []

    while avail:
        now, tid = heapq.heappop(avail)
        # Only completions that happened by `now` may inform adaptive state.
        while pending and pending[0][0] <= now:
            _, ctid, csize, cexec, ctotal = heapq.heappop(pending)
            sched.record_completion(ctid, csize, cexec, ctotal)
        if sched.remaining <= 0:
            finish[tid] = now
            continue
        size = sched.next_chunk(tid)
        start = next_start
        next_start += size
        factor = _noise_factor(seed, timestep, tid, rounds[tid], system.noise_sigma)
        exec_time = (prefix[start + size] - prefix[start]) * system.speed[tid] * factor
        done = float(now + h + exec_time)
        heapq.heappush(pending, (done, tid, size, exec_time, h + exec_time))
        if config.record_chunks:
            assignments.append(ChunkAssignment(tid, start, size, float(now), done))
        rounds[tid] += 1
        n_rounds += 1
        heapq.heappush(avail, (done, tid))
    return _record(assignments, finish, n_rounds)


def _simulate_steal(workload, timestep, system, config, seed, prefix) -> LoopRecord:
    """Static blocks plus steal-half: idle threads raid the busiest victim."""
    n, p, h = workload.n_iterations, system.p, system.h
    blocks = plan_static_blocks(n, p, config.chunk_param)

    seg_start = [0] * p      # first iteration of the running segment
    seg_end = [0] * p        # exclusive end; shrinks when robbed
    seg_t0 = [0.0] * p       # execution start time of the segment
    seg_req = [0.0] * p      # request time (before overhead)
    rate = [0.0] * p         # speed * noise for the segment
    executing = [False] * p
    rounds = [0] * p
    gen = [0] * p
    finish = [0.0] * p
    assignments = []
    n_rounds = 0

    events: list[tuple[float, int, int]] = []
    for tid in range(p):
        offset = system.start_offset[tid]
        if tid < len(blocks):
            start, size = blocks[tid]
            factor = _noise_factor(seed, timestep, tid, 0, system.noise_sigma)
            r = system.speed[tid] * factor
            seg_start[tid], seg_end[tid] = start, start + size
            seg_req[tid], seg_t0[tid], rate[tid] = offset, offset + h, r
            executing[tid] = True
            rounds[tid] = 1
            n_rounds += 1
            done = float(seg_t0[tid] + (prefix[seg_end[tid]] - prefix[seg_start[tid]]) * r)
            heapq.heappush(events, (done, tid, 0))
        else:
            heapq.heappush(events, (offset, tid, 0))

    def first_unstarted(v: int, now: float) -> int:
        """Lowest iteration of v's segment not yet begun at time `now`."""
        if now <= seg_t0[v]:
            return seg_start[v]
        target = prefix[seg_start[v]] + (now - seg_t0[v]) / rate[v]
        idx = int(np.searchsorted(prefix, target, side="right")) - 1
        if target > prefix[idx]:
            idx += 1
        return min(max(idx, seg_start[v]), seg_end[v])

    while events:
        now, tid, egen = heapq.heappop(events)
        if egen != gen[tid]:
            continue  # superseded by a shrink
        if executing[tid]:
            size = seg_end[tid] - seg_start[tid]
            if config.record_chunks:
                assignments.append(
                    ChunkAssignment(tid, seg_start[tid], size, float(seg_req[tid]), float(now))
                )
            executing[tid] = False
        # Steal attempt: victim with the most unstarted iterations wins.
        # Only threads already executing are raidable; that leaves the victim
        # its in-flight iteration, so every steal round makes progress.
        victim, best = -1, 0
        for v in range(p):
            if v == tid or not executing[v] or now <= seg_t0[v]:
                continue
            stealable = seg_end[v] - first_unstarted(v, now)
            if stealable > best:
                victim, best = v, stealable
        if victim < 0:
            finish[tid] = now
            continue
        take = min(best, max(ceil_div(best, 2), config.chunk_param))
        new_end = seg_end[victim] - take
        seg_end[victim] = new_end
        gen[victim] += 1
        v_done = float(seg_t0[victim] + (prefix[new_end] - prefix[seg_start[victim]]) * rate[victim])
        heapq.heappush(events, (v_done, victim, gen[victim]))

        factor = _noise_factor(seed, timestep, tid, rounds[tid], system.noise_sigma)
        r = system.speed[tid] * factor
        seg_start[tid], seg_end[tid] = new_end, new_end + take
        seg_req[tid], seg_t0[tid], rate[tid] = now, now + h, r
        executing[tid] = True
        rounds[tid] += 1
        n_rounds += 1
        gen[tid] += 1
        done = float(seg_t0[tid] + (prefix[seg_end[tid]] - prefix[seg_start[tid]]) * r)
        heapq.heappush(events, (done, tid, gen[tid]))
    return _record(assignments, finish, n_rounds)


def run_timesteps(
    workload: Workload,
    system: SystemModel,
    provider: ScheduleProvider,
    seed: int | None = None,
    record_chunks: bool = False,
) -> list[LoopRecord]:
    """Run every time-step of the workload, asking the provider before each.

    The provider sees the previous step's record (None before the first), so
    online selection methods can react as the loop re-executes.
    """
    records: list[LoopRecord] = []
    last: LoopRecord | None = None
    for t in range(workload.n_timesteps):
        kind, chunk_param = provider.next(last)
        config = SimConfig(kind, chunk_param, record_chunks=record_chunks)
        last = simulate_loop(workload, t, system, config, seed)
        records.append(last)
    return records


def dump_chunk_trace(records: Iterable[LoopRecord], path) -> None:
    """Write per-chunk rows for chunk-progression plots."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("timestep,thread,round,start,size,request_time,finish_time\n")
        for t, rec in enumerate(records):
            per_thread: dict[int, int] = {}
            for a in rec.assignments:
                rnd = per_thread.get(a.thread_id, 0)
                per_thread[a.thread_id] = rnd + 1
                fh.write(
                    f"{t},{a.thread_id},{rnd},{a.start},{a.size},"
                    f"{a.request_time!r},{a.finish_time!r}\n"
                )
