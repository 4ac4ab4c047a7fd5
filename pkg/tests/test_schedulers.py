import math

import numpy as np
import pytest

import reference
from selfsched.schedulers import (
    ALL_KINDS,
    PORTFOLIO,
    AFScheduler,
    AWFScheduler,
    FAC2Scheduler,
    FACScheduler,
    GSSScheduler,
    SchedulerKind,
    SSScheduler,
    TSSScheduler,
    apply_chunk_threshold,
    awf_weights,
    exp_chunk,
    fac2_batch_chunk,
    fac_batch_chunk,
    gss_chunk,
    kind_from_name,
    make_scheduler,
    plan_static_blocks,
    portfolio_index,
    tss_defaults,
)


def drain(sched, thread_ids=(0,)):
    """Deliver chunks until the loop is exhausted, single-threaded order."""
    out = []
    i = 0
    while sched.remaining > 0:
        out.append(sched.next_chunk(thread_ids[i % len(thread_ids)]))
        i += 1
    return out


def test_portfolio_order_and_names():
    names = [k.value for k in PORTFOLIO]
    assert names == [
        "static", "ss", "gss", "auto_llvm", "tss", "static_steal",
        "mfac2", "awf_b", "awf_c", "awf_d", "awf_e", "maf",
    ]
    assert len(ALL_KINDS) == 14
    assert portfolio_index(SchedulerKind.MAF) == 11
    with pytest.raises(ValueError):
        portfolio_index(SchedulerKind.FAC)
    assert kind_from_name(" GSS ") is SchedulerKind.GSS
    with pytest.raises(ValueError):
        kind_from_name("banana")


def test_chunk_threshold_rule():
    assert apply_chunk_threshold(3, 781, 10000) == 781
    assert apply_chunk_threshold(5000, 781, 10000) == 5000
    assert apply_chunk_threshold(5000, 1, 300) == 300


def test_static_blocks_examples():
    assert plan_static_blocks(100, 4) == [(0, 25), (25, 25), (50, 25), (75, 25)]
    blocks = plan_static_blocks(262144, 20)
    sizes = [s for _, s in blocks]
    assert sizes[:19] == [13108] * 19 and sizes[19] == 13092
    assert plan_static_blocks(7, 4) == [(0, 2), (2, 2), (4, 2), (6, 1)]


def test_ss_always_one():
    sched = SSScheduler(1000, 8)
    assert all(c == 1 for c in drain(sched))


def test_ss_with_threshold_delivers_hundreds():
    sched = SSScheduler(1000, 8, chunk_param=100)
    chunks = drain(sched)
    assert chunks == [100] * 10


def test_gss_first_chunk_and_terminal():
    assert gss_chunk(1_000_000, 20) == 50_000
    assert gss_chunk(1, 7) == 1


def test_gss_sequence_matches_loop_oracle():
    chunks = drain(GSSScheduler(100, 4))
    assert chunks == reference.gss_chunks(100, 4)
    assert sum(chunks) == 100
    assert all(a >= b for a, b in zip(chunks, chunks[1:]))


def test_tss_parameters_example():
    sched = TSSScheduler(1_000_000, 20)
    assert (sched.f, sched.l) == (25_000, 1)
    assert sched.a == 80
    assert sched.delta == pytest.approx(24_999 / 79)
    assert tss_defaults(1_000_000, 20) == (25_000, 1)


def test_tss_consecutive_difference_is_delta():
    sched = TSSScheduler(100_000, 4)
    first = sched.next_chunk(0)
    second = sched.next_chunk(0)
    assert first == sched.f
    assert first - second == math.ceil(sched.delta) or first - second == math.floor(sched.delta)


def test_tss_sequence_conservation():
    chunks = drain(TSSScheduler(100, 4))
    assert chunks == reference.tss_chunks(100, 4)
    assert sum(chunks) == 100


def test_tss_degenerate_tiny_loop():
    chunks = drain(TSSScheduler(3, 4))
    assert sum(chunks) == 3


def test_fac_sigma_zero_reduces_to_known_ratios():
    # x0 = 1 and xj = 2 when sigma = 0.
    assert fac_batch_chunk(1000, 4, mu=1.0, sigma=0.0, batch_index=0) == 250
    assert fac_batch_chunk(1000, 4, mu=1.0, sigma=0.0, batch_index=3) == 125
    sched = FACScheduler(1000, 4, mu=1.0, sigma=0.0)
    assert sched.next_chunk(0) == gss_chunk(1000, 4)  # first batch equals guided first chunk


def test_fac_sequence_matches_brute_force():
    chunks = drain(FACScheduler(100, 4, mu=1.0, sigma=1.0))
    assert chunks == reference.fac_chunks(100, 4, mu=1.0, sigma=1.0)
    assert sum(chunks) == 100


def test_fac_batch_chunks_equal_within_batch():
    sched = FACScheduler(5000, 4, mu=1.0, sigma=0.7)
    first_batch = [sched.next_chunk(t) for t in range(4)]
    assert len(set(first_batch)) == 1


def test_fac2_first_batch_and_halving():
    assert fac2_batch_chunk(1_000_000, 20) == 25_000
    chunks = drain(FAC2Scheduler(1_000_000, 20))
    assert chunks[:20] == [25_000] * 20
    assert chunks == reference.fac2_chunks(1_000_000, 20)
    assert sum(chunks) == 1_000_000
    batch_sizes = chunks[::20]
    assert all(nxt <= math.ceil(cur / 2) + 1 for cur, nxt in zip(batch_sizes, batch_sizes[1:]))


def test_fac2_and_mfac2_identical_sequences():
    a = drain(make_scheduler(SchedulerKind.FAC2, 5000, 8))
    b = drain(make_scheduler(SchedulerKind.MFAC2, 5000, 8))
    assert a == b


def test_awf_weights_examples():
    assert awf_weights([1.0, 1.0], [1, 1]) == [1.0, 1.0]
    w = awf_weights([1.0, 3.0], [1, 1])
    assert w == pytest.approx([1.5, 0.5])


def test_awf_weights_partial_history_and_sum():
    w = awf_weights([2.0, 0.0, 6.0, 0.0], [2, 0, 2, 0])
    assert w[1] == 1.0 and w[3] == 1.0
    assert sum(w) == pytest.approx(4.0)
    rng = np.random.default_rng(2)
    for _ in range(30):
        p = int(rng.integers(1, 9))
        counts = [int(c) for c in rng.integers(0, 5, size=p)]
        sums = [float(c * rng.uniform(0.5, 2.0)) if c else 0.0 for c in counts]
        w = awf_weights(sums, counts)
        assert sum(w) == pytest.approx(p, rel=1e-9)
        assert all(x > 0 for x in w)


def test_awf_all_weights_one_matches_fac2():
    awf = AWFScheduler(5000, 4, variant="b")  # no completions recorded: weights stay 1
    fac2 = FAC2Scheduler(5000, 4)
    assert drain(awf) == drain(fac2)


def test_awf_faster_thread_gets_scaled_chunk():
    sched = AWFScheduler(10_000, 2, variant="b")
    # Thread 0 computes 3x faster per iteration than thread 1.
    sched.record_completion(0, 100, 100.0, 100.0)
    sched.record_completion(1, 100, 300.0, 300.0)
    base = fac2_batch_chunk(sched.remaining, 2)
    c0 = sched.next_chunk(0)
    c1 = sched.next_chunk(1)
    assert c0 == math.ceil(1.5 * base)
    assert c1 == math.ceil(0.5 * base)
    assert c0 > c1


def test_awf_chunkwise_recomputes_from_remaining():
    sched = AWFScheduler(8000, 4, variant="c")
    first = sched.next_chunk(0)
    assert first == fac2_batch_chunk(8000, 4)
    second = sched.next_chunk(1)
    assert second == fac2_batch_chunk(8000 - first, 4)


def test_af_bootstrap_chunk_rule():
    sched = AFScheduler(10_000, 2)
    assert sched.next_chunk(0) == 100
    small = AFScheduler(60, 2)
    assert small.next_chunk(0) == 60  # clamped to remaining
    lifted = AFScheduler(10_000, 2, chunk_param=300)
    assert lifted.next_chunk(0) == 300


def test_af_homogeneous_zero_variance_is_equal_share():
    # D = 0 and identical means: chunk collapses to remaining / p.
    sched = AFScheduler(1000, 4)
    for t in range(4):
        sched.record_completion(t, 10, 10.0, 10.0)  # per-iteration time 1.0, sigma 0
    assert sched._calculated(0) == 250


def test_af_two_thread_hand_example():
    sched = AFScheduler(100, 2)
    sched.record_completion(0, 10, 10.0, 10.0)  # mu 1, sigma 0
    sched.record_completion(1, 10, 20.0, 20.0)  # mu 2, sigma 0
    # T_n = 2/3; chunk_i = ceil(T_n * R / mu_i) with R = 100
    assert sched._calculated(0) == 67
    assert sched._calculated(1) == 34
    assert sched._calculated(0) == reference.af_chunk_value(100, [1.0, 2.0], [0.0, 0.0], 0)


def test_exp_chunk_degenerate_and_bound():
    assert exp_chunk(8, 4) == 1  # n = 2p: candidate list is [1]
    rng = np.random.default_rng(5)
    for _ in range(40):
        n = int(rng.integers(1, 2_000_000))
        p = int(rng.integers(1, 129))
        v = exp_chunk(n, p)
        assert 1 <= v <= max(1, math.ceil(n / (2 * p)))
        assert v == reference.exp_chunk_value(n, p)


def test_exp_chunk_large_loop_example():
    # Candidate curve for n=1e6, p=20 starts 25000, 12500, ... and ends at 1.
    candidates = []
    i = 2
    while True:
        c = max(1, math.ceil(1_000_000 / (i * 20)))
        candidates.append(c)
        if c == 1:
            break
        i *= 2
    assert candidates[:7] == [25000, 12500, 6250, 3125, 1563, 782, 391]
    assert exp_chunk(1_000_000, 20) == candidates[round(0.618 * (len(candidates) - 1))]


def test_nonadaptive_sequences_non_increasing():
    for build in (
        lambda: SSScheduler(600, 4),
        lambda: GSSScheduler(600, 4),
        lambda: TSSScheduler(600, 4),
        lambda: FAC2Scheduler(600, 4),
        lambda: SSScheduler(600, 4, chunk_param=9),
        lambda: GSSScheduler(600, 4, chunk_param=9),
        lambda: TSSScheduler(600, 4, chunk_param=9),
        lambda: FAC2Scheduler(600, 4, chunk_param=9),
    ):
        chunks = drain(build())
        assert all(a >= b for a, b in zip(chunks, chunks[1:])), chunks


def test_threshold_dominance_on_delivered_chunks():
    for kind in (SchedulerKind.SS, SchedulerKind.GSS, SchedulerKind.TSS,
                 SchedulerKind.MFAC2, SchedulerKind.AWF_C, SchedulerKind.MAF):
        sched = make_scheduler(kind, 700, 4, chunk_param=13)
        chunks = drain(sched, thread_ids=(0, 1, 2, 3))
        assert all(c >= 13 for c in chunks[:-1])
        assert chunks[-1] >= 1


def test_make_scheduler_rejects_preassigned_and_bad_fac():
    with pytest.raises(ValueError):
        make_scheduler(SchedulerKind.STATIC, 100, 4)
    with pytest.raises(ValueError):
        make_scheduler(SchedulerKind.FAC, 100, 4)  # needs mu/sigma
