import numpy as np
import pytest

from selfsched import (
    SchedulerKind,
    SimConfig,
    SystemModel,
    cov,
    execution_imbalance,
    lib_percent,
    simulate_loop,
)
from selfsched.workloads import WorkloadSpec, build_workload


def test_lib_percent_all_equal():
    assert lib_percent([10.0, 10.0, 10.0, 10.0]) == 0.0


def test_lib_percent_two_point():
    assert lib_percent([10.0, 20.0]) == pytest.approx(25.0)


def test_lib_percent_from_balanced_simulation():
    # Equal partition of a uniform loop: all threads finish simultaneously.
    w = build_workload(WorkloadSpec("uniform", n=2000, t=1, params={"cost": 1.0}, seed=4))
    rec = simulate_loop(w, 0, SystemModel(p=20), SimConfig(SchedulerKind.STATIC), seed=1)
    assert len(rec.finish) == 20
    assert lib_percent(rec.finish) == pytest.approx(0.0, abs=1e-12)


def test_lib_percent_rejects_empty():
    with pytest.raises(ValueError):
        lib_percent([])


def test_execution_imbalance_examples():
    assert execution_imbalance([10.0, 10.0], p=2) == 0.0
    assert execution_imbalance([10.0, 20.0], p=2) == pytest.approx(50.0)


def test_execution_imbalance_matches_direct_formula():
    rng = np.random.default_rng(7)
    vectors = [rng.uniform(0.5, 50.0, size=rng.integers(2, 12)) for _ in range(30)]
    vectors.append(np.array([30.0, 30.0, 30.0, 30.0, 30.0, 0.0001]))
    for v in vectors:
        p = len(v)
        expected = (v.max() - v.mean()) / v.max() * (p / (p - 1)) * 100.0
        assert execution_imbalance(v, p) == pytest.approx(expected, rel=1e-12)


def test_execution_imbalance_needs_two_threads():
    with pytest.raises(ValueError):
        execution_imbalance([10.0], p=1)


def test_cov_constant_is_zero():
    assert cov([5.0, 5.0, 5.0]) == 0.0
    assert cov([3.0]) == 0.0
    assert cov([2.5] * 17) == 0.0


def test_cov_two_point_against_two_pass_oracle():
    values = [1.0, 3.0]
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    assert cov(values) == pytest.approx(var**0.5 / mean, rel=1e-12)


def test_cov_rejects_zero_mean():
    with pytest.raises(ValueError):
        cov([0.0, 0.0])


def test_metrics_scale_invariance():
    rng = np.random.default_rng(3)
    for _ in range(25):
        v = rng.uniform(0.1, 100.0, size=rng.integers(2, 16))
        for c in (0.25, 3.0, 1e6):
            assert lib_percent(c * v) == pytest.approx(lib_percent(v), abs=1e-9)
            assert execution_imbalance(c * v, len(v)) == pytest.approx(
                execution_imbalance(v, len(v)), abs=1e-9
            )


def test_lib_percent_zero_iff_equal_and_bounded():
    rng = np.random.default_rng(11)
    for _ in range(50):
        v = rng.uniform(0.1, 100.0, size=rng.integers(1, 16))
        lib = lib_percent(v)
        assert 0.0 <= lib < 100.0
        if lib == 0.0:
            assert np.allclose(v, v[0])
        if np.allclose(v, v[0]):
            assert lib == pytest.approx(0.0, abs=1e-9)


def test_system_model_validation():
    with pytest.raises(ValueError):
        SystemModel(p=0)
    with pytest.raises(ValueError):
        SystemModel(p=2, h=-0.1)
    with pytest.raises(ValueError):
        SystemModel(p=2, speed=(1.0, 0.0))
    with pytest.raises(ValueError):
        SystemModel(p=2, speed=(1.0,))
    with pytest.raises(ValueError):
        SystemModel(p=2, start_offset=(-1.0, 0.0))
    with pytest.raises(ValueError):
        SystemModel(p=2, noise_sigma=-0.5)
    m = SystemModel(p=3)
    assert m.speed == (1.0, 1.0, 1.0)
    assert m.start_offset == (0.0, 0.0, 0.0)
