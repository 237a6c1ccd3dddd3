import time

import numpy as np
import pytest
from numpy.testing import assert_allclose

from blockmat import AttributeLayout, BlockSymMatrix, max_offdiag_block_norm
from data_cov import CovEstimate
from screening import estimate_screened, screen
from solver import SolverConfig, estimate

from conftest import random_spd

TIGHT = dict(epsilon=1e-11, kkt_tol=1e-9, max_sweeps=20000)


def grouped_cov(rng, groups, k, leak=0.0):
    """Block diagonal S over node groups, plus optional small cross-group noise"""
    p = sum(groups)
    layout = AttributeLayout.uniform(p, k)
    s = np.zeros((layout.total_dim, layout.total_dim))
    start = 0
    for size in groups:
        idx = layout.indices(range(start, start + size))
        s[np.ix_(idx, idx)] = random_spd(rng, len(idx), ridge=1.0)
        start += size
    if leak:
        noise = leak * rng.uniform(-1.0, 1.0, size=s.shape)
        s += (noise + noise.T) / 2.0 * (s == 0)
    return CovEstimate(BlockSymMatrix(layout, s), np.full((p, p), 100))


def hand_built():
    layout = AttributeLayout.uniform(3, 1)
    s = BlockSymMatrix(layout, [[1.0, 0.8, 0.1], [0.8, 1.0, 0.2], [0.1, 0.2, 1.0]])
    return s


def test_hand_built_partition():
    assert screen(hand_built(), 0.5).components == [[0, 1], [2]]


def test_extreme_lambdas(small_cov):
    lam = max_offdiag_block_norm(small_cov.s) + 1e-9
    assert screen(small_cov, lam).components == [[a] for a in range(small_cov.s.p)]
    assert len(screen(small_cov, 0.0)) == 1


def test_threshold_is_strict():
    assert screen(hand_built(), 0.8).components == [[0], [1], [2]]


def test_partition_nesting(small_cov):
    lam_max = max_offdiag_block_norm(small_cov.s)
    grid = np.geomspace(lam_max, lam_max / 50, 12)
    parts = [screen(small_cov, lam) for lam in grid]
    for larger, smaller in zip(parts, parts[1:]):
        assert larger.refines(smaller)


def test_two_components_have_zero_cross_blocks(rng):
    cov = grouped_cov(rng, [3, 3], 2)
    report = estimate_screened(cov, SolverConfig(lam=0.05))
    for a in range(3):
        for b in range(3, 6):
            assert not report.omega_hat.block(a, b).any()


def test_single_component_is_plain_estimate(small_cov):
    cfg = SolverConfig(lam=1e-3)
    assert len(screen(small_cov, cfg.lam)) == 1
    assert_allclose(estimate_screened(small_cov, cfg).omega_hat.data,
                    estimate(small_cov, cfg).omega_hat.data)


@pytest.mark.parametrize("seed", range(20))
def test_screened_equals_unscreened(seed):
    rng = np.random.default_rng(500 + seed)
    groups = [[4, 4, 4], [3, 5], [2, 3, 3, 4]][seed % 3]
    cov = grouped_cov(rng, groups, 2, leak=0.01)
    cfg = SolverConfig(lam=0.1, **TIGHT)
    assert len(screen(cov, cfg.lam)) >= len(groups)
    plain = estimate(cov, cfg)
    screened = estimate_screened(cov, cfg)
    assert_allclose(screened.omega_hat.data, plain.omega_hat.data, atol=1e-5)
    assert set(screened.graph.edges()) == set(plain.graph.edges())


def test_parallel_components_match_serial(rng):
    cov = grouped_cov(rng, [4, 4, 4], 2)
    cfg = SolverConfig(lam=0.1)
    serial = estimate_screened(cov, cfg, n_jobs=1)
    parallel = estimate_screened(cov, cfg, n_jobs=2)
    assert np.array_equal(serial.omega_hat.data, parallel.omega_hat.data)


def _best_time(fn, repeat=2):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def test_screening_is_faster_with_components(rng):
    cov = grouped_cov(rng, [8, 8, 8, 8], 3)
    cfg = SolverConfig(lam=0.1, epsilon=1e-8)
    plain = _best_time(lambda: estimate(cov, cfg))
    screened = _best_time(lambda: estimate_screened(cov, cfg))
    assert screened < plain


def test_partition_json_shape(small_cov):
    out = screen(small_cov, 0.2).to_dict()
    assert out["lambda"] == 0.2
    assert sorted(sum(out["components"], [])) == list(range(small_cov.s.p))
