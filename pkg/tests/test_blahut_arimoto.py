import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imdd_capacity.blahut_arimoto import (
    BaConfig,
    SolverReport,
    ba_solve,
    ba_step,
    kl_rows,
    mutual_information,
)


def h2(p):
    return -p * np.log2(p) - (1 - p) * np.log2(1 - p)


def test_bsc_capacity_closed_form():
    e = 0.11
    rep = ba_solve(np.array([[1 - e, e], [e, 1 - e]]))
    assert rep.converged
    assert rep.capacity == pytest.approx(1 - h2(e), abs=1e-6)
    np.testing.assert_allclose(rep.pmf, [0.5, 0.5], atol=1e-9)


def test_erasure_channel():
    e = 0.3
    w = np.array([[1 - e, e, 0.0], [0.0, e, 1 - e]])
    assert ba_solve(w).capacity == pytest.approx(1 - e, abs=1e-6)


def test_z_channel_closed_form():
    # C = log2(1 + (1-q) q^(q/(1-q))) for the Z channel with crossover q on input 1
    q = 0.25
    w = np.array([[1.0, 0.0], [q, 1 - q]])
    c = np.log2(1 + (1 - q) * q ** (q / (1 - q)))
    assert ba_solve(w, BaConfig(tol_bits=1e-9)).capacity == pytest.approx(c, abs=1e-8)


def test_noiseless_channel_is_log_m():
    rep = ba_solve(np.eye(5))
    assert rep.capacity == pytest.approx(np.log2(5), abs=1e-12)


def test_kl_rows_hand_computed():
    w = np.array([[0.75, 0.25], [0.25, 0.75]])
    p = np.array([0.5, 0.5])
    # p_Y = (0.5, 0.5)
    d = 0.75 * np.log2(1.5) + 0.25 * np.log2(0.5)
    np.testing.assert_allclose(kl_rows(p, w), [d, d], atol=1e-15)
    assert mutual_information(p, w) == pytest.approx(d, abs=1e-15)


def test_ba_step_hand_computed():
    w = np.array([[1.0, 0.0], [0.5, 0.5]])
    p = np.array([0.5, 0.5])
    # p_Y = (0.75, 0.25); D_0 = log2(4/3); D_1 = 0.5 log2(2/3) + 0.5 log2(2)
    d0 = np.log2(4 / 3)
    d1 = 0.5 * np.log2(2 / 3) + 0.5
    q = np.array([2**d0, 2**d1])
    np.testing.assert_allclose(ba_step(p, w), q / q.sum(), atol=1e-15)


def test_zero_probability_inputs_do_not_contribute():
    w = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    assert mutual_information([0.5, 0.5, 0.0], w) == pytest.approx(1.0)


def test_unreachable_output_gives_infinite_divergence():
    w = np.array([[1.0, 0.0], [0.0, 1.0]])
    d = kl_rows([1.0, 0.0], w)
    assert d[0] == 0.0 and np.isinf(d[1])


def test_bad_pmf_rejected():
    w = np.eye(2)
    with pytest.raises(ValueError):
        mutual_information([0.6, 0.6], w)
    with pytest.raises(ValueError):
        mutual_information([0.5, 0.25, 0.25], w)
    with pytest.raises(ValueError):
        mutual_information([1.5, -0.5], w)


def test_iteration_cap_flags_non_convergence():
    w = np.array([[0.9, 0.1, 0.0], [0.1, 0.8, 0.1], [0.0, 0.3, 0.7]])
    rep = ba_solve(w, BaConfig(tol_bits=1e-12, max_iters=3))
    assert not rep.converged
    assert rep.iterations == 3
    assert rep.capacity_lower <= rep.capacity_upper


def test_report_rejects_broken_invariants():
    with pytest.raises(ValueError):
        SolverReport(1.0, 0.5, np.array([1.0]), 1, np.array([1.0]), False, 1e-6)
    with pytest.raises(ValueError):
        SolverReport(0.5, 0.6, np.array([1.0]), 2, np.array([0.5, 0.4]), False, 1e-6)
    with pytest.raises(ValueError):
        SolverReport(0.5, 0.6, np.array([1.0]), 1, np.array([0.5]), True, 1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        BaConfig(tol_bits=0)
    with pytest.raises(ValueError):
        BaConfig(max_iters=0)


def _brute_force_capacity(w, step=0.02, fine=0.002):
    """Grid search over the 2-simplex, refined around the coarse optimum."""
    def best_on(grid_a, grid_b):
        a, b = np.meshgrid(grid_a, grid_b, indexing="ij")
        a, b = a.ravel(), b.ravel()
        ok = a + b <= 1 + 1e-12
        pts = np.stack([a[ok], b[ok], np.clip(1 - a[ok] - b[ok], 0, None)], axis=1)
        py = pts @ w
        with np.errstate(divide="ignore", invalid="ignore"):
            hy = -np.nansum(np.where(py > 0, py * np.log2(py), 0.0), axis=1)
            hyx = -np.nansum(np.where(w > 0, w * np.log2(w), 0.0), axis=1)
        mi = hy - pts @ hyx
        k = int(np.argmax(mi))
        return mi[k], pts[k]

    g = np.arange(0, 1 + 1e-9, step)
    v, p = best_on(g, g)
    ga = np.clip(np.arange(p[0] - step, p[0] + step + 1e-9, fine), 0, 1)
    gb = np.clip(np.arange(p[1] - step, p[1] + step + 1e-9, fine), 0, 1)
    v2, _ = best_on(ga, gb)
    return max(v, v2)


def test_random_channels_match_simplex_search():
    rng = np.random.default_rng(7)
    for _ in range(5):
        w = rng.random((3, 8)) ** 3
        w /= w.sum(axis=1, keepdims=True)
        assert ba_solve(w).capacity == pytest.approx(_brute_force_capacity(w), abs=2e-3)


channel_strategy = st.integers(2, 5).flatmap(
    lambda m: st.integers(2, 6).flatmap(
        lambda n: st.lists(st.floats(0.01, 1.0), min_size=m * n, max_size=m * n).map(
            lambda v: (np.array(v).reshape(m, n) / np.array(v).reshape(m, n).sum(1, keepdims=True))
        )
    )
)


@settings(max_examples=40, deadline=None)
@given(channel_strategy)
def test_capacity_bounds_and_output_permutation_invariance(w):
    rep = ba_solve(w)
    assert rep.capacity_lower <= rep.capacity_upper + 1e-12
    assert 0 <= rep.capacity <= np.log2(min(w.shape)) + 1e-9
    perm = np.arange(w.shape[1])[::-1]
    assert ba_solve(w[:, perm]).capacity == pytest.approx(rep.capacity, abs=2e-6)


@settings(max_examples=40, deadline=None)
@given(channel_strategy)
def test_input_permutation_permutes_optimum(w):
    a = ba_solve(w, BaConfig(tol_bits=1e-9))
    b = ba_solve(w[::-1], BaConfig(tol_bits=1e-9))
    assert b.capacity == pytest.approx(a.capacity, abs=1e-8)
    # MI of the reversed optimum on the reversed channel equals the capacity
    assert mutual_information(a.pmf[::-1], w[::-1]) == pytest.approx(a.capacity, abs=1e-12)
