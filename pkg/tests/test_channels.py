import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import ndtr

from imdd_capacity import channels as ch
from imdd_capacity.blahut_arimoto import mutual_information
from imdd_capacity.errors import ConfigurationError


def test_chi2_density_matches_scaled_noncentral_chi2():
    # Y / sigma2 is noncentral chi-square with one degree of freedom, nc = x / sigma2
    p = ch.NoiseParams(0.05)
    y = np.linspace(0.01, 6.0, 400)
    for x in (0.0, 0.3, 1.0, 4.0):
        ref = stats.ncx2.pdf(y / p.sigma2, 1, x / p.sigma2) / p.sigma2 if x > 0 else \
            stats.chi2.pdf(y / p.sigma2, 1) / p.sigma2
        np.testing.assert_allclose(ch.chi2_density(y, x, p), ref, rtol=1e-9, atol=1e-300)


def test_chi2_density_log_domain_far_tail():
    # large sqrt(xy)/sigma2 would overflow a direct Bessel evaluation
    p = ch.NoiseParams(1e-4)
    v = ch.chi2_density(np.array([49.0, 50.0]), 49.0, p)
    assert np.all(np.isfinite(v)) and v[0] > 0


def test_chi2_density_normalized_with_known_moments():
    p = ch.NoiseParams(0.1)
    for x in (0.0, 0.5, 2.0):
        f = lambda y: ch.chi2_density(np.array([y]), x, p)[0]
        top = x + 40 * np.sqrt(x * p.sigma2 + p.sigma2**2) + 1
        total = integrate.quad(f, 0, top, points=[x], limit=400)[0]
        mean = integrate.quad(lambda y: y * f(y), 0, top, points=[x], limit=400)[0]
        second = integrate.quad(lambda y: y * y * f(y), 0, top, points=[x], limit=400)[0]
        assert total == pytest.approx(1.0, abs=1e-8)
        assert mean == pytest.approx(x + p.sigma2, rel=1e-7)
        # var of (sqrt(x) + Z)^2 with Z ~ N(0, s2): 4 x s2 + 2 s2^2
        assert second - mean**2 == pytest.approx(4 * x * p.sigma2 + 2 * p.sigma2**2, rel=1e-6)


def test_gaussian_approximation_moments_and_exact_gap():
    p = ch.NoiseParams(0.01)
    x = 1.0
    y = np.linspace(x - 1, x + 1, 20001)
    f = ch.chi2_gaussian_approx_density(y, x, p)
    m = integrate.trapezoid(y * f, y)
    v = integrate.trapezoid((y - m) ** 2 * f, y)
    assert m == pytest.approx(x, rel=1e-9)
    assert v == pytest.approx(2 * x * p.sigma2, rel=1e-6)
    # the approximation's variance is about half the exact one
    assert v / (4 * x * p.sigma2 + 2 * p.sigma2**2) == pytest.approx(0.5, rel=0.01)


def test_density_domain_errors():
    p = ch.NoiseParams(0.1)
    with pytest.raises(ValueError):
        ch.chi2_density(np.array([1.0]), -0.1, p)
    with pytest.raises(ValueError):
        ch.chi2_gaussian_approx_density(np.array([1.0]), 0.0, p)
    with pytest.raises(ConfigurationError):
        ch.density("rayleigh", np.array([1.0]), 1.0, p)
    with pytest.raises(ValueError):
        ch.NoiseParams(0.0)


def test_noise_from_snr():
    assert ch.NoiseParams.from_snr_db(20).sigma2 == pytest.approx(0.01)
    assert ch.NoiseParams.from_snr_db(10, signal_power=3.0).sigma2 == pytest.approx(0.3)


def test_awgn_rows_match_direct_cdf_difference():
    p = ch.NoiseParams(0.04)
    tm = ch.discretize("awgn", [0.0, 0.5, 1.0], p, bins=256)
    e = tm.grid.edges
    for j, x in enumerate(tm.support):
        raw = ndtr((e[1:] - x) / p.sigma) - ndtr((e[:-1] - x) / p.sigma)
        np.testing.assert_allclose(tm.rows[j], raw / raw.sum(), atol=1e-14)


@pytest.mark.parametrize("law", ch.LAWS)
def test_discretize_row_stochastic_with_small_leakage(law):
    p = ch.NoiseParams(0.02)
    tm = ch.discretize(law, [0.0 if law != "chi2_approx" else 0.1, 0.4, 1.0, 2.0], p)
    np.testing.assert_allclose(tm.rows.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(tm.rows >= 0)
    assert np.max(np.abs(tm.leakage)) < ch.MAX_LEAKAGE


def test_quadrature_matches_exact_bin_integration():
    p = ch.NoiseParams(0.05)
    x = [0.0, 1.0, 2.0, 3.0]
    exact = ch.discretize("chi2", x, p)
    quad = ch.discretize("chi2", x, p, exact.grid, method="quadrature", subsamples=16)
    # x = 0 has an integrable singularity at y = 0 that midpoint sampling misses
    np.testing.assert_allclose(quad.rows[1:], exact.rows[1:], atol=1e-6)
    u = np.full(4, 0.25)
    assert mutual_information(u, quad) == pytest.approx(mutual_information(u, exact), abs=1e-3)


def test_grid_doubling_changes_mi_little():
    p = ch.NoiseParams(0.05)
    x = [0.0, 1.0, 2.0, 3.0]
    u = np.full(4, 0.25)
    a = mutual_information(u, ch.discretize("chi2", x, p, bins=2048))
    b = mutual_information(u, ch.discretize("chi2", x, p, bins=4096))
    assert abs(a - b) < 1e-4


def test_fixed_grid_too_narrow_reports_leakage():
    p = ch.NoiseParams(0.1)
    g = ch.OutputGrid.uniform(-0.2, 0.2, 64)
    tm = ch.discretize("awgn", [0.0], p, g)
    assert tm.leakage[0] > 0.4


def test_hard_decision_confusion_awgn_binary():
    p = ch.NoiseParams(0.09)
    conf = ch.hard_decision_confusion("awgn", [-1.0, 1.0], p)
    q = ndtr(-1.0 / p.sigma)
    np.testing.assert_allclose(conf, [[1 - q, q], [q, 1 - q]], atol=1e-15)


def test_hard_decision_confusion_chi2_edge_level_most_reliable():
    p = ch.NoiseParams.from_snr_db(20)
    l0 = 1.0 / 3.5
    conf = ch.hard_decision_confusion("chi2", l0 * np.arange(8), p)
    np.testing.assert_allclose(conf.sum(axis=1), 1.0)
    assert conf[7, 7] > conf[6, 6]


def test_transition_matrix_validation():
    g = ch.OutputGrid.uniform(0, 1, 4)
    with pytest.raises(ValueError):
        ch.TransitionMatrix(np.array([[0.5, 0.5, 0.0, 0.1]]), g, np.array([0.0]))
    with pytest.raises(ValueError):
        ch.check_support([1.0, 0.5])
    with pytest.raises(ValueError):
        ch.check_support([-1.0, 0.5], nonnegative=True)
