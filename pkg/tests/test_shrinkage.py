import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from hankeldenoise import (
    DegenerateInputError,
    InvalidRankError,
    PoleProximityError,
    ShrinkagePolicy,
    SpectralMeasure,
    Transform,
    apply_shrinkage,
    data_driven_shrinker,
    dtransform,
    estimate_noise_level,
    hard_threshold_value,
    mp_median,
    optimal_shrinker,
    soft_threshold_value,
    tsvd_estimate,
)
from hankeldenoise.shrinkage import (
    data_driven_values,
    hard_threshold,
    median_singular_value,
    mp_cdf,
    mp_support,
    soft_threshold,
    svd,
    truncate_values,
)

betas = st.floats(0.01, 1.0)


def test_svd_sign_convention_and_reconstruction(rng):
    M = rng.standard_normal((5, 7))
    dec = svd(M)
    assert np.all(np.diff(dec.s) <= 0)
    np.testing.assert_allclose(dec.compose(dec.s), M, rtol=0, atol=1e-10 * np.linalg.norm(M))
    pivots = dec.U[np.argmax(np.abs(dec.U), axis=0), np.arange(5)]
    assert np.all(pivots >= 0)
    np.testing.assert_allclose(dec.U.T @ dec.U, np.eye(5), atol=1e-12)


# --- TSVD -------------------------------------------------------------------------------


def test_tsvd_keeps_exact_low_rank(rng):
    W = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 6))
    np.testing.assert_allclose(tsvd_estimate(W, None, 2), W, rtol=0, atol=1e-10 * np.linalg.norm(W))


def test_tsvd_rank_zero_is_zero(rng):
    W = rng.standard_normal((4, 6))
    assert np.all(tsvd_estimate(W, Transform.identity(6), 0) == 0)


def test_tsvd_residual_is_trailing_energy(rng):
    W = rng.standard_normal((5, 6))
    s = np.linalg.svd(W, compute_uv=False)
    res = np.linalg.norm(W - tsvd_estimate(W, None, 2)) ** 2
    assert res == pytest.approx(np.sum(s[2:] ** 2), rel=1e-10)


def test_tsvd_invalid_rank(rng):
    with pytest.raises(InvalidRankError):
        tsvd_estimate(rng.standard_normal((3, 4)), None, 4)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_tsvd_beats_random_rank_r(rng, r):
    W = rng.standard_normal((5, 6))
    best = np.linalg.norm(W - tsvd_estimate(W, None, r))
    for _ in range(1000):
        Y = rng.standard_normal((5, r)) @ rng.standard_normal((r, 6))
        assert best <= np.linalg.norm(W - Y)


def test_tsvd_with_projector_preserves_complement(rng):
    from hankeldenoise import TransformKind, build_transform

    U = rng.standard_normal((3, 10))
    T = build_transform(TransformKind.NULL_SPACE_PROJECTOR, 10, U)
    W = rng.standard_normal((4, 10))
    X = tsvd_estimate(W, T, 2)
    np.testing.assert_allclose(T.complement(X), T.complement(W), atol=1e-12)
    assert np.linalg.matrix_rank(T.apply(X), tol=1e-10) <= 2


def test_truncate_policy_matches_tsvd_bitwise(rng):
    W = rng.standard_normal((6, 9))
    assert np.array_equal(apply_shrinkage(W, None, ShrinkagePolicy.truncate(3)), tsvd_estimate(W, None, 3))


# --- analytic laws ----------------------------------------------------------------------


def test_optimal_shrinker_value():
    assert optimal_shrinker(3.0, 1, 1.0, 1.0) == pytest.approx(math.sqrt(45) / 3, rel=1e-14)


@pytest.mark.parametrize("beta", [0.25, 0.5, 1.0])
def test_optimal_shrinker_zero_below_edge(beta):
    n, sigma = 50, 0.3
    edge = (1 + math.sqrt(beta)) * math.sqrt(n) * sigma
    assert np.all(optimal_shrinker(np.linspace(0, edge, 100), n, beta, sigma) == 0)
    assert optimal_shrinker(edge, n, beta, sigma) == 0.0
    # the radicand vanishes at the edge, so the upper branch tends to 0 as well
    assert optimal_shrinker(edge * (1 + 1e-9), n, beta, sigma) < 1e-3 * edge


def test_hard_threshold_constants():
    assert hard_threshold_value(1, 1, 1) == pytest.approx(4 / math.sqrt(3), abs=1e-12)
    assert hard_threshold_value(1e-14, 1, 1) == pytest.approx(math.sqrt(2), abs=1e-6)
    assert hard_threshold_value(0.3, 2.5, 7) == pytest.approx(2.5 * hard_threshold_value(0.3, 1, 7), rel=1e-14)


def test_soft_threshold_constants():
    assert soft_threshold_value(1, 1, 1) == 2
    assert soft_threshold_value(0.25, 1, 4) == 3


def test_soft_below_hard_on_grid():
    for beta in np.linspace(1e-3, 1, 500):
        assert soft_threshold_value(beta, 1, 10) <= hard_threshold_value(beta, 1, 10)


@settings(max_examples=50)
@given(betas)
def test_laws_are_shrinkers_and_monotone(beta):
    n, sigma = 40, 0.7
    w = np.linspace(0, 4 * math.sqrt(n) * sigma, 400)
    laws = [
        optimal_shrinker(w, n, beta, sigma),
        hard_threshold(w, hard_threshold_value(beta, sigma, n)),
        soft_threshold(w, soft_threshold_value(beta, sigma, n)),
    ]
    for eta in laws:
        assert eta[0] == 0
        assert np.all(eta >= 0) and np.all(eta <= w)
        assert np.all(np.diff(eta) >= -1e-12)
    opt = laws[0]
    assert np.all(opt[opt > 0] < w[opt > 0])


def test_hard_policy_exact_when_nothing_crosses(rng):
    W = rng.standard_normal((4, 6))
    s = np.linalg.svd(W, compute_uv=False)
    np.testing.assert_allclose(apply_shrinkage(W, None, ShrinkagePolicy.hard(tau=s[-1])), W, atol=1e-12)


def test_soft_policy_on_known_spectrum():
    W = np.diag([3.0, 1.0])
    out = apply_shrinkage(W, None, ShrinkagePolicy.soft(tau=2.0))
    np.testing.assert_allclose(np.linalg.svd(out, compute_uv=False), [1, 0], atol=1e-14)


def test_optimal_policy_matches_entrywise_law(rng):
    sigma = 0.05
    X = rng.standard_normal((30, 2)) @ rng.standard_normal((2, 60))
    W = X + sigma * rng.standard_normal(X.shape)
    s = np.linalg.svd(W, compute_uv=False)
    out = apply_shrinkage(W, None, ShrinkagePolicy.optimal(sigma))
    got = np.linalg.svd(out, compute_uv=False)
    want = np.sort(optimal_shrinker(s, 60, 0.5, sigma))[::-1]
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_explicit_threshold_overrides_sigma(rng):
    W = rng.standard_normal((5, 8))
    a = apply_shrinkage(W, None, ShrinkagePolicy(ShrinkagePolicy.soft().variant, threshold=1.0, noise_level=9.0))
    b = apply_shrinkage(W, None, ShrinkagePolicy.soft(tau=1.0))
    assert np.array_equal(a, b)


# --- Marchenko-Pastur median ------------------------------------------------------------


def _quarter_circle_median():
    # beta = 1: singular values follow sqrt(4 - s^2) / pi on [0, 2]
    cdf = lambda s: (s * math.sqrt(4 - s * s) / 2 + 2 * math.asin(s / 2)) / math.pi
    return optimize.brentq(lambda s: cdf(s) - 0.5, 0, 2, xtol=1e-15)


def _raw_quad_median(beta):
    lo, hi = mp_support(beta)
    dens = lambda t: math.sqrt(max((hi - t) * (t - lo), 0.0)) / (2 * math.pi * beta * t)
    cdf = lambda x: integrate.quad(dens, lo, x, epsabs=1e-13, limit=200)[0]
    return optimize.brentq(lambda x: cdf(x) - 0.5, lo + 1e-12, hi, xtol=1e-13)


def test_mp_median_square_closed_form():
    s_med = _quarter_circle_median()
    assert mp_median(1.0) == pytest.approx(s_med**2, abs=1e-9)
    assert math.sqrt(mp_median(1.0)) == pytest.approx(0.8079, abs=1e-3)


@pytest.mark.parametrize("beta", [0.1, 0.25, 0.5, 0.9])
def test_mp_median_matches_direct_quadrature(beta):
    assert mp_median(beta) == pytest.approx(_raw_quad_median(beta), abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(betas)
def test_mp_median_brackets(beta):
    z = mp_median(beta)
    lo, hi = mp_support(beta)
    assert lo < z < hi
    assert mp_cdf(z - 1e-6, beta) < 0.5 < mp_cdf(z + 1e-6, beta)


def test_mp_median_against_large_random_matrix():
    rng = np.random.default_rng(7)
    Y = rng.standard_normal((400, 800))
    lam = np.linalg.svd(Y, compute_uv=False) ** 2 / 800
    assert np.median(lam) == pytest.approx(mp_median(0.5), rel=0.02)


# --- noise level ------------------------------------------------------------------------


def test_median_singular_value():
    assert median_singular_value([5, 3, 1]) == 3
    assert median_singular_value([4, 3, 2, 1]) == 2


def test_noise_level_scaling(rng):
    W = rng.standard_normal((20, 30))
    assert estimate_noise_level(3.5 * W) == pytest.approx(3.5 * estimate_noise_level(W), rel=1e-13)


def test_noise_level_transpose_invariant(rng):
    W = rng.standard_normal((20, 35))
    assert estimate_noise_level(W.T) == pytest.approx(estimate_noise_level(W), rel=1e-13)


def test_noise_level_zero_matrix():
    with pytest.raises(DegenerateInputError):
        estimate_noise_level(np.zeros((4, 5)))


def test_noise_level_consistency():
    hits = 0
    for seed in range(100):
        Z = np.random.default_rng(seed).standard_normal((200, 200))
        hits += 0.095 <= estimate_noise_level(0.1 * Z) <= 0.105
    assert hits >= 95


# --- D-transform and data-driven shrinkage ----------------------------------------------


def test_dtransform_hand_value():
    meas = SpectralMeasure(np.array([1.0]), m=2, n=2, r=1)
    D, _ = dtransform(2.0, meas)
    assert D == pytest.approx(4 / 9, rel=1e-14)


def test_dtransform_square_is_phi_squared(rng):
    samples = rng.uniform(0, 1, 6)
    meas = SpectralMeasure(samples, m=8, n=8, r=2)
    z = 1.7
    phi = np.mean(z / (z * z - samples**2))
    assert dtransform(z, meas)[0] == pytest.approx(phi**2, rel=1e-14)


def test_dtransform_derivative_matches_finite_difference(rng):
    meas = SpectralMeasure(rng.uniform(0, 1, 5), m=8, n=20, r=3)
    for z in (1.2, 2.0, 5.0):
        h = 1e-6
        fd = (dtransform(z + h, meas)[0] - dtransform(z - h, meas)[0]) / (2 * h)
        assert dtransform(z, meas)[1] == pytest.approx(fd, rel=1e-6)


def test_dtransform_decreasing_and_decaying(rng):
    meas = SpectralMeasure(rng.uniform(0, 1, 5), m=8, n=20, r=3)
    zs = np.linspace(meas.edge + 1e-3, 50, 300)
    D = np.array([dtransform(z, meas)[0] for z in zs])
    assert np.all(np.diff(D) < 0)
    assert dtransform(1e6, meas)[0] < 1e-11


def test_dtransform_pole():
    meas = SpectralMeasure(np.array([1.0, 0.5]), m=3, n=4, r=1)
    with pytest.raises(PoleProximityError):
        dtransform(1.0, meas)


def test_data_driven_zeroes_trailing_and_clamps(rng):
    W = rng.standard_normal((10, 25))
    W[:2] *= 20
    s = np.linalg.svd(W, compute_uv=False)
    eta, below = data_driven_values(s, W.shape, 3)
    assert np.all(eta[3:] == 0)
    assert np.all((eta >= 0) & (eta <= s))
    assert not below[0]


def test_data_driven_flags_component_below_edge():
    s = np.array([5.0, 0.5, 1.0, 0.2])
    eta, below = data_driven_values(s, (4, 10), 2)
    assert below.tolist() == [False, True, False, False]
    assert eta[1] == 0.0 and eta[0] > 0


def test_data_driven_invalid_rank(rng):
    with pytest.raises(InvalidRankError):
        data_driven_shrinker(rng.standard_normal((4, 6)), None, 4)


def test_data_driven_clean_low_rank_is_almost_identity(rng):
    X = rng.standard_normal((8, 2)) @ rng.standard_normal((2, 30))
    np.testing.assert_allclose(data_driven_shrinker(X, None, 2), X, atol=1e-9 * np.linalg.norm(X))


@pytest.mark.parametrize("seed", range(5))
def test_data_driven_tracks_analytic_shrinker(seed):
    n, sigma = 300, 1 / math.sqrt(300)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(n)
    v = rng.standard_normal(n)
    X = 3.0 * np.outer(u / np.linalg.norm(u), v / np.linalg.norm(v))
    W = X + sigma * rng.standard_normal((n, n))
    s = np.linalg.svd(W, compute_uv=False)
    eta, _ = data_driven_values(s, W.shape, 1)
    ref = optimal_shrinker(s[0], n, 1.0, sigma)
    assert abs(eta[0] - ref) / ref < 0.05
