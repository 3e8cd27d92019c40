import numpy as np
import pytest

from hankeldenoise import (
    InvalidRankError,
    IterationConfig,
    ShrinkagePolicy,
    Transform,
    TransformKind,
    build_hankel,
    build_transform,
    data_driven_shrinker,
    estimate_noise_level,
    hankel_project,
    lrhd,
    nuclear_norm_denoise,
    slra_iterative,
    soft_threshold_value,
    tsvd_estimate,
)
from hankeldenoise.bench import PAPER_CONFIGS, make_instance
from hankeldenoise.hankel_core import is_hankel, skew_spread
from hankeldenoise.slra import nuclear_objective


def noisy_geometric(seed, N=20, m=5, sigma=0.01):
    rng = np.random.default_rng(seed)
    g = 0.5 ** np.arange(N) + sigma * rng.standard_normal(N)
    return build_hankel(g, m)


def test_config_validation():
    with pytest.raises(ValueError):
        IterationConfig(epsilon=0)
    with pytest.raises(ValueError):
        IterationConfig(max_iters=0)


# --- iterative SLRA ------------------------------------------------------------------------


def test_slra_fixed_point_on_low_rank_hankel():
    W = build_hankel(0.8 ** np.arange(12) + (-0.5) ** np.arange(12), 4)
    X, tr = slra_iterative(W, None, 2)
    assert tr.converged and tr.iterations == 1
    np.testing.assert_allclose(X, W, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_slra_geometric_rank_one(seed):
    W = noisy_geometric(seed)
    X, tr = slra_iterative(W, None, 1, IterationConfig(epsilon=1e-5))
    assert tr.converged and is_hankel(X)
    s = np.linalg.svd(X, compute_uv=False)
    # the stopping rule bounds the trailing energy by eps * ||X||_F
    assert s[1] <= 1e-5 * np.linalg.norm(X)
    X, tr = slra_iterative(W, None, 1, IterationConfig(epsilon=1e-7, max_iters=5000))
    s = np.linalg.svd(X, compute_uv=False)
    assert tr.converged and s[1] <= 1e-6 * s[0]


def test_slra_trace_contract():
    cfg = IterationConfig(epsilon=1e-5)
    for cfg_b in PAPER_CONFIGS:
        for t in range(5):
            W, T, r = make_instance(cfg_b, t).problem()
            X, tr = slra_iterative(W, T, r, cfg)
            assert len(tr.residuals) == tr.iterations
            assert np.all(np.isfinite(tr.residuals))
            assert tr.converged == (tr.residuals[-1] < cfg.epsilon)
            assert skew_spread(X) == 0.0


def test_slra_nonconvergence_is_flagged():
    W = noisy_geometric(0, sigma=0.3)
    X, tr = slra_iterative(W, None, 1, IterationConfig(epsilon=1e-14, max_iters=3))
    assert not tr.converged and tr.iterations == 3 and is_hankel(X)


def test_slra_invalid_rank():
    with pytest.raises(InvalidRankError):
        slra_iterative(noisy_geometric(0), None, 5)


def test_solvers_are_deterministic():
    W, T, r = make_instance(PAPER_CONFIGS[0], 3).problem()
    for solve in (slra_iterative, lrhd):
        a, _ = solve(W, T, r)
        b, _ = solve(W, T, r)
        assert np.array_equal(a, b)


# --- LRHD ----------------------------------------------------------------------------------


def test_lrhd_noise_free_recovers_input():
    for cfg in PAPER_CONFIGS:
        inst = make_instance(cfg, 0)
        _, T, r = inst.problem()
        X_hat, tr = lrhd(inst.X, T, r)
        assert tr.converged
        assert np.linalg.norm(X_hat - inst.X) <= 1e-3 * np.linalg.norm(inst.X)


def test_lrhd_shrinks_more_than_tsvd_at_high_noise():
    for cfg in (PAPER_CONFIGS[0], PAPER_CONFIGS[2]):
        from dataclasses import replace

        cfg = replace(cfg, sigma2=0.1)
        for t in range(10):
            W, T, r = make_instance(cfg, t).problem()
            assert np.linalg.norm(lrhd(W, T, r)[0]) < np.linalg.norm(tsvd_estimate(W, T, r))


def test_lrhd_output_is_near_fixed_point():
    W, T, r = make_instance(PAPER_CONFIGS[2], 1).problem()
    cfg = IterationConfig(epsilon=1e-5, max_iters=5000)
    X, tr = lrhd(W, T, r, cfg)
    assert tr.converged and skew_spread(X) == 0.0
    X2, tr2 = lrhd(X, T, r, IterationConfig(epsilon=1e-5, max_iters=1))
    assert np.linalg.norm(X2 - X) <= 1e-5 * np.linalg.norm(X)


def test_step_preserves_complement_for_projector():
    inst = make_instance(PAPER_CONFIGS[0], 2)
    W, T, r = inst.problem()
    for step in (lambda A: data_driven_shrinker(A, T, r), lambda A: tsvd_estimate(A, T, r)):
        W1 = W
        for _ in range(5):
            W2 = step(W1)
            np.testing.assert_allclose(T.complement(W2), T.complement(W1), atol=1e-10)
            W1 = hankel_project(W2)


def test_lrhd_switches():
    W, T, r = make_instance(PAPER_CONFIGS[2], 4).problem()
    X, tr = lrhd(W, T, r, reestimate=False)
    assert skew_spread(X) == 0.0 and tr.iterations >= 1
    X, tr = lrhd(W, T, r, IterationConfig(shrink_policy=ShrinkagePolicy.hard()))
    assert skew_spread(X) == 0.0


# --- nuclear norm -------------------------------------------------------------------------


def test_nuclear_zero_tau_unstructured(rng):
    W = rng.standard_normal((4, 7))
    X, tr = nuclear_norm_denoise(W, None, 0.0, structured=False)
    assert tr.converged
    np.testing.assert_allclose(X, W, atol=1e-12)


def test_nuclear_unstructured_soft_threshold_example():
    X, _ = nuclear_norm_denoise(np.diag([3.0, 1.0]), None, 2.0, IterationConfig(max_iters=10000),
                                structured=False, tol=1e-13)
    np.testing.assert_allclose(np.linalg.svd(X, compute_uv=False), [1, 0], atol=1e-10)


def test_nuclear_unstructured_matches_closed_form(rng):
    W = rng.standard_normal((6, 9))
    tau = 1.3
    U, s, Vt = np.linalg.svd(W, full_matrices=False)
    closed = (U * np.maximum(s - tau, 0)) @ Vt
    X, tr = nuclear_norm_denoise(W, None, tau, IterationConfig(max_iters=20000), structured=False, tol=1e-13)
    assert np.linalg.norm(X - closed) <= 1e-8 * np.linalg.norm(closed)


@pytest.mark.parametrize("idx", [0, 2])
def test_nuclear_structured_benchmark_instance(idx):
    W, T, r = make_instance(PAPER_CONFIGS[idx], 0).problem()
    tau = soft_threshold_value(min(W.shape) / max(W.shape), estimate_noise_level(W, T), max(W.shape))
    X, tr = nuclear_norm_denoise(W, T, tau, IterationConfig(max_iters=20000))
    assert tr.converged and tr.residuals[-1] <= 1e-6
    assert skew_spread(X) == 0.0
    obj = nuclear_objective(W, X, T, tau)
    assert obj <= nuclear_objective(W, W, T, tau)
    assert obj <= nuclear_objective(W, hankel_project(tsvd_estimate(W, T, r)), T, tau)


def test_nuclear_with_flip_transform(rng):
    W = build_hankel(rng.standard_normal(14), 5)
    T = build_transform(TransformKind.ANTI_DIAGONAL_FLIP, 10)
    X, tr = nuclear_norm_denoise(W, T, 0.5, IterationConfig(max_iters=5000))
    assert tr.converged and skew_spread(X) == 0.0
    assert nuclear_objective(W, X, T, 0.5) <= nuclear_objective(W, W, T, 0.5)
