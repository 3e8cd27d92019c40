"""Structure-enforcing estimators.

* :func:`slra_iterative` alternates truncation to rank ``r`` with Hankel
  projection (Cadzow-type iteration generalized to a right transform).
* :func:`lrhd` keeps the same alternation but replaces truncation by
  data-driven shrinkage of the leading singular values.
* :func:`nuclear_norm_denoise` solves the convex problem
  ``min_X 1/2 ||W - X||_F^2 + tau ||X Pi||_*`` over Hankel ``X`` by ADMM.

Iterative solvers never raise on non-convergence; the returned
:class:`IterationTrace` carries the flag.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .exceptions import InvalidRankError
from .hankel_core import Transform, as_matrix, hankel_project
from .shrinkage import (
    ShrinkagePolicy,
    ShrinkVariant,
    SpectralMeasure,
    data_driven_values,
    estimate_noise_level,
    needs_noise_estimate,
    shrink_spectrum,
    soft_threshold,
    svd,
    truncate_values,
)


@dataclass(frozen=True)
class IterationConfig:
    epsilon: float = 1e-5
    max_iters: int = 500
    shrink_policy: Optional[ShrinkagePolicy] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class IterationTrace:
    iterations: int = 0
    converged: bool = False
    residuals: list[float] = field(default_factory=list)

    def record(self, gap: float) -> None:
        self.residuals.append(gap)
        self.iterations = len(self.residuals)


def _setup(W, transform: Optional[Transform], r: int):
    W = as_matrix(W, "W")
    if transform is None:
        transform = Transform.identity(W.shape[1])
    if transform.n != W.shape[1]:
        raise InvalidRankError(f"transform is {transform.n}x{transform.n} but W has {W.shape[1]} columns")
    if not 0 <= r < min(W.shape):
        raise InvalidRankError(f"need 0 <= r < {min(W.shape)}, got {r}")
    return W, transform


def _relative_gap(W1: np.ndarray, W2: np.ndarray) -> float:
    den = np.linalg.norm(W1)
    num = np.linalg.norm(W1 - W2)
    if den == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return float(num / den)


def _alternate(W, transform, cfg, step):
    trace = IterationTrace()
    W1 = W.copy()
    for _ in range(cfg.max_iters):
        W2 = step(W1)
        W1 = hankel_project(W2)
        gap = _relative_gap(W1, W2)
        trace.record(gap)
        if gap < cfg.epsilon:
            trace.converged = True
            break
    return W1, trace


def slra_iterative(W, transform: Optional[Transform], r: int, cfg: Optional[IterationConfig] = None):
    """Alternate rank-``r`` truncation of ``W1 @ Pi`` and Hankel projection.

    Returns ``(X_hat, trace)``; ``X_hat`` is exactly Hankel.
    """
    cfg = cfg or IterationConfig()
    W, transform = _setup(W, transform, r)

    def step(W1):
        dec = svd(transform.apply(W1))
        return dec.compose(truncate_values(dec.s, r)) + transform.complement(W1)

    return _alternate(W, transform, cfg, step)


def lrhd(
    W,
    transform: Optional[Transform],
    r: int,
    cfg: Optional[IterationConfig] = None,
    reestimate: bool = True,
):
    """Iterative low-rank Hankel denoising.

    Each pass shrinks the ``r`` leading singular values of ``W1 @ Pi`` with
    the data-driven law (the noise measure taken from the trailing singular
    values), zeroes the rest, adds ``W1 @ (I - Pi)`` and projects onto the
    Hankel set.

    With ``reestimate=False`` the noise measure is built once from ``W``
    instead of from every iterate.  A non data-driven ``cfg.shrink_policy``
    replaces the data-driven law on all singular values.
    """
    cfg = cfg or IterationConfig()
    W, transform = _setup(W, transform, r)
    policy = cfg.shrink_policy or ShrinkagePolicy.data_driven(r)
    shape = W.shape

    if policy.variant is ShrinkVariant.DATA_DRIVEN:
        r = policy.rank
        fixed = None
        if not reestimate:
            s0 = np.linalg.svd(transform.apply(W), compute_uv=False)
            fixed = SpectralMeasure.from_spectrum(s0, shape, r)

        def shrink(s):
            return data_driven_values(s, shape, r, measure=fixed)[0]

    else:
        sigma = estimate_noise_level(W, transform) if needs_noise_estimate(policy) else None

        def shrink(s):
            return shrink_spectrum(s, shape, policy, sigma)

    def step(W1):
        dec = svd(transform.apply(W1))
        return dec.compose(shrink(dec.s)) + transform.complement(W1)

    return _alternate(W, transform, cfg, step)


# --- nuclear norm regularization ------------------------------------------------------


def nuclear_objective(W, X, transform: Optional[Transform], tau: float) -> float:
    W = as_matrix(W)
    X = as_matrix(X)
    XP = X if transform is None else transform.apply(X)
    return 0.5 * float(np.sum((W - X) ** 2)) + tau * float(np.sum(np.linalg.svd(XP, compute_uv=False)))


def _hankel_basis(m: int, n: int) -> np.ndarray:
    """``A[i, j, k] = 1`` iff ``i + j == k``: maps a signal to its Hankel matrix."""
    A = np.zeros((m, n, m + n - 1))
    i, j = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    A[i, j, i + j] = 1.0
    return A


def _svt(M: np.ndarray, tau: float) -> np.ndarray:
    dec = svd(M)
    return dec.compose(soft_threshold(dec.s, tau))


def nuclear_norm_denoise(
    W,
    transform: Optional[Transform],
    tau: float,
    cfg: Optional[IterationConfig] = None,
    structured: bool = True,
    tol: float = 1e-6,
    rho: float = 1.0,
):
    """Nuclear-norm regularized approximation by ADMM with a fixed step ``rho``.

    Splits ``Y = X Pi`` and alternates an exact least-squares update of ``X``
    (a Hankel matrix when ``structured``, otherwise unconstrained),
    singular value soft thresholding of ``Y`` and a dual ascent step.  Stops
    when the relative primal and dual residuals both fall below ``tol``.

    Returns ``(X_hat, trace)``; ``trace.residuals`` holds
    ``max(primal, dual)`` relative residuals.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    cfg = cfg or IterationConfig()
    W = as_matrix(W, "W")
    m, n = W.shape
    if transform is None:
        transform = Transform.identity(n)
    if transform.n != n:
        raise InvalidRankError(f"transform is {transform.n}x{transform.n} but W has {n} columns")
    P = transform.matrix

    if structured:
        A = _hankel_basis(m, n)
        B = np.einsum("ijk,jl->ilk", A, P).reshape(m * n, -1)
        A = A.reshape(m * n, -1)
        gram = linalg.cho_factor(A.T @ A + rho * (B.T @ B))
        AtW = A.T @ W.ravel()

        def x_update(Y, Lam):
            x = linalg.cho_solve(gram, AtW + rho * (B.T @ (Y - Lam).ravel()))
            return (A @ x).reshape(m, n)

        def dual_map(D):
            return B.T @ D.ravel()

    else:
        gram = linalg.cho_factor(np.eye(n) + rho * (P @ P.T))

        def x_update(Y, Lam):
            rhs = W + rho * (Y - Lam) @ P.T
            return linalg.cho_solve(gram, rhs.T).T

        def dual_map(D):
            return D @ P.T

    trace = IterationTrace()
    X = W.copy()
    Y = X @ P
    Lam = np.zeros_like(Y)
    for _ in range(cfg.max_iters):
        X = x_update(Y, Lam)
        XP = X @ P
        Y_prev = Y
        Y = _svt(XP + Lam, tau / rho)
        Lam = Lam + XP - Y
        primal = np.linalg.norm(XP - Y)
        dual = rho * np.linalg.norm(dual_map(Y - Y_prev))
        scale_p = max(np.linalg.norm(XP), np.linalg.norm(Y), np.finfo(float).tiny)
        scale_d = max(rho * np.linalg.norm(dual_map(Lam)), np.linalg.norm(dual_map(XP)), np.finfo(float).tiny)
        res = max(primal / scale_p, dual / scale_d)
        trace.record(float(res))
        if res <= tol:
            trace.converged = True
            break
    if structured:
        X = hankel_project(X)
    return X, trace
