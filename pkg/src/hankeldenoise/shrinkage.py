"""Single-shot singular value estimators.

All estimators act on the spectrum of ``W @ Pi`` and add back the untouched
complement ``W @ (I - Pi)``::

    X_hat = sum_i eta(w_i) u_i v_i^T + W (I - Pi)

with ``eta`` one of: truncation to rank ``r``, hard or soft thresholding,
the asymptotically optimal Frobenius shrinker for white noise, or the
data-driven (OptShrink-style) shrinker that estimates the noise spectrum
from the trailing singular values through an empirical D-transform.

Spectral formulas use the normalized orientation: ``p = min(m, n)``,
``q = max(m, n)``, ``beta = p / q``.  A tall input therefore behaves exactly
as its transpose would.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .exceptions import DegenerateInputError, InvalidRankError, PoleProximityError
from .hankel_core import Transform, as_matrix


@dataclass(frozen=True)
class SvdTriple:
    """Thin SVD ``M = U diag(s) Vt`` with descending ``s`` and fixed signs."""

    U: np.ndarray
    s: np.ndarray
    Vt: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (self.U.shape[0], self.Vt.shape[1])

    def compose(self, values) -> np.ndarray:
        """``U diag(values) Vt`` for a replacement spectrum."""
        return (self.U * values) @ self.Vt


def svd(M) -> SvdTriple:
    """Thin SVD with a deterministic sign convention.

    Each left singular vector is flipped (together with its right partner)
    so that its largest-magnitude entry is nonnegative.
    """
    M = as_matrix(M)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.where(U[pivot, np.arange(U.shape[1])] < 0, -1.0, 1.0)
    U = U * signs
    Vt = Vt * signs[:, None]
    return SvdTriple(U, s, Vt)


def spectral_dims(shape: tuple[int, int]) -> tuple[int, int, float]:
    """Return ``(p, q, beta)`` with ``p <= q`` for a matrix shape."""
    p, q = sorted(shape)
    return p, q, p / q


def _transformed(W, transform: Optional[Transform]):
    W = as_matrix(W, "W")
    if transform is None:
        return W, W.copy(), np.zeros_like(W)
    if transform.n != W.shape[1]:
        raise InvalidRankError(
            f"transform is {transform.n}x{transform.n} but W has {W.shape[1]} columns"
        )
    return W, transform.apply(W), transform.complement(W)


def tsvd_estimate(W, transform: Optional[Transform], r: int) -> np.ndarray:
    """Keep the ``r`` leading singular triplets of ``W @ Pi``."""
    W, WP, comp = _transformed(W, transform)
    dec = svd(WP)
    if r < 0 or r > dec.s.size:
        raise InvalidRankError(f"rank {r} outside [0, {dec.s.size}]")
    return dec.compose(truncate_values(dec.s, r)) + comp


def truncate_values(s, r: int) -> np.ndarray:
    eta = np.array(s, dtype=float)
    eta[r:] = 0.0
    return eta


# --- analytic laws for white noise ---------------------------------------------------


def optimal_shrinker(w, n: int, beta: float, sigma: float):
    """Asymptotically MSE-optimal shrinkage of singular value(s) ``w``.

    ``n`` is the long dimension and ``sigma`` the per-entry noise level.
    Values at or below the bulk edge ``(1 + sqrt(beta)) sqrt(n) sigma`` map to 0.
    """
    w_arr = np.asarray(w, dtype=float)
    scale = n * sigma**2
    edge = (1.0 + math.sqrt(beta)) * math.sqrt(n) * sigma
    with np.errstate(divide="ignore", invalid="ignore"):
        rad = (w_arr**2 / scale - beta - 1.0) ** 2 - 4.0 * beta
        eta = scale / w_arr * np.sqrt(np.maximum(rad, 0.0))
    eta = np.where(w_arr > edge, np.clip(eta, 0.0, w_arr), 0.0)
    return float(eta) if eta.ndim == 0 else eta


def hard_threshold_value(beta: float, sigma: float, n: int) -> float:
    lam = math.sqrt(2.0 * (beta + 1.0) + 8.0 * beta / (beta + 1.0 + math.sqrt(beta**2 + 14.0 * beta + 1.0)))
    return lam * sigma * math.sqrt(n)


def soft_threshold_value(beta: float, sigma: float, n: int) -> float:
    return (1.0 + math.sqrt(beta)) * sigma * math.sqrt(n)


def hard_threshold(w, tau: float):
    w = np.asarray(w, dtype=float)
    return np.where(w >= tau, w, 0.0)


def soft_threshold(w, tau: float):
    w = np.asarray(w, dtype=float)
    return np.maximum(w - tau, 0.0)


# --- Marchenko-Pastur median and the noise level estimate ----------------------------


def mp_support(beta: float) -> tuple[float, float]:
    return (1.0 - math.sqrt(beta)) ** 2, (1.0 + math.sqrt(beta)) ** 2


def _mp_integrand(theta: float, beta: float, lo: float, hi: float) -> float:
    # density after t = lo + (hi - lo) sin^2(theta); smooth even when lo == 0
    sn, cs = math.sin(theta), math.cos(theta)
    t = lo + (hi - lo) * sn * sn
    if t <= 0.0:
        return (hi - lo) * cs * cs / (math.pi * beta)
    return (hi - lo) ** 2 * (sn * cs) ** 2 / (math.pi * beta * t)


def mp_cdf(t: float, beta: float) -> float:
    """CDF of the Marchenko-Pastur law (unit variance, ratio ``beta``) at ``t``."""
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    lo, hi = mp_support(beta)
    if t <= lo:
        return 0.0
    if t >= hi:
        return 1.0
    theta = math.asin(math.sqrt((t - lo) / (hi - lo)))
    val, _ = integrate.quad(_mp_integrand, 0.0, theta, args=(beta, lo, hi), epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


@functools.lru_cache(maxsize=256)
def mp_median(beta: float) -> float:
    """Median of the Marchenko-Pastur law with ratio ``beta``, by bisection."""
    beta = float(beta)
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    lo, hi = mp_support(beta)
    a, b = lo, hi
    while b - a > 1e-11:
        mid = 0.5 * (a + b)
        if mp_cdf(mid, beta) < 0.5:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def median_singular_value(s) -> float:
    """Lower median: element ``ceil(p/2)`` (1-based) of the ascending spectrum."""
    s = np.sort(np.asarray(s, dtype=float))
    return float(s[math.ceil(s.size / 2) - 1])


def estimate_noise_level(W, transform: Optional[Transform] = None) -> float:
    """Robust per-entry noise level from the median singular value of ``W @ Pi``."""
    _, WP, _ = _transformed(W, transform)
    p, q, beta = spectral_dims(WP.shape)
    if p < 2:
        raise DegenerateInputError("noise estimation needs at least two rows and columns")
    w_med = median_singular_value(np.linalg.svd(WP, compute_uv=False))
    if w_med <= 0.0:
        raise DegenerateInputError("median singular value is zero")
    return w_med / math.sqrt(q * mp_median(beta))


# --- empirical D-transform and the data-driven law -----------------------------------


@dataclass(frozen=True)
class SpectralMeasure:
    """Empirical noise spectrum: the trailing singular values ``w_{r+1..p}``."""

    samples: np.ndarray
    m: int
    n: int
    r: int

    def __post_init__(self):
        if not 0 <= self.r < self.m <= self.n:
            raise InvalidRankError(f"need 0 <= r < m <= n, got r={self.r}, m={self.m}, n={self.n}")
        samples = np.asarray(self.samples, dtype=float)
        if samples.size != self.m - self.r or np.any(samples < 0):
            raise ValueError("measure needs m - r nonnegative samples")
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_spectrum(cls, s, shape: tuple[int, int], r: int) -> "SpectralMeasure":
        p, q, _ = spectral_dims(shape)
        s = np.asarray(s, dtype=float)
        return cls(s[r:p], p, q, r)

    @property
    def beta_hat(self) -> float:
        return (self.m - self.r) / (self.n - self.r)

    @property
    def edge(self) -> float:
        """Empirical bulk edge, the largest sample."""
        return float(self.samples.max())


def dtransform(z: float, measure: SpectralMeasure) -> tuple[float, float]:
    """Empirical D-transform and its derivative at ``z`` above the bulk edge."""
    w2 = measure.samples**2
    if z <= measure.edge:
        raise PoleProximityError(f"z={z!r} is not above the bulk edge {measure.edge!r}")
    gap = z * z - w2
    phi = np.mean(z / gap)
    dphi = np.mean(-(z * z + w2) / gap**2)
    bh = measure.beta_hat
    psi = bh * phi + (1.0 - bh) / z
    dpsi = bh * dphi - (1.0 - bh) / (z * z)
    return float(phi * psi), float(dphi * psi + phi * dpsi)


def data_driven_values(
    s, shape: tuple[int, int], r: int, measure: Optional[SpectralMeasure] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Data-driven shrinkage of a descending spectrum.

    Returns ``(eta, below_edge)``.  Components past ``r`` are zeroed; leading
    components at or below the empirical bulk edge are zeroed too and
    flagged in ``below_edge``.  The noise measure defaults to the trailing
    part of ``s`` itself; pass ``measure`` to reuse one from another matrix.
    """
    s = np.asarray(s, dtype=float)
    if measure is None:
        measure = SpectralMeasure.from_spectrum(s, shape, r)
    eta = np.zeros_like(s)
    below = np.zeros(s.size, dtype=bool)
    for i in range(r):
        if s[i] <= measure.edge:
            below[i] = True
            continue
        D, dD = dtransform(s[i], measure)
        eta[i] = min(max(-2.0 * D / dD, 0.0), s[i])
    return eta, below


def data_driven_shrinker(W, transform: Optional[Transform], r: int) -> np.ndarray:
    """Shrink the ``r`` leading singular values of ``W @ Pi`` with the
    empirical D-transform of the remaining ones."""
    W, WP, comp = _transformed(W, transform)
    dec = svd(WP)
    if not 0 <= r < dec.s.size:
        raise InvalidRankError(f"data-driven shrinkage needs 0 <= r < {dec.s.size}, got {r}")
    eta, _ = data_driven_values(dec.s, WP.shape, r)
    return dec.compose(eta) + comp


# --- policies ------------------------------------------------------------------------


class ShrinkVariant(enum.Enum):
    TRUNCATE = "truncate"
    HARD = "hard"
    SOFT = "soft"
    OPTIMAL = "optimal"
    DATA_DRIVEN = "data_driven"


@dataclass(frozen=True)
class ShrinkagePolicy:
    """Which singular value rule to apply.

    ``threshold`` and ``noise_level`` left as ``None`` mean "auto": the
    noise level is then estimated from the data.  An explicit threshold
    wins over an explicit noise level, which wins over the estimate.
    """

    variant: ShrinkVariant
    rank: Optional[int] = None
    threshold: Optional[float] = None
    noise_level: Optional[float] = None

    def __post_init__(self):
        if self.variant in (ShrinkVariant.TRUNCATE, ShrinkVariant.DATA_DRIVEN):
            if self.rank is None or self.rank < 0:
                raise InvalidRankError(f"{self.variant.value} policy needs a nonnegative rank")
        if self.threshold is not None and self.threshold < 0:
            raise ValueError("threshold must be nonnegative")
        if self.noise_level is not None and self.noise_level <= 0:
            raise ValueError("noise level must be positive")

    @classmethod
    def truncate(cls, r: int) -> "ShrinkagePolicy":
        return cls(ShrinkVariant.TRUNCATE, rank=r)

    @classmethod
    def hard(cls, tau: Optional[float] = None, sigma: Optional[float] = None) -> "ShrinkagePolicy":
        return cls(ShrinkVariant.HARD, threshold=tau, noise_level=sigma)

    @classmethod
    def soft(cls, tau: Optional[float] = None, sigma: Optional[float] = None) -> "ShrinkagePolicy":
        return cls(ShrinkVariant.SOFT, threshold=tau, noise_level=sigma)

    @classmethod
    def optimal(cls, sigma: Optional[float] = None) -> "ShrinkagePolicy":
        return cls(ShrinkVariant.OPTIMAL, noise_level=sigma)

    @classmethod
    def data_driven(cls, r: int) -> "ShrinkagePolicy":
        return cls(ShrinkVariant.DATA_DRIVEN, rank=r)


def shrink_spectrum(s, shape: tuple[int, int], policy: ShrinkagePolicy, sigma: Optional[float] = None) -> np.ndarray:
    """Apply ``policy`` to the descending spectrum ``s`` of an ``shape`` matrix.

    ``sigma`` is consulted only when the policy leaves the noise level on auto.
    """
    s = np.asarray(s, dtype=float)
    _, q, beta = spectral_dims(shape)
    v = policy.variant
    if v is ShrinkVariant.TRUNCATE:
        if policy.rank > s.size:
            raise InvalidRankError(f"rank {policy.rank} exceeds {s.size}")
        return truncate_values(s, policy.rank)
    if v is ShrinkVariant.DATA_DRIVEN:
        if policy.rank >= s.size:
            raise InvalidRankError(f"data-driven shrinkage needs rank < {s.size}, got {policy.rank}")
        return data_driven_values(s, shape, policy.rank)[0]

    if policy.noise_level is not None:
        sigma = policy.noise_level
    if v is ShrinkVariant.OPTIMAL:
        return optimal_shrinker(s, q, beta, _need(sigma))
    if v is ShrinkVariant.HARD:
        tau = policy.threshold if policy.threshold is not None else hard_threshold_value(beta, _need(sigma), q)
        return hard_threshold(s, tau)
    tau = policy.threshold if policy.threshold is not None else soft_threshold_value(beta, _need(sigma), q)
    return soft_threshold(s, tau)


def _need(sigma):
    if sigma is None:
        raise ValueError("noise level required but neither given nor estimated")
    return sigma


def needs_noise_estimate(policy: ShrinkagePolicy) -> bool:
    if policy.variant in (ShrinkVariant.TRUNCATE, ShrinkVariant.DATA_DRIVEN):
        return False
    if policy.variant is ShrinkVariant.OPTIMAL:
        return policy.noise_level is None
    return policy.threshold is None and policy.noise_level is None


def apply_shrinkage(W, transform: Optional[Transform], policy: ShrinkagePolicy) -> np.ndarray:
    """Shrinkage estimate ``sum eta(w_i) u_i v_i^T + W (I - Pi)``."""
    W, WP, comp = _transformed(W, transform)
    dec = svd(WP)
    sigma = estimate_noise_level(WP) if needs_noise_estimate(policy) else None
    eta = shrink_spectrum(dec.s, WP.shape, policy, sigma)
    return dec.compose(eta) + comp
