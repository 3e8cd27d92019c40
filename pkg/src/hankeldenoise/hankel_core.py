"""Hankel matrix construction, projection and the right-hand transforms.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.  A signal of
length ``N`` maps to an ``m x n`` Hankel matrix with ``n = N - m + 1`` and
entry ``(i, j) = signal[i + j]``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import InvalidDimensionError, SingularInputError

#: default relative cutoff for numerical rank decisions
RANK_TOL = 1e-8


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Validate ``M`` as a finite, non-empty 2-D float array."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidDimensionError(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def as_signal(x, name: str = "signal") -> np.ndarray:
    s = np.asarray(x, dtype=float)
    if s.ndim != 1:
        s = s.ravel()
    if not np.all(np.isfinite(s)):
        raise ValueError(f"{name} contains non-finite entries")
    return s


@dataclass(frozen=True)
class HankelShape:
    """Row count ``m``, column count ``n`` and signal length ``N = m + n - 1``."""

    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise InvalidDimensionError(f"invalid Hankel shape {self.m}x{self.n}")

    @property
    def N(self) -> int:
        return self.m + self.n - 1

    @property
    def beta(self) -> float:
        """Aspect ratio in the normalized orientation, always in (0, 1]."""
        return min(self.m, self.n) / max(self.m, self.n)

    @classmethod
    def from_signal(cls, N: int, m: int) -> "HankelShape":
        if not 1 <= m <= N:
            raise InvalidDimensionError(f"need 1 <= m <= N, got m={m}, N={N}")
        return cls(m, N - m + 1)


def build_hankel(signal, m: int) -> np.ndarray:
    """Return the ``m x (N - m + 1)`` Hankel matrix of ``signal``.

    Examples
    --------
    >>> build_hankel([1, 2, 3, 4], 2)
    array([[1., 2., 3.],
           [2., 3., 4.]])
    """
    s = as_signal(signal)
    N = s.size
    if m < 1 or N < m:
        raise InvalidDimensionError(f"signal of length {N} is too short for {m} rows")
    n = N - m + 1
    idx = np.arange(m)[:, None] + np.arange(n)[None, :]
    return s[idx]


def build_mosaic(u, y, m: int) -> np.ndarray:
    """Stack the ``m``-row Hankel matrices of ``u`` (top) and ``y`` (bottom)."""
    u = as_signal(u, "u")
    y = as_signal(y, "y")
    if u.size != y.size:
        raise InvalidDimensionError(f"input and output lengths differ ({u.size} != {y.size})")
    return np.vstack([build_hankel(u, m), build_hankel(y, m)])


def hankel_signal(H) -> np.ndarray:
    """Read a signal back from a Hankel matrix: first column, then the last row."""
    H = as_matrix(H)
    return np.concatenate([H[:, 0], H[-1, 1:]])


def _skew_index(shape: tuple[int, int]) -> np.ndarray:
    m, n = shape
    return np.arange(m)[:, None] + np.arange(n)[None, :]


def skew_diagonal_means(M) -> np.ndarray:
    """Arithmetic mean of every skew diagonal, as a signal of length ``m + n - 1``."""
    M = as_matrix(M)
    idx = _skew_index(M.shape).ravel()
    sums = np.bincount(idx, weights=M.ravel())
    counts = np.bincount(idx)
    return sums / counts


def hankel_project(M) -> np.ndarray:
    """Orthogonal (Frobenius) projection onto the Hankel matrices of the same shape.

    Every skew diagonal is replaced by its arithmetic mean, which makes the
    output exactly Hankel.
    """
    M = as_matrix(M)
    return skew_diagonal_means(M)[_skew_index(M.shape)]


def skew_spread(M) -> float:
    """Largest within-skew-diagonal deviation of ``M``; zero iff ``M`` is Hankel."""
    M = as_matrix(M)
    idx = _skew_index(M.shape)
    ref = np.concatenate([M[:, 0], M[-1, 1:]])
    return float(np.max(np.abs(M - ref[idx])))


def is_hankel(M, rtol: float = 1e-12) -> bool:
    M = as_matrix(M)
    scale = max(float(np.max(np.abs(M))), np.finfo(float).tiny)
    return skew_spread(M) <= rtol * scale


class TransformKind(enum.Enum):
    IDENTITY = "identity"
    ANTI_DIAGONAL_FLIP = "flip"
    NULL_SPACE_PROJECTOR = "nullspace"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class Transform:
    """A right-hand transform ``Pi`` so that the structured target satisfies
    ``rank(X @ Pi) <= r``.

    ``CUSTOM`` accepts any square matrix; the shrinkage optimality arguments
    only cover the other three kinds.
    """

    kind: TransformKind
    matrix: np.ndarray
    source: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        P = np.asarray(self.matrix, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise InvalidDimensionError(f"transform must be square, got shape {P.shape}")
        P.setflags(write=False)
        object.__setattr__(self, "matrix", P)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_identity(self) -> bool:
        return self.kind is TransformKind.IDENTITY

    def apply(self, W: np.ndarray) -> np.ndarray:
        """``W @ Pi``"""
        if self.is_identity:
            return np.array(W, dtype=float)
        return W @ self.matrix

    def complement(self, W: np.ndarray) -> np.ndarray:
        """``W @ (I - Pi)``"""
        if self.is_identity:
            return np.zeros_like(W, dtype=float)
        return W - W @ self.matrix

    @classmethod
    def identity(cls, n: int) -> "Transform":
        return build_transform(TransformKind.IDENTITY, n)

    @classmethod
    def from_matrix(cls, P) -> "Transform":
        return cls(TransformKind.CUSTOM, np.array(P, dtype=float))


def build_transform(kind, n: int, u_block=None, tol: float = RANK_TOL) -> Transform:
    """Build the ``n x n`` transform of the requested kind.

    For ``NULL_SPACE_PROJECTOR`` the result is ``I - U^T (U U^T)^{-1} U``,
    computed from an orthonormal basis of the row space of ``U`` instead of
    the explicit inverse.
    """
    kind = TransformKind(kind)
    if n < 1:
        raise InvalidDimensionError(f"transform dimension must be positive, got {n}")
    if kind is TransformKind.IDENTITY:
        return Transform(kind, np.eye(n))
    if kind is TransformKind.ANTI_DIAGONAL_FLIP:
        return Transform(kind, np.eye(n)[::-1].copy())
    if kind is TransformKind.NULL_SPACE_PROJECTOR:
        if u_block is None:
            raise InvalidDimensionError("null-space projector needs the input block U")
        U = as_matrix(u_block, "U")
        if U.shape[1] != n:
            raise InvalidDimensionError(f"U has {U.shape[1]} columns, expected {n}")
        k = U.shape[0]
        if k >= n:
            raise SingularInputError(f"U with {k} rows and {n} columns has no nontrivial null space")
        _, s, Vt = np.linalg.svd(U, full_matrices=False)
        if s[-1] <= tol * s[0]:
            raise SingularInputError(
                "U U^T is singular: the input is not persistently exciting for this block size"
            )
        Q = Vt.T
        P = np.eye(n) - Q @ Q.T
        P = 0.5 * (P + P.T)
        return Transform(kind, P, source=U.copy())
    raise InvalidDimensionError("CUSTOM transforms are built with Transform.from_matrix")


def check_rank(M, tol: float = RANK_TOL) -> int:
    """Number of singular values above ``tol`` times the largest one."""
    M = as_matrix(M)
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))
