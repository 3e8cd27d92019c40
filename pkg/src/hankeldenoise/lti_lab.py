"""Random stable SISO systems and the two denoising case studies.

Trajectory denoising: a noisy output ``y + v`` driven by a known white
input ``u``.  The target is the output Hankel matrix ``Y``; the transform is
the projector onto the null space of the input Hankel matrix ``U`` and the
rank is the system order.

Impulse response denoising: noisy Markov parameters.  Target and
measurement are plain Hankel matrices, the transform is the identity.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import InvalidDimensionError, SingularInputError
from .hankel_core import (
    RANK_TOL,
    Transform,
    TransformKind,
    build_hankel,
    build_transform,
    check_rank,
)

POLE_RADIUS = 0.95
MAX_CONDITION = 1e8
MAX_INPUT_RETRIES = 20


@dataclass(frozen=True, eq=False)
class LtiSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B.ravel().tolist(),
            "C": self.C.ravel().tolist(),
            "D": float(self.D),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LtiSystem":
        A = np.asarray(d["A"], dtype=float)
        nx = A.shape[0]
        return cls(A, np.asarray(d["B"], dtype=float).reshape(nx, 1),
                   np.asarray(d["C"], dtype=float).reshape(1, nx), float(d["D"]))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _sample_poles(nx: int, rng: np.random.Generator) -> np.ndarray:
    """Block-diagonal real state matrix with poles uniform in the disk of radius 0.95."""
    A = np.zeros((nx, nx))
    k = 0
    while k + 1 < nx:
        rad = POLE_RADIUS * np.sqrt(rng.uniform())
        ang = rng.uniform(0.0, np.pi)
        a, b = rad * np.cos(ang), rad * np.sin(ang)
        A[k:k + 2, k:k + 2] = [[a, b], [-b, a]]
        k += 2
    if k < nx:
        A[k, k] = rng.uniform(-POLE_RADIUS, POLE_RADIUS)
    return A


def _gramian_conditions(A, B, C) -> tuple[float, float]:
    nx = A.shape[0]
    ctrb = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(nx)])
    obsv = np.vstack([C @ np.linalg.matrix_power(A, k) for k in range(nx)])
    return np.linalg.cond(ctrb), np.linalg.cond(obsv)


def random_stable_system(nx: int, seed=None) -> LtiSystem:
    """Random stable, minimal SISO system of order ``nx``.

    Resamples until the controllability and observability matrices have
    condition number below 1e8.
    """
    if nx < 1:
        raise InvalidDimensionError("system order must be at least 1")
    rng = _rng(seed)
    while True:
        A = _sample_poles(nx, rng)
        B = rng.standard_normal((nx, 1))
        C = rng.standard_normal((1, nx))
        D = float(rng.standard_normal())
        kc, ko = _gramian_conditions(A, B, C)
        if kc < MAX_CONDITION and ko < MAX_CONDITION:
            return LtiSystem(A, B, C, D)


def impulse_response(sys: LtiSystem, N: int) -> np.ndarray:
    """``g_0 = D``, ``g_k = C A^(k-1) B``."""
    if N < 1:
        raise InvalidDimensionError("N must be positive")
    g = np.empty(N)
    g[0] = sys.D
    x = sys.B[:, 0].copy()
    c = sys.C[0]
    for k in range(1, N):
        g[k] = c @ x
        x = sys.A @ x
    return g


def simulate(sys: LtiSystem, u) -> np.ndarray:
    """Output of ``sys`` from zero initial state."""
    u = np.asarray(u, dtype=float).ravel()
    if not np.all(np.isfinite(u)):
        raise ValueError("input contains non-finite values")
    x = np.zeros(sys.order)
    b = sys.B[:, 0]
    c = sys.C[0]
    y = np.empty_like(u)
    for k, uk in enumerate(u):
        y[k] = c @ x + sys.D * uk
        x = sys.A @ x + b * uk
    return y


def check_persistency(u, order: int, tol: float = RANK_TOL) -> bool:
    """True iff the ``order``-row Hankel matrix of ``u`` has full row rank."""
    u = np.asarray(u, dtype=float).ravel()
    if order < 1 or u.size < order:
        raise InvalidDimensionError(f"input of length {u.size} is too short for order {order}")
    H = build_hankel(u, order)
    if H.shape[1] < order:
        return False
    return check_rank(H, tol) == order


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a, dtype=float)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class TrajectoryInstance:
    system: LtiSystem
    u: np.ndarray
    y: np.ndarray
    y_noisy: np.ndarray
    m: int
    sigma2: float
    seed: Optional[int] = None

    @property
    def r(self) -> int:
        return self.system.order

    @property
    def U(self) -> np.ndarray:
        return build_hankel(self.u, self.m)

    @property
    def X(self) -> np.ndarray:
        return build_hankel(self.y, self.m)

    @property
    def W(self) -> np.ndarray:
        return build_hankel(self.y_noisy, self.m)

    @property
    def transform(self) -> Transform:
        return build_transform(TransformKind.NULL_SPACE_PROJECTOR, self.X.shape[1], self.U)

    def problem(self) -> tuple[np.ndarray, Transform, int]:
        return self.W, self.transform, self.r

    def to_dict(self) -> dict:
        return {
            "example": "trajectory",
            "system": self.system.to_dict(),
            "u": self.u.tolist(),
            "y": self.y.tolist(),
            "y_noisy": self.y_noisy.tolist(),
            "m": self.m,
            "sigma2": self.sigma2,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class ImpulseInstance:
    """``g`` holds the Markov parameters ``g_1 .. g_N``; see :func:`make_impulse_instance`."""

    system: LtiSystem
    g: np.ndarray
    g_noisy: np.ndarray
    m: int
    sigma2: float
    seed: Optional[int] = None

    @property
    def r(self) -> int:
        return self.system.order

    @property
    def X(self) -> np.ndarray:
        return build_hankel(self.g, self.m)

    @property
    def W(self) -> np.ndarray:
        return build_hankel(self.g_noisy, self.m)

    @property
    def transform(self) -> Transform:
        return Transform.identity(self.X.shape[1])

    def problem(self) -> tuple[np.ndarray, Transform, int]:
        return self.W, self.transform, self.r

    def to_dict(self) -> dict:
        return {
            "example": "impulse",
            "system": self.system.to_dict(),
            "g": self.g.tolist(),
            "g_noisy": self.g_noisy.tolist(),
            "m": self.m,
            "sigma2": self.sigma2,
            "seed": self.seed,
        }


def instance_hash(instance) -> str:
    """Short digest of the ``(W, Pi, r)`` triple handed to the estimators."""
    W, T, r = instance.problem()
    return _digest(W, T.matrix, np.array([r]))


def instance_to_json(instance) -> str:
    return json.dumps(instance.to_dict(), sort_keys=True)


def instance_from_json(text: str):
    d = json.loads(text)
    sys = LtiSystem.from_dict(d["system"])
    if d["example"] == "trajectory":
        return TrajectoryInstance(sys, np.asarray(d["u"]), np.asarray(d["y"]), np.asarray(d["y_noisy"]),
                                  d["m"], d["sigma2"], d.get("seed"))
    return ImpulseInstance(sys, np.asarray(d["g"]), np.asarray(d["g_noisy"]), d["m"], d["sigma2"], d.get("seed"))


def make_trajectory_instance(sys: LtiSystem, N: int, m: int, sigma2: float, seed=None) -> TrajectoryInstance:
    """White-input trajectory with output noise of variance ``sigma2``.

    The input is redrawn (a bounded number of times) until it is
    persistently exciting of order ``m + n_x``.
    """
    if N < m + sys.order or m <= sys.order:
        raise InvalidDimensionError(f"need m > n_x and N >= m + n_x, got N={N}, m={m}, n_x={sys.order}")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    rng = _rng(seed)
    for _ in range(MAX_INPUT_RETRIES):
        u = rng.standard_normal(N)
        if check_persistency(u, m + sys.order):
            break
    else:
        raise SingularInputError("could not draw a persistently exciting input")
    y = simulate(sys, u)
    v = np.sqrt(sigma2) * rng.standard_normal(N)
    return TrajectoryInstance(sys, u, y, y + v, m, float(sigma2), seed if isinstance(seed, int) else None)


def make_impulse_instance(sys: LtiSystem, N: int, m: int, sigma2: float, seed=None) -> ImpulseInstance:
    """Noisy Markov parameters ``g_1 .. g_N`` (the feedthrough ``g_0`` is left out
    so that the noise-free Hankel matrix has rank exactly ``n_x``)."""
    if N < m:
        raise InvalidDimensionError(f"need N >= m, got N={N}, m={m}")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    rng = _rng(seed)
    g = impulse_response(sys, N + 1)[1:]
    v = np.sqrt(sigma2) * rng.standard_normal(N)
    return ImpulseInstance(sys, g, g + v, m, float(sigma2), seed if isinstance(seed, int) else None)
