"""Matrix form of the three-body problem: Xddot = A X.

A decomposes as rho1*A1 + rho2*A2 + rho3*A3 with constant mass matrices.
This module builds those matrices, the energy-derived constants (Sigma and
the time bounds) and residuals of the pointwise algebraic identities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NotNegativeEnergy
from .state import (
    BodyState,
    Masses,
    PairwiseGeometry,
    angular_momentum,
    angular_momentum_scale,
    mass_weighted_frame,
    pairwise_geometry,
    total_energy,
)

J = np.array([[1.0, 0.0], [0.0, -1.0]])
J.setflags(write=False)


def _ro(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


def adjugate(X: np.ndarray) -> np.ndarray:
    return np.array([[X[1, 1], -X[0, 1]], [-X[1, 0], X[0, 0]]])


def inner(A: np.ndarray, B: np.ndarray) -> float:
    """Frobenius inner product Tr(A^T B)."""
    return float(np.sum(A * B))


def basis_matrices(m: Masses) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m1, m2 = m.m1, m.m2
    A1 = np.array([[0.0, 0.0], [-m2, -m.m32]])
    A2 = np.array([[-m.m13, -m1], [0.0, 0.0]])
    A3 = np.array([[-m2, m1], [m2, -m1]])
    return A1, A2, A3


def traceless(A: np.ndarray) -> np.ndarray:
    return A - 0.5 * np.trace(A) * np.eye(2)


def l_matrix(m: Masses) -> np.ndarray:
    i1, i2, i3 = 1.0 / m.m1, 1.0 / m.m2, 1.0 / m.m3
    return np.array([[-i3, i1 + i3], [-i2 - i3, i3]])


@dataclass(frozen=True)
class ConleyMatrices:
    A: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    At1: np.ndarray
    At2: np.ndarray
    At3: np.ndarray
    L: np.ndarray
    J: np.ndarray
    traceA: float


def conley_matrix(m: Masses, rho) -> np.ndarray:
    """A with entries written out directly (not via the basis)."""
    r1, r2, r3 = rho
    m1, m2 = m.m1, m.m2
    return np.array([
        [-m2 * r3 - m.m13 * r2, m1 * (r3 - r2)],
        [m2 * (r3 - r1), -m1 * r3 - m.m32 * r1],
    ])


def trace_a(m: Masses, rho) -> float:
    r1, r2, r3 = rho
    return -(m.m32 * r1 + m.m13 * r2 + m.m21 * r3)


def build_matrices(m: Masses, rho: PairwiseGeometry | tuple) -> ConleyMatrices:
    if isinstance(rho, PairwiseGeometry):
        rho = rho.rho
    if min(rho) <= 0:
        raise ValueError("rho values must be positive")
    A1, A2, A3 = basis_matrices(m)
    A = conley_matrix(m, rho)
    return ConleyMatrices(
        A=_ro(A), A1=_ro(A1), A2=_ro(A2), A3=_ro(A3),
        At1=_ro(traceless(A1)), At2=_ro(traceless(A2)), At3=_ro(traceless(A3)),
        L=_ro(l_matrix(m)), J=J, traceA=trace_a(m, rho),
    )


def sigma_constant(m: Masses) -> float:
    m1, m2, m3 = m
    return (
        (m3 * m2) ** 1.5 / math.sqrt(m.m32)
        + (m1 * m3) ** 1.5 / math.sqrt(m.m13)
        + (m2 * m1) ** 1.5 / math.sqrt(m.m21)
    )


@dataclass(frozen=True)
class EnergyBounds:
    alpha: float
    Sigma: float
    traceBound: float
    zetaSq: float
    thetaSq: float
    T1: float
    Tgen: float


def energy_bounds(m: Masses, alpha: float) -> EnergyBounds:
    """Constants attached to energy H = -alpha.

    T1 bounds the first syzygy at zero angular momentum; Tgen bounds the
    first generalised syzygy from an antisymmetric start.
    """
    if not alpha > 0:
        raise NotNegativeEnergy(f"alpha must be positive, got {alpha!r}")
    sigma = sigma_constant(m)
    a3 = alpha ** 3
    zeta_sq = a3 / (2.0 * sigma * sigma)
    theta_sq = a3 / (sigma * sigma)
    return EnergyBounds(
        alpha=alpha,
        Sigma=sigma,
        traceBound=-theta_sq,
        zetaSq=zeta_sq,
        thetaSq=theta_sq,
        T1=math.sqrt(2.0) * math.pi * sigma / alpha ** 1.5,
        Tgen=math.pi * sigma / alpha ** 1.5,
    )


def trace_bound_check(m: Masses, state: BodyState) -> tuple[float, float, float]:
    """Return (Tr A, -alpha^3/Sigma^2, margin); margin >= 0 is the Lemma."""
    h = total_energy(m, state)
    if not h < 0:
        raise NotNegativeEnergy(f"H = {h!r} is not negative")
    tr = trace_a(m, pairwise_geometry(state).rho)
    bound = energy_bounds(m, -h).traceBound
    return tr, bound, bound - tr


def quadratic_coefficients(m: Masses) -> tuple[float, float]:
    """(beta, gamma) of the zero-momentum quadratic form; both exceed 1/2."""
    return 0.5 * (m.m3 / m.m1 + 1.0), 0.5 * (m.m3 / m.m2 + 1.0)


def quadratic_form(m: Masses, a: float, b: float) -> float:
    beta, gamma = quadratic_coefficients(m)
    return beta * beta * a * a + (2 * beta * gamma - 1) * a * b + gamma * gamma * b * b


@dataclass(frozen=True)
class IdentityResiduals:
    form: float          # max-entry residual, scaled by max(1, |inputs|)
    form_raw: float
    trace: float         # |Tr(Xdot adj X) - d/dt Delta1|, zero by construction
    det: float           # |det(Xdot adj X) - Delta1 Delta2|, scaled
    discriminant: float  # D = Delta1dot^2 - 4 Delta1 Delta2
    quadratic: float     # beta^2 a^2 + (2 beta gamma - 1) a b + gamma^2 b^2
    delta1_dot: float
    scale: float


@lru_cache(maxsize=64)
def _form_terms(m: Masses) -> tuple[np.ndarray, np.ndarray]:
    A1, A2, _ = basis_matrices(m)
    return traceless(A1) / m.m2, traceless(A2) / m.m1


def identity_residuals(m: Masses, state: BodyState, k: float) -> IdentityResiduals:
    frame = mass_weighted_frame(m, state)
    P = frame.Xdot @ adjugate(frame.X)
    d1dot = float(P[0, 0] + P[1, 1])
    T1, T2 = _form_terms(m)
    a, b = frame.a, frame.b
    R = P - b * T1 + a * T2 + k * (m.m3 / 2.0) * J
    R[0, 0] -= 0.5 * d1dot
    R[1, 1] -= 0.5 * d1dot
    pmax = float(np.abs(P).max())
    scale = max(1.0, pmax, abs(a) / m.m1, abs(b) / m.m2, abs(k) * m.m3)
    raw = float(np.abs(R).max())
    dd = frame.delta1 * frame.delta2
    det_p = float(P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0])
    return IdentityResiduals(
        form=raw / scale,
        form_raw=raw,
        trace=0.0,
        det=abs(det_p - dd) / max(1.0, abs(dd), pmax ** 2),
        discriminant=d1dot * d1dot - 4.0 * dd,
        quadratic=quadratic_form(m, a, b),
        delta1_dot=d1dot,
        scale=scale,
    )


def angular_momentum_matrix_form(m: Masses, state: BodyState) -> float:
    """<Xdot adj(X), L>, the matrix expression of the angular momentum."""
    frame = mass_weighted_frame(m, state)
    return inner(frame.Xdot @ adjugate(frame.X), l_matrix(m))


def angular_momentum_from_areas(m: Masses, state: BodyState) -> float:
    S = mass_weighted_frame(m, state).S
    return S[0] / m.m1 + S[1] / m.m2 + S[2] / m.m3


def angular_momentum_triple(m: Masses, state: BodyState) -> tuple[float, float, float, float]:
    """Direct, area and matrix forms of I, plus the scale used to compare them."""
    return (
        angular_momentum(m, state),
        angular_momentum_from_areas(m, state),
        angular_momentum_matrix_form(m, state),
        angular_momentum_scale(m, state),
    )
