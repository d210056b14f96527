"""Planar three-body states, barycentric reduction and pointwise quantities.

Index convention (used everywhere in the package): pair quantities are
labelled by the body they do *not* contain::

    d1 = |z3 - z2|,   d2 = |z1 - z3|,   d3 = |z2 - z1|
    rho_i = d_i**-3

Mass-weighted coordinates are w_k = m_k z_k; the configuration matrix X has
rows w_1 and w_2 (row 3 is implied by w_1 + w_2 + w_3 = 0).

Flat layout of a state vector ``y`` (length 12)::

    [x1, y1, x2, y2, x3, y3, vx1, vy1, vx2, vy2, vx3, vy3]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CollisionApproach, CollisionInput

BARYCENTRIC_EPS = 1e-12
COLLISION_FACTOR = 1e-8


@dataclass(frozen=True)
class Masses:
    m1: float
    m2: float
    m3: float

    def __post_init__(self):
        for name in ("m1", "m2", "m3"):
            value = float(getattr(self, name))
            if not value > 0 or not math.isfinite(value):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
            object.__setattr__(self, name, value)

    @classmethod
    def equal(cls, m: float = 1.0) -> "Masses":
        return cls(m, m, m)

    @property
    def total(self) -> float:
        return self.m1 + self.m2 + self.m3

    @property
    def m32(self) -> float:
        return self.m3 + self.m2

    @property
    def m13(self) -> float:
        return self.m1 + self.m3

    @property
    def m21(self) -> float:
        return self.m2 + self.m1

    def as_array(self) -> np.ndarray:
        return np.array([self.m1, self.m2, self.m3])

    def __iter__(self):
        return iter((self.m1, self.m2, self.m3))


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(3, 2)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BodyState:
    """Positions ``r`` and velocities ``v`` (both 3x2) at time ``t``."""

    t: float
    r: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "r", _frozen(self.r))
        object.__setattr__(self, "v", _frozen(self.v))

    @classmethod
    def from_flat(cls, t: float, y) -> "BodyState":
        y = np.asarray(y, dtype=float)
        return cls(t, y[:6], y[6:])

    @classmethod
    def barycentric(cls, m: Masses, r, v, t: float = 0.0) -> "BodyState":
        """Build a state and shift it to the barycentric frame."""
        return reduce_to_barycentric(m, cls(t, r, v))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.r.ravel(), self.v.ravel()])

    def replace(self, **changes) -> "BodyState":
        fields = {"t": self.t, "r": self.r, "v": self.v}
        fields.update(changes)
        return BodyState(**fields)


def pairwise_distances(state: BodyState) -> tuple[float, float, float]:
    (x1, y1), (x2, y2), (x3, y3) = state.r.tolist()
    return (
        math.hypot(x3 - x2, y3 - y2),
        math.hypot(x1 - x3, y1 - y3),
        math.hypot(x2 - x1, y2 - y1),
    )


def position_scale(state: BodyState) -> float:
    return max(float(np.max(np.hypot(state.r[:, 0], state.r[:, 1]))), 1.0)


def _check_separated(d) -> None:
    if min(d) == 0.0:
        raise CollisionInput("two bodies share a position")


def reduce_to_barycentric(m: Masses, state: BodyState) -> BodyState:
    """Subtract the mass-weighted mean position and velocity."""
    _check_separated(pairwise_distances(state))
    w = m.as_array()[:, None]
    rc = (w * state.r).sum(axis=0) / m.total
    vc = (w * state.v).sum(axis=0) / m.total
    return BodyState(state.t, state.r - rc, state.v - vc)


def is_barycentric(m: Masses, state: BodyState, eps: float = BARYCENTRIC_EPS) -> bool:
    w = m.as_array()[:, None]
    scale = position_scale(state) * m.total
    return bool(
        np.all(np.abs((w * state.r).sum(axis=0)) <= eps * scale)
        and np.all(np.abs((w * state.v).sum(axis=0)) <= eps * scale * max(1.0, float(np.abs(state.v).max())))
    )


@dataclass(frozen=True)
class PairwiseGeometry:
    """Mutual distances ``d``, ``rho = d**-3`` and ``inv_d = 1/d``."""

    d: tuple[float, float, float]
    rho: tuple[float, float, float]
    inv_d: tuple[float, float, float]


def pairwise_geometry(state: BodyState) -> PairwiseGeometry:
    d = pairwise_distances(state)
    _check_separated(d)
    inv = tuple(1.0 / x for x in d)
    return PairwiseGeometry(d=d, rho=tuple(q * q * q for q in inv), inv_d=inv)


def rhs_factory(m: Masses, d_min: float = 0.0):
    """Return ``f(t, y)`` for the flat first-order system.

    Written with scalar floats: for three bodies this is several times faster
    than small-array numpy.
    """
    m1, m2, m3 = m.m1, m.m2, m.m3

    def f(t, y):
        x1, y1, x2, y2, x3, y3, u1, v1, u2, v2, u3, v3 = y.tolist()
        # z21, z13, z32 as in the equations of motion
        ax, ay = x2 - x1, y2 - y1
        bx, by = x1 - x3, y1 - y3
        cx, cy = x3 - x2, y3 - y2
        s3 = ax * ax + ay * ay
        s2 = bx * bx + by * by
        s1 = cx * cx + cy * cy
        if min(s1, s2, s3) <= d_min * d_min:
            raise CollisionApproach(f"pairwise distance below {d_min:g} at t={t!r}")
        p3 = 1.0 / (s3 * math.sqrt(s3))
        p2 = 1.0 / (s2 * math.sqrt(s2))
        p1 = 1.0 / (s1 * math.sqrt(s1))
        return np.array([
            u1, v1, u2, v2, u3, v3,
            m2 * ax * p3 - m3 * bx * p2,
            m2 * ay * p3 - m3 * by * p2,
            m3 * cx * p1 - m1 * ax * p3,
            m3 * cy * p1 - m1 * ay * p3,
            m1 * bx * p2 - m2 * cx * p1,
            m1 * by * p2 - m2 * cy * p1,
        ])

    return f


def accelerations(m: Masses, state: BodyState, d_min: float = 0.0) -> np.ndarray:
    """Newtonian accelerations of the three bodies, shape (3, 2)."""
    if min(pairwise_distances(state)) <= d_min:
        raise CollisionApproach(f"pairwise distance below {d_min:g}")
    return rhs_factory(m)(state.t, state.flat())[6:].reshape(3, 2)


def kinetic_energy(m: Masses, state: BodyState) -> float:
    v2 = (state.v * state.v).sum(axis=1)
    return 0.5 * float(m.as_array() @ v2)


def potential(m: Masses, state: BodyState) -> float:
    """U = m3 m2 / d1 + m1 m3 / d2 + m2 m1 / d3 (positive)."""
    g = pairwise_geometry(state)
    return m.m3 * m.m2 * g.inv_d[0] + m.m1 * m.m3 * g.inv_d[1] + m.m2 * m.m1 * g.inv_d[2]


def total_energy(m: Masses, state: BodyState) -> float:
    return kinetic_energy(m, state) - potential(m, state)


def angular_momentum(m: Masses, state: BodyState) -> float:
    r, v = state.r, state.v
    cross = r[:, 0] * v[:, 1] - r[:, 1] * v[:, 0]
    return float(m.as_array() @ cross)


def angular_momentum_scale(m: Masses, state: BodyState) -> float:
    """Sum of m_i |r_i| |v_i|, the natural size of the angular momentum."""
    rn = np.hypot(state.r[:, 0], state.r[:, 1])
    vn = np.hypot(state.v[:, 0], state.v[:, 1])
    return float(m.as_array() @ (rn * vn))


@dataclass(frozen=True)
class MassWeightedFrame:
    X: np.ndarray
    Xdot: np.ndarray
    delta1: float
    delta2: float
    S: tuple[float, float, float]
    W: np.ndarray = field(repr=False)
    Wdot: np.ndarray = field(repr=False)

    @property
    def a(self) -> float:
        return self.S[0]

    @property
    def b(self) -> float:
        return self.S[1]


def mass_weighted_frame(m: Masses, state: BodyState) -> MassWeightedFrame:
    mw = m.as_array()[:, None]
    W = mw * state.r
    Wd = mw * state.v
    X, Xd = W[:2].copy(), Wd[:2].copy()
    d1 = X[0, 0] * X[1, 1] - X[0, 1] * X[1, 0]
    d2 = Xd[0, 0] * Xd[1, 1] - Xd[0, 1] * Xd[1, 0]
    S = tuple(float(W[i, 0] * Wd[i, 1] - Wd[i, 0] * W[i, 1]) for i in range(3))
    for a in (X, Xd, W, Wd):
        a.setflags(write=False)
    return MassWeightedFrame(X=X, Xdot=Xd, delta1=float(d1), delta2=float(d2), S=S, W=W, Wdot=Wd)


def delta1_flat(m: Masses, y: np.ndarray) -> np.ndarray:
    """Delta1 for one flat state or a stack of them (last axis length 12)."""
    y = np.asarray(y)
    return m.m1 * m.m2 * (y[..., 0] * y[..., 3] - y[..., 1] * y[..., 2])


def delta2_flat(m: Masses, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y)
    return m.m1 * m.m2 * (y[..., 6] * y[..., 9] - y[..., 7] * y[..., 8])


def pair_determinants(state: BodyState, j: int, k: int) -> tuple[float, float]:
    """Unweighted position and velocity determinants of bodies j, k (1-based)."""
    rj, rk = state.r[j - 1], state.r[k - 1]
    vj, vk = state.v[j - 1], state.v[k - 1]
    return (
        float(rj[0] * rk[1] - rj[1] * rk[0]),
        float(vj[0] * vk[1] - vj[1] * vk[0]),
    )


def triangle_area(state: BodyState) -> float:
    (x1, y1), (x2, y2), (x3, y3) = state.r.tolist()
    return 0.5 * abs((x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1))
