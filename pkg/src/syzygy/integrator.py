"""Adaptive Dormand-Prince 8(5,3) integration with dense output.

The Butcher tableau is taken from scipy's DOP853 tables; stepping, the PI
step-size controller, collision guarding and the trajectory container are
implemented here so that every accepted step and its interpolant are
available to the event locator.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

from .errors import CollisionApproach, OutOfRange
from .state import (
    COLLISION_FACTOR,
    BodyState,
    Masses,
    rhs_factory,
)

_NS = _dop.N_STAGES  # 12
_A = _dop.A[:_NS, :_NS]
_B = _dop.B
_C = _dop.C[:_NS]
_E3 = _dop.E3
_E5 = _dop.E5
_D = _dop.D
_A_EXTRA = _dop.A[_NS + 1:]
_C_EXTRA = _dop.C[_NS + 1:]
_NX = _dop.N_STAGES_EXTENDED  # 16

_ORDER = 8
_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0
_BETA = 0.04  # PI stabilisation exponent on the previous error
_EXPO = 1.0 / _ORDER - 0.75 * _BETA
_SUBSAMPLES = 4  # interior points checked per step for terminal sign changes


class Status(str, enum.Enum):
    COMPLETED = "Completed"
    EVENT = "Event"
    COLLISION = "CollisionApproach"
    STEP_FAILURE = "StepFailure"
    MAX_STEPS = "MaxSteps"


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    first_step: float | None = None
    max_steps: int = 200_000
    collision_factor: float = COLLISION_FACTOR
    d_min: float | None = None  # absolute threshold; overrides collision_factor
    approach_cap: float = 1.0  # step <= approach_cap * min distance / max relative speed
    dense: bool = True

    def __post_init__(self):
        if not 0 < self.rtol < 1e-2:
            raise ValueError(f"rtol must lie in (0, 1e-2), got {self.rtol}")
        if not self.atol > 0:
            raise ValueError(f"atol must be positive, got {self.atol}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if not self.approach_cap > 0:
            raise ValueError("approach_cap must be positive")

    def collision_distance(self, ic: BodyState) -> float:
        if self.d_min is not None:
            return self.d_min
        r = ic.r
        scale = max(
            float(np.hypot(*(r[i] - r[j]))) for i, j in ((0, 1), (1, 2), (0, 2))
        )
        return self.collision_factor * scale


@dataclass
class DenseTrajectory:
    """Accepted steps of one integration together with their interpolants.

    ``ys[i]`` is the flat state at ``ts[i]``; step ``i`` spans
    ``[ts[i], ts[i+1]]`` and is interpolated with ``coeffs[i]``.
    """

    masses: Masses
    ts: np.ndarray
    ys: np.ndarray
    coeffs: np.ndarray  # (n_steps, 7, 12)
    energy_drift: np.ndarray  # relative, per stored state
    momentum_drift: np.ndarray  # absolute, per stored state
    status: Status
    t_stop: float
    n_rejected: int = 0
    n_rhs: int = 0
    config: IntegratorConfig = field(default_factory=IntegratorConfig)

    @property
    def t0(self) -> float:
        return float(self.ts[0])

    @property
    def t1(self) -> float:
        return float(self.ts[-1])

    @property
    def n_steps(self) -> int:
        return len(self.ts) - 1

    @property
    def direction(self) -> float:
        return 1.0 if self.ts[-1] >= self.ts[0] else -1.0

    def state(self, i: int) -> BodyState:
        return BodyState.from_flat(float(self.ts[i]), self.ys[i])

    def _locate(self, t: np.ndarray) -> np.ndarray:
        lo, hi = min(self.t0, self.t1), max(self.t0, self.t1)
        if np.any((t < lo) | (t > hi)):
            raise OutOfRange(f"time outside trajectory span [{lo}, {hi}]")
        if self.direction > 0:
            idx = np.searchsorted(self.ts, t, side="right") - 1
        else:
            idx = np.searchsorted(-self.ts, -t, side="right") - 1
        return np.clip(idx, 0, max(self.n_steps - 1, 0))

    def sample(self, t) -> np.ndarray:
        """Flat states at times ``t`` (scalar or array), via the interpolants."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if self.n_steps == 0:
            if np.any(t != self.t0):
                raise OutOfRange("trajectory has a single point")
            out = np.repeat(self.ys[:1], len(t), axis=0)
            return out[0] if scalar else out
        idx = self._locate(t)
        t_old = self.ts[idx]
        h = self.ts[idx + 1] - t_old
        x = ((t - t_old) / h)[:, None]
        F = self.coeffs[idx]  # (n, 7, 12)
        y = np.zeros((len(t), self.ys.shape[1]))
        for i, f in enumerate(F.transpose(1, 0, 2)[::-1]):
            y += f
            if i % 2 == 0:
                y *= x
            else:
                y *= 1 - x
        y += self.ys[idx]
        # exact stored states at the grid points
        hit = t == self.ts[idx + 1]
        if np.any(hit):
            y[hit] = self.ys[idx[hit] + 1]
        hit = t == t_old
        if np.any(hit):
            y[hit] = self.ys[idx[hit]]
        return y[0] if scalar else y


def dense_eval(traj: DenseTrajectory, t: float) -> BodyState:
    return BodyState.from_flat(float(t), traj.sample(float(t)))


def drift_report(traj: DenseTrajectory) -> tuple[float, float]:
    """(max relative energy drift, max absolute angular-momentum drift)."""
    return float(np.max(traj.energy_drift)), float(np.max(traj.momentum_drift))


def energy_momentum_flat(m: Masses, y: np.ndarray) -> tuple[float, float]:
    x1, y1, x2, y2, x3, y3, u1, v1, u2, v2, u3, v3 = y.tolist()
    m1, m2, m3 = m.m1, m.m2, m.m3
    k = 0.5 * (m1 * (u1 * u1 + v1 * v1) + m2 * (u2 * u2 + v2 * v2) + m3 * (u3 * u3 + v3 * v3))
    u = (
        m3 * m2 / math.hypot(x3 - x2, y3 - y2)
        + m1 * m3 / math.hypot(x1 - x3, y1 - y3)
        + m2 * m1 / math.hypot(x2 - x1, y2 - y1)
    )
    ang = m1 * (x1 * v1 - y1 * u1) + m2 * (x2 * v2 - y2 * u2) + m3 * (x3 * v3 - y3 * u3)
    return k - u, ang


def _min_distance_and_speed(y: np.ndarray) -> tuple[float, float]:
    x1, y1, x2, y2, x3, y3, u1, v1, u2, v2, u3, v3 = y.tolist()
    d = min(
        math.hypot(x3 - x2, y3 - y2),
        math.hypot(x1 - x3, y1 - y3),
        math.hypot(x2 - x1, y2 - y1),
    )
    s = max(
        math.hypot(u3 - u2, v3 - v2),
        math.hypot(u1 - u3, v1 - v3),
        math.hypot(u2 - u1, v2 - v1),
    )
    return d, s


def _initial_step(f, t0, y0, f0, direction, rtol, atol) -> float:
    """Hairer's starting-step heuristic."""
    scale = atol + np.abs(y0) * rtol
    d0 = np.linalg.norm(y0 / scale) / math.sqrt(len(y0))
    d1 = np.linalg.norm(f0 / scale) / math.sqrt(len(y0))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = f(t0 + h0 * direction, y1)
    d2 = np.linalg.norm((f1 - f0) / scale) / math.sqrt(len(y0)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / _ORDER)
    return min(100 * h0, h1)


def _dense_coeffs(f, t_old, y_old, y_new, f_old, f_new, h, K) -> np.ndarray:
    for s, (a, c) in enumerate(zip(_A_EXTRA, _C_EXTRA), start=_NS + 1):
        K[s] = f(t_old + c * h, y_old + h * (a[:s] @ K[:s]))
    F = np.empty((7, len(y_old)))
    dy = y_new - y_old
    F[0] = dy
    F[1] = h * f_old - dy
    F[2] = 2 * dy - h * (f_new + f_old)
    F[3:] = h * (_D @ K)
    return F


Terminal = Callable[[np.ndarray], np.ndarray]


def integrate(
    m: Masses,
    ic: BodyState,
    t_end: float,
    cfg: IntegratorConfig | None = None,
    terminal: Sequence[Terminal] = (),
) -> DenseTrajectory:
    """Integrate from ``ic`` to ``t_end`` (either direction).

    ``terminal`` functions map stacked flat states to scalars; integration
    stops after the first accepted step across which any of them changes
    sign (checked at the step ends and a few interior interpolant points).
    The returned trajectory always holds every accepted step.
    """
    cfg = cfg or IntegratorConfig()
    d_min = cfg.collision_distance(ic)
    f_raw = rhs_factory(m, d_min=0.0)
    n_rhs = 0

    def f(t, y):
        nonlocal n_rhs
        n_rhs += 1
        return f_raw(t, y)

    t = ic.t
    y = ic.flat()
    direction = 1.0 if t_end >= t else -1.0
    span = abs(t_end - t)

    h0_energy, i0 = energy_momentum_flat(m, y)
    h_norm = abs(h0_energy) if h0_energy != 0 else 1.0

    ts, ys, coeffs = [t], [y.copy()], []
    e_drift, i_drift = [0.0], [0.0]
    status = Status.COMPLETED
    n_rejected = 0

    dist, _ = _min_distance_and_speed(y)
    if dist <= d_min:
        return DenseTrajectory(
            m, np.array(ts), np.array(ys), np.empty((0, 7, 12)), np.array(e_drift),
            np.array(i_drift), Status.COLLISION, t, 0, 0, cfg,
        )
    if span == 0:
        return DenseTrajectory(
            m, np.array(ts), np.array(ys), np.empty((0, 7, 12)), np.array(e_drift),
            np.array(i_drift), Status.COMPLETED, t, 0, 0, cfg,
        )

    g_prev = [np.atleast_1d(g(y[None, :]))[0] for g in terminal]

    fy = f(t, y)
    h = cfg.first_step or _initial_step(f, t, y, fy, direction, cfg.rtol, cfg.atol)
    err_prev = 1e-4
    K = np.empty((_NX, len(y)))
    x_sub = np.arange(1, _SUBSAMPLES + 1) / (_SUBSAMPLES + 1)

    while True:
        if len(coeffs) >= cfg.max_steps:
            status = Status.MAX_STEPS
            break
        remaining = abs(t_end - t)
        if remaining <= 4 * np.finfo(float).eps * max(1.0, abs(t)):
            break
        dist, speed = _min_distance_and_speed(y)
        h_cap = cfg.approach_cap * dist / speed if speed > 0 else math.inf
        h = min(h, h_cap, remaining)
        h_floor = 10 * np.finfo(float).eps * max(1.0, abs(t))

        accepted = False
        while not accepted:
            if h < h_floor:
                status = Status.STEP_FAILURE
                break
            hs = h * direction
            if remaining - h <= 4 * np.finfo(float).eps * max(1.0, abs(t)):
                t_new = t_end
                hs = t_end - t
            else:
                t_new = t + hs
            try:
                K[0] = fy
                for s in range(1, _NS):
                    K[s] = f(t + _C[s] * hs, y + hs * (_A[s, :s] @ K[:s]))
                y_new = y + hs * (_B @ K[:_NS])
                f_new = f(t_new, y_new)
            except (FloatingPointError, ZeroDivisionError):
                h *= 0.25
                n_rejected += 1
                continue
            K[_NS] = f_new
            sc = cfg.atol + np.maximum(np.abs(y), np.abs(y_new)) * cfg.rtol
            e5 = (_E5 @ K[:_NS + 1]) / sc
            e3 = (_E3 @ K[:_NS + 1]) / sc
            n5, n3 = float(e5 @ e5), float(e3 @ e3)
            if n5 == 0 and n3 == 0:
                err = 0.0
            else:
                err = abs(hs) * n5 / math.sqrt((n5 + 0.01 * n3) * len(y))
            if not math.isfinite(err):
                h *= 0.25
                n_rejected += 1
                continue
            if err <= 1.0:
                accepted = True
                if err == 0:
                    fac = _FAC_MAX
                else:
                    fac = _SAFETY * err ** -_EXPO * err_prev ** _BETA
                    fac = min(_FAC_MAX, max(_FAC_MIN, fac))
                err_prev = max(err, 1e-4)
                h_next = h * fac
            else:
                fac = max(_FAC_MIN, _SAFETY * err ** -_EXPO)
                h *= fac
                n_rejected += 1
        if status is Status.STEP_FAILURE:
            break

        d_new, _ = _min_distance_and_speed(y_new)
        if d_new <= d_min:
            status = Status.COLLISION
            break

        F = _dense_coeffs(f, t, y, y_new, fy, f_new, hs, K)
        ts.append(t_new)
        ys.append(y_new)
        coeffs.append(F)
        hn, ang = energy_momentum_flat(m, y_new)
        e_drift.append(abs(hn - h0_energy) / h_norm)
        i_drift.append(abs(ang - i0))

        stop = False
        if terminal:
            sub = _interp(F, y, x_sub)
            pts = np.vstack([sub, y_new[None, :]])
            for j, g in enumerate(terminal):
                vals = np.atleast_1d(g(pts))
                seq = np.concatenate([[g_prev[j]], vals])
                if np.any(seq[:-1] * seq[1:] < 0) or np.any(vals == 0):
                    stop = True
                g_prev[j] = vals[-1]

        t, y, fy, h = t_new, y_new, f_new, h_next
        if stop:
            status = Status.EVENT
            break

    traj = DenseTrajectory(
        masses=m,
        ts=np.array(ts),
        ys=np.array(ys),
        coeffs=np.array(coeffs) if coeffs else np.empty((0, 7, len(y))),
        energy_drift=np.array(e_drift),
        momentum_drift=np.array(i_drift),
        status=status,
        t_stop=float(ts[-1]),
        n_rejected=n_rejected,
        n_rhs=n_rhs,
        config=cfg,
    )
    for a in (traj.ts, traj.ys, traj.coeffs, traj.energy_drift, traj.momentum_drift):
        a.setflags(write=False)
    return traj


def _interp(F: np.ndarray, y_old: np.ndarray, x: np.ndarray) -> np.ndarray:
    y = np.zeros((len(x), len(y_old)))
    xx = x[:, None]
    for i, f in enumerate(F[::-1]):
        y += f
        if i % 2 == 0:
            y *= xx
        else:
            y *= 1 - xx
    return y + y_old


def integrate_or_raise(m: Masses, ic: BodyState, t_end: float, cfg: IntegratorConfig | None = None):
    """Like :func:`integrate` but raise unless the full span was covered."""
    traj = integrate(m, ic, t_end, cfg)
    if traj.status is Status.COLLISION:
        raise CollisionApproach(f"collision threshold crossed near t={traj.t_stop}")
    if traj.status is not Status.COMPLETED:
        raise RuntimeError(f"integration ended with {traj.status.value} at t={traj.t_stop}")
    return traj
