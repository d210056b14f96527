"""Syzygy and velocity-alignment detection on dense trajectories."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import Degenerate, NoSignChange, NotASyzygy
from .integrator import DenseTrajectory, energy_momentum_flat
from .state import (
    BodyState,
    Masses,
    delta1_flat,
    delta2_flat,
    mass_weighted_frame,
    pair_determinants,
    pairwise_distances,
)

TOL_EVENT = 1e-11
TOL_GRAZE = 1e-7
SIMULTANEOUS_DT = 1e-10
SUBSAMPLES = 4


class EventKind(str, enum.Enum):
    POSITION = "PositionSyzygy"
    VELOCITY = "VelocityAlignment"
    SIMULTANEOUS = "Simultaneous"


@dataclass(frozen=True)
class Event:
    t: float
    kind: EventKind
    middle_body: int | None
    delta1: float
    delta2: float
    H: float
    I: float
    grazing: bool = False


@dataclass(frozen=True)
class ScanResult:
    events: list[Event]
    degenerate: tuple[str, ...] = ()  # monitored functions that vanish identically
    scales: dict = field(default_factory=dict)

    def first(self, kinds=None) -> Event | None:
        for ev in self.events:
            if kinds is None or ev.kind in kinds:
                return ev
        return None


def _sample_times(traj: DenseTrajectory, subsamples: int = SUBSAMPLES) -> np.ndarray:
    ts = traj.ts
    if len(ts) == 1:
        return ts.copy()
    x = np.arange(subsamples + 1) / (subsamples + 1)
    grid = (ts[:-1, None] + (ts[1:] - ts[:-1])[:, None] * x[None, :]).ravel()
    return np.concatenate([grid, ts[-1:]])


def trajectory_scales(traj: DenseTrajectory, ys: np.ndarray | None = None) -> tuple[float, float]:
    """Largest mass-weighted position and velocity norms over the samples."""
    if ys is None:
        ys = traj.ys
    mw = np.repeat(traj.masses.as_array(), 2)
    w = ys[:, :6] * mw
    wd = ys[:, 6:] * mw
    pos = float(np.max(np.hypot(w[:, 0::2], w[:, 1::2])))
    vel = float(np.max(np.hypot(wd[:, 0::2], wd[:, 1::2])))
    return pos, vel


def refine_event_time(traj: DenseTrajectory, bracket: tuple[float, float], f: Callable) -> float:
    """Root of ``f(state_flat)`` on the interpolant inside ``bracket``."""
    lo, hi = bracket

    def g(t):
        return float(f(traj.sample(t)))

    glo, ghi = g(lo), g(hi)
    if glo == 0:
        return float(lo)
    if ghi == 0:
        return float(hi)
    if glo * ghi > 0:
        raise NoSignChange(f"f has the same sign at {lo} and {hi}")
    a, b = min(lo, hi), max(lo, hi)
    xtol = 1e-13 * max(1.0, abs(a), abs(b))
    return float(brentq(g, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200))


def _roots_of(traj, f, times, vals, tol_zero, tol_graze):
    """Return [(t, grazing)] for one monitored function."""
    found = []
    n = len(times)
    if abs(vals[0]) <= tol_zero:
        found.append((float(times[0]), False))
    for i in range(n - 1):
        a, b = vals[i], vals[i + 1]
        if a * b < 0:
            found.append((refine_event_time(traj, (times[i], times[i + 1]), f), False))
        elif b == 0 and i + 2 < n and a * vals[i + 2] < 0:
            found.append((float(times[i + 1]), False))
    if n > 1 and abs(vals[-1]) <= tol_zero and not vals[-2] * vals[-1] < 0:
        found.append((float(times[-1]), False))

    # near-tangencies: every sampled interior minimum of |f| without a sign
    # change is refined, since the true minimum can lie well below the samples
    av = np.abs(vals)
    for i in range(1, n - 1):
        if not (av[i] <= av[i - 1] and av[i] <= av[i + 1]):
            continue
        if vals[i - 1] * vals[i] <= 0 or vals[i] * vals[i + 1] <= 0:
            continue
        sgn = math.copysign(1.0, vals[i])
        a, b = sorted((times[i - 1], times[i + 1]))
        res = minimize_scalar(
            lambda t: sgn * float(f(traj.sample(t))),
            bounds=(a, b), method="bounded", options={"xatol": 1e-13 * max(1.0, abs(b))},
        )
        tm = float(res.x)
        if res.fun < 0:
            # hidden double crossing inside the sample interval
            found.append((refine_event_time(traj, (a, tm), f), False))
            found.append((refine_event_time(traj, (tm, b), f), False))
        elif res.fun < tol_graze:
            found.append((tm, True))
    found.sort()
    out = []
    for t, graze in found:
        if out and abs(t - out[-1][0]) <= SIMULTANEOUS_DT * max(1.0, abs(t)):
            if out[-1][1] and not graze:
                out[-1] = (t, graze)
            continue
        out.append((t, graze))
    return out


def scan_events(
    traj: DenseTrajectory,
    which: str = "both",
    tol_event: float = TOL_EVENT,
    tol_graze: float = TOL_GRAZE,
    subsamples: int = SUBSAMPLES,
) -> ScanResult:
    """Locate zeros of Delta1 and/or Delta2 along ``traj``.

    ``which`` is ``"delta1"``, ``"delta2"`` or ``"both"``. Sign changes
    between consecutive samples (accepted steps plus ``subsamples`` interior
    interpolant points each) are refined to a root; shallow minima of |f|
    below ``tol_graze * scale**2`` are reported with ``grazing=True``.
    A function that stays below ``tol_event * scale**2`` everywhere is
    reported in ``degenerate`` instead of producing events.
    """
    if which not in ("delta1", "delta2", "both"):
        raise ValueError(f"unknown monitored function {which!r}")
    m = traj.masses
    times = _sample_times(traj, subsamples)
    ys = traj.sample(times) if traj.n_steps else traj.ys.copy()
    pos, vel = trajectory_scales(traj, ys)
    monitors = {
        "delta1": (lambda y: delta1_flat(m, y), pos * pos, EventKind.POSITION),
        "delta2": (lambda y: delta2_flat(m, y), vel * vel, EventKind.VELOCITY),
    }
    chosen = ("delta1", "delta2") if which == "both" else (which,)

    raw: list[tuple[float, EventKind, bool]] = []
    degenerate = []
    for name in chosen:
        f, sc, kind = monitors[name]
        vals = f(ys)
        tol_zero = tol_event * sc
        if np.all(np.abs(vals) <= tol_zero):
            degenerate.append(name)
            continue
        for t, graze in _roots_of(traj, f, times, vals, tol_zero, tol_graze * sc):
            raw.append((t, kind, graze))
    raw.sort(key=lambda e: e[0])

    merged: list[list] = []
    for t, kind, graze in raw:
        if merged and merged[-1][1] is not kind and abs(t - merged[-1][0]) <= SIMULTANEOUS_DT * max(1.0, abs(t)):
            merged[-1][1] = EventKind.SIMULTANEOUS
            merged[-1][2] = merged[-1][2] and graze
            continue
        merged.append([t, kind, graze])

    events = [_make_event(traj, t, kind, graze) for t, kind, graze in merged]
    return ScanResult(events=events, degenerate=tuple(degenerate), scales={"position": pos, "velocity": vel})


def _make_event(traj: DenseTrajectory, t: float, kind: EventKind, grazing: bool) -> Event:
    m = traj.masses
    y = traj.sample(t)
    h, ang = energy_momentum_flat(m, y)
    middle = None
    if kind is not EventKind.VELOCITY:
        try:
            middle = classify_middle_body(BodyState.from_flat(t, y), tol=1e-6 if grazing else 1e-9)
        except (Degenerate, NotASyzygy):
            middle = None
    return Event(
        t=float(t),
        kind=kind,
        middle_body=middle,
        delta1=float(delta1_flat(m, y)),
        delta2=float(delta2_flat(m, y)),
        H=h,
        I=ang,
        grazing=grazing,
    )


def classify_middle_body(state: BodyState, tol: float = 1e-9) -> int:
    """Index (1-based) of the body lying between the other two on their common line."""
    r = state.r
    d = pairwise_distances(state)
    span = max(d)
    if span == 0:
        raise Degenerate("all bodies coincide")
    twice_area = abs((r[1, 0] - r[0, 0]) * (r[2, 1] - r[0, 1]) - (r[1, 1] - r[0, 1]) * (r[2, 0] - r[0, 0]))
    if twice_area > tol * span * span:
        raise NotASyzygy(f"bodies are not collinear (2*area/span^2 = {twice_area / span ** 2:.3e})")
    # the longest side joins the two outer bodies; d_i is opposite body i
    outer_pair = {0: (1, 2), 1: (0, 2), 2: (0, 1)}[int(np.argmax(d))]
    u = r[outer_pair[1]] - r[outer_pair[0]]
    u = u / np.hypot(*u)
    proj = r @ u
    order = np.argsort(proj)
    gaps = np.diff(proj[order])
    if np.min(gaps) <= 1e-14 * span:
        raise Degenerate("coincident projections on the syzygy line")
    return int(order[1]) + 1


@dataclass(frozen=True)
class AntisymmetryIndicator:
    value: float  # Delta1 * Delta2
    delta1: float
    delta2: float
    pair_products: dict  # {(j, k): unweighted position det * velocity det}
    weighted_pair_products: dict  # {(j, k): m_j^2 m_k^2 * pair product}
    is_antisymmetric: bool

    @property
    def unweighted_is_antisymmetric(self) -> bool:
        """Sign test on the unweighted (1, 2) pair alone."""
        d = self.pair_products[(1, 2)]
        return bool(d < 0 and self.is_nondegenerate)

    @property
    def is_nondegenerate(self) -> bool:
        return self.delta1 != 0 and self.delta2 != 0


PAIRS = ((1, 2), (2, 3), (1, 3))


def antisymmetry_indicator(m: Masses, state: BodyState, tol_event: float = TOL_EVENT) -> AntisymmetryIndicator:
    frame = mass_weighted_frame(m, state)
    masses = tuple(m)
    products, weighted = {}, {}
    for j, k in PAIRS:
        dp, dv = pair_determinants(state, j, k)
        products[(j, k)] = dp * dv
        weighted[(j, k)] = masses[j - 1] ** 2 * masses[k - 1] ** 2 * dp * dv
    W, Wd = frame.W, frame.Wdot
    pos = float(np.max(np.hypot(W[:, 0], W[:, 1])))
    vel = float(np.max(np.hypot(Wd[:, 0], Wd[:, 1])))
    value = frame.delta1 * frame.delta2
    anti = (
        value < 0
        and abs(frame.delta1) > tol_event * pos * pos
        and abs(frame.delta2) > tol_event * vel * vel
    )
    return AntisymmetryIndicator(
        value=value,
        delta1=frame.delta1,
        delta2=frame.delta2,
        pair_products=products,
        weighted_pair_products=weighted,
        is_antisymmetric=bool(anti),
    )
