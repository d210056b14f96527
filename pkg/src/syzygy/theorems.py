"""Executable checks of the syzygy theorems and their supporting identities.

Each ``verify_*`` function integrates an initial condition up to the
theorem's time bound and reports what happened first: a zero of the
monitored determinant, a collision stop, or (never expected) reaching the
bound with neither.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import simpson

from .conley import basis_matrices, energy_bounds, sigma_constant, traceless
from .errors import HypothesisNotMet, NotPeriodic, WindowInvalid
from .events import (
    TOL_EVENT,
    EventKind,
    ScanResult,
    antisymmetry_indicator,
    scan_events,
    trajectory_scales,
)
from .integrator import (
    DenseTrajectory,
    IntegratorConfig,
    Status,
    drift_report,
    integrate,
)
from .orbits import TIGHT, state_distance
from .state import (
    BodyState,
    Masses,
    angular_momentum,
    angular_momentum_scale,
    delta1_flat,
    delta2_flat,
    total_energy,
)

# ---------------------------------------------------------------------------
# vectorised pointwise quantities on stacked flat states (..., 12)


def rho_flat(y: np.ndarray) -> np.ndarray:
    """(..., 3) array of rho_i = d_i^-3 with the package's pair convention."""
    r = y[..., :6]
    x1, y1, x2, y2, x3, y3 = (r[..., i] for i in range(6))
    d1 = np.hypot(x3 - x2, y3 - y2)
    d2 = np.hypot(x1 - x3, y1 - y3)
    d3 = np.hypot(x2 - x1, y2 - y1)
    return np.stack([d1, d2, d3], axis=-1) ** -3.0


def trace_a_flat(m: Masses, y: np.ndarray) -> np.ndarray:
    rho = rho_flat(y)
    return -(m.m32 * rho[..., 0] + m.m13 * rho[..., 1] + m.m21 * rho[..., 2])


def areas_flat(m: Masses, y: np.ndarray) -> np.ndarray:
    """Oriented areas S_i = X_i Ydot_i - Xdot_i Y_i of the mass-weighted vectors."""
    mw = m.as_array()
    x, yy = y[..., 0:6:2] * mw, y[..., 1:6:2] * mw
    u, v = y[..., 6::2] * mw, y[..., 7::2] * mw
    return x * v - u * yy


def xdot_adj_x_flat(m: Masses, y: np.ndarray) -> np.ndarray:
    """Xdot @ adj(X), shape (..., 2, 2)."""
    m1, m2 = m.m1, m.m2
    X1, Y1, X2, Y2 = m1 * y[..., 0], m1 * y[..., 1], m2 * y[..., 2], m2 * y[..., 3]
    U1, V1, U2, V2 = m1 * y[..., 6], m1 * y[..., 7], m2 * y[..., 8], m2 * y[..., 9]
    out = np.empty(y.shape[:-1] + (2, 2))
    out[..., 0, 0] = U1 * Y2 - V1 * X2
    out[..., 0, 1] = -U1 * Y1 + V1 * X1
    out[..., 1, 0] = U2 * Y2 - V2 * X2
    out[..., 1, 1] = -U2 * Y1 + V2 * X1
    return out


def conley_a_flat(m: Masses, y: np.ndarray) -> np.ndarray:
    rho = rho_flat(y)
    A1, A2, A3 = basis_matrices(m)
    return rho[..., 0, None, None] * A1 + rho[..., 1, None, None] * A2 + rho[..., 2, None, None] * A3


def rho_differences(y: np.ndarray) -> np.ndarray:
    """g = (rho3 - rho2, rho1 - rho3, rho2 - rho1), so that S(theta) = theta . g."""
    rho = rho_flat(y)
    return np.stack([rho[..., 2] - rho[..., 1], rho[..., 0] - rho[..., 2], rho[..., 1] - rho[..., 0]], axis=-1)


# ---------------------------------------------------------------------------
# finite differences on short, tightly integrated local arcs

_FD1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_FD2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_OFFSETS = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])


def local_stencil(m: Masses, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """States at t + (-2h, -h, 0, h, 2h) from two short tight integrations."""
    state = BodyState.from_flat(t, y)
    cfg = IntegratorConfig(rtol=TIGHT.rtol, atol=TIGHT.atol, d_min=0.0)
    fwd = integrate(m, state, t + 2 * h, cfg)
    bwd = integrate(m, state, t - 2 * h, cfg)
    if fwd.status is not Status.COMPLETED or bwd.status is not Status.COMPLETED:
        raise RuntimeError("local finite-difference arc did not complete")
    out = np.empty((5, len(y)))
    out[0] = bwd.ys[-1]
    out[1] = bwd.sample(t - h)
    out[2] = y
    out[3] = fwd.sample(t + h)
    out[4] = fwd.ys[-1]
    return out


def fd_first(values: np.ndarray, h: float) -> np.ndarray:
    return np.tensordot(_FD1, values, axes=(0, 0)) / h


def fd_second(values: np.ndarray, h: float) -> np.ndarray:
    return np.tensordot(_FD2, values, axes=(0, 0)) / (h * h)


# ---------------------------------------------------------------------------
# Lemma oracle


@dataclass(frozen=True)
class MinFResult:
    s: float
    oracle_min: float
    oracle_argmin: tuple[float, float, float]
    closed_min: float
    closed_argmin: tuple[float, float, float]
    value_rel_err: float
    argmin_err: float  # inf-norm after scaling both argmins by |r*|_inf

    @property
    def agrees(self) -> bool:
        return self.value_rel_err <= 1e-4 and self.argmin_err <= 1e-2


def _f_cubic(m: Masses, r: np.ndarray) -> np.ndarray:
    return m.m32 * r[..., 0] ** 3 + m.m13 * r[..., 1] ** 3 + m.m21 * r[..., 2] ** 3


def minF_oracle(
    m: Masses, s: float, budget: int = 1_000_000, seed: int = 0, refine_steps: int = 200
) -> MinFResult:
    """Brute-force minimum of F(r) = -Tr A on the triangle {U(r) = s, r >= 0}.

    Uniform barycentric samples of the triangle, then coordinate descent that
    transfers weight between pairs of barycentric coordinates.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    c = np.array([m.m3 * m.m2, m.m1 * m.m3, m.m2 * m.m1])
    rng = np.random.default_rng(seed)
    best_val, best_lam = math.inf, None
    chunk = 250_000
    done = 0
    while done < budget:
        n = min(chunk, budget - done)
        lam = rng.dirichlet(np.ones(3), size=n)
        vals = _f_cubic(m, s * lam / c)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_lam = float(vals[i]), lam[i].copy()
        done += n

    def F(lam):
        return float(_f_cubic(m, s * lam / c))

    lam, val = best_lam, best_val
    step = 1e-3
    pairs = ((0, 1), (1, 2), (0, 2))
    for _ in range(refine_steps):
        improved = False
        for i, j in pairs:
            for sgn in (1.0, -1.0):
                trial = lam.copy()
                trial[i] += sgn * step
                trial[j] -= sgn * step
                if trial[i] < 0 or trial[j] < 0:
                    continue
                tv = F(trial)
                if tv < val:
                    lam, val, improved = trial, tv, True
        if not improved:
            step *= 0.5
    r_oracle = s * lam / c

    sigma = sigma_constant(m)
    r_star = (s / sigma) * np.sqrt(np.array([m.m3 * m.m2 / m.m32, m.m1 * m.m3 / m.m13, m.m2 * m.m1 / m.m21]))
    f_star = s ** 3 / sigma ** 2
    norm = float(np.max(np.abs(r_star)))
    return MinFResult(
        s=s,
        oracle_min=val,
        oracle_argmin=tuple(float(x) for x in r_oracle),
        closed_min=f_star,
        closed_argmin=tuple(float(x) for x in r_star),
        value_rel_err=abs(val - f_star) / f_star,
        argmin_err=float(np.max(np.abs(r_oracle - r_star))) / norm,
    )


# ---------------------------------------------------------------------------
# theorem reports


class Outcome(str, enum.Enum):
    EVENT_FOUND = "EventFound"
    COLLISION_STOP = "CollisionStop"
    VIOLATION = "Violation"
    HYPOTHESIS_NOT_MET = "HypothesisNotMet"
    INCOMPLETE = "Incomplete"


@dataclass
class TheoremReport:
    theorem: str
    ic_id: str
    hypotheses: dict
    bound: float | None
    outcome: Outcome
    t_event: float | None = None
    event_kind: str | None = None
    t_stop: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["outcome"] = self.outcome.value
        return d


def _lemma_margin(m: Masses, ys: np.ndarray) -> float:
    """min over states of (bound - Tr A) / |Tr A| with the state's own energy."""
    sigma = sigma_constant(m)
    worst = math.inf
    for y in ys:
        st = BodyState.from_flat(0.0, y)
        h = total_energy(m, st)
        if h >= 0:
            continue
        tr = float(trace_a_flat(m, y))
        bound = -((-h) ** 3) / sigma ** 2
        worst = min(worst, (bound - tr) / abs(tr))
    return worst


def _outcome_from(traj: DenseTrajectory, scan: ScanResult, t_bound: float, kinds) -> tuple:
    """(outcome, event or None)."""
    if any(name in scan.degenerate for name in kinds):
        return Outcome.EVENT_FOUND, None
    wanted = {"delta1": {EventKind.POSITION, EventKind.SIMULTANEOUS},
              "delta2": {EventKind.VELOCITY, EventKind.SIMULTANEOUS}}
    allowed = set().union(*(wanted[k] for k in kinds))
    for ev in scan.events:
        if ev.kind in allowed and ev.t <= t_bound:
            return Outcome.EVENT_FOUND, ev
    if traj.status is Status.COLLISION:
        return Outcome.COLLISION_STOP, None
    if traj.status in (Status.STEP_FAILURE, Status.MAX_STEPS):
        return Outcome.INCOMPLETE, None
    return Outcome.VIOLATION, None


def _diagnostics(m, traj, extra=None) -> dict:
    e, i = drift_report(traj)
    d = {
        "energy_drift": e,
        "momentum_drift": i,
        "n_steps": traj.n_steps,
        "status": traj.status.value,
        "lemma_margin_min": _lemma_margin(m, traj.ys),
    }
    if extra:
        d.update(extra)
    return d


def _report(theorem, ic_id, hyp, bound, traj, scan, kinds, t0) -> TheoremReport:
    outcome, ev = _outcome_from(traj, scan, t0 + bound, kinds)
    rep = TheoremReport(theorem=theorem, ic_id=ic_id, hypotheses=hyp, bound=bound, outcome=outcome)
    if outcome is Outcome.EVENT_FOUND:
        if ev is None:
            rep.t_event, rep.event_kind = t0, "IdenticallyZero"
        else:
            rep.t_event, rep.event_kind = ev.t - t0, ev.kind.value
            rep.diagnostics["event_grazing"] = ev.grazing
            rep.diagnostics["event_middle_body"] = ev.middle_body
    elif outcome in (Outcome.COLLISION_STOP, Outcome.INCOMPLETE):
        rep.t_stop = traj.t_stop - t0
    rep.diagnostics.update(_diagnostics(traj.masses, traj))
    return rep


def verify_theorem1(
    m: Masses, ic: BodyState, cfg: IntegratorConfig | None = None, ic_id: str = "", momentum_tol: float = 1e-10
) -> TheoremReport:
    """Zero momentum, H = -alpha < 0: a syzygy occurs within T1(alpha)."""
    h = total_energy(m, ic)
    k = angular_momentum(m, ic)
    k_scale = angular_momentum_scale(m, ic)
    hyp = {"H": h, "alpha": -h, "I": k, "I_scale": k_scale}
    if not abs(k) <= momentum_tol * k_scale:
        raise HypothesisNotMet(f"angular momentum {k:.3e} is not zero")
    if not h < 0:
        raise HypothesisNotMet(f"energy {h:.6g} is not negative")
    bounds = energy_bounds(m, -h)
    traj = integrate(m, ic, ic.t + bounds.T1, cfg, terminal=[lambda y: delta1_flat(m, y)])
    scan = scan_events(traj, "delta1")
    rep = _report("thm1", ic_id, hyp, bounds.T1, traj, scan, ("delta1",), ic.t)
    rep.diagnostics["Sigma"] = bounds.Sigma
    return rep


def verify_theorem3(
    m: Masses, ic: BodyState, cfg: IntegratorConfig | None = None, ic_id: str = ""
) -> TheoremReport:
    """Antisymmetric start, H = -alpha < 0: a generalised syzygy within T(alpha)."""
    h = total_energy(m, ic)
    ind = antisymmetry_indicator(m, ic)
    hyp = {"H": h, "alpha": -h, "I": angular_momentum(m, ic), "delta1_delta2": ind.value,
           "antisymmetric": ind.is_antisymmetric}
    if not ind.is_antisymmetric:
        raise HypothesisNotMet("initial configuration is not antisymmetric")
    if not h < 0:
        raise HypothesisNotMet(f"energy {h:.6g} is not negative")
    bounds = energy_bounds(m, -h)
    traj = integrate(
        m, ic, ic.t + bounds.Tgen, cfg,
        terminal=[lambda y: delta1_flat(m, y), lambda y: delta2_flat(m, y)],
    )
    scan = scan_events(traj, "both")
    rep = _report("thm3", ic_id, hyp, bounds.Tgen, traj, scan, ("delta1", "delta2"), ic.t)
    rep.diagnostics["Sigma"] = bounds.Sigma
    return rep


# ---------------------------------------------------------------------------
# theta-rigidity (periodic orbits)

PERIODIC_TOL = 1e-8
TOL_S = 1e-9


def normalize_theta(theta) -> np.ndarray:
    """Remove the (1,1,1) component and scale to unit max-norm."""
    th = np.asarray(theta, dtype=float)
    th = th - th.mean()
    n = float(np.max(np.abs(th)))
    if n == 0:
        raise ValueError("theta is parallel to (1, 1, 1) and carries no constraint")
    return th / n


def _period_samples(traj: DenseTrajectory, period: float | None, n_grid: int):
    if period is None:
        period = traj.t1 - traj.t0
    t0 = traj.t0
    if period <= 0 or t0 + period > traj.t1 * (1 + 1e-15) + 1e-15:
        raise NotPeriodic("trajectory does not cover the requested period")
    grid = np.linspace(t0, t0 + period, n_grid)
    steps = traj.ts[(traj.ts >= t0) & (traj.ts <= t0 + period)]
    times = np.unique(np.concatenate([grid, steps]))
    return times, period


def periodicity_of(traj: DenseTrajectory, period: float | None = None) -> float:
    if period is None:
        period = traj.t1 - traj.t0
    return state_distance(traj.sample(traj.t0), traj.sample(traj.t0 + period))


@dataclass(frozen=True)
class RigidityResult:
    verdict: str  # "rigid" | "not rigid" | "inconclusive"
    theta: tuple[float, float, float]
    min_S: float
    max_S: float
    scale: float
    periodicity_residual: float

    @property
    def rigid(self) -> bool:
        return self.verdict == "rigid"


def theta_rigidity_check(
    traj: DenseTrajectory,
    theta,
    period: float | None = None,
    n_grid: int = 4096,
    tol_S: float = TOL_S,
    periodic_tol: float = PERIODIC_TOL,
    require_periodic: bool = True,
) -> RigidityResult:
    """Classify ``traj`` as rigid, not rigid or inconclusive for ``theta``.

    With ``require_periodic=False`` a non-periodic arc is accepted, but a
    positive finding is downgraded to "inconclusive": finitely many samples
    of a non-periodic orbit cannot certify rigidity for all time.
    """
    residual = periodicity_of(traj, period)
    periodic = residual <= periodic_tol
    if not periodic and require_periodic:
        raise NotPeriodic(f"periodicity residual {residual:.3e} exceeds {periodic_tol:g}")
    times, period = _period_samples(traj, period, n_grid)
    ys = traj.sample(times)
    th = np.asarray(theta, dtype=float)
    S = rho_differences(ys) @ th
    scale = float(np.max(rho_flat(ys))) * max(float(np.max(np.abs(th))), 1e-300)
    lo, hi = float(S.min()), float(S.max())
    if lo < -tol_S * scale or hi <= tol_S * scale:
        verdict = "not rigid"
    elif hi <= 10 * tol_S * scale:
        verdict = "inconclusive"
    else:
        verdict = "rigid" if periodic else "inconclusive"
    return RigidityResult(verdict, tuple(float(x) for x in th), lo, hi, scale, residual)


# orthonormal basis of the plane orthogonal to (1, 1, 1)
_E1 = np.array([1.0, -1.0, 0.0]) / math.sqrt(2.0)
_E2 = np.array([1.0, 1.0, -2.0]) / math.sqrt(6.0)


def find_theta(
    traj: DenseTrajectory, period: float | None = None, n_grid: int = 4096, tol_S: float = TOL_S
) -> np.ndarray | None:
    """A normalised theta certifying rigidity on the sampled period, or None.

    The vectors g(t) lie in the plane orthogonal to (1, 1, 1), so a
    certificate exists iff every non-negligible g(t_i) fits in a closed
    half-plane: the largest angular gap between them is at least pi. The
    returned direction bisects the occupied arc.
    """
    residual = periodicity_of(traj, period)
    if residual > PERIODIC_TOL:
        raise NotPeriodic(f"periodicity residual {residual:.3e} exceeds {PERIODIC_TOL:g}")
    times, period = _period_samples(traj, period, n_grid)
    ys = traj.sample(times)
    g = rho_differences(ys)
    scale = float(np.max(rho_flat(ys)))
    p = np.column_stack([g @ _E1, g @ _E2])
    norms = np.hypot(p[:, 0], p[:, 1])
    keep = norms > tol_S * scale
    if not np.any(keep):
        return None
    ang = np.sort(np.arctan2(p[keep, 1], p[keep, 0]))
    gaps = np.diff(np.concatenate([ang, ang[:1] + 2 * math.pi]))
    j = int(np.argmax(gaps))
    if gaps[j] < math.pi:
        return None
    start = ang[(j + 1) % len(ang)]  # occupied arc runs from here ...
    width = 2 * math.pi - gaps[j]     # ... counter-clockwise over this width
    mid = start + 0.5 * width
    theta = normalize_theta(math.cos(mid) * _E1 + math.sin(mid) * _E2)
    check = theta_rigidity_check(traj, theta, period, n_grid, tol_S)
    return theta if check.rigid else None


def loop_integral(traj: DenseTrajectory, theta, period: float | None = None, n_grid: int = 4097) -> float:
    """Simpson quadrature of Delta1 * S(theta) over one period."""
    if period is None:
        period = traj.t1 - traj.t0
    t = np.linspace(traj.t0, traj.t0 + period, n_grid)
    ys = traj.sample(t)
    integrand = delta1_flat(traj.masses, ys) * (rho_differences(ys) @ np.asarray(theta, dtype=float))
    return float(simpson(integrand, x=t))


@dataclass(frozen=True)
class AreaRateCheck:
    """Finite-difference check of dS_i/dt and d/dt(sum theta_i S_i/m_i)."""

    times: np.ndarray
    area_rate_err: np.ndarray  # (n, 3) scaled errors for each S_i
    weighted_rate_err: np.ndarray | None  # (n,) for the theta combination

    @property
    def max_area_err(self) -> float:
        return float(np.max(self.area_rate_err))

    @property
    def max_weighted_err(self) -> float:
        return float(np.max(self.weighted_rate_err)) if self.weighted_rate_err is not None else 0.0


def area_rate_check(
    traj: DenseTrajectory, theta=None, n_samples: int = 50, h: float | None = None
) -> AreaRateCheck:
    """Compare finite-difference dS_i/dt with m_i Delta1 (rho_j - rho_k).

    Errors are scaled by m_i * max|Delta1| * max rho over the samples (or by
    max|S_i|/span when Delta1 is identically zero, as on Euler orbits).
    """
    m = traj.masses
    span = traj.t1 - traj.t0
    h = h or 1e-4 * abs(span)
    times = np.linspace(traj.t0, traj.t1, n_samples)
    ys = traj.sample(times)
    d1 = delta1_flat(m, ys)
    rho = rho_flat(ys)
    g = rho_differences(ys)
    mw = m.as_array()
    S_all = areas_flat(m, ys)
    # scale: largest predicted rate, or the rate at which S itself would
    # change over the sampled span when Delta1 vanishes identically
    base = max(
        float(np.max(np.abs(d1))) * float(np.max(rho)),
        float(np.max(np.abs(S_all / mw))) / abs(span),
    )
    th = None if theta is None else np.asarray(theta, dtype=float)
    area_err = np.empty((n_samples, 3))
    w_err = None if th is None else np.empty(n_samples)
    for n, (t, y) in enumerate(zip(times, ys)):
        st = local_stencil(m, float(t), y, h)
        S = areas_flat(m, st)
        dS = fd_first(S, h)
        expected = mw * d1[n] * g[n]
        area_err[n] = np.abs(dS - expected) / (mw * base)
        if th is not None:
            dW = fd_first(S @ (th / mw), h)
            w_err[n] = abs(dW - d1[n] * (g[n] @ th)) / (base * float(np.sum(np.abs(th))))
    return AreaRateCheck(times=times, area_rate_err=area_err, weighted_rate_err=w_err)


def verify_theorem2_periodic(
    traj: DenseTrajectory, theta=None, period: float | None = None, ic_id: str = "", n_fd: int = 20
) -> TheoremReport:
    """A theta-rigid periodic orbit has a syzygy on each period.

    Reports the first zero of Delta1, or (for a syzygy-free rigid orbit,
    which would be a counterexample) the nonzero loop integral.
    """
    if period is None:
        period = traj.t1 - traj.t0
    if theta is None:
        theta = find_theta(traj, period)
        if theta is None:
            raise HypothesisNotMet("no theta certifies rigidity on this orbit")
    rig = theta_rigidity_check(traj, theta, period)
    hyp = {"theta": list(rig.theta), "rigidity": rig.verdict, "min_S": rig.min_S, "max_S": rig.max_S,
           "periodicity_residual": rig.periodicity_residual, "period": period}
    if not rig.rigid:
        raise HypothesisNotMet(f"orbit is {rig.verdict} for theta={rig.theta}")
    scan = scan_events(traj, "delta1")
    rates = area_rate_check(traj, theta, n_samples=n_fd)
    integral = loop_integral(traj, theta, period)
    rep = TheoremReport(theorem="thm2", ic_id=ic_id, hypotheses=hyp, bound=period, outcome=Outcome.VIOLATION)
    if "delta1" in scan.degenerate:
        rep.outcome, rep.t_event, rep.event_kind = Outcome.EVENT_FOUND, 0.0, "IdenticallyZero"
    else:
        first = scan.first({EventKind.POSITION, EventKind.SIMULTANEOUS})
        if first is not None and first.t <= traj.t0 + period:
            rep.outcome, rep.t_event, rep.event_kind = Outcome.EVENT_FOUND, first.t - traj.t0, first.kind.value
    rep.diagnostics.update({
        "loop_integral": integral,
        "area_rate_err": rates.max_area_err,
        "weighted_rate_err": rates.max_weighted_err,
        "n_events": len(scan.events),
    })
    return rep


# ---------------------------------------------------------------------------
# along-trajectory differential identities


@dataclass(frozen=True)
class IdentityChecks:
    times: np.ndarray
    eqdf: np.ndarray         # |Delta1'' - Tr A Delta1 - 2 Delta2| / scale
    meqs: np.ndarray         # |d/dt(Xdot adj X) - sum (Delta1 rho_i - Delta2/M) A_i|_max / scale
    riccati: np.ndarray      # |C' + C^2 - A|_max / max(|A|, |C^2|) over kept samples; nan near syzygies
    finalreduced: np.ndarray
    eqdf_half_step: np.ndarray  # eqdf recomputed at h/2 (Richardson check)
    h: float

    def max(self, name: str) -> float:
        arr = getattr(self, name)
        return float(np.nanmax(arr)) if np.any(np.isfinite(arr)) else 0.0


def _identity_terms(m: Masses, st: np.ndarray, h: float):
    A1, A2, A3 = basis_matrices(m)
    At1, At2 = traceless(A1), traceless(A2)
    M = m.total
    d1 = delta1_flat(m, st)
    d2 = delta2_flat(m, st)
    P = xdot_adj_x_flat(m, st)
    rho = rho_flat(st)[2]
    tr = float(trace_a_flat(m, st[2]))
    d1_dd = float(fd_second(d1, h))
    eqdf = (d1_dd, tr * d1[2] + 2 * d2[2], abs(tr * d1[2]) + 2 * abs(d2[2]))
    # scales are sums of term magnitudes: on symmetric orbits the right-hand
    # sides cancel exactly and cannot serve as their own scale
    P_dot = fd_first(P, h)
    Abasis = (A1, A2, A3)
    rhs = sum((d1[2] * rho[i] - d2[2] / M) * Ai for i, Ai in enumerate(Abasis))
    m_scale = sum((abs(d1[2]) * rho[i] + abs(d2[2]) / M) * np.abs(Ai).max() for i, Ai in enumerate(Abasis))
    meqs = (float(np.abs(P_dot - rhs).max()), float(m_scale))
    trP = P[:, 0, 0] + P[:, 1, 1]
    Q = P - 0.5 * trP[:, None, None] * np.eye(2)
    Q_dot = fd_first(Q, h)
    fr_rhs = d1[2] * (rho[0] - rho[2]) * At1 + d1[2] * (rho[1] - rho[2]) * At2
    f_scale = abs(d1[2]) * ((rho[0] + rho[2]) * np.abs(At1).max() + (rho[1] + rho[2]) * np.abs(At2).max())
    final = (float(np.abs(Q_dot - fr_rhs).max()), float(f_scale))
    ric = (math.nan, 0.0)
    if np.all(d1 != 0):
        C = P / d1[:, None, None]
        C_dot = fd_first(C, h)
        A = conley_a_flat(m, st[2])
        C2 = C[2] @ C[2]
        ric = (float(np.abs(C_dot + C2 - A).max()), max(float(np.abs(A).max()), float(np.abs(C2).max())))
    return eqdf, meqs, final, ric, abs(d1[2])


def trajectory_identity_checks(
    traj: DenseTrajectory, n_samples: int = 100, h: float | None = None, timescale: float | None = None,
    riccati_threshold: float = 0.05,
) -> IdentityChecks:
    """Finite-difference residuals of the differential identities along ``traj``.

    ``h`` defaults to 1e-4 of ``timescale`` (default: the trajectory span).
    Residuals (i), (ii), (iv) are scaled by the largest sum of term
    magnitudes on their right-hand side over the samples. The Riccati
    residual is only evaluated where |Delta1| exceeds
    ``riccati_threshold * max|Delta1|`` and is scaled by the largest of
    |A|, |C^2| over those samples.
    """
    m = traj.masses
    timescale = timescale or abs(traj.t1 - traj.t0)
    h = h or 1e-4 * timescale
    times = np.linspace(traj.t0, traj.t1, n_samples)
    ys = traj.sample(times)
    rows, rows_half = [], []
    for t, y in zip(times, ys):
        rows.append(_identity_terms(m, local_stencil(m, float(t), y, h), h))
        rows_half.append(_identity_terms(m, local_stencil(m, float(t), y, h / 2), h / 2)[0])
    e_scale = max(r[0][2] for r in rows) or 1.0
    m_scale = max(r[1][1] for r in rows) or 1.0
    f_scale = max(r[2][1] for r in rows) or 1.0
    pos, _ = trajectory_scales(traj)
    d1_max = max(r[4] for r in rows)
    d1_floor = max(riccati_threshold * d1_max, TOL_EVENT * pos * pos)
    eqdf = np.array([abs(r[0][0] - r[0][1]) / e_scale for r in rows])
    eqdf_half = np.array([abs(r[0] - r[1]) / e_scale for r in rows_half])
    meqs = np.array([r[1][0] / m_scale for r in rows])
    final = np.array([r[2][0] / f_scale for r in rows])
    kept = [r for r in rows if r[4] > d1_floor and math.isfinite(r[3][0])]
    r_scale = max((r[3][1] for r in kept), default=1.0)
    ric = np.array([r[3][0] / r_scale if (r[4] > d1_floor and math.isfinite(r[3][0])) else np.nan for r in rows])
    return IdentityChecks(times, eqdf, meqs, ric, final, eqdf_half, h)


# ---------------------------------------------------------------------------
# Sturm comparison diagnostic


@dataclass(frozen=True)
class EtaPoint:
    eta: float
    half_trace: float
    discriminant: float  # Delta1'^2 - 4 Delta1 Delta2


def eta_pointwise(m: Masses, state: BodyState) -> EtaPoint:
    """Comparison coefficient eta at a single state with Delta1 != 0."""
    y = state.flat()
    d1 = float(delta1_flat(m, y))
    if d1 == 0:
        raise ValueError("eta is undefined at a syzygy")
    d2 = float(delta2_flat(m, y))
    P = xdot_adj_x_flat(m, y)
    d1_dot = float(P[0, 0] + P[1, 1])
    tr = float(trace_a_flat(m, y))
    D = d1_dot * d1_dot - 4 * d1 * d2
    return EtaPoint(eta=0.5 * tr - D / (4 * d1 * d1), half_trace=0.5 * tr, discriminant=D)


@dataclass(frozen=True)
class SturmDiagnostic:
    times: np.ndarray
    eta: np.ndarray
    half_trace: np.ndarray
    discriminant: np.ndarray
    zeta_sq: float
    margin: float            # min over samples of (-zeta^2 - eta)
    eta_excess: float        # max of eta - Tr A / 2 (should be <= 0)
    trace_excess: float      # max of (Tr A / 2 + zeta^2) / |Tr A| (should be <= 0)
    discriminant_min: float  # min of D / max|D-terms|
    hill_fd_err: float       # max |delta'' - eta delta| / max|eta delta|
    eqdf_fd_err: float       # max |Delta1'' - Tr A Delta1 - 2 Delta2| / scale


def sturm_diagnostic(
    traj: DenseTrajectory,
    window: tuple[float, float],
    n_samples: int = 40,
    edge: float = 0.05,
    h: float | None = None,
    momentum_tol: float = 1e-10,
) -> SturmDiagnostic:
    """Pointwise comparison quantities on a syzygy-free window of a k = 0 orbit.

    With delta = sqrt(|Delta1|), delta'' = eta delta and
    eta = Tr A/2 - (Delta1'^2 - 4 Delta1 Delta2) / (4 Delta1^2) <= Tr A/2 <= -zeta^2.
    Samples avoid the outer ``edge`` fraction of the window, where eta is
    dominated by the approaching zero of Delta1.
    """
    m = traj.masses
    y0 = traj.ys[0]
    st0 = BodyState.from_flat(traj.t0, y0)
    k = angular_momentum(m, st0)
    if abs(k) > momentum_tol * angular_momentum_scale(m, st0):
        raise HypothesisNotMet(f"angular momentum {k:.3e} is not zero")
    alpha = -total_energy(m, st0)
    bounds = energy_bounds(m, alpha)
    ta, tb = sorted(window)
    if ta < min(traj.t0, traj.t1) or tb > max(traj.t0, traj.t1):
        raise WindowInvalid("window is outside the trajectory span")
    pos, _ = trajectory_scales(traj)
    inside = traj.ts[(traj.ts > ta) & (traj.ts < tb)]
    probe = np.unique(np.concatenate([np.linspace(ta, tb, 2001), inside]))
    d1_probe = delta1_flat(m, traj.sample(probe))
    if np.any(np.abs(d1_probe) <= TOL_EVENT * pos * pos) or np.any(np.sign(d1_probe) != np.sign(d1_probe[0])):
        raise WindowInvalid("Delta1 vanishes inside the window")
    sign = float(np.sign(d1_probe[0]))

    L = tb - ta
    times = np.linspace(ta + edge * L, tb - edge * L, n_samples)
    ys = traj.sample(times)
    h = h or 1e-4 * L
    eta, half_tr, disc, hill_num, hill_den, eq_num, eq_den = [], [], [], [], [], [], []
    disc_scale = []
    for t, y in zip(times, ys):
        stn = local_stencil(m, float(t), y, h)
        d1 = delta1_flat(m, stn)
        d2 = delta2_flat(m, stn)
        P = xdot_adj_x_flat(m, stn[2])
        d1_dot = float(P[0, 0] + P[1, 1])
        tr = float(trace_a_flat(m, stn[2]))
        D = d1_dot ** 2 - 4 * d1[2] * d2[2]
        e = 0.5 * tr - D / (4 * d1[2] ** 2)
        delta = np.sqrt(sign * d1)
        dd = float(fd_second(delta, h))
        eta.append(e)
        half_tr.append(0.5 * tr)
        disc.append(D)
        disc_scale.append(d1_dot ** 2 + 4 * abs(d1[2] * d2[2]))
        hill_num.append(abs(dd - e * delta[2]))
        hill_den.append(abs(e * delta[2]))
        eq_num.append(abs(float(fd_second(d1, h)) - tr * d1[2] - 2 * d2[2]))
        eq_den.append(abs(tr * d1[2]) + 2 * abs(d2[2]))
    eta = np.array(eta)
    half_tr = np.array(half_tr)
    disc = np.array(disc)
    return SturmDiagnostic(
        times=times,
        eta=eta,
        half_trace=half_tr,
        discriminant=disc,
        zeta_sq=bounds.zetaSq,
        margin=float(np.min(-bounds.zetaSq - eta)),
        eta_excess=float(np.max(eta - half_tr)),
        trace_excess=float(np.max((half_tr + bounds.zetaSq) / np.abs(2 * half_tr))),
        discriminant_min=float(np.min(disc / max(max(disc_scale), 1e-300))),
        hill_fd_err=float(max(hill_num) / max(hill_den)),
        eqdf_fd_err=float(max(eq_num) / max(eq_den)),
    )
