"""Canonical initial conditions and seeded random samplers."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, least_squares

from .errors import SamplerExhausted
from .integrator import IntegratorConfig, integrate, integrate_or_raise
from .state import (
    BodyState,
    Masses,
    accelerations,
    angular_momentum,
    mass_weighted_frame,
    pairwise_distances,
    reduce_to_barycentric,
    total_energy,
)

TIGHT = IntegratorConfig(rtol=1e-13, atol=1e-15)

# Chenciner-Montgomery figure-eight, literature guess (period ~6.3259).
FIGURE_EIGHT_GUESS = (0.97000436, -0.24308753, -0.93240737, -0.86473146, 6.32591398)

# Output of scripts/refine_figure_eight.py: (x1, y1, vx3, vy3, period) with
# r2 = -r1, r3 = 0, v1 = v2 = -v3/2.
FIGURE_EIGHT_REFINED = (
    0.9700043618418178,
    -0.2430875225269819,
    -0.9324073614975036,
    -0.8647314690243965,
    6.325914009496716,
)


@dataclass(frozen=True)
class InitialCondition:
    masses: Masses
    state: BodyState
    provenance: str
    period: float | None = None
    energy: float | None = None
    momentum: float | None = None

    def invariants(self) -> tuple[float, float]:
        return total_energy(self.masses, self.state), angular_momentum(self.masses, self.state)


def _with_invariants(m: Masses, state: BodyState, provenance: str, period=None) -> InitialCondition:
    return InitialCondition(
        masses=m,
        state=state,
        provenance=provenance,
        period=period,
        energy=total_energy(m, state),
        momentum=angular_momentum(m, state),
    )


def _rigid_rotation(m: Masses, r: np.ndarray) -> tuple[BodyState, float]:
    """Barycentric positions ``r`` with velocities of a rigid rotation in force balance."""
    state = reduce_to_barycentric(m, BodyState(0.0, r, np.zeros((3, 2))))
    acc = accelerations(m, state)
    rr = state.r
    # central configuration: acc = -omega^2 r for every body
    omega_sq = -float(np.sum(acc * rr)) / float(np.sum(rr * rr))
    omega = math.sqrt(omega_sq)
    v = omega * np.column_stack([-rr[:, 1], rr[:, 0]])
    return state.replace(v=v), omega


def lagrange_circular(m: Masses | None = None, side: float = 1.0) -> InitialCondition:
    """Equilateral central configuration in uniform rotation, omega^2 = M / side^3."""
    m = m or Masses.equal()
    if not side > 0:
        raise ValueError("side must be positive")
    radius = side / math.sqrt(3.0)
    ang = np.deg2rad([90.0, 210.0, 330.0])
    r = radius * np.column_stack([np.cos(ang), np.sin(ang)])
    state, omega = _rigid_rotation(m, r)
    return _with_invariants(m, state, f"lagrange_circular(side={side!r})", 2 * math.pi / omega)


def euler_ratio(m: Masses, central: int) -> float:
    """Root x > 0 of Euler's quintic: |central - right| = x * |left - central|.

    The outer bodies are placed left/right in increasing index order.
    """
    left, right = [i for i in (1, 2, 3) if i != central]
    ma, mb, mc = (tuple(m)[i - 1] for i in (left, central, right))
    coeffs = [
        ma + mb,
        3 * ma + 2 * mb,
        3 * ma + mb,
        -(mb + 3 * mc),
        -(2 * mb + 3 * mc),
        -(mb + mc),
    ]
    return brentq(lambda x: np.polyval(coeffs, x), 1e-9, 1e9, xtol=1e-15, rtol=1e-15)


def euler_circular(m: Masses | None = None, central: int = 2, scale: float = 1.0) -> InitialCondition:
    """Collinear central configuration in uniform rotation.

    ``scale`` is the distance between the left outer body and the central one.
    """
    m = m or Masses.equal()
    if central not in (1, 2, 3):
        raise ValueError("central must be 1, 2 or 3")
    left, right = [i for i in (1, 2, 3) if i != central]
    x = euler_ratio(m, central)
    r = np.zeros((3, 2))
    r[left - 1, 0] = 0.0
    r[central - 1, 0] = scale
    r[right - 1, 0] = scale * (1.0 + x)
    state, omega = _rigid_rotation(m, r)
    return _with_invariants(
        m, state, f"euler_circular(central={central}, scale={scale!r})", 2 * math.pi / omega
    )


def _figure_eight_state(x1, y1, vx3, vy3) -> BodyState:
    r = [[x1, y1], [-x1, -y1], [0.0, 0.0]]
    v3 = np.array([vx3, vy3])
    return BodyState(0.0, r, [-v3 / 2, -v3 / 2, v3])


def refine_figure_eight(guess=FIGURE_EIGHT_GUESS, cfg: IntegratorConfig = TIGHT):
    """Shoot for periodicity over (x1, y1, vx3, vy3, period).

    Returns the refined parameter tuple and the final periodicity residual.
    The symmetric parametrisation keeps the state barycentric with zero
    angular momentum.
    """
    m = Masses.equal()

    def residual(p):
        ic = _figure_eight_state(*p[:4])
        traj = integrate(m, ic, p[4], cfg)
        return traj.ys[-1] - ic.flat()

    sol = least_squares(residual, np.array(guess, dtype=float), method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    params = tuple(float(v) for v in sol.x)
    return params, float(np.abs(residual(sol.x)).max())


@functools.lru_cache(maxsize=8)
def figure_eight(phase: float = 1.0 / 12.0) -> InitialCondition:
    """Equal-mass figure-eight choreography.

    ``phase`` is the fraction of the period by which the stored symmetric
    initial condition (a syzygy, body 3 at the origin) is advanced. The
    default starts halfway between two consecutive syzygies.
    """
    m = Masses.equal()
    x1, y1, vx3, vy3, period = FIGURE_EIGHT_REFINED
    state = _figure_eight_state(x1, y1, vx3, vy3)
    if phase:
        traj = integrate_or_raise(m, state, phase * period, TIGHT)
        state = reduce_to_barycentric(m, BodyState.from_flat(0.0, traj.ys[-1]))
    return _with_invariants(m, state, f"figure_eight(phase={phase!r})", period)


def _min_separation(r: np.ndarray) -> float:
    return min(pairwise_distances(BodyState(0.0, r, np.zeros((3, 2)))))


def remove_rotation(m: Masses, state: BodyState) -> BodyState:
    """Subtract the rigid rotation carrying the angular momentum."""
    rr = state.r
    inertia = float(m.as_array() @ (rr * rr).sum(axis=1))
    omega = angular_momentum(m, state) / inertia
    return state.replace(v=state.v - omega * np.column_stack([-rr[:, 1], rr[:, 0]]))


def scale_to_negative_energy(m: Masses, state: BodyState, factor: float = 0.9) -> BodyState:
    while total_energy(m, state) >= 0:
        state = state.replace(v=state.v * factor)
    return state


def random_ic(
    seed,
    *,
    masses: Masses | None = None,
    negative_energy: bool = True,
    zero_momentum: bool = False,
    antisymmetric: bool = False,
    free_fall: bool = False,
    min_separation: float = 0.1,
    box: float = 1.0,
    velocity_scale: float = 0.5,
    budget: int = 10_000,
) -> InitialCondition:
    """Seeded random barycentric initial condition satisfying the constraints.

    ``seed`` is anything accepted by ``numpy.random.default_rng`` (sweeps use
    ``[base_seed, index]``).
    """
    m = masses or Masses.equal()
    rng = np.random.default_rng(seed)
    for _ in range(budget):
        r = rng.uniform(-box, box, size=(3, 2))
        if _min_separation(r) >= min_separation:
            break
    else:
        raise SamplerExhausted("could not place bodies with the requested separation")

    if free_fall:
        if antisymmetric:
            raise ValueError("a state at rest cannot be antisymmetric")
        state = reduce_to_barycentric(m, BodyState(0.0, r, np.zeros((3, 2))))
        return _with_invariants(m, state, f"random_ic(seed={_seed_repr(seed)}, free_fall)")

    for _ in range(budget):
        v = rng.normal(0.0, velocity_scale, size=(3, 2))
        state = reduce_to_barycentric(m, BodyState(0.0, r, v))
        if zero_momentum:
            state = remove_rotation(m, state)
        if negative_energy:
            state = scale_to_negative_energy(m, state)
        if antisymmetric:
            frame = mass_weighted_frame(m, state)
            if not frame.delta1 * frame.delta2 < 0:
                continue
        tags = [k for k, on in (
            ("negative_energy", negative_energy),
            ("zero_momentum", zero_momentum),
            ("antisymmetric", antisymmetric),
        ) if on]
        return _with_invariants(m, state, f"random_ic(seed={_seed_repr(seed)}, {'+'.join(tags) or 'plain'})")
    raise SamplerExhausted(f"no velocity sample met the constraints within {budget} tries")


def _seed_repr(seed) -> str:
    if isinstance(seed, (list, tuple, np.ndarray)):
        return "-".join(str(int(s)) for s in seed)
    return str(seed)


def periodicity_residual(ic: InitialCondition, period: float, cfg: IntegratorConfig = TIGHT) -> float:
    """Scale-normalised distance between the state after ``period`` and the start."""
    if period == 0:
        return 0.0
    traj = integrate_or_raise(ic.masses, ic.state, ic.state.t + period, cfg)
    return state_distance(ic.state.flat(), traj.ys[-1])


def state_distance(y0: np.ndarray, y1: np.ndarray) -> float:
    rscale = max(float(np.abs(y0[:6]).max()), 1e-300)
    vscale = max(float(np.abs(y0[6:]).max()), 1e-300)
    dy = np.abs(np.asarray(y1) - np.asarray(y0))
    return max(float(dy[:6].max()) / rscale, float(dy[6:].max()) / vscale)
