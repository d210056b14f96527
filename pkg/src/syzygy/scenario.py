"""JSON scenario files: loading, validation and canonical dumping."""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ScenarioError
from .integrator import IntegratorConfig
from .orbits import InitialCondition, euler_circular, figure_eight, lagrange_circular, random_ic
from .state import BodyState, Masses, reduce_to_barycentric

SCHEMA_VERSION = 1
FIXTURES = ("figure_eight", "lagrange_circular", "euler_circular")


@dataclass
class FixtureSpec:
    name: str
    side: float = 1.0       # lagrange_circular
    central: int = 2        # euler_circular
    scale: float = 1.0      # euler_circular
    phase: float = 1.0 / 12.0  # figure_eight


@dataclass
class StateSpec:
    r: list
    v: list
    t: float = 0.0


@dataclass
class SamplerSpec:
    seed: int = 0
    count: int = 1
    negative_energy: bool = True
    zero_momentum: bool = False
    antisymmetric: bool = False
    free_fall: bool = False
    min_separation: float = 0.1
    box: float = 1.0
    velocity_scale: float = 0.5
    budget: int = 10_000


@dataclass
class InitialConditionSpec:
    fixture: FixtureSpec | None = None
    state: StateSpec | None = None
    sampler: SamplerSpec | None = None


@dataclass
class IntegratorSpec:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_steps: int = 200_000
    collision_factor: float = 1e-8
    approach_cap: float = 1.0

    def config(self) -> IntegratorConfig:
        return IntegratorConfig(
            rtol=self.rtol, atol=self.atol, max_steps=self.max_steps,
            collision_factor=self.collision_factor, approach_cap=self.approach_cap,
        )


@dataclass
class DetectorSpec:
    which: str = "both"
    tol_event: float = 1e-11
    tol_graze: float = 1e-7
    subsamples: int = 4


@dataclass
class ParamsSpec:
    t_end: float | None = None        # simulate/events; defaults to the known period or 1.0
    n_samples: int = 1000             # simulate: rows in the trajectory CSV
    theorem: str = "thm1"             # sweep
    theta: list | None = None         # verify-thm2
    period: float | None = None       # verify-thm2
    s: float = 1.0                    # oracle-minf
    budget: int = 1_000_000           # oracle-minf
    seed: int = 0                     # oracle-minf


@dataclass
class Scenario:
    masses: list
    initial_condition: InitialConditionSpec
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    params: ParamsSpec = field(default_factory=ParamsSpec)
    schema_version: int = SCHEMA_VERSION

    @property
    def mass_triple(self) -> Masses:
        return Masses(*self.masses)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        ic = d["initial_condition"]
        d["initial_condition"] = {k: v for k, v in ic.items() if v is not None}
        return d

    def dumps(self) -> str:
        return canonical_json(self.to_dict())

    # -- initial conditions ---------------------------------------------------

    def initial_conditions(self, seed: int | None = None) -> list[tuple[str, InitialCondition]]:
        """(identifier, IC) pairs; samplers produce ``count`` of them."""
        m = self.mass_triple
        spec = self.initial_condition
        if spec.fixture is not None:
            f = spec.fixture
            if f.name == "figure_eight":
                if tuple(m) != (1.0, 1.0, 1.0):
                    raise ScenarioError("masses: the figure_eight fixture requires equal unit masses")
                ic = figure_eight(f.phase)
            elif f.name == "lagrange_circular":
                ic = lagrange_circular(m, f.side)
            else:
                ic = euler_circular(m, f.central, f.scale)
            return [(f.name, ic)]
        if spec.state is not None:
            st = spec.state
            state = reduce_to_barycentric(m, BodyState(st.t, st.r, st.v))
            return [("state", InitialCondition(m, state, "explicit state"))]
        smp = spec.sampler
        base = smp.seed if seed is None else seed
        out = []
        for i in range(smp.count):
            ic = random_ic(
                [base, i], masses=m, negative_energy=smp.negative_energy, zero_momentum=smp.zero_momentum,
                antisymmetric=smp.antisymmetric, free_fall=smp.free_fall, min_separation=smp.min_separation,
                box=smp.box, velocity_scale=smp.velocity_scale, budget=smp.budget,
            )
            out.append((f"{base}-{i:06d}", ic))
        return out


def canonical_json(obj) -> str:
    """Sorted keys, two-space indent, shortest round-trip floats."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):  # numpy scalars and arrays
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, enum.Enum):
        return obj.value
    return obj


# ---------------------------------------------------------------------------
# validation

def _check_keys(data, cls, where: str) -> None:
    if not isinstance(data, dict):
        raise ScenarioError(f"{where}: expected an object")
    allowed = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in allowed:
            raise ScenarioError(f"unknown field '{where}.{key}'" if where else f"unknown field '{key}'")


def _number(value, where: str, positive: bool = False, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    if integer and not isinstance(value, int):
        raise ScenarioError(f"{where}: expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ScenarioError(f"{where}: must be finite")
    if positive and not value > 0:
        raise ScenarioError(f"{where}: must be positive, got {value!r}")
    return value if integer else float(value)


def _build(cls, data, where: str, checks: dict):
    _check_keys(data, cls, where)
    kwargs = {}
    for key, value in data.items():
        check = checks.get(key)
        kwargs[key] = check(value, f"{where}.{key}") if check else value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def _pos(v, w):
    return _number(v, w, positive=True)


def _posint(v, w):
    return _number(v, w, positive=True, integer=True)


def _int(v, w):
    return _number(v, w, integer=True)


def _num(v, w):
    return _number(v, w)


def _bool(v, w):
    if not isinstance(v, bool):
        raise ScenarioError(f"{w}: expected true or false")
    return v


def _triple_of_pairs(v, w):
    if not (isinstance(v, list) and len(v) == 3 and all(isinstance(p, list) and len(p) == 2 for p in v)):
        raise ScenarioError(f"{w}: expected three [x, y] pairs")
    return [[_num(x, w) for x in p] for p in v]


def _choice(options):
    def check(v, w):
        if v not in options:
            raise ScenarioError(f"{w}: expected one of {', '.join(map(str, options))}; got {v!r}")
        return v
    return check


def _optional(check):
    return lambda v, w: None if v is None else check(v, w)


def _theta(v, w):
    if not (isinstance(v, list) and len(v) == 3):
        raise ScenarioError(f"{w}: expected three numbers")
    return [_num(x, w) for x in v]


def scenario_from_dict(data) -> Scenario:
    _check_keys(data, Scenario, "")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version: unsupported value {version!r}")
    if "masses" not in data:
        raise ScenarioError("missing field 'masses'")
    masses = data["masses"]
    if not (isinstance(masses, list) and len(masses) == 3):
        raise ScenarioError("masses: expected a list of three positive numbers")
    masses = [_pos(x, "masses") for x in masses]

    if "initial_condition" not in data:
        raise ScenarioError("missing field 'initial_condition'")
    icd = data["initial_condition"]
    _check_keys(icd, InitialConditionSpec, "initial_condition")
    if len(icd) != 1:
        raise ScenarioError("initial_condition: exactly one of 'fixture', 'state', 'sampler' is required")
    ic = InitialConditionSpec()
    if "fixture" in icd:
        fd = icd["fixture"]
        if not isinstance(fd, dict) or "name" not in fd:
            raise ScenarioError("initial_condition.fixture: missing field 'name'")
        ic.fixture = _build(FixtureSpec, fd, "initial_condition.fixture", {
            "name": _choice(FIXTURES), "side": _pos, "central": _choice((1, 2, 3)), "scale": _pos, "phase": _num,
        })
    elif "state" in icd:
        sd = icd["state"]
        ic.state = _build(StateSpec, sd, "initial_condition.state", {
            "r": _triple_of_pairs, "v": _triple_of_pairs, "t": _num,
        })
    else:
        ic.sampler = _build(SamplerSpec, icd["sampler"], "initial_condition.sampler", {
            "seed": _int, "count": _posint, "negative_energy": _bool, "zero_momentum": _bool,
            "antisymmetric": _bool, "free_fall": _bool, "min_separation": _pos, "box": _pos,
            "velocity_scale": _pos, "budget": _posint,
        })

    integ = _build(IntegratorSpec, data.get("integrator", {}), "integrator", {
        "rtol": _pos, "atol": _pos, "max_steps": _posint, "collision_factor": _pos, "approach_cap": _pos,
    })
    try:
        integ.config()
    except ValueError as exc:
        raise ScenarioError(f"integrator: {exc}") from None
    det = _build(DetectorSpec, data.get("detector", {}), "detector", {
        "which": _choice(("delta1", "delta2", "both")), "tol_event": _pos, "tol_graze": _pos, "subsamples": _posint,
    })
    params = _build(ParamsSpec, data.get("params", {}), "params", {
        "t_end": _optional(_num), "n_samples": _posint, "theorem": _choice(("thm1", "thm3")),
        "theta": _optional(_theta), "period": _optional(_pos), "s": _pos, "budget": _posint, "seed": _int,
    })
    return Scenario(masses=masses, initial_condition=ic, integrator=integ, detector=det, params=params)


def loads_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return scenario_from_dict(data)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    return loads_scenario(text, str(path))
