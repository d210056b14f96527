"""Command-line entry point: ``syzygy <command> --scenario FILE --out DIR``.

Exit codes: 0 success, 1 invalid input or incomplete integration,
2 hypothesis not met, 3 collision stop, 4 theorem violation.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import os
import sys
import tempfile
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import HypothesisNotMet, NotPeriodic, ScenarioError, SyzygyError
from .events import scan_events
from .integrator import Status, drift_report, integrate
from .scenario import Scenario, canonical_json, load_scenario
from .state import BodyState, angular_momentum, delta1_flat, delta2_flat, total_energy
from .theorems import Outcome, TheoremReport, minF_oracle, verify_theorem1, verify_theorem2_periodic, verify_theorem3

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_HYPOTHESIS = 2
EXIT_COLLISION = 3
EXIT_VIOLATION = 4

EVENT_HEADER = ["t", "kind", "middle_body", "delta1", "delta2", "H", "I", "grazing"]
TRAJECTORY_HEADER = [
    "t", "x1", "y1", "x2", "y2", "x3", "y3", "vx1", "vy1", "vx2", "vy2", "vx3", "vy3", "H", "I", "delta1", "delta2",
]

OUTCOME_EXIT = {
    Outcome.EVENT_FOUND: EXIT_OK,
    Outcome.HYPOTHESIS_NOT_MET: EXIT_HYPOTHESIS,
    Outcome.COLLISION_STOP: EXIT_COLLISION,
    Outcome.VIOLATION: EXIT_VIOLATION,
    Outcome.INCOMPLETE: EXIT_ERROR,
}


# ---------------------------------------------------------------------------
# output

def write_outputs(results: dict[str, str], out_dir) -> dict:
    """Write each ``name -> text`` atomically and add ``manifest.json``.

    Returns the manifest, which lists every file with its SHA-256 digest.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for name in sorted(results):
        data = results[name].encode("utf-8")
        _atomic_write(out / name, data)
        entries.append({"path": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
    manifest = {"schema_version": 1, "files": entries}
    _atomic_write(out / "manifest.json", canonical_json(manifest).encode("utf-8"))
    return manifest


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise OSError(f"{path}: {exc}") from exc


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def events_csv(events) -> str:
    rows = [
        [_fmt(e.t), e.kind.value, _fmt(e.middle_body), _fmt(e.delta1), _fmt(e.delta2), _fmt(e.H), _fmt(e.I),
         _fmt(e.grazing)]
        for e in events
    ]
    return _csv(EVENT_HEADER, rows)


def _report_json(rep: TheoremReport) -> str:
    return canonical_json({"schema_version": 1, **rep.to_dict()})


# ---------------------------------------------------------------------------
# commands

def _single_ic(scn: Scenario, seed):
    ics = scn.initial_conditions(seed)
    if len(ics) != 1:
        raise ScenarioError("initial_condition: this command needs a single initial condition (sampler count 1)")
    return ics[0]


def _t_end(scn: Scenario, ic) -> float:
    if scn.params.t_end is not None:
        return scn.params.t_end
    return ic.period if ic.period else 1.0


def _status_exit(status: Status) -> int:
    if status is Status.COLLISION:
        return EXIT_COLLISION
    if status in (Status.STEP_FAILURE, Status.MAX_STEPS):
        return EXIT_ERROR
    return EXIT_OK


def cmd_simulate(scn: Scenario, args):
    ic_id, ic = _single_ic(scn, args.seed)
    m = scn.mass_triple
    traj = integrate(m, ic.state, ic.state.t + _t_end(scn, ic), scn.integrator.config())
    times = np.linspace(traj.t0, traj.t1, scn.params.n_samples) if traj.n_steps else traj.ts
    ys = traj.sample(times)
    rows = []
    for t, y in zip(times, ys):
        st = BodyState.from_flat(float(t), y)
        rows.append([_fmt(float(t)), *(_fmt(float(v)) for v in y), _fmt(total_energy(m, st)),
                     _fmt(angular_momentum(m, st)), _fmt(float(delta1_flat(m, y))), _fmt(float(delta2_flat(m, y)))])
    e, i = drift_report(traj)
    summary = {
        "schema_version": 1, "ic_id": ic_id, "status": traj.status.value, "t_start": traj.t0, "t_stop": traj.t_stop,
        "n_steps": traj.n_steps, "n_rejected": traj.n_rejected, "energy_drift": e, "momentum_drift": i,
    }
    files = {"trajectory.csv": _csv(TRAJECTORY_HEADER, rows), "summary.json": canonical_json(summary)}
    return files, _status_exit(traj.status)


def cmd_events(scn: Scenario, args):
    ic_id, ic = _single_ic(scn, args.seed)
    traj = integrate(scn.mass_triple, ic.state, ic.state.t + _t_end(scn, ic), scn.integrator.config())
    d = scn.detector
    scan = scan_events(traj, d.which, d.tol_event, d.tol_graze, d.subsamples)
    summary = {
        "schema_version": 1, "ic_id": ic_id, "status": traj.status.value, "t_stop": traj.t_stop,
        "n_events": len(scan.events), "degenerate": list(scan.degenerate),
    }
    return {"events.csv": events_csv(scan.events), "events.json": canonical_json(summary)}, _status_exit(traj.status)


def _hypothesis_report(theorem, ic_id, exc) -> TheoremReport:
    return TheoremReport(theorem=theorem, ic_id=ic_id, hypotheses={"error": str(exc)}, bound=None,
                         outcome=Outcome.HYPOTHESIS_NOT_MET)


def _verify(theorem: str, scn: Scenario, ic_id: str, ic) -> TheoremReport:
    fn = verify_theorem1 if theorem == "thm1" else verify_theorem3
    try:
        return fn(scn.mass_triple, ic.state, scn.integrator.config(), ic_id=ic_id)
    except HypothesisNotMet as exc:
        return _hypothesis_report(theorem, ic_id, exc)


def _cmd_verify(theorem):
    def run(scn: Scenario, args):
        ic_id, ic = _single_ic(scn, args.seed)
        rep = _verify(theorem, scn, ic_id, ic)
        return {"report.json": _report_json(rep)}, OUTCOME_EXIT[rep.outcome]
    return run


def cmd_verify_thm2(scn: Scenario, args):
    ic_id, ic = _single_ic(scn, args.seed)
    period = scn.params.period or ic.period
    if not period:
        raise ScenarioError("params.period: required when the initial condition has no known period")
    traj = integrate(scn.mass_triple, ic.state, ic.state.t + period, scn.integrator.config())
    try:
        if traj.status is not Status.COMPLETED:
            raise NotPeriodic(f"integration over one period ended with status {traj.status.value}")
        rep = verify_theorem2_periodic(traj, scn.params.theta, period, ic_id=ic_id)
    except (HypothesisNotMet, NotPeriodic) as exc:
        rep = _hypothesis_report("thm2", ic_id, exc)
    return {"report.json": _report_json(rep)}, OUTCOME_EXIT[rep.outcome]


def _sweep_job(args):
    theorem, scn, ic_id, ic = args
    return _verify(theorem, scn, ic_id, ic).to_dict()


def resolve_workers(cli_value) -> int:
    if cli_value is not None:
        return max(1, int(cli_value))
    env = os.environ.get("SYZYGY_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ScenarioError(f"SYZYGY_WORKERS: expected an integer, got {env!r}") from None
    return 1


def cmd_sweep(scn: Scenario, args):
    theorem = scn.params.theorem
    ics = scn.initial_conditions(args.seed)
    jobs = [(theorem, scn, ic_id, ic) for ic_id, ic in ics]
    workers = resolve_workers(args.workers)
    if workers == 1 or len(jobs) <= 1:
        reports = [_sweep_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_sweep_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    reports.sort(key=lambda r: r["ic_id"])
    counts = Counter(r["outcome"] for r in reports)
    slack = [r["t_event"] / r["bound"] for r in reports if r["outcome"] == Outcome.EVENT_FOUND.value]
    aggregate = {
        "schema_version": 1,
        "theorem": theorem,
        "n": len(reports),
        "outcomes": {o.value: counts.get(o.value, 0) for o in Outcome},
        "max_event_fraction_of_bound": max(slack) if slack else None,
        "max_energy_drift": max((r["diagnostics"].get("energy_drift", 0.0) for r in reports), default=None),
        "violations": [r["ic_id"] for r in reports if r["outcome"] == Outcome.VIOLATION.value],
    }
    files = {
        "reports.json": canonical_json({"schema_version": 1, "reports": reports}),
        "aggregate.json": canonical_json(aggregate),
    }
    return files, EXIT_VIOLATION if counts.get(Outcome.VIOLATION.value) else EXIT_OK


def cmd_oracle_minf(scn: Scenario, args):
    p = scn.params
    seed = p.seed if args.seed is None else args.seed
    res = minF_oracle(scn.mass_triple, p.s, budget=p.budget, seed=seed)
    doc = {"schema_version": 1, "masses": list(scn.masses), "seed": seed, "budget": p.budget,
           "agrees": res.agrees, **{k: getattr(res, k) for k in (
               "s", "oracle_min", "oracle_argmin", "closed_min", "closed_argmin", "value_rel_err", "argmin_err")}}
    return {"oracle.json": canonical_json(doc)}, EXIT_OK if res.agrees else EXIT_VIOLATION


COMMANDS = {
    "simulate": cmd_simulate,
    "events": cmd_events,
    "verify-thm1": _cmd_verify("thm1"),
    "verify-thm2": cmd_verify_thm2,
    "verify-thm3": _cmd_verify("thm3"),
    "sweep": cmd_sweep,
    "oracle-minf": cmd_oracle_minf,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="syzygy", description="Syzygy detection and theorem checks for the planar three-body problem.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--scenario", required=True, help="scenario JSON file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the sampler/oracle seed")
    parser.add_argument("--workers", type=int, default=None, help="sweep worker processes (default: $SYZYGY_WORKERS or 1)")
    return parser


def run_command(command: str, scn: Scenario, out_dir, seed=None, workers=None) -> int:
    args = argparse.Namespace(seed=seed, workers=workers)
    files, code = COMMANDS[command](scn, args)
    files["scenario.json"] = scn.dumps()
    write_outputs(files, out_dir)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scn = load_scenario(args.scenario)
        return run_command(args.command, scn, args.out, args.seed, args.workers)
    except SyzygyError as exc:
        print(f"syzygy: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"syzygy: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
