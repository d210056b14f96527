import csv
import hashlib
import json
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from syzygy.cli import (
    EVENT_HEADER,
    EXIT_COLLISION,
    EXIT_ERROR,
    EXIT_HYPOTHESIS,
    EXIT_OK,
    TRAJECTORY_HEADER,
    events_csv,
    main,
    resolve_workers,
    write_outputs,
)
from syzygy.errors import ScenarioError
from syzygy.scenario import loads_scenario, scenario_from_dict
from syzygy.state import is_barycentric

F8 = {"masses": [1, 1, 1], "initial_condition": {"fixture": {"name": "figure_eight"}}}


def _write(tmp_path, data, name="scn.json"):
    p = tmp_path / name
    p.write_text(data if isinstance(data, str) else json.dumps(data))
    return p


def _run(tmp_path, command, data, *extra, out="out"):
    scn = _write(tmp_path, data)
    code = main([command, "--scenario", str(scn), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


# -- scenario loading ---------------------------------------------------------------

def test_minimal_scenario_gets_defaults():
    scn = scenario_from_dict(F8)
    d = scn.to_dict()
    assert d["integrator"]["rtol"] == 1e-10
    assert d["detector"]["which"] == "both"
    assert d["initial_condition"]["fixture"]["phase"] == pytest.approx(1 / 12)
    assert d["schema_version"] == 1


@pytest.mark.parametrize("where, patch, field", [
    ("", {"colour": 1}, "colour"),
    ("integrator", {"integrator": {"rtool": 1e-9}}, "integrator.rtool"),
    ("params", {"params": {"thetaa": [1, 0, 0]}}, "params.thetaa"),
])
def test_unknown_field_is_named(where, patch, field):
    with pytest.raises(ScenarioError, match=f"unknown field '{field}'"):
        scenario_from_dict({**F8, **patch})


def test_unknown_field_in_fixture():
    bad = {"masses": [1, 1, 1], "initial_condition": {"fixture": {"name": "figure_eight", "sides": 2}}}
    with pytest.raises(ScenarioError, match="initial_condition.fixture.sides"):
        scenario_from_dict(bad)


def test_parse_error_reports_line():
    with pytest.raises(ScenarioError, match=r"scn:3:\d+:"):
        loads_scenario('{\n  "masses": [1, 1, 1],\n  "initial_condition": }\n', "scn")


@pytest.mark.parametrize("bad, msg", [
    ({"masses": [1, 1]}, "masses"),
    ({"masses": [1, -1, 1]}, "masses"),
    ({"masses": [1, 1, 1]}, "missing field 'initial_condition'"),
    ({"masses": [1, 1, 1], "initial_condition": {}}, "exactly one"),
    ({**F8, "initial_condition": {"fixture": {"name": "figure_eight"}, "sampler": {}}}, "exactly one"),
    ({**F8, "integrator": {"rtol": 0}}, "integrator.rtol"),
    ({**F8, "detector": {"which": "delta3"}}, "detector.which"),
    ({**F8, "params": {"theorem": "thm2"}}, "params.theorem"),
    ({**F8, "schema_version": 2}, "schema_version"),
])
def test_validation_errors(bad, msg):
    with pytest.raises(ScenarioError, match=msg):
        scenario_from_dict(bad)


def test_figure_eight_fixture_needs_unit_masses():
    scn = scenario_from_dict({**F8, "masses": [1, 2, 3]})
    with pytest.raises(ScenarioError):
        scn.initial_conditions()


@given(
    st.lists(st.floats(0.1, 10), min_size=3, max_size=3),
    st.integers(0, 2 ** 31), st.integers(1, 50), st.booleans(), st.floats(1e-13, 1e-6),
)
def test_round_trip_is_canonical_and_idempotent(masses, seed, count, anti, rtol):
    data = {
        "masses": masses,
        "initial_condition": {"sampler": {"seed": seed, "count": count, "antisymmetric": anti}},
        "integrator": {"rtol": rtol},
    }
    text = scenario_from_dict(data).dumps()
    again = loads_scenario(text).dumps()
    assert again == text
    assert json.loads(text)["masses"] == masses


def test_explicit_state_is_reduced_to_barycentre():
    data = {"masses": [1, 2, 3], "initial_condition": {"state": {
        "r": [[1, 0], [0, 1], [2, 2]], "v": [[0, 1], [1, 0], [0.5, 0.5]]}}}
    (ic_id, ic), = scenario_from_dict(data).initial_conditions()
    assert ic_id == "state"
    assert is_barycentric(ic.masses, ic.state)


def test_sampler_ids_are_stable():
    data = {"masses": [1, 1, 1], "initial_condition": {"sampler": {"seed": 5, "count": 3}}}
    ids = [i for i, _ in scenario_from_dict(data).initial_conditions()]
    assert ids == ["5-000000", "5-000001", "5-000002"]
    ids = [i for i, _ in scenario_from_dict(data).initial_conditions(seed=9)]
    assert ids[0] == "9-000000"


# -- outputs -------------------------------------------------------------------------

def test_empty_results_give_empty_manifest(tmp_path):
    manifest = write_outputs({}, tmp_path / "o")
    assert manifest["files"] == []
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["files"] == []


def test_manifest_digests_match_files(tmp_path):
    write_outputs({"b.txt": "beta\n", "a.txt": "alpha\n"}, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert [e["path"] for e in manifest["files"]] == ["a.txt", "b.txt"]
    for e in manifest["files"]:
        data = (tmp_path / e["path"]).read_bytes()
        assert e["sha256"] == hashlib.sha256(data).hexdigest() and e["bytes"] == len(data)
    assert not list(tmp_path.glob(".*.tmp"))


def test_event_csv_header_exact():
    assert events_csv([]) == "t,kind,middle_body,delta1,delta2,H,I,grazing\n"


# -- commands ------------------------------------------------------------------------

def test_events_command_on_figure_eight(tmp_path):
    code, out = _run(tmp_path, "events", F8)
    assert code == EXIT_OK
    text = (out / "events.csv").read_text()
    assert text.splitlines()[0] == ",".join(EVENT_HEADER)
    rows = list(csv.DictReader(text.splitlines()))
    assert len(rows) == 6
    assert [r["middle_body"] for r in rows] == ["2", "1", "3", "2", "1", "3"]
    for r in rows:
        float(r["t"])
        assert r["grazing"] in ("true", "false")
        assert r["kind"] in ("PositionSyzygy", "VelocityAlignment", "Simultaneous")


def test_simulate_command(tmp_path):
    code, out = _run(tmp_path, "simulate", {**F8, "params": {"n_samples": 50}})
    assert code == EXIT_OK
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0] == ",".join(TRAJECTORY_HEADER)
    assert len(lines) == 51
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "Completed" and summary["energy_drift"] < 1e-8


def test_verify_thm1_figure_eight_exit_0(tmp_path):
    code, out = _run(tmp_path, "verify-thm1", F8)
    assert code == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["outcome"] == "EventFound" and rep["t_event"] <= rep["bound"]
    assert rep["schema_version"] == 1


def test_verify_thm3_non_antisymmetric_exit_2(tmp_path):
    data = {"masses": [1, 1, 1], "initial_condition": {"fixture": {"name": "lagrange_circular"}}}
    code, out = _run(tmp_path, "verify-thm3", data)
    assert code == EXIT_HYPOTHESIS
    assert json.loads((out / "report.json").read_text())["outcome"] == "HypothesisNotMet"


def test_verify_thm1_lagrange_exit_2(tmp_path):
    data = {"masses": [1, 1, 1], "initial_condition": {"fixture": {"name": "lagrange_circular"}}}
    assert _run(tmp_path, "verify-thm1", data)[0] == EXIT_HYPOTHESIS


def test_collision_exit_3(tmp_path):
    data = {"masses": [1, 1, 1], "initial_condition": {"state": {
        "r": [[-1, 0], [0, 3], [1, 0]], "v": [[0, 0], [0, 0], [0, 0]]}}, "params": {"t_end": 5.0}}
    assert _run(tmp_path, "simulate", data)[0] == EXIT_COLLISION


def test_verify_thm2_euler(tmp_path):
    data = {"masses": [1, 1, 1], "initial_condition": {"fixture": {"name": "euler_circular", "central": 1}},
            "integrator": {"rtol": 1e-12, "atol": 1e-14}, "params": {"theta": [0, 0, 1]}}
    code, out = _run(tmp_path, "verify-thm2", data)
    assert code == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["event_kind"] == "IdenticallyZero"


def test_oracle_minf_command(tmp_path):
    data = {"masses": [1, 2, 3], "initial_condition": {"fixture": {"name": "lagrange_circular"}},
            "params": {"budget": 20000}}
    code, out = _run(tmp_path, "oracle-minf", data)
    assert code == EXIT_OK
    doc = json.loads((out / "oracle.json").read_text())
    assert doc["agrees"] and doc["value_rel_err"] <= 1e-4


def test_invalid_scenario_exit_1(tmp_path, capsys):
    code, _ = _run(tmp_path, "simulate", {"masses": [1, 1, 1], "initial_condition": {"fixture": {"name": "x"}}})
    assert code == EXIT_ERROR
    assert "initial_condition.fixture.name" in capsys.readouterr().err


def test_missing_scenario_file_exit_1(tmp_path):
    assert main(["simulate", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT_ERROR


def test_scenario_echoed_in_canonical_form(tmp_path):
    code, out = _run(tmp_path, "verify-thm1", F8)
    echoed = (out / "scenario.json").read_text()
    assert echoed == scenario_from_dict(F8).dumps()
    assert loads_scenario(echoed).dumps() == echoed


SWEEP = {"masses": [1, 1, 1], "initial_condition": {"sampler": {"seed": 3, "count": 6, "zero_momentum": True}},
         "params": {"theorem": "thm1"}}


def test_sweep_determinism_across_workers(tmp_path):
    outs = []
    for i, workers in enumerate(("1", "3", "1")):
        code, out = _run(tmp_path, "sweep", SWEEP, "--workers", workers, out=f"o{i}")
        assert code == EXIT_OK
        outs.append(out)
    for name in ("reports.json", "aggregate.json", "manifest.json"):
        ref = (outs[0] / name).read_bytes()
        assert all((o / name).read_bytes() == ref for o in outs[1:]), name
    agg = json.loads((outs[0] / "aggregate.json").read_text())
    assert agg["n"] == 6 and agg["outcomes"]["Violation"] == 0


def test_sweep_seed_override_changes_ids(tmp_path):
    _, out = _run(tmp_path, "sweep", {**SWEEP, "initial_condition": {"sampler": {"seed": 3, "count": 2}}},
                  "--seed", "12")
    ids = [r["ic_id"] for r in json.loads((out / "reports.json").read_text())["reports"]]
    assert ids == ["12-000000", "12-000001"]


def test_workers_env_fallback(monkeypatch):
    monkeypatch.setenv("SYZYGY_WORKERS", "3")
    assert resolve_workers(None) == 3
    assert resolve_workers(2) == 2
    monkeypatch.delenv("SYZYGY_WORKERS")
    assert resolve_workers(None) == 1
    monkeypatch.setenv("SYZYGY_WORKERS", "many")
    with pytest.raises(ScenarioError):
        resolve_workers(None)


def test_console_entry_point(tmp_path):
    scn = _write(tmp_path, F8)
    proc = subprocess.run([sys.executable, "-m", "syzygy.cli", "verify-thm1", "--scenario", str(scn),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
