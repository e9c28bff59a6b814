"""Scenario loading, the artifact-writing runner, and the CLI front end.

Uses two self-contained scenario files written into pytest temp dirs: a
two-state linear plant under a saturated linear feedback (reach kind) and
a one-input relu map (static kind).  All expected numbers are box
arithmetic done inline.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from hyzo import cli
from hyzo.scenario import load_scenario, run_scenario
from hyzo.sets import HybridZonotope, IntervalBox, SchemaError


def loop_doc(**overrides) -> dict:
    """x' = [[.5,.1],[0,.8]] x + [1,0]^T u,  u = clip(-0.25 x0, -1, 1)."""
    doc = {
        "name": "small_loop",
        "kind": "reach",
        "plant": {
            "decomposition": {
                "inputs": 3,
                "assignments": [
                    {"kind": "affine", "args": [0, 1, 2],
                     "coeffs": [0.5, 0.1, 1.0], "offset": 0.0},
                    {"kind": "affine", "args": [1], "coeffs": [0.8]},
                ],
                "outputs": [3, 4],
            },
            "box": {"lo": [-5.0, -5.0, -1.0], "hi": [5.0, 5.0, 1.0]},
        },
        "controller": {
            "box": {"lo": [-5.0, -5.0], "hi": [5.0, 5.0]},
            "network": {"layers": [{"w": [[-0.25, 0.0]], "b": [0.0]}],
                        "saturate": [-1.0, 1.0]},
        },
        "initial_set": {"lo": [1.0, -1.0], "hi": [2.0, 0.0]},
        "steps": 3,
        "hull": {"mode": "relaxed"},
        "plots": [{"dims": [0, 1], "dirs": 12}],
        "queries": [{"kind": "member", "point": [0.02, 0.0], "step": 3},
                    {"kind": "support", "direction": [1.0, 0.0]}],
        "self_test": {"kind": "trajectories", "count": 5, "seed": 3},
    }
    doc.update(overrides)
    return doc


def relu_doc() -> dict:
    return {
        "name": "relu_static",
        "kind": "static",
        "plant": {
            "decomposition": {
                "inputs": 1,
                "assignments": [{"kind": "unary", "args": [0], "func": "relu"}],
                "outputs": [1],
            },
            "box": {"lo": [-2.0], "hi": [2.0]},
        },
        "plots": [{"dims": [0, 1], "dirs": 16}],
        "self_test": {"kind": "samples", "count": 20, "seed": 1,
                      "points": [[-1.0], [0.0], [0.5]],
                      "pairs": [{"x": [1.0], "y": [1.5], "member": False}]},
    }


def write_doc(directory: Path, doc, name="scenario.json") -> Path:
    path = directory / name
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return path


@pytest.fixture(scope="module")
def loop_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("loop")
    sc_path = write_doc(root, loop_doc())
    out = root / "out"
    res = run_scenario(sc_path, out, self_test=True)
    return sc_path, out, res


# ---------------------------------------------------------------------------
# loading


def test_load_scenario_fields(tmp_path):
    sc = load_scenario(write_doc(tmp_path, loop_doc()))
    assert sc.name == "small_loop" and sc.kind == "reach"
    assert sc.plant.n_inputs == 3 and sc.steps == 3
    assert sc.controller is not None and sc.controller_sat == (-1.0, 1.0)
    assert sc.controller_net is not None and len(sc.controller_net) == 1
    assert sc.hull_mode == "relaxed" and sc.enum_cap is None
    assert sc.plots == [{"dims": [0, 1], "dirs": 12, "steps": None,
                         "mode": "auto"}]
    assert [q["kind"] for q in sc.queries] == ["member", "support"]
    assert sc.initial_box.lo.tolist() == [1.0, -1.0]


def _without(doc, key):
    doc.pop(key)
    return doc


BAD_DOCS = [
    ("not_json", "{this is not json"),
    ("top_level_list", "[1, 2]"),
    ("missing_name", _without(loop_doc(), "name")),
    ("bad_kind", loop_doc(kind="flow")),
    ("missing_plant", _without(loop_doc(), "plant")),
    ("plant_box_dim", loop_doc(plant={
        "decomposition": loop_doc()["plant"]["decomposition"],
        "box": {"lo": [-5.0, -5.0], "hi": [5.0, 5.0]}})),
    ("controller_and_input_set",
     loop_doc(input_set={"lo": [-1.0], "hi": [1.0]})),
    ("no_controller_no_inputs", _without(loop_doc(), "controller")),
    ("unknown_hull", loop_doc(hull={"mode": "convex"})),
    ("plot_dims_len", loop_doc(plots=[{"dims": [0]}])),
    ("bad_query_kind", loop_doc(queries=[{"kind": "volume"}])),
    ("member_query_without_point", loop_doc(queries=[{"kind": "member"}])),
    ("unknown_gate", loop_doc(atoms=[{"kind": "gate", "gate": "nor"}])),
    ("unknown_atom_kind", loop_doc(atoms=[{"kind": "wire"}])),
    ("duplicate_atom", loop_doc(atoms=[{"kind": "gate", "gate": "and"},
                                       {"kind": "gate", "gate": "and"}])),
    ("bad_compare", loop_doc(atoms=[{"kind": "compare", "lo": 1.0}])),
    ("negative_steps", loop_doc(steps=-1)),
    ("zero_reduce", loop_doc(reduce_every=0)),
    ("static_with_controller", loop_doc(kind="static")),
]


@pytest.mark.parametrize("doc", [d for _, d in BAD_DOCS],
                         ids=[n for n, _ in BAD_DOCS])
def test_load_scenario_rejects_bad_documents(tmp_path, doc):
    with pytest.raises(SchemaError):
        load_scenario(write_doc(tmp_path, doc))


def test_load_scenario_missing_file(tmp_path):
    with pytest.raises(SchemaError):
        load_scenario(tmp_path / "absent.json")


# ---------------------------------------------------------------------------
# runner artifacts


def test_run_writes_trace_and_counts(loop_run):
    _, out, res = loop_run
    assert res.exit_code == 0
    doc = json.loads((out / "trace.json").read_text())
    assert doc["schema"] == "hyzo-trace-1"
    assert doc["name"] == "small_loop" and doc["n_x"] == 2
    assert doc["over_approx"] is False
    tr = doc["trace"]
    assert len(tr["sets"]) == 4 and len(tr["counts"]) == 4
    assert tr["error"] is None and tr["domain_checks"] == [True] * 3

    # counts follow the fixed per-step increment of the update set
    gphi, bphi, cphi = doc["phi_counts"]
    assert tr["counts"][0] == [2, 0, 0]
    for k in range(3):
        g, b, c = tr["counts"][k]
        assert tr["counts"][k + 1] == [g + gphi, b + bphi, c + cphi + 2]


def test_run_writes_complexity_csv(loop_run):
    _, out, _ = loop_run
    lines = (out / "complexity.csv").read_text().splitlines()
    assert lines[0] == "k,n_g,n_b,n_c,wall_ms"
    assert len(lines) == 5
    doc = json.loads((out / "trace.json").read_text())
    for k, line in enumerate(lines[1:]):
        parts = line.split(",")
        assert [int(v) for v in parts[:4]] == [k] + doc["trace"]["counts"][k]
        assert float(parts[4]) >= 0.0


def test_run_writes_polygon_files(loop_run):
    _, out, _ = loop_run
    names = sorted(p.name for p in (out / "plots").glob("*.json"))
    assert names == [f"step{k}_dims0-1.json" for k in range(4)]
    doc = json.loads((out / "plots" / "step0_dims0-1.json").read_text())
    assert doc["schema"] == "hyzo-polygons-1"
    assert doc["dims"] == [0, 1] and doc["mode"] == "exact"
    assert len(doc["pieces"]) >= 1
    verts = np.array(doc["pieces"][0]["polygons"][0])
    assert verts.ndim == 2 and verts.shape[1] == 2
    # step 0 is the initial box, so its polygon stays inside it
    assert np.all(verts[:, 0] >= 1.0 - 1e-6) and np.all(verts[:, 0] <= 2.0 + 1e-6)
    assert np.all(verts[:, 1] >= -1.0 - 1e-6) and np.all(verts[:, 1] <= 0.0 + 1e-6)


def test_run_report_and_selftest(loop_run):
    _, out, res = loop_run
    assert res.self_test is not None and res.self_test["ok"]
    assert res.self_test["checked"] == 5 * 4 and res.self_test["failures"] == 0
    report = (out / "report.txt").read_text()
    assert "scenario: small_loop" in report
    assert "count recurrence: pass" in report
    assert "domain checks: pass pass pass" in report
    assert '"result": "member"' in report
    assert "self-test" in report


def test_static_scenario_runs_exact(tmp_path):
    sc_path = write_doc(tmp_path, relu_doc())
    res = run_scenario(sc_path, tmp_path / "out", self_test=True)
    assert res.exit_code == 0
    assert res.self_test["ok"] and res.self_test["checked"] == 24
    doc = json.loads((tmp_path / "out" / "trace.json").read_text())
    assert doc["kind"] == "static" and doc["phi_counts"] is None
    assert doc["over_approx"] is False
    assert len(doc["trace"]["sets"]) == 1


# ---------------------------------------------------------------------------
# CLI exit codes


def test_cli_run_ok_and_deterministic(tmp_path):
    sc_path = write_doc(tmp_path, loop_doc())
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert cli.main(["run", str(sc_path), "--out", str(out)]) == 0

    def trace_doc(out):
        doc = json.loads((out / "trace.json").read_text())
        doc["trace"].pop("step_seconds")
        return doc

    def csv_rows(out):
        lines = (out / "complexity.csv").read_text().splitlines()
        return [",".join(line.split(",")[:4]) for line in lines]

    def report_lines(out):
        return [l for l in (out / "report.txt").read_text().splitlines()
                if not l.startswith("wall seconds")]

    assert trace_doc(outs[0]) == trace_doc(outs[1])
    assert csv_rows(outs[0]) == csv_rows(outs[1])
    assert report_lines(outs[0]) == report_lines(outs[1])
    names = sorted(p.name for p in (outs[0] / "plots").iterdir())
    assert names == sorted(p.name for p in (outs[1] / "plots").iterdir())
    for name in names:
        assert ((outs[0] / "plots" / name).read_bytes()
                == (outs[1] / "plots" / name).read_bytes())


def test_cli_run_schema_error_exits_2(tmp_path, capsys):
    bad = write_doc(tmp_path, _without(loop_doc(), "plant"))
    assert cli.main(["run", str(bad)]) == 2
    assert "schema error" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "nope.json")]) == 2


def test_cli_run_domain_violation_exits_3(tmp_path, capsys):
    doc = loop_doc(initial_set={"lo": [6.0, 6.0], "hi": [7.0, 7.0]})
    doc.pop("self_test")
    sc_path = write_doc(tmp_path, doc)
    out = tmp_path / "out"
    assert cli.main(["run", str(sc_path), "--out", str(out)]) == 3
    trace = json.loads((out / "trace.json").read_text())["trace"]
    assert trace["error"] is not None
    assert len(trace["sets"]) == 1 and trace["domain_checks"] == [False]


def test_cli_run_enum_cap_exits_4(tmp_path):
    doc = loop_doc(plots=[{"dims": [0, 1], "dirs": 8, "mode": "exact"}],
                   enum_cap=2)
    doc.pop("self_test")
    sc_path = write_doc(tmp_path, doc)
    out = tmp_path / "out"
    assert cli.main(["run", str(sc_path), "--out", str(out)]) == 4
    # the trace was still written; only plotting refused
    assert (out / "trace.json").exists()


def test_cli_run_unknown_selftest_exits_2(tmp_path):
    sc_path = write_doc(tmp_path, loop_doc(self_test={"kind": "mystery"}))
    out = tmp_path / "out"
    assert cli.main(["run", str(sc_path), "--out", str(out),
                     "--self-test"]) == 2


# ---------------------------------------------------------------------------
# CLI query / complexity / plot-data


@pytest.fixture()
def box_set_file(tmp_path):
    z = HybridZonotope.from_box(IntervalBox([-1.0, -1.0], [1.0, 1.0]))
    path = tmp_path / "box.json"
    path.write_text(json.dumps(z.to_dict()))
    return path


def _last_json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_cli_query_member_support_hull_empty(box_set_file, capsys):
    assert cli.main(["query", str(box_set_file), "--member", "0.5,-0.5"]) == 0
    assert _last_json(capsys)["status"] == "member"

    assert cli.main(["query", str(box_set_file), "--member", "2,0"]) == 0
    assert _last_json(capsys)["status"] == "non_member"

    assert cli.main(["query", str(box_set_file), "--support", "1,0"]) == 0
    assert _last_json(capsys)["value"] == pytest.approx(1.0, abs=1e-9)

    assert cli.main(["query", str(box_set_file), "--hull"]) == 0
    out = _last_json(capsys)
    assert out["lo"] == pytest.approx([-1.0, -1.0], abs=1e-7)
    assert out["hi"] == pytest.approx([1.0, 1.0], abs=1e-7)

    assert cli.main(["query", str(box_set_file), "--empty"]) == 0
    assert _last_json(capsys)["status"] == "nonempty"


def test_cli_query_on_trace_steps(loop_run, capsys):
    _, out, _ = loop_run
    trace_file = str(out / "trace.json")
    assert cli.main(["query", trace_file, "--hull", "--step", "0"]) == 0
    res = _last_json(capsys)
    assert res["lo"] == pytest.approx([1.0, -1.0], abs=1e-7)
    assert res["hi"] == pytest.approx([2.0, 0.0], abs=1e-7)

    # default step is the last one; the relaxed hull is still ordered
    assert cli.main(["query", trace_file, "--hull",
                     "--hull-mode", "relaxed"]) == 0
    res = _last_json(capsys)
    assert all(a <= b for a, b in zip(res["lo"], res["hi"]))

    assert cli.main(["query", trace_file, "--hull", "--step", "9"]) == 2
    assert cli.main(["query", str(out / "absent.json"), "--empty"]) == 2


def test_cli_complexity_calculator(capsys):
    assert cli.main(["complexity", "--table4", "6,17,34", "M1"]) == 0
    out = _last_json(capsys)
    assert (out["n_g"], out["n_b"], out["n_c"]) == (73, 26, 38)
    assert out["method"] == "grid2d"

    assert cli.main(["complexity", "--table4", "3,9,18", "m2"]) == 0
    out = _last_json(capsys)
    assert (out["n_g"], out["n_b"], out["n_c"]) == (24, 10, 14)

    # a bare leading dimension selects the published case
    assert cli.main(["complexity", "--table4", "9", "strip1d"]) == 0
    out = _last_json(capsys)
    assert out["case"] == [9, 26, 52]
    assert (out["n_g"], out["n_b"], out["n_c"]) == (105, 26, 54)

    assert cli.main(["complexity", "--table4", "6,17,34", "M9"]) == 2
    assert cli.main(["complexity", "--table4", "6,17", "M1"]) == 2
    assert cli.main(["complexity", "--table4", "8", "M1"]) == 2
    assert cli.main(["complexity"]) == 2
    capsys.readouterr()


def test_cli_complexity_trace_audit(loop_run, tmp_path, capsys):
    _, out, _ = loop_run
    assert cli.main(["complexity", str(out / "trace.json")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "k,n_g,n_b,n_c"
    assert len(lines) == 6 and lines[-1] == "recurrence: pass"

    doc = json.loads((out / "trace.json").read_text())
    doc["trace"]["counts"][2] = [9, 9, 9]
    bad = tmp_path / "bad_trace.json"
    bad.write_text(json.dumps(doc))
    assert cli.main(["complexity", str(bad)]) == 1
    assert "recurrence: FAIL" in capsys.readouterr().out


def test_cli_plot_data(box_set_file, capsys):
    assert cli.main(["plot-data", str(box_set_file), "--dims", "0,1",
                     "--dirs", "8"]) == 0
    out = _last_json(capsys)
    assert out["mode"] == "exact" and len(out["pieces"]) == 1
    piece = out["pieces"][0]
    # sampled-direction polygons are always outer bounds of the piece
    assert piece["assignment"] == [] and piece["over_approx"] is True
    verts = np.array(piece["polygons"][0])
    assert np.all(np.abs(verts) <= 1.0 + 1e-6)
    assert verts[:, 0].max() == pytest.approx(1.0, abs=1e-6)
    assert verts[:, 0].min() == pytest.approx(-1.0, abs=1e-6)
    assert verts[:, 1].max() == pytest.approx(1.0, abs=1e-6)
    assert verts[:, 1].min() == pytest.approx(-1.0, abs=1e-6)

    assert cli.main(["plot-data", str(box_set_file), "--dims", "0"]) == 2


def test_cli_run_flag_plumbing(tmp_path):
    doc = loop_doc(steps=1, plots=[], queries=[])
    doc.pop("self_test")
    sc_path = write_doc(tmp_path, doc)
    assert cli.main(["run", str(sc_path), "--out", str(tmp_path / "o"),
                     "--tol-feas", "1e-6", "--enum-cap", "64"]) == 0
