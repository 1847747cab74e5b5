import csv
import json

import numpy as np
import pytest

from fingeo import cli
from fingeo import scenario as scn
from fingeo import spray as sp

from conftest import scenario


def run(tmp_path, *args):
    code = cli.main(list(args) + ["--out", str(tmp_path)])
    return code, json.loads((tmp_path / "report.json").read_text()) if (tmp_path / "report.json").exists() else None


def write_doc(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_inspect_deterministic(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for d in (a, b):
        assert cli.main(["inspect", "--scenario", "coupled_weakfield", "--probes", "2", "--seed", "7", "--out", str(d)]) == 0
    assert cli.main(["inspect", "--scenario", "coupled_weakfield", "--probes", "2", "--seed", "7",
                     "--jobs", "2", "--out", str(c)]) == 0
    ra, rb, rc = ((d / "report.json").read_bytes() for d in (a, b, c))
    assert ra == rb == rc


def tensors(node):
    if isinstance(node, dict):
        if "value" in node and isinstance(node["value"], list):
            yield node
        for v in node.values():
            yield from tensors(v)
    elif isinstance(node, list):
        for v in node:
            yield from tensors(v)


def test_inspect_payload_shape(tmp_path):
    code, rep = run(tmp_path, "inspect", "--scenario", "flat_constant_A", "--probes", "1", "--order", "3")
    assert code == 0
    assert rep["tool"]["name"] == "fingeo"
    probe = rep["probes"][0]
    for key in ("finsler", "spray", "effective", "berwald", "connection", "curvature", "maxwell", "divergence"):
        assert key in probe
    assert probe["berwald"]["is_berwald"]
    assert np.abs(probe["spray"]["F_em"]["value"]).max() == 0.0
    found = list(tensors(rep))
    assert found and all(t["index"] and t["route"] for t in found)
    assert json.loads(json.dumps(rep["scenario"])) == scenario("flat_constant_A").raw


def test_inspect_vacuum_curved_payload(tmp_path):
    _, rep = run(tmp_path, "inspect", "--scenario", "vacuum_weakfield", "--probes", "1", "--order", "1")
    s = rep["probes"][0]["spray"]
    assert max(np.abs(s[k]["value"]).max() for k in ("F_em", "S", "M")) == 0.0
    assert np.abs(s["Q"]["value"]).max() > 0
    assert "curvature" not in rep["probes"][0]


def test_validate_passes(tmp_path):
    code, rep = run(tmp_path, "validate", "--scenario", "flat_vacuum", "--probes", "3")
    assert code == 0 and rep["passed"]
    assert {"id", "measured", "tolerance", "passed"} <= set(rep["invariants"][0])


def test_validate_detects_mutation(tmp_path, monkeypatch):
    monkeypatch.setattr(sp, "S_COEFFICIENTS", (2.0, -1.0, 1.0))
    code, rep = run(tmp_path, "validate", "--scenario", "coupled_weakfield", "--probes", "2", "--order", "1")
    assert code == 1
    failed = {r["id"] for r in rep["invariants"] if not r["passed"]}
    assert "spray.route_spread" in failed


def test_spacelike_probe_is_skip(tmp_path):
    doc = {"name": "skip", "metric": {"catalog": "minkowski"},
           "probes": {"points": [{"x": [0, 0, 0, 0], "y": [1, 0.2, 0, 0]},
                                 {"x": [0, 0, 0, 0], "y": [0.1, 1, 0, 0]}]}}
    code, rep = run(tmp_path, "validate", "--scenario", write_doc(tmp_path, doc), "--order", "1")
    assert code == 0
    assert len(rep["domain_skips"]) == 1 and rep["evaluated_probes"] == 1
    assert "NonTimelike" in rep["domain_skips"][0]["error"]


def test_geodesic_outputs(tmp_path):
    code, rep = run(tmp_path, "geodesic", "--scenario", "flat_vacuum")
    assert code == 0
    for k, t in enumerate(rep["trajectories"]):
        with open(tmp_path / f"trajectory_{k}.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == cli.TRAJECTORY_HEADER
        data = np.array(rows[1:], dtype=float)
        x0, y0 = np.array(t["x0"]), np.array(t["y0"])
        assert np.abs(data[:, 1:5] - (x0 + np.outer(data[:, 0], y0))).max() < 1e-10
        assert t["conservation_drift"] < 1e-8


def test_geodesic_zero_span(tmp_path):
    doc = {"name": "z", "metric": {"catalog": "minkowski"},
           "geodesics": {"tau_end": 0, "initial": [{"x": [0, 0, 0, 0], "y": [1, 0, 0, 0]}]}}
    code, rep = run(tmp_path, "geodesic", "--scenario", write_doc(tmp_path, doc))
    assert code == 0 and rep["trajectories"][0]["samples"] == 1


def test_maxwell_sweep_csv(tmp_path):
    code, rep = run(tmp_path, "maxwell-sweep", "--scenario", "flat_wave_A", "--probes", "3",
                    "--toggle", "no_geometric_terms")
    assert code == 0 and rep["max_abs_residual"] < 1e-9
    lines = (tmp_path / "maxwell_sweep.csv").read_text().splitlines()
    assert lines[0] == ",".join(cli.SWEEP_HEADER) and len(lines) == 4


def test_berwald_check(tmp_path):
    code, rep = run(tmp_path, "berwald-check", "--scenario", "flat_constant_A", "--probes", "2")
    assert code == 0 and rep["is_berwald"]
    code, rep = run(tmp_path, "berwald-check", "--scenario", "coupled_weakfield", "--probes", "2")
    assert code == 0 and not rep["is_berwald"]


def test_custom_section_option(tmp_path):
    code, rep = run(tmp_path, "maxwell-sweep", "--scenario", "coupled_weakfield", "--probes", "1",
                    "--section", "expr:1;0.1*x1;0;0")
    assert code == 0 and rep["options"]["section"] == "expr:1;0.1*x1;0;0"


@pytest.mark.parametrize("args", [["--scenario", "/no/such.json"],
                                  ["--scenario", "flat_vacuum", "--toggle", "sideways"],
                                  ["--scenario", "flat_vacuum", "--section", "vec:1"]])
def test_bad_inputs_exit_2(tmp_path, args):
    assert cli.main(["inspect", *args, "--out", str(tmp_path)]) == 2


def test_bad_order_rejected(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["inspect", "--scenario", "flat_vacuum", "--order", "4", "--out", str(tmp_path)])


def test_schema_error_exit(tmp_path, capsys):
    doc = {"name": "bad", "metric": {"catalog": "minkowski"}, "extra": 1}
    assert cli.main(["validate", "--scenario", write_doc(tmp_path, doc), "--out", str(tmp_path)]) == 2
    assert "extra" in capsys.readouterr().err
