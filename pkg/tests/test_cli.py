import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from periodic_transport import cli
from periodic_transport.catalog import ladder, lattice
from periodic_transport.finite_volume import partition_to_dict, square_mesh
from periodic_transport.graph import graph_to_dict

DATA = Path(__file__).parent / "data"


def run_cli(tmp_path, command, config=None, extra=()):
    argv = [command]
    if config is not None:
        p = tmp_path / "config.json"
        p.write_text(json.dumps(config))
        argv += ["--config", str(p)]
    out = tmp_path / "out.txt"
    code = cli.run(argv + ["--out", str(out)] + list(extra))
    return code, (out.read_text() if out.exists() else "")


def csv_rows(text):
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))


# ------------------------------------------------------------------ cell
def test_cell_closed_form_table(tmp_path):
    code, text = run_cli(tmp_path, "cell", {"graph": "lattice1", "rho": [1, 2], "j": [[0], [1], [3]]})
    assert code == 0
    got = np.array([float(r["value"]) for r in csv_rows(text)]).reshape(2, 3)
    assert np.allclose(got, [[0, 1, 9], [0, 0.5, 4.5]], rtol=1e-9, atol=1e-12)
    assert "# tol: 1e-10" in text and "# seed: 0" in text and "units:" in text


def test_cell_empty_j_is_usage_error(tmp_path):
    assert run_cli(tmp_path, "cell", {"graph": "lattice1", "rho": [1], "j": []})[0] == 64


def test_cell_ladder_golden(tmp_path):
    config = json.loads((DATA / "ladder_cell.json").read_text())
    code, text = run_cli(tmp_path, "cell", config)
    assert code == 0
    golden = list(csv.DictReader(open(DATA / "ladder_golden.csv")))
    rows = csv_rows(text)
    assert len(rows) == len(golden)
    for r, gld in zip(rows, golden):
        assert float(r["rho"]) == float(gld["rho"]) and float(r["j1"]) == float(gld["j1"])
        assert abs(float(r["value"]) - float(gld["value"])) <= 1e-6 * max(1.0, float(gld["value"]))
        assert float(r["div_residual"]) <= 1e-10 and r["status"] == "converged"


def test_cell_json_output(tmp_path):
    code, text = run_cli(tmp_path, "cell", {"graph": "ladder", "rho": [1], "j": [[1]]}, ["--format", "json"])
    data = json.loads(text)
    assert code == 0 and data["rows"][0]["value"] == pytest.approx(1.0, rel=1e-8)
    assert len(data["rows"][0]["m_opt"]) == 2


def test_cell_negative_rho_is_data_error(tmp_path):
    assert run_cli(tmp_path, "cell", {"graph": "lattice1", "rho": [-1], "j": [[1]]})[0] == 65


def test_cell_wrong_flux_dimension(tmp_path):
    assert run_cli(tmp_path, "cell", {"graph": "lattice2", "rho": [1], "j": [[1]]})[0] == 64


# -------------------------------------------------------- minimal action
SWAP = {"graph": "lattice1", "N": 2, "K": 8, "m0": [1.0, 0.0], "m1": [0.0, 1.0]}


def test_minimal_action_swap(tmp_path):
    from oracles import swap_constant_flux_scan
    from periodic_transport.costs import WpMeanCost
    from periodic_transport.graph import RescaledGraph
    from periodic_transport.transport import DiscretePath, action

    code, text = run_cli(tmp_path, "minimal-action", SWAP)
    assert code == 0
    value = float(csv_rows(text)[0]["value"])
    rg = RescaledGraph(lattice(1), 2)
    F = WpMeanCost(rg.base)
    m0 = np.array([[1.0], [0.0]])

    def constant(t):
        J = np.zeros((8, 2, 1))
        J[:, 0, 0], J[:, 1, 0] = t, t - 1.0
        return action(DiscretePath.from_fluxes(rg, m0, J), F)

    ref, _ = swap_constant_flux_scan(constant)
    assert abs(value - ref) <= 1e-3


def test_minimal_action_equal_endpoints(tmp_path):
    code, text = run_cli(tmp_path, "minimal-action", {**SWAP, "m1": SWAP["m0"]})
    assert code == 0 and float(csv_rows(text)[0]["value"]) == 0.0


def test_minimal_action_unequal_mass(tmp_path):
    assert run_cli(tmp_path, "minimal-action", {**SWAP, "m1": [0.0, 2.0]})[0] == 65


def test_minimal_action_wrong_length(tmp_path):
    assert run_cli(tmp_path, "minimal-action", {**SWAP, "m1": [0.0, 0.5, 0.5]})[0] == 65


def test_minimal_action_saves_path(tmp_path):
    code, text = run_cli(tmp_path, "minimal-action", {**SWAP, "save_path": True, "path_out": "path.json"},
                         ["--format", "json"])
    assert code == 0 and "path" in json.loads(text)
    from periodic_transport.transport import DiscretePath
    p = DiscretePath.from_json((tmp_path / "path.json").read_text())
    assert p.K == 8 and abs(p.total_mass() - 1.0).max() <= 1e-12


# ------------------------------------------------------------- converge
def test_converge_single_eps(tmp_path):
    code, text = run_cli(tmp_path, "converge", {"eps": ["1/4"], "K": 4})
    assert code == 0
    assert len(csv_rows(text)) == 1 and "# trend: n/a" in text


def test_converge_rejects_increasing_eps(tmp_path):
    assert run_cli(tmp_path, "converge", {"eps": ["1/8", "1/4"], "K": 4})[0] == 65


def test_converge_closed_form_vs_cell_reference(tmp_path):
    base = {"eps": ["1/4", "1/8"], "K": 4, "reference_grid": [8, 4]}
    _, a = run_cli(tmp_path, "converge", {**base, "reference": "closed_form"})
    _, b = run_cli(tmp_path, "converge", {**base, "reference": "cell"})
    ga = [float(r["relative_gap"]) for r in csv_rows(a)]
    gb = [float(r["relative_gap"]) for r in csv_rows(b)]
    assert np.allclose(ga, gb, atol=1e-5, rtol=0)


def test_converge_unknown_reference(tmp_path):
    assert run_cli(tmp_path, "converge", {"eps": ["1/4"], "reference": "table"})[0] == 64


# ------------------------------------------------------------------ mesh
def mesh_items(text):
    return {r["quantity"]: r["value"] for r in csv_rows(text)}


def test_mesh_square(tmp_path):
    code, text = run_cli(tmp_path, "mesh", {"mesh": "square2"})
    items = mesh_items(text)
    assert code == 0 and items["identity"] == "PASS" and items["isometry"] == "FEASIBLE(lambda=1/2)"
    lam = items["isometry_lambda"].split()
    assert lam and set(lam) == {"1/2"}


def test_mesh_triangle_smooth_infeasible(tmp_path):
    code, text = run_cli(tmp_path, "mesh", {"mesh": "triangle"})
    items = mesh_items(text)
    assert code == 0 and items["identity"] == "PASS" and items["isometry"] == "INFEASIBLE"
    assert items["isometry_certificate_y"]


def test_mesh_triangle_min_isotropy(tmp_path):
    config = {"mesh": "triangle", "mobility": {"mobility": "linear", "version": "minimum"}, "random_points": 5}
    code, text = run_cli(tmp_path, "mesh", config)
    items = mesh_items(text)
    assert code == 0 and items["isotropy_selector"] == "triangle"
    assert float(items["isotropy_max_spread"]) <= 1e-12


# -------------------------------------------------------------- validate
def test_validate_files(tmp_path):
    good = tmp_path / "square.json"
    good.write_text(json.dumps(partition_to_dict(square_mesh(2))))
    asym = tmp_path / "asym.json"
    asym.write_text(json.dumps({"d": 1, "V": ["a"], "oriented": True, "edges": [
        {"v": "a", "dz": [1], "v2": "a"}, {"v": "a", "dz": [-1], "v2": "a"}, {"v": "a", "dz": [2], "v2": "a"}]}))
    disc = tmp_path / "disc.json"
    disc.write_text(json.dumps({"d": 1, "V": ["a", "b"], "edges": [
        {"v": "a", "dz": [1], "v2": "a"}, {"v": "b", "dz": [1], "v2": "b"}]}))
    lad = tmp_path / "ladder.json"
    lad.write_text(json.dumps(graph_to_dict(ladder())))

    assert cli.run(["validate", str(good), str(lad), "--out", str(tmp_path / "r1")]) == 0
    text = (tmp_path / "r1").read_text()
    assert text.count("status: PASS") == 2 and "R0" in text

    assert cli.run(["validate", str(asym), "--out", str(tmp_path / "r2")]) == 65
    text = (tmp_path / "r2").read_text()
    assert "status: FAIL" in text and "(2,)" in text and "no reverse" in text

    assert cli.run(["validate", str(disc), "--out", str(tmp_path / "r3")]) == 65
    assert "connect" in (tmp_path / "r3").read_text().lower()


def test_validate_cost_file(tmp_path):
    p = tmp_path / "cost.json"
    p.write_text(json.dumps({"graph": "ladder", "cost": {"kind": "wp_mean", "p": 2.0, "mean": "geometric"},
                             "n_samples": 100}))
    assert cli.run(["validate", str(p), "--out", str(tmp_path / "r")]) == 0
    assert "growth:" in (tmp_path / "r").read_text()


def test_validate_missing_file(tmp_path):
    assert cli.run(["validate", str(tmp_path / "nope.json"), "--out", str(tmp_path / "r")]) == 65


# ------------------------------------------------ determinism and contract
def test_byte_identical_output(tmp_path):
    config = {"graph": "ladder", "rho": [0.5, 2], "j": [[0.3], [1.5]], "cost": {"kind": "wp_mean", "mean": "logarithmic"}}
    _, a = run_cli(tmp_path, "cell", config, ["--threads", "2"])
    _, b = run_cli(tmp_path, "cell", config, ["--threads", "1"])
    assert a == b and a


def test_missing_config_file_is_data_error(tmp_path):
    assert cli.run(["cell", "--config", str(tmp_path / "missing.json")]) == 65


def test_bad_flag_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.run(["cell", "--threads", "many"])
    assert exc.value.code == 64
    assert run_cli(tmp_path, "cell", {"graph": "lattice1", "rho": [1], "j": [[1]]}, ["--threads", "0"])[0] == 64


def test_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("PTOT_SEED", "7")
    _, text = run_cli(tmp_path, "cell", {"graph": "lattice1", "rho": [1], "j": [[1]]})
    assert "# seed: 7" in text


def test_non_convergence_exit_code(tmp_path):
    # a single first-order iteration cannot reach the minimiser of this transport problem
    config = {"graph": "lattice1", "N": 6, "K": 8, "m0": [1, 0, 0, 0, 0, 0], "m1": [0, 0, 0, 1, 0, 0], "max_iter": 1}
    code, text = run_cli(tmp_path, "minimal-action", config)
    assert code == 2 and csv_rows(text)[0]["status"] == "not_converged"


def test_cell_flagged_row_exit_code(tmp_path, monkeypatch):
    real = cli.f_hom_table

    def flagged(*args, **kwargs):
        sols = real(*args, **kwargs)
        sols[-1].status = "max_iter"
        return sols
    monkeypatch.setattr(cli, "f_hom_table", flagged)
    code, text = run_cli(tmp_path, "cell", {"graph": "lattice1", "rho": [1], "j": [[0], [1]]})
    assert code == 2 and csv_rows(text)[-1]["status"] == "max_iter"


def test_internal_error_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("boom")
    monkeypatch.setattr(cli, "cmd_mesh", boom)
    assert run_cli(tmp_path, "mesh", {"mesh": "square1"})[0] == 70


def test_console_script_and_module(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"graph": "lattice1", "rho": [2], "j": [[3]]}))
    for cmd in (["ptot"], [sys.executable, "-m", "periodic_transport"]):
        out = subprocess.run(cmd + ["cell", "--config", str(p)], capture_output=True, text=True)
        assert out.returncode == 0
        assert float(csv_rows(out.stdout)[0]["value"]) == pytest.approx(4.5, rel=1e-9)
