import json

import numpy as np
import pytest

from gaplm.cli import main
from gaplm.io import DataError, ModelSpec, UsageError, ingest_csv, pima_path, verify_checksum, PIMA_SHA256

PIMA_ARGS = ["--data", "pima", "--linear", "NumPreg,DBP,DPF,PGC", "--nonparametric", "BMI,AGE", "--knots", "0,0"]


def _stderr_json(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_bundled_pima_checksum():
    assert verify_checksum(pima_path(), PIMA_SHA256)


def test_fit_report(tmp_path, capsys):
    assert main(["fit", *PIMA_ARGS, "--seed", "1", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "fit.json").read_text())
    assert rep["converged"] is True
    assert rep["data"]["n"] == 724
    assert set(rep["coefficients"]) == {"NumPreg", "DBP", "DPF", "PGC"}
    assert rep["seed"] == 1


def test_select_scad_keeps_dpf_and_pgc(capsys):
    assert main(["select", *PIMA_ARGS, "--penalty", "scad", "--seed", "1"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert sorted(rep["zero_set"]) == ["DBP", "NumPreg"]
    assert rep["standard_errors"]["NumPreg"] is None


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "model.toml"
    cfg.write_text('data = "pima"\nlinear = ["NumPreg", "DBP", "DPF", "PGC"]\n'
                   'nonparametric = ["BMI", "AGE"]\nknots = [0, 0]\npenalty = "lasso"\nseed = 3\n')
    assert main(["select", "--config", str(cfg)]) == 0
    lasso = json.loads(capsys.readouterr().out)
    assert lasso["penalty"] == "l1" and lasso["zero_set"] == []
    assert main(["select", "--config", str(cfg), "--penalty", "bic"]) == 0
    bic = json.loads(capsys.readouterr().out)
    assert sorted(bic["zero_set"]) == ["DBP", "NumPreg"]


def test_report_config_round_trip(tmp_path, capsys):
    assert main(["select", *PIMA_ARGS, "--penalty", "scad", "--seed", "5", "--out", str(tmp_path / "a")]) == 0
    assert main(["select", "--config", str(tmp_path / "a" / "select.json"), "--out", str(tmp_path / "b")]) == 0
    a = json.loads((tmp_path / "a" / "select.json").read_text())
    b = json.loads((tmp_path / "b" / "select.json").read_text())
    assert a == b


def test_generated_seed_is_reported(capsys):
    assert main(["fit", *PIMA_ARGS]) == 0
    captured = capsys.readouterr()
    seed = int(captured.err.split("seed:")[1].split()[0])
    assert json.loads(captured.out)["seed"] == seed


def test_usage_errors_exit_1(capsys):
    assert main(["fit", "--bogus"]) == 1
    assert _stderr_json(capsys)["error"] == "usage"
    assert main([]) == 1
    assert main(["select", *PIMA_ARGS, "--penalty", "ridge"]) == 1
    assert main(["fit", *PIMA_ARGS[:-2], "--knots", "a,b"]) == 1
    assert main(["fit", "--data", "pima", "--linear", "BMI", "--nonparametric", "BMI"]) == 1


def test_data_errors_exit_2(tmp_path, capsys):
    assert main(["fit", "--data", str(tmp_path / "missing.csv"), "--response", "y"]) == 2
    assert "not found" in _stderr_json(capsys)["message"]
    assert main(["fit", "--data", "pima", "--linear", "Glucose"]) == 2
    assert "available" in _stderr_json(capsys)["message"]


def test_simulate_is_byte_identical(tmp_path, capsys):
    args = ["simulate", "--scenario", "s2", "--n", "120", "--reps", "2", "--knots", "1,1",
            "--methods", "oracle,bic", "--seed", "7"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert {"table.tsv", "replicates.csv", "simulate.json", "component_X1.csv", "component_X2.csv"} <= set(files)
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "table.tsv").read_text().splitlines()[0]
    assert header.startswith("method\tC\tI\tMRME")


def test_knots_on_data_and_scenario(capsys):
    assert main(["knots", *PIMA_ARGS, "--knot-range", "0,1", "--seed", "2"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["knots"] == {"BMI": 0, "AGE": 0}
    assert main(["knots", "--scenario", "s1", "--n", "100", "--reps", "2", "--knot-range", "0,1", "--seed", "2"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["criterion"] == "pe" and sum(f["count"] for f in rep["frequencies"]) == 2
    assert main(["knots", *PIMA_ARGS, "--criterion", "pe"]) == 1


def _write(path, text):
    path.write_text(text)
    return path


def test_ingest_drops_incomplete_rows(tmp_path):
    f = _write(tmp_path / "d.csv", "y,x,z\n1,0.1,2\n0,,3\n1,0.9,NA\n0,0.5,1\n")
    with pytest.warns(UserWarning, match="dropped 2"):
        data, rep = ingest_csv(f, ModelSpec("y", linear=("z",), nonparametric=("x",)), return_report=True)
    assert data.n == 2 and rep.n_dropped == 2
    assert data.x.min() == 0 and data.x.max() == 1
    assert np.allclose(data.x_ranges, [[0.1, 0.5]])


def test_ingest_recodes_two_valued_response(tmp_path):
    f = _write(tmp_path / "d.csv", "y,z\n1,0.3\n2,0.1\n2,0.4\n")
    with pytest.warns(UserWarning, match="recoded"):
        data, rep = ingest_csv(f, ModelSpec("y", linear=("z",)), return_report=True)
    assert list(data.y) == [0.0, 1.0, 1.0]
    assert rep.response_map == {1.0: 0.0, 2.0: 1.0}


def test_ingest_errors(tmp_path):
    f = _write(tmp_path / "d.csv", "y,z\n1,0.3\n0,abc\n")
    with pytest.raises(DataError, match=r"row 2, column 'z'"):
        ingest_csv(f, ModelSpec("y", linear=("z",)))
    with pytest.raises(DataError, match="available"):
        ingest_csv(f, ModelSpec("y", linear=("w",)))
    g = _write(tmp_path / "e.csv", "y,z\n1,\n0,\n")
    with pytest.raises(DataError, match="no complete rows"):
        with pytest.warns(UserWarning):
            ingest_csv(g, ModelSpec("y", linear=("z",)))
    h = _write(tmp_path / "f.csv", "y,z\n1,0.3\n2,0.1\n3,0.2\n")
    with pytest.raises(DataError, match="distinct values"):
        ingest_csv(h, ModelSpec("y", linear=("z",)))


def test_model_spec_roles(tmp_path):
    with pytest.raises(UsageError):
        ModelSpec("y", linear=("y",))
    with pytest.raises(UsageError):
        ModelSpec("y", linear=("a",), unpenalized=("b",))
    rng = np.random.default_rng(0)
    rows = "\n".join(f"{int(rng.integers(0, 2))},{rng.uniform():.6f},{int(rng.integers(0, 3))}" for _ in range(60))
    f = _write(tmp_path / "g.csv", "y,age,group\n" + rows + "\n")
    data = ingest_csv(f, ModelSpec("y"))
    assert data.x_names == ["age"] and data.z_names == ["group"]
    assert ModelSpec("y", nonparametric=("a", "b"), knots=(3,)).knot_counts() == (3, 3)
