import csv
import json

import numpy as np
import pytest

from homog.cli import EXIT_CONFIG, EXIT_OK, EXIT_SUFFICIENCY, ConfigError, main, parse_p_range
from homog.hamiltonian import FiberOnly, spec_to_json


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def test_parse_p_range():
    assert np.allclose(parse_p_range("-1:1:5"), [-1, -0.5, 0, 0.5, 1])
    for bad in ("1:2", "a:b:c", "0:1:0"):
        with pytest.raises(ConfigError):
            parse_p_range(bad)


def test_effective_pendulum_plateau(tmp_path):
    assert main(["effective", "--spec", "pendulum", "--p-range", "-3:3:129", "--out", str(tmp_path)]) == EXIT_OK
    tab = read_csv(tmp_path / "effective.csv")
    assert len(tab["p"]) == 129
    flat = np.abs(tab["p"]) <= 4 / np.pi - 1e-2
    assert np.max(np.abs(tab["value"][flat] - 1.0)) <= 1e-2
    doc = json.loads((tmp_path / "effective.json").read_text())
    assert doc["convex_along_lines"] == {"minimax": True}


def test_effective_integrable(tmp_path):
    assert main(["effective", "--spec", "integrable", "--out", str(tmp_path)]) == EXIT_OK
    tab = read_csv(tmp_path / "effective.csv")
    assert np.max(np.abs(tab["value"] - 0.5 * tab["p"] ** 2)) <= 1e-6


def test_effective_bump_two_methods(tmp_path):
    argv = ["effective", "--spec", "bump", "--p-range", "-1.5:1.5:17", "--method", "minimax,quadrature"]
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_OK
    tab = read_csv(tmp_path / "effective.csv")
    assert np.max(np.abs(tab["value_minimax"] - tab["value_quadrature"])) <= 1e-2
    doc = json.loads((tmp_path / "effective.json").read_text())
    assert doc["max_disagreement"] <= 1e-2


def test_effective_is_deterministic(tmp_path):
    argv = ["effective", "--spec", "pendulum", "--p-range", "0:2:5"]
    main(argv + ["--out", str(tmp_path / "a")])
    main(argv + ["--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "effective.json").read_text()
    assert a == (tmp_path / "b" / "effective.json").read_text()
    doc = json.loads(a)
    assert list(doc) == sorted(doc)


def test_effective_spec_file(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec_to_json(FiberOnly())))
    assert main(["effective", "--spec", str(path), "--p-range", "0:1:3", "--out", str(tmp_path)]) == EXIT_OK
    tab = read_csv(tmp_path / "effective.csv")
    assert np.allclose(tab["value"], [0.0, 0.125, 0.5], atol=1e-9)


@pytest.mark.parametrize(
    "argv",
    [
        ["effective", "--spec", "nosuch"],
        ["effective", "--method", "spectral"],
        ["effective", "--p-range", "1:2"],
        ["metrics", "--region", "ball"],
        ["frobnicate"],
    ],
)
def test_config_errors(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)] if argv[0] != "frobnicate" else argv) == EXIT_CONFIG


@pytest.mark.parametrize(
    "spec, region, gamma",
    [("pendulum", "sublevel:2", 1.0), ("integrable", "sublevel:1", 1.0), ("bump", "unit-ball", 0.05)],
)
def test_metrics(spec, region, gamma, tmp_path):
    assert main(["metrics", "--spec", spec, "--region", region, "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "metrics.json").read_text())
    assert doc["gamma_inf"] == pytest.approx(gamma, abs=2e-2)
    assert (tmp_path / "metrics.csv").read_text().startswith("quantity,value,lower,upper")


def test_counterexample_default(tmp_path, capsys):
    assert main(["counterexample", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "certificate.json").read_text())
    assert doc["verdict"] is True
    assert "verdict" in capsys.readouterr().out


def test_counterexample_insufficient(tmp_path):
    assert main(["counterexample", "--C", "0.05", "--out", str(tmp_path)]) == EXIT_SUFFICIENCY


def test_counterexample_delta_too_large(tmp_path):
    assert main(["counterexample", "--delta", "0.4", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_validate_subset(tmp_path, capsys):
    assert main(["validate", "--only", "fenchel,legendre", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "validation.json").read_text())
    assert doc["passed"] and [s["name"] for s in doc["suites"]] == ["fenchel", "legendre"]
    assert "PASS  fenchel" in capsys.readouterr().out
    assert main(["validate", "--only", "nosuch", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_effective_two_dimensional_spec_file(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec_to_json(FiberOnly(n=2))))
    assert main(["effective", "--spec", str(path), "--p-range", "-1:1:3", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "effective.json").read_text())
    res = doc["results"]["minimax"]
    p = np.array(res["p"])
    assert p.shape == (9, 2)
    assert np.allclose(res["value"], 0.5 * np.sum(p**2, axis=1), atol=1e-9)
