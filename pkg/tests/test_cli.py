import json
import math

import numpy as np
import pytest

import levymaps as lm
from levymaps.cli import run

STABLE_SPEC = {
    "dimension": 1,
    "A": [[0.0]],
    "gamma": [0.0],
    "levy": {
        "directions": [
            {"xi": [1.0], "weight": 1.0, "radial": {"kind": "power-law", "alpha": 0.7, "scale": 1.0}},
            {"xi": [-1.0], "weight": 1.0, "radial": {"kind": "power-law", "alpha": 0.7, "scale": 1.0}},
        ]
    },
}

GAUSS_SPEC = {"dimension": 1, "A": [[1.0]], "gamma": [0.0]}


@pytest.fixture
def stable_file(tmp_path):
    path = tmp_path / "stable.json"
    path.write_text(json.dumps(STABLE_SPEC))
    return str(path)


@pytest.fixture
def gauss_file(tmp_path):
    path = tmp_path / "gauss.json"
    path.write_text(json.dumps(GAUSS_SPEC))
    return str(path)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


class TestClassifyVerb:
    def test_stable_passes_all_classes(self, stable_file, tmp_path, capsys):
        out = tmp_path / "verdict.json"
        assert run(["classify", stable_file, "--out", str(out)]) == 0
        payload = read_json(out)
        assert all(payload["classes"]["verdicts"][c] == "pass" for c in "ublgt")
        assert payload["seed"] == 42


class TestMapVerb:
    def test_double_upsilon_on_gaussian(self, gauss_file, tmp_path):
        out = tmp_path / "mapped.json"
        code = run(["map", gauss_file, "--kernel", "upsilon", "--iterations", "2", "--out", str(out)])
        assert code == 0
        payload = read_json(out)
        assert payload["A"][0][0] == pytest.approx(4.0, rel=1e-9)
        assert payload["provenance"] == ["upsilon", "upsilon"]

    def test_round_trip_equality(self, tmp_path):
        spec = {
            "dimension": 1, "A": [[0.2]], "gamma": [0.1],
            "levy": {"directions": [{"xi": [1.0], "weight": 1.0,
                                     "radial": {"kind": "atom", "atoms": [[1.0, 1.0]]}}]},
        }
        src = tmp_path / "in.json"
        src.write_text(json.dumps(spec))
        out = tmp_path / "mapped.json"
        assert run(["map", str(src), "--kernel", "upsilon", "--out", str(out)]) == 0
        first = read_json(out)
        reparsed = lm.triplet_from_dict(first)
        again = lm.triplet_to_dict(reparsed)
        assert again["A"] == first["A"]
        assert again["gamma"] == first["gamma"]
        assert again["levy"] == first["levy"]

    def test_radial_csv(self, gauss_file, tmp_path):
        spec = dict(STABLE_SPEC)
        src = tmp_path / "in.json"
        src.write_text(json.dumps(spec))
        csv_path = tmp_path / "radial.csv"
        out = tmp_path / "mapped.json"
        assert run(["map", str(src), "--kernel", "u", "--out", str(out), "--radial-csv", str(csv_path)]) == 0
        header, *rows = csv_path.read_text().strip().splitlines()
        assert header == "direction_index,u,density"
        assert len(rows) > 1000

    def test_custom_kernel_expression(self, gauss_file, tmp_path):
        out = tmp_path / "mapped.json"
        code = run(["map", gauss_file, "--kernel-p", "exp(-u)", "--t0", "40", "--out", str(out)])
        assert code == 0
        assert read_json(out)["A"][0][0] == pytest.approx(2.0, abs=1e-6)


class TestVerifyVerb:
    def test_psi_identity(self, tmp_path, capsys):
        spec = {
            "dimension": 1, "A": [[0.0]], "gamma": [0.0],
            "levy": {"directions": [{"xi": [1.0], "weight": 1.0,
                                     "radial": {"kind": "tempered", "alpha": 0.5, "scale": 1.0, "beta": 1.0}}]},
        }
        src = tmp_path / "in.json"
        src.write_text(json.dumps(spec))
        assert run(["verify", str(src), "--identity", "psi"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["max_deviation"] < 1e-6

    def test_commutativity(self, tmp_path, capsys):
        spec = {
            "dimension": 1, "A": [[0.0]], "gamma": [0.0],
            "levy": {"directions": [{"xi": [1.0], "weight": 1.0,
                                     "radial": {"kind": "atom", "atoms": [[1.0, 1.0]]}}]},
        }
        src = tmp_path / "in.json"
        src.write_text(json.dumps(spec))
        assert run(["verify", str(src), "--identity", "commutativity", "--kernels", "u,upsilon"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["max_deviation"] < 1e-6

    def test_log_moment(self, tmp_path, capsys):
        spec = {
            "dimension": 1, "A": [[0.0]], "gamma": [0.0],
            "levy": {"directions": [{"xi": [1.0], "weight": 1.0,
                                     "radial": {"kind": "atom", "atoms": [[math.e, 1.0]]}}]},
        }
        src = tmp_path / "in.json"
        src.write_text(json.dumps(spec))
        assert run(["verify", str(src), "--identity", "log-moment", "--m", "0"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["lhs"] == pytest.approx(1.0, abs=1e-8)

    def test_fixed_point(self, stable_file, capsys):
        assert run(["verify", stable_file, "--identity", "fixed-point",
                    "--kernels", "upsilon", "--alpha", "0.7"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["passed"]
        assert payload["kappa"] == pytest.approx(math.gamma(1.7), rel=1e-8)


class TestStableVerb:
    def test_build_symmetric(self, tmp_path):
        out = tmp_path / "stable.json"
        code = run(["stable", "--alpha", "1.0", "--direction", "1.0", "--direction", "-1.0",
                    "--weight", "1.0", "--weight", "1.0", "--out", str(out)])
        assert code == 0
        tr = lm.triplet_from_dict(read_json(out))
        assert tr.nu is not None
        assert tr.nu.rays[0].radial.alpha == 1.0


class TestBernsteinVerb:
    def test_stable_input(self, stable_file, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert run(["bernstein", stable_file, "--out-prefix", "fitout"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["directions"][0]["residual"] < 1e-3
        gamma_rows = (tmp_path / "fitout_gamma.csv").read_text().strip().splitlines()
        assert gamma_rows[0] == "direction_index,alpha,mass"
        assert len(gamma_rows) > 1


class TestSimulateVerb:
    def test_small_run(self, gauss_file, tmp_path, capsys):
        out = tmp_path / "report.json"
        samples = tmp_path / "samples.csv"
        code = run(["simulate", gauss_file, "--kernel", "u", "--samples", "5000",
                    "--steps", "64", "--out", str(out), "--samples-out", str(samples)])
        assert code == 0
        payload = read_json(out)
        assert payload["within_radius"]
        assert payload["seed"] == 42
        assert len(samples.read_text().strip().splitlines()) == 5000


class TestExitCodes:
    def test_unknown_verb(self):
        assert run(["frobnicate", "x.json"]) == 2

    def test_unknown_flag(self, gauss_file):
        assert run(["classify", gauss_file, "--bogus"]) == 2

    def test_bad_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run(["classify", str(bad)]) == 2

    def test_schema_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"dimension": 1}))
        assert run(["classify", str(bad)]) == 2

    def test_domain_error(self, tmp_path):
        # shrink mapping needs a finite log moment; this density diverges
        grid = np.geomspace(1e-6, 1e6, 512)
        vals = np.where(grid > math.e, 1.0 / (grid * np.log(np.maximum(grid, 2.0)) ** 2), 0.0)
        spec = {
            "dimension": 1, "A": [[0.0]], "gamma": [0.0],
            "levy": {"directions": [{"xi": [1.0], "weight": 1.0,
                                     "radial": {"kind": "grid", "r": grid.tolist(),
                                                "density": vals.tolist()}}]},
        }
        src = tmp_path / "in.json"
        src.write_text(json.dumps(spec))
        assert run(["map", str(src), "--kernel", "phi"]) == 1

    def test_gaussian_has_no_levy_measure(self, gauss_file):
        assert run(["classify", gauss_file]) == 1
