import csv
import json
import subprocess
import sys

import pytest

from nde.cli import DEFAULTS, main
from nde.degree_dist import DegreeDistribution, save_pair

R = DegreeDistribution.regular
FAST_TRAIN = {"epochs": 3, "d_train": 300, "d_test": 100}


def _pair(tmp_path, lam, rho, name="pair.json"):
    p = tmp_path / name
    save_pair(p, lam, rho)
    return str(p)


def _rows(path):
    return list(csv.reader(open(path)))


def _config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


class TestThreshold:
    @pytest.mark.parametrize("lam, rho, expected", [(3, 6, 0.4297), (4, 8, 0.3837)])
    def test_regular(self, tmp_path, capsys, lam, rho, expected):
        out = tmp_path / "o"
        assert main(["threshold", "--dist", _pair(tmp_path, R(lam), R(rho)),
                     "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert "eps_bp=" in printed
        rows = _rows(out / "threshold.csv")
        assert rows[0] == ["eps_sh", "eps_bp", "delta"]
        assert abs(float(rows[1][1]) - expected) <= 5e-3
        printed_bp = float(printed.split("eps_bp=")[1].split()[0])
        assert printed_bp == pytest.approx(float(rows[1][1]), abs=5e-5)

    def test_rate_zero_warns(self, tmp_path, capsys):
        out = tmp_path / "o"
        assert main(["threshold", "--dist", _pair(tmp_path, R(2), R(2)), "--out", str(out)]) == 0
        captured = capsys.readouterr()
        assert "warning" in captured.err and "eps_bp=1.0000" in captured.out
        # supremum approached from below by bisection
        assert float(_rows(out / "threshold.csv")[1][1]) == pytest.approx(1.0, abs=1e-9)

    def test_json_format(self, tmp_path):
        out = tmp_path / "o"
        assert main(["threshold", "--dist", _pair(tmp_path, R(3), R(6)), "--out", str(out),
                     "--format", "json"]) == 0
        doc = json.loads((out / "threshold.json").read_text())
        assert set(doc[0]) == {"eps_sh", "eps_bp", "delta"}

    def test_invalid_distribution(self, tmp_path):
        bad = _pair(tmp_path, DegreeDistribution({2: 0.7, 3: 0.7}), R(6))
        assert main(["threshold", "--dist", bad, "--out", str(tmp_path / "o")]) == 1

    def test_missing_distribution(self, tmp_path):
        assert main(["threshold", "--out", str(tmp_path / "o")]) == 1


class TestExitCodes:
    def test_unknown_section(self, tmp_path):
        cfg = _config(tmp_path, {"bogus": {}})
        assert main(["threshold", "--config", cfg]) == 1

    def test_bad_train_value(self, tmp_path):
        cfg = _config(tmp_path, {"train": {"learning_rate": -1}, "output": {"dir": str(tmp_path)}})
        assert main(["train", "--config", cfg]) == 1

    def test_usage_error_subprocess(self):
        proc = subprocess.run([sys.executable, "-m", "nde.cli", "nosuchcommand"],
                              capture_output=True, text=True)
        assert proc.returncode == 1

    def test_divergence_is_runtime_failure(self, tmp_path):
        cfg = _config(tmp_path, {"train": {**FAST_TRAIN, "optimizer": "sgd",
                                           "learning_rate": 1e6}})
        assert main(["train", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_construction_failure(self, tmp_path):
        # 20 variables of degree 3 on 10 checks cannot avoid 4-cycles
        cfg = _config(tmp_path, {"code": {"k": 10, "n": 20}, "build": {"swap_budget_factor": 5}})
        assert main(["build", "--config", cfg, "--dist", _pair(tmp_path, R(3), R(6)),
                     "--out", str(tmp_path / "o")]) == 2


class TestTrain:
    def test_outputs_and_manifest(self, tmp_path):
        out = tmp_path / "o"
        cfg = _config(tmp_path, {"train": FAST_TRAIN})
        assert main(["train", "--config", cfg, "--out", str(out), "--seed", "7"]) == 0
        for name in ("best_pair.json", "history.csv", "restarts.csv", "manifest.json"):
            assert (out / name).exists()
        man = json.loads((out / "manifest.json").read_text())
        assert man["command"] == "train" and man["config"]["train"]["seed"] == 7
        for key in ("epochs", "d_train", "d_test", "learning_rate", "layers", "o_low",
                    "lambda_max", "rho_max"):
            assert key in man["config"]["train"]
        for key in ("k", "rate", "density"):
            assert key in man["config"]["code"]
        assert man["version"]

    def test_default_manifest_echoes_defaults(self, tmp_path):
        out = tmp_path / "o"
        cfg = _config(tmp_path, {"train": FAST_TRAIN})
        main(["train", "--config", cfg, "--out", str(out)])
        train_cfg = json.loads((out / "manifest.json").read_text())["config"]["train"]
        for key in ("learning_rate", "layers", "o_low", "lambda_max", "rho_max", "batch_size"):
            assert train_cfg[key] == DEFAULTS["train"][key]
        assert DEFAULTS["train"]["epochs"] == 200
        assert DEFAULTS["train"]["d_train"] == 11220 and DEFAULTS["train"]["d_test"] == 2783

    def test_same_seed_identical_history(self, tmp_path):
        cfg = _config(tmp_path, {"train": FAST_TRAIN})
        main(["train", "--config", cfg, "--out", str(tmp_path / "a")])
        main(["train", "--config", cfg, "--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "history.csv").read_bytes()
        assert a == (tmp_path / "b" / "history.csv").read_bytes()

    def test_rerun_from_manifest(self, tmp_path):
        cfg = _config(tmp_path, {"train": FAST_TRAIN})
        main(["train", "--config", cfg, "--out", str(tmp_path / "a")])
        main(["train", "--config", str(tmp_path / "a" / "manifest.json"),
              "--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "history.csv").read_bytes()
        assert a == (tmp_path / "b" / "history.csv").read_bytes()


class TestFigureData:
    def test_bifurcation(self, tmp_path):
        out = tmp_path / "o"
        cfg = _config(tmp_path, {"bifurcation": {"points": 11, "trace_eps": [0.3]}})
        assert main(["bifurcation", "--config", cfg, "--dist", _pair(tmp_path, R(3), R(6)),
                     "--out", str(out)]) == 0
        rows = _rows(out / "bifurcation.csv")
        assert rows[0] == ["epsilon", "x_final"] and len(rows) == 12
        assert float(rows[1][0]) == 0.0 and float(rows[1][1]) == 0.0
        trace = [float(r[1]) for r in _rows(out / "trace_eps0.3000.csv")[1:]]
        assert all(b <= a for a, b in zip(trace, trace[1:])) and trace[-1] < 1e-6

    def test_graphical(self, tmp_path):
        out = tmp_path / "o"
        assert main(["graphical", "--dist", _pair(tmp_path, R(3), R(6)),
                     "--out", str(out)]) == 0
        rows = _rows(out / "graphical.csv")
        assert rows[0] == ["epsilon", "x", "delta"]
        assert "." in rows[1][1] and "," not in rows[1][1]


class TestGraphAndBer:
    def test_build_then_ber_from_alist(self, tmp_path):
        out = tmp_path / "g"
        cfg = _config(tmp_path, {"code": {"k": 128, "rate": 0.5}})
        assert main(["build", "--config", cfg, "--dist", _pair(tmp_path, R(3), R(6)),
                     "--out", str(out)]) == 0
        assert _rows(out / "edges.csv")[0] == ["check_index", "var_index"]
        ber_cfg = _config(tmp_path, {"channel": {"epsilon": [0.0, 0.3], "frames": 50}},
                          "ber.json")
        assert main(["ber", "--config", ber_cfg, "--alist", str(out / "H.alist"),
                     "--out", str(tmp_path / "b")]) == 0
        rows = _rows(tmp_path / "b" / "ber.csv")
        assert rows[0] == ["kind", "param", "frames", "bit_errors", "frame_errors", "ber"]
        assert rows[1][:2] == ["bec", "0.0000"] and float(rows[1][5]) == 0.0

    def test_awgn(self, tmp_path):
        cfg = _config(tmp_path, {"code": {"k": 128, "rate": 0.5},
                                 "channel": {"kind": "awgn", "ebn0_db": [3.0], "frames": 20}})
        assert main(["ber", "--config", cfg, "--dist", _pair(tmp_path, R(3), R(6)),
                     "--out", str(tmp_path / "o")]) == 0
        assert _rows(tmp_path / "o" / "ber.csv")[1][0] == "awgn"


def test_compare_small(tmp_path):
    cfg = _config(tmp_path, {"train": {"epochs": 2, "d_train": 200, "d_test": 100},
                             "compare": {"dimensions": [6], "diffe_epochs": 2,
                                         "depths": [2, 4]}})
    assert main(["compare", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = _rows(tmp_path / "o" / "compare.csv")
    assert rows[0] == ["method", "dimension", "wall_seconds", "final_delta"]
    assert {r[0] for r in rows[1:]} == {"nde", "diffe"}
    assert _rows(tmp_path / "o" / "unroll_timing.csv")[0] == ["layers", "seconds"]
