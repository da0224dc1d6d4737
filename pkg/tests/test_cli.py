"""CLI behavior: exit codes, file outputs, determinism."""

import json

import numpy as np
import pytest

import blockmodel as bm
from blockmodel import io
from blockmodel.cli import main


@pytest.fixture
def params_file(tmp_path):
    path = tmp_path / "p.json"
    io.save_params(bm.planted_partition_params(2, 0.15, 5.0), path)
    return str(path)


def _generate(tmp_path, params_file, n=60, seed=7):
    out = tmp_path / "g.edges"
    labels = tmp_path / "z.txt"
    code = main([
        "generate", "--params", params_file, "--n", str(n),
        "--seed", str(seed), "--out", str(out), "--labels-out", str(labels),
    ])
    assert code == 0
    return out, labels


class TestGenerate:
    def test_writes_files(self, tmp_path, params_file):
        out, labels = _generate(tmp_path, params_file)
        g = io.read_graph(out)
        z = io.read_labels(labels)
        assert g.n == 60
        assert len(z) == 60

    def test_byte_identical_reruns(self, tmp_path, params_file):
        out1, lab1 = _generate(tmp_path, params_file)
        text1 = out1.read_bytes()
        ltext1 = lab1.read_bytes()
        out2, lab2 = _generate(tmp_path, params_file)
        assert out2.read_bytes() == text1
        assert lab2.read_bytes() == ltext1

    def test_missing_n_is_usage_error(self, tmp_path, params_file):
        with pytest.raises(SystemExit) as err:
            main(["generate", "--params", params_file, "--out", "x"])
        assert err.value.code == 2

    def test_malformed_json_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code = main([
            "generate", "--params", str(bad), "--n", "10",
            "--out", str(tmp_path / "g.edges"),
        ])
        assert code == 2


class TestFit:
    def test_variational_fit_json(self, tmp_path, params_file):
        out, _ = _generate(tmp_path, params_file)
        fit_path = tmp_path / "fit.json"
        code = main([
            "fit", "--method", "variational", "--graph", str(out),
            "--K", "2", "--restarts", "2", "--tol", "1e-8", "--seed", "1",
            "--out", str(fit_path),
        ])
        assert code == 0
        doc = json.loads(fit_path.read_text())
        assert doc["params"]["K"] == 2
        assert doc["converged"] is True

    def test_cgm_closed_form(self, tmp_path, params_file):
        out, labels = _generate(tmp_path, params_file)
        fit_path = tmp_path / "fit.json"
        code = main([
            "fit", "--method", "cgm", "--graph", str(out),
            "--labels", str(labels), "--K", "2", "--out", str(fit_path),
        ])
        assert code == 0
        doc = json.loads(fit_path.read_text())
        assert doc["iterations"] == 0

    def test_cgm_requires_labels(self, tmp_path, params_file):
        out, _ = _generate(tmp_path, params_file)
        code = main(["fit", "--method", "cgm", "--graph", str(out), "--K", "2"])
        assert code == 2

    def test_exact_ml_budget_exit_4(self, tmp_path, params_file):
        out, _ = _generate(tmp_path, params_file, n=30)
        code = main([
            "fit", "--method", "exact-ml", "--graph", str(out), "--K", "2",
        ])
        assert code == 4

    def test_profile_fit(self, tmp_path, params_file):
        out, _ = _generate(tmp_path, params_file)
        fit_path = tmp_path / "fit.json"
        code = main([
            "fit", "--method", "profile", "--graph", str(out), "--K", "2",
            "--seed", "3", "--out", str(fit_path),
        ])
        assert code == 0
        doc = json.loads(fit_path.read_text())
        assert "Qn" in doc and len(doc["labels"]) == 60

    def test_dc_fit(self, tmp_path, params_file):
        out, _ = _generate(tmp_path, params_file)
        fit_path = tmp_path / "fit.json"
        code = main([
            "fit", "--method", "dc", "--graph", str(out), "--U", "2",
            "--V", "1", "--restarts", "2", "--seed", "4", "--out", str(fit_path),
        ])
        assert code in (0, 3)
        doc = json.loads(fit_path.read_text())
        assert doc["dc"]["U"] == 2


class TestBootstrap:
    def test_rows_and_summary(self, tmp_path, params_file):
        out, _ = _generate(tmp_path, params_file, n=80)
        boot = tmp_path / "boot.csv"
        summary = tmp_path / "boot.json"
        code = main([
            "bootstrap", "--graph", str(out), "--K", "2", "--B", "5",
            "--seed", "3", "--out", str(boot), "--summary-out", str(summary),
        ])
        assert code == 0
        lines = boot.read_text().splitlines()
        assert len(lines) == 6  # header + B rows
        doc = json.loads(summary.read_text())
        cov = np.array(doc["cov_nu"])
        assert np.allclose(cov, cov.T)
        assert np.all(np.linalg.eigvalsh(cov) > -1e-12)

    def test_deterministic(self, tmp_path, params_file):
        out, _ = _generate(tmp_path, params_file, n=80)
        b1 = tmp_path / "b1.csv"
        b2 = tmp_path / "b2.csv"
        for path in (b1, b2):
            code = main([
                "bootstrap", "--graph", str(out), "--K", "2", "--B", "4",
                "--seed", "9", "--out", str(path),
            ])
            assert code == 0
        assert b1.read_bytes() == b2.read_bytes()


class TestExperiment:
    def test_sandwich_all_ok(self, tmp_path):
        csv = tmp_path / "s.csv"
        js = tmp_path / "s.json"
        code = main([
            "experiment", "sandwich", "--K", "2", "--n", "10", "--reps", "20",
            "--seed", "5", "--out-csv", str(csv), "--out-json", str(js),
        ])
        assert code == 0
        doc = json.loads(js.read_text())
        assert doc["ok"] == 20
        assert len(csv.read_text().splitlines()) == 21

    def test_unknown_experiment_exit_2(self):
        with pytest.raises(SystemExit) as err:
            main(["experiment", "nope", "--reps", "3"])
        assert err.value.code == 2

    def test_multithreaded_byte_identical(self, tmp_path):
        outs = []
        for threads, tag in [(1, "a"), (4, "b")]:
            csv = tmp_path / f"{tag}.csv"
            js = tmp_path / f"{tag}.json"
            code = main([
                "experiment", "identity", "--K", "2", "--n", "6",
                "--reps", "12", "--seed", "11", "--threads", str(threads),
                "--out-csv", str(csv), "--out-json", str(js),
            ])
            assert code == 0
            outs.append((csv.read_bytes(), js.read_bytes()))
        assert outs[0] == outs[1]

    def test_env_seed_fallback(self, tmp_path, monkeypatch, params_file):
        monkeypatch.setenv("BLOCKMODEL_SEED", "123")
        out1 = tmp_path / "g1.edges"
        code = main([
            "generate", "--params", params_file, "--n", "20", "--out", str(out1),
        ])
        assert code == 0
        out2 = tmp_path / "g2.edges"
        main([
            "generate", "--params", params_file, "--n", "20",
            "--seed", "123", "--out", str(out2),
        ])
        assert out1.read_bytes() == out2.read_bytes()
