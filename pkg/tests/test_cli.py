"""Experiment runner: commands, config handling, determinism, exit codes."""

import json

import numpy as np
import pytest

from waveassim.cli import (
    PRESETS,
    ExperimentConfig,
    main,
    resolve_config,
    run_assimilation,
    setup_experiment,
)

# Small, fast configuration shared by the command tests.
TINY = [
    "--N", "16",
    "--tau", str(1.0 / 64.0),
    "--n-steps", "640",
    "--T-window", "2.0",
    "--modes", "3:1:1",
    "--window-start", "64",
    "--window-end", "192",
    "--window-count", "3",
]


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [list(map(float, line.split(","))) for line in fh if line.strip()]
    return header, np.array(rows)


class TestConfigResolution:
    def test_presets_are_valid(self):
        for name in PRESETS:
            cfg = resolve_config(preset=name)
            assert cfg.name == name

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            resolve_config(preset="nope")

    def test_defaults_valid(self):
        cfg = ExperimentConfig()
        assert cfg.N == 30 and cfg.order == 2

    def test_config_file_and_overrides(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"N": 20, "eta": 2.0, "n_steps": 500, "T_window": 1.0,
                                    "window_start": 100, "window_end": 200}))
        cfg = resolve_config(config_path=path, overrides={"eta": 5.0})
        assert cfg.N == 20
        assert cfg.eta == 5.0  # flag wins over file

    def test_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"M": 20}))
        with pytest.raises(ValueError):
            resolve_config(config_path=path)

    def test_ic_switch_clears_modes(self):
        cfg = resolve_config(preset="single-mode-second", overrides={"ic": "polyexp"})
        assert cfg.modes is None and cfg.ic == "polyexp"

    def test_modes_switch_clears_ic(self):
        cfg = resolve_config(preset="rich-spectrum", overrides={"modes": ((2, 1, 1),)})
        assert cfg.ic is None and cfg.modes == ((2.0, 1.0, 1.0),)

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            ExperimentConfig(order=3)
        with pytest.raises(ValueError):
            ExperimentConfig(T_window=1e9)
        with pytest.raises(ValueError):
            ExperimentConfig(modes=None, ic=None)
        with pytest.raises(ValueError):
            ExperimentConfig(ic="unknown", modes=None)


class TestForward:
    def test_writes_error_series(self, tmp_path):
        rc = main(["forward", "--out", str(tmp_path)] + TINY)
        assert rc == 0
        header, xi = read_csv(tmp_path / "xi.csv")
        assert header == ["t", "xi"]
        assert xi.shape == (641, 2)
        assert xi[0, 1] < 1e-20  # twin start
        header, xt = read_csv(tmp_path / "error_xt.csv")
        assert header == ["t", "x", "du"]
        assert {round(v, 12) for v in xt[:17, 1]} == {round(i / 16, 12) for i in range(17)}

    def test_deterministic_outputs(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out in (a, b):
            assert main(["forward", "--out", str(out)] + TINY) == 0
        assert (a / "xi.csv").read_bytes() == (b / "xi.csv").read_bytes()
        assert (a / "error_xt.csv").read_bytes() == (b / "error_xt.csv").read_bytes()


class TestAssimilate:
    def test_result_payload(self, tmp_path):
        rc = main(["assimilate", "--out", str(tmp_path)] + TINY)
        assert rc == 0
        payload = json.loads((tmp_path / "result.json").read_text())
        assert payload["termination"] in ("gradient", "max_iters", "line_search_failed")
        assert payload["cost_history"][-1] < payload["cost_history"][0]
        assert all(np.diff(payload["cost_history"]) <= 0.0)
        # both recovered and predicted coefficients are reported
        assert "3" in payload["predicted"]
        assert len(payload["recovered"]["alpha_u"]) == 2
        assert payload["predicted"]["3"]["c_u"] > 1.0
        header, xi = read_csv(tmp_path / "xi.csv")
        assert xi.shape[0] == 641

    def test_deterministic(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out in (a, b):
            assert main(["assimilate", "--out", str(out)] + TINY) == 0
        assert (a / "result.json").read_bytes() == (b / "result.json").read_bytes()
        assert (a / "xi.csv").read_bytes() == (b / "xi.csv").read_bytes()


class TestSweep:
    def test_alphas_and_kernel_line(self, tmp_path):
        rc = main(["sweep", "--out", str(tmp_path)] + TINY)
        assert rc == 0
        header, rows = read_csv(tmp_path / "alphas.csv")
        assert header[:3] == ["window_steps", "T_window", "cost"]
        assert rows.shape == (3, 3 + 8)
        assert set(rows[:, 0]) == {64.0, 128.0, 192.0}
        payload = json.loads((tmp_path / "kernel_line.json").read_text())
        assert payload["n_windows"] == 3
        assert "slope" in payload["kernel_line"]


class TestGradcheck:
    def test_healthy_configuration_passes(self, tmp_path, capsys):
        rc = main(["gradcheck", "--out", str(tmp_path)] + TINY)
        out = capsys.readouterr().out
        assert rc == 0
        assert "dot-product test" in out
        assert "worst relative error" in out
        assert "ok" in out.splitlines()[-1]

    def test_reports_all_components(self, tmp_path, capsys):
        rc = main(["gradcheck", "--out", str(tmp_path), "--J", "2"] + TINY)
        out = capsys.readouterr().out
        assert rc == 0
        assert sum(1 for line in out.splitlines() if line.strip().startswith(tuple("0123456789"))) >= 12


class TestDispersion:
    def test_tables_and_markers(self, tmp_path):
        rc = main(["dispersion", "--out", str(tmp_path), "--preset", "single-mode-second"])
        assert rc == 0
        header, rows = read_csv(tmp_path / "beta.csv")
        assert header == ["k", "tau_over_h", "beta2_minus_1", "beta4_minus_1"]
        half = rows[np.isclose(rows[:, 1], 0.5)]
        assert half.shape[0] == 1
        assert abs(half[0, 2]) == 0.0  # beta2 - 1 exactly zero at tau = h/2
        ref = rows[np.isclose(rows[:, 1], 0.25)]
        assert ref[0, 2] == pytest.approx(3.09e-3, abs=1e-5)
        markers = json.loads((tmp_path / "markers.json").read_text())
        assert markers["singularity_kappa_over_pi"] == pytest.approx(14.026, abs=0.01)
        assert markers["modes"]["3"]["c_u"] == pytest.approx(1.048, abs=1e-3)

    def test_deterministic(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out in (a, b):
            assert main(["dispersion", "--out", str(out), "--preset", "two-modes"]) == 0
        assert (a / "beta.csv").read_bytes() == (b / "beta.csv").read_bytes()
        assert (a / "markers.json").read_bytes() == (b / "markers.json").read_bytes()


class TestExitCodes:
    def test_bad_config_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["forward", "--config", str(bad), "--out", str(tmp_path)]) == 1

    def test_contract_violation(self, tmp_path):
        assert main(["forward", "--out", str(tmp_path), "--order", "3"] + TINY[:-2]) == 1

    def test_bad_modes_syntax(self, tmp_path):
        assert main(["forward", "--out", str(tmp_path), "--modes", "3:1"]) == 1


class TestExperimentHelpers:
    def test_setup_experiment_twin_start(self):
        cfg = resolve_config(overrides={"n_steps": 50, "T_window": 0.25})
        exp = setup_experiment(cfg)
        np.testing.assert_array_equal(exp.ic.u, exp.obs.u[0])
        np.testing.assert_array_equal(exp.ic.p, exp.obs.p[0])

    def test_rich_spectrum_modes(self):
        cfg = resolve_config(preset="rich-spectrum", overrides={"n_steps": 2400})
        exp = setup_experiment(cfg)
        ks = [m.k for m in exp.modes]
        assert ks[0] == 0 and ks[-1] == 29
        assert exp.modes[0].b == pytest.approx(0.5, abs=1e-12)

    def test_run_assimilation_improves_cost(self):
        cfg = resolve_config(overrides={"N": 16, "tau": 1.0 / 64.0, "n_steps": 320,
                                        "T_window": 2.0})
        exp = setup_experiment(cfg)
        result, bs = run_assimilation(exp)
        assert result.f < result.cost_history[0]
        assert bs.J == 1
