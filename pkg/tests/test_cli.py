import json

import numpy as np
import pytest

from greedy_colloc.cli import (
    ERROR_PROFILE_COLUMNS,
    EXPERIMENTS,
    ConfigError,
    build_parser,
    main,
    resolve_config,
    run_experiment,
)


class TestPresetTable:
    """Preset defaults pinned to the benchmark parameter set."""

    def test_spots_parameters(self):
        cfg = EXPERIMENTS["bs-spots-2d"]
        assert (cfg["a"], cfg["b"]) == (0.1, 0.9)
        assert cfg["alpha1"] == cfg["beta1"] == pytest.approx(5 / 12)
        assert cfg["alpha2"] == cfg["beta2"] == 5.0
        assert (cfg["D_v"], cfg["D_s"], cfg["q"], cfg["gamma"]) == (2.0, 2.0, 1 / 12, 30.0)
        assert (cfg["n_bulk"], cfg["n_surf"]) == (717, 100)
        assert cfg["dt"] == 0.005
        assert cfg["epsilon"] == 6.0

    def test_stripes_parameters(self):
        cfg = EXPERIMENTS["bs-stripes-2d"]
        assert (cfg["D_v"], cfg["D_s"], cfg["q"], cfg["gamma"]) == (5.0, 5.0, 0.1, 500.0)
        assert (cfg["n_bulk"], cfg["n_surf"]) == (2869, 200)
        assert cfg["dt"] == 0.001

    def test_torus_parameters(self):
        cfg = EXPERIMENTS["bs-torus"]
        assert (cfg["D_v"], cfg["D_s"], cfg["q"], cfg["gamma"]) == (3.0, 3.0, 1 / 12, 40.0)
        assert (cfg["n_bulk"], cfg["n_surf"]) == (2644, 1430)
        assert cfg["epsilon"] == 1.0

    def test_cyclide_parameters(self):
        cfg = EXPERIMENTS["bs-cyclide"]
        assert (cfg["D_v"], cfg["D_s"], cfg["gamma"]) == (6.0, 6.0, 30.0)
        assert (cfg["n_bulk"], cfg["n_surf"]) == (6760, 2956)
        assert cfg["epsilon"] == 4.0

    def test_ellipsoid_parameters(self):
        cfg = EXPERIMENTS["bs-ellipsoid"]
        assert (cfg["D_v"], cfg["D_s"], cfg["gamma"]) == (3.0, 3.0, 30.0)
        assert (cfg["n_bulk"], cfg["n_surf"]) == (3395, 1164)
        assert cfg["epsilon"] == 6.0

    def test_heat_presets(self):
        gauss = EXPERIMENTS["heat2d-gaussian"]
        assert gauss["n"] == 300 and gauss["epsilon"] == 1.0
        assert gauss["variant"] == "original"
        ms = EXPERIMENTS["heat2d-ms"]
        assert ms["mu"] == 6.0 and ms["scheme"] == "cn"
        assert EXPERIMENTS["heat3d-ms"]["n"] == 5000


class TestConfigResolution:
    def test_unknown_experiment(self):
        with pytest.raises(ConfigError):
            resolve_config("heat9d", {})

    def test_overrides_apply(self):
        cfg = resolve_config("heat2d-ms", {"n": 123, "dt": 0.5})
        assert cfg["n"] == 123 and cfg["dt"] == 0.5

    def test_empty_dt_list_rejected(self):
        with pytest.raises(ConfigError):
            resolve_config("heat2d-ms", {"dt_list": []})

    def test_cli_overrides_config_file(self, tmp_path):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"n": 50, "dt": 0.02}))
        parser = build_parser()
        args = parser.parse_args(["run", "heat2d-ms", "--config", str(conf), "--n", "80"])
        assert args.n == 80


def run_cli(args):
    return main(args)


class TestRunExperiment:
    def test_heat_run_outputs(self, tmp_path):
        rc = run_cli([
            "run", "heat2d-ms", "--dt", "0.02", "--n", "200",
            "--t-final", "0.1", "--out", str(tmp_path),
        ])
        assert rc == 0
        profile = (tmp_path / "error_profile.csv").read_text().splitlines()
        assert profile[0] == ",".join(ERROR_PROFILE_COLUMNS)
        assert len(profile) == 2
        assert (tmp_path / "greedy_log.csv").exists()
        assert (tmp_path / "snapshot.csv").exists()
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["experiment"] == "heat2d-ms"
        assert "wall_time_s" in manifest

    def test_rerun_byte_identical_csvs(self, tmp_path):
        args = ["run", "heat2d-ms", "--dt", "0.02", "--n", "150", "--t-final", "0.1"]
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli(args + ["--out", str(out1)]) == 0
        assert run_cli(args + ["--out", str(out2)]) == 0
        for name in ("error_profile.csv", "greedy_log.csv", "snapshot.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_gaussian_no_greedy_records_blowup(self, tmp_path):
        rc = run_cli([
            "run", "heat2d-gaussian", "--no-greedy", "--dt", "0.01", "--out", str(tmp_path),
        ])
        assert rc == 0  # an expected blow-up is a result, not an error
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["blowup"] is True

    def test_bs_run_outputs(self, tmp_path):
        rc = run_cli([
            "run", "bs-spots-2d", "--n-bulk", "150", "--n-surf", "40",
            "--dt", "0.01", "--t-final", "0.1", "--out", str(tmp_path),
        ])
        assert rc == 0
        for name in ("u.csv", "v.csv", "w.csv", "s.csv"):
            header = (tmp_path / name).read_text().splitlines()[0]
            assert header == "x,y,value"
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert len(manifest["cells"][0]["terminations"]) == 4

    def test_sweep_cardinality(self, tmp_path):
        rc = run_cli([
            "run", "heat2d-ms", "--dt-list", "0.02,0.01", "--n-list", "100,150,200",
            "--t-final", "0.1", "--out", str(tmp_path),
        ])
        assert rc == 0
        lines = (tmp_path / "error_profile.csv").read_text().splitlines()
        assert len(lines) == 1 + 6  # header + 2 x 3 cells

    def test_unknown_experiment_exit_code(self, tmp_path):
        assert run_cli(["run", "heat9d", "--out", str(tmp_path)]) == 2

    def test_empty_dt_list_exit_code(self, tmp_path):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"dt_list": []}))
        assert run_cli(["run", "heat2d-ms", "--config", str(conf)]) == 2

    def test_bad_config_file_exit_code(self, tmp_path):
        conf = tmp_path / "c.json"
        conf.write_text("{not json")
        assert run_cli(["run", "heat2d-ms", "--config", str(conf)]) == 2

    def test_unwritable_output_dir_exit_code(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        out = blocker / "sub"  # path through a regular file cannot be created
        assert run_cli(["run", "heat2d-ms", "--n", "60", "--dt", "0.02",
                        "--t-final", "0.04", "--out", str(out)]) == 2
