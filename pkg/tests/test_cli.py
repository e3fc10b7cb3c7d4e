import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from corrheston.cli import EXPERIMENTS, load_config, main, run_experiment


def write_config(tmp_path, name="config.yaml", **overrides):
    cfg = {
        "spot": 100.0,
        "r": 0.0,
        "q": 0.0,
        "beta": 2.0,
        "quote": {"tenor": 0.25, "atm_vol": 0.08, "rr25": 0.01, "bf25": 0.005},
        "eta_grid": [0.0, 0.25],
        "mc": {"paths": 2000, "steps_per_year": 252, "seed": 7},
        "output": str(tmp_path / "out.csv"),
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


class TestCliSurface:
    def test_list(self, capsys):
        assert main(["--list"]) == 0
        out = capsys.readouterr().out
        for name in EXPERIMENTS:
            assert name in out

    def test_no_subcommand_is_an_error(self, capsys):
        assert main([]) == 2
        err = capsys.readouterr().err
        assert "error:" in err

    def test_missing_config(self, tmp_path, capsys):
        code = main(["smile", "--config", str(tmp_path / "nope.yaml")])
        assert code == 2
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1
        assert err[0].startswith("error: config-missing")

    def test_entry_point_installed(self):
        proc = subprocess.run([sys.executable, "-m", "corrheston.cli", "--list"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "smile" in proc.stdout


class TestSmileExperiment:
    def test_runs_and_reproduces_byte_identically(self, tmp_path):
        cfg_path = write_config(
            tmp_path,
            smile={"theta": 0.01, "alpha": 0.3, "rho_bar": 0.0, "tau": 0.25,
                   "strikes": {"lo": 90.0, "hi": 110.0, "n": 5}},
        )
        assert main(["smile", "--config", str(cfg_path)]) == 0
        out = tmp_path / "out.csv"
        first = out.read_bytes()
        lines = first.decode().strip().splitlines()
        assert lines[0] == "eta,strike,implied_vol,status"
        assert len(lines) == 1 + 2 * 5
        assert main(["smile", "--config", str(cfg_path)]) == 0
        assert out.read_bytes() == first

    def test_smile_ordering_in_output(self, tmp_path):
        cfg_path = write_config(
            tmp_path,
            eta_grid=[0.0, 0.5],
            smile={"theta": 0.01, "alpha": 0.3, "rho_bar": 0.0, "tau": 0.25,
                   "strikes": [90.0, 100.0, 110.0]},
        )
        assert main(["smile", "--config", str(cfg_path)]) == 0
        rows = (tmp_path / "out.csv").read_text().strip().splitlines()[1:]
        table = {}
        for row in rows:
            eta, strike, vol, status = row.split(",")
            table[(float(eta), float(strike))] = float(vol)
            assert status == "ok"
        assert table[(0.5, 90.0)] > table[(0.0, 90.0)]
        assert table[(0.5, 110.0)] > table[(0.0, 110.0)]

    def test_manifest_written_and_finalized(self, tmp_path):
        cfg_path = write_config(
            tmp_path,
            eta_grid=[0.25],
            smile={"theta": 0.01, "alpha": 0.3, "rho_bar": 0.0, "tau": 0.25,
                   "strikes": [100.0]},
        )
        assert main(["smile", "--config", str(cfg_path), "--seed", "123"]) == 0
        manifest = json.loads((tmp_path / "out.csv.manifest.json").read_text())
        assert manifest["experiment"] == "smile"
        assert manifest["seed"] == 123
        assert manifest["status"] == "done"
        assert manifest["wall_clock_seconds"] > 0.0
        assert manifest["rows"] == 1
        assert manifest["config"]["quote"]["atm_vol"] == 0.08

    def test_empty_eta_grid_rejected(self, tmp_path, capsys):
        cfg_path = write_config(
            tmp_path,
            eta_grid=[],
            smile={"theta": 0.01, "alpha": 0.3, "rho_bar": 0.0, "tau": 0.25},
        )
        code = main(["smile", "--config", str(cfg_path)])
        assert code == 2
        assert capsys.readouterr().err.startswith("error: eta-grid")


class TestOtherExperiments:
    def test_calib_sweep(self, tmp_path):
        cfg_path = write_config(tmp_path, eta_grid=[0.0, 0.4])
        assert main(["calib-sweep", "--config", str(cfg_path)]) == 0
        rows = (tmp_path / "out.csv").read_text().strip().splitlines()
        assert rows[0].startswith("eta,theta,alpha,rho_bar,feller_ratio")
        alphas = [float(r.split(",")[2]) for r in rows[1:]]
        assert alphas[0] > alphas[1]

    def test_k_tau(self, tmp_path):
        cfg_path = write_config(
            tmp_path,
            k_tau={"theta": 0.01, "alpha": 0.3, "rho_bar": 0.0, "eta": 0.25,
                   "tenors": [0.25]},
        )
        assert main(["k-tau", "--config", str(cfg_path)]) == 0
        rows = (tmp_path / "out.csv").read_text().strip().splitlines()
        tenor, k, status = rows[1].split(",")
        assert status == "ok"
        assert 0.031 < float(k) < 0.043

    def test_rr_beta_empirical(self, tmp_path, rng):
        x = rng.normal(0.0, 0.005, 120)
        spots = 1.05 * np.exp(np.cumsum(x))
        rrs = 100.0 * 0.16 * np.cumsum(x)  # percentage points in the file
        lines = ["date,spot,rr"]
        import datetime as dt
        for i, (s, r) in enumerate(zip(spots, rrs)):
            lines.append(f"{dt.date(2025, 1, 1) + dt.timedelta(days=i)},{s},{r}")
        series_path = tmp_path / "series.csv"
        series_path.write_text("\n".join(lines) + "\n")
        cfg_path = write_config(tmp_path, rr_beta_empirical={"csv": str(series_path)})
        assert main(["rr-beta-empirical", "--config", str(cfg_path)]) == 0
        header, row = (tmp_path / "out.csv").read_text().strip().splitlines()
        beta = float(row.split(",")[0])
        assert beta == pytest.approx(0.16, abs=1e-9)

    def test_partial_sweep_writes_marker_row(self, tmp_path, capsys):
        cfg_path = write_config(
            tmp_path,
            k_tau={"theta": 0.01, "alpha": 0.3, "rho_bar": 0.0, "eta": 0.25,
                   "tenors": [0.25, -1.0]},
        )
        code = main(["k-tau", "--config", str(cfg_path)])
        assert code == 1
        rows = (tmp_path / "out.csv").read_text().strip().splitlines()
        assert rows[1].split(",")[2] == "ok"
        assert "error:" in rows[2]
        manifest = json.loads((tmp_path / "out.csv.manifest.json").read_text())
        assert manifest["status"] == "failed"

    @pytest.mark.slow
    def test_one_touch_sweep_small(self, tmp_path):
        cfg_path = write_config(
            tmp_path,
            eta_grid=[0.0, 0.3],
            barriers={"bs_prices": [0.5], "sides": ["up"]},
            mc={"paths": 4000, "steps_per_year": 252, "seed": 5},
        )
        assert main(["one-touch-sweep", "--config", str(cfg_path)]) == 0
        rows = (tmp_path / "out.csv").read_text().strip().splitlines()
        assert rows[0].startswith("eta,side,bs_price,barrier,price,price_heston,difference")
        assert len(rows) == 3
        zero_row = rows[1].split(",")
        assert float(zero_row[6]) == 0.0  # eta = 0 vs itself under common draws
        eta_row = rows[2].split(",")
        assert float(eta_row[4]) > 0.0
        assert eta_row[-1] == "ok"

    @pytest.mark.slow
    def test_knockout_sweep_small(self, tmp_path):
        cfg_path = write_config(
            tmp_path,
            eta_grid=[0.3],
            barriers={"bs_prices": [0.5], "sides": ["down"]},
            mc={"paths": 4000, "steps_per_year": 252, "seed": 5},
        )
        assert main(["knockout-sweep", "--config", str(cfg_path)]) == 0
        header, row = (tmp_path / "out.csv").read_text().strip().splitlines()
        cols = dict(zip(header.split(","), row.split(",")))
        assert cols["strike"] == "100.0"
        assert float(cols["price"]) > 0.0
        assert float(cols["price_heston"]) > 0.0
        assert cols["status"] == "ok"

    @pytest.mark.slow
    def test_volswap_sweep_small(self, tmp_path):
        cfg_path = write_config(
            tmp_path,
            eta_grid=[0.0, 0.4],
            volswap={"fixings_per_year": 250},
            mc={"paths": 4000, "steps_per_year": 252, "seed": 6},
        )
        assert main(["volswap-sweep", "--config", str(cfg_path)]) == 0
        rows = (tmp_path / "out.csv").read_text().strip().splitlines()
        assert len(rows) == 3
        base = dict(zip(rows[0].split(","), rows[1].split(",")))
        bumped = dict(zip(rows[0].split(","), rows[2].split(",")))
        assert 0.05 < float(base["fair_strike"]) < 0.12
        assert float(base["diff_to_heston"]) == 0.0
        assert float(bumped["alpha"]) < float(base["alpha"])

    @pytest.mark.slow
    def test_rr_beta_model_small(self, tmp_path):
        cfg_path = write_config(
            tmp_path,
            eta_grid=[0.4],
            rr_beta_model={"tenors": [0.25], "bump": 0.01},
        )
        assert main(["rr-beta-model", "--config", str(cfg_path)]) == 0
        header, row = (tmp_path / "out.csv").read_text().strip().splitlines()
        cols = dict(zip(header.split(","), row.split(",")))
        assert 0.01 < float(cols["k_tau"]) < 0.08
        assert float(cols["beta_rr"]) > 0.05

    def test_paths_override(self, tmp_path):
        cfg_path = write_config(
            tmp_path,
            smile={"theta": 0.01, "alpha": 0.3, "rho_bar": 0.0, "tau": 0.25,
                   "strikes": [100.0]},
        )
        cfg = load_config("smile", cfg_path, paths=4096)
        assert cfg.mc.paths == 4096
        assert run_experiment(cfg) == 0
        manifest = json.loads((tmp_path / "out.csv.manifest.json").read_text())
        assert manifest["paths"] == 4096
