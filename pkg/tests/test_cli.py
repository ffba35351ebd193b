"""Command-line surface: config parsing, exit codes, artefact layout and
manifest-driven reproducibility."""

import hashlib
import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from svarmsh.cli import main, read_config_file
from svarmsh.errors import ConfigError

EXAMPLE = Path(__file__).resolve().parents[1] / "src" / "svarmsh" / "data" / "example_bivariate.csv"


def write_config(path, out_dir, extra=""):
    path.write_text(f"""
# estimation settings
data.path = {EXAMPLE}
data.lags = 1
model.volatility = hmsh
model.regimes = 3
model.sparse = true
sampler.draws = 120
sampler.seed = 7
output.dir = {out_dir}
{extra}
""")
    return path


def digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def test_config_parser_types(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("""
# comment line
data.lags = 3
model.sparse = false
model.breakpoints = 10,20,30
prior.b_shape = 2.5
data.path = some/file.csv
""")
    values = read_config_file(cfg)
    assert values["data.lags"] == 3
    assert values["model.sparse"] is False
    assert values["model.breakpoints"] == [10, 20, 30]
    assert values["prior.b_shape"] == 2.5
    assert values["data.path"] == "some/file.csv"


def test_config_parser_rejects_garbage(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("just some words\n")
    with pytest.raises(ConfigError):
        read_config_file(cfg)


def test_estimate_produces_artifacts(tmp_path):
    cfg = write_config(tmp_path / "run.cfg", tmp_path / "out")
    assert main(["estimate", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    for name in ("posterior.npz", "summary.csv", "manifest_estimate.json"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest_estimate.json").read_text())
    assert manifest["command"] == "estimate"
    assert manifest["seed"] == 7
    assert manifest["version"].startswith("svarmsh-")
    assert "posterior.npz" in manifest["outputs"]


def test_estimate_does_not_mutate_input(tmp_path):
    before = digest(EXAMPLE)
    cfg = write_config(tmp_path / "run.cfg", tmp_path / "out")
    main(["estimate", "--config", str(cfg)])
    assert digest(EXAMPLE) == before


def test_invalid_regime_count_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path / "run.cfg", tmp_path / "out",
                       extra="model.regimes = 0")
    assert main(["estimate", "--config", str(cfg)]) == 2
    assert "regimes" in capsys.readouterr().err


def test_unknown_key_is_config_error(tmp_path):
    cfg = write_config(tmp_path / "run.cfg", tmp_path / "out", extra="sampler.dras = 5")
    assert main(["estimate", "--config", str(cfg)]) == 2


def test_missing_data_is_data_error(tmp_path):
    cfg = write_config(tmp_path / "run.cfg", tmp_path / "out")
    assert main(["estimate", "--config", str(cfg), "--data", "no/such.csv"]) == 3


def test_estimate_rerun_bit_identical(tmp_path):
    cfg = write_config(tmp_path / "run.cfg", tmp_path / "out1")
    main(["estimate", "--config", str(cfg)])
    main(["estimate", "--config", str(cfg), "--out", str(tmp_path / "out2")])
    assert digest(tmp_path / "out1" / "posterior.npz") == digest(tmp_path / "out2" / "posterior.npz")
    assert digest(tmp_path / "out1" / "summary.csv") == digest(tmp_path / "out2" / "summary.csv")


def test_rerun_from_manifest_bit_identical(tmp_path):
    cfg = write_config(tmp_path / "run.cfg", tmp_path / "out")
    main(["estimate", "--config", str(cfg)])
    first = {name: digest(tmp_path / "out" / name)
             for name in ("posterior.npz", "summary.csv")}
    manifest = tmp_path / "out" / "manifest_estimate.json"
    assert main(["estimate", "--from-manifest", str(manifest)]) == 0
    for name, checksum in first.items():
        assert digest(tmp_path / "out" / name) == checksum


def test_verify_and_irf_pipeline(tmp_path):
    cfg = write_config(tmp_path / "run.cfg", tmp_path / "out")
    main(["estimate", "--config", str(cfg)])
    assert main(["verify", "--config", str(cfg)]) == 0
    sddr = pd.read_csv(tmp_path / "out" / "sddr.csv")
    assert list(sddr["shock"]) == [0, 1]
    assert np.all(np.isfinite(sddr["log_sddr"]))

    assert main(["irf", "--config", str(cfg), "--set", "irf.horizon=4"]) == 0
    irf = pd.read_csv(tmp_path / "out" / "irf.csv")
    assert set(irf.columns) == {"horizon", "variable", "shock", "mean",
                                "hpd_lower", "hpd_upper"}
    assert irf["horizon"].max() == 4
    fevd = pd.read_csv(tmp_path / "out" / "fevd.csv", index_col=0)
    np.testing.assert_allclose(fevd.sum(axis=1), 1.0, atol=1e-6)
    assert (tmp_path / "out" / "sd_path.csv").exists()


def test_verify_without_posterior_is_data_error(tmp_path):
    cfg = write_config(tmp_path / "run.cfg", tmp_path / "fresh")
    assert main(["verify", "--config", str(cfg)]) == 3


def test_simulate_reject_desk_layout(tmp_path):
    out = tmp_path / "mc"
    code = main(["simulate-reject", "--out", str(out), "--seed", "3",
                 "--set", "mc.replications=20", "--set", "mc.t_set=60",
                 "--set", "mc.draws=150", "--threads", "1"])
    assert code == 0
    rates = pd.read_csv(out / "rejection_rates.csv")
    null_row = rates[rates["homoskedastic_shocks"] == "1 & 2"].iloc[0]
    assert null_row["q_rate"] == 0.05
    assert set(rates["homoskedastic_shocks"]) == {"1 & 2", "none"}


def test_simulate_rmse_desk_layout(tmp_path):
    out = tmp_path / "mc"
    code = main(["simulate-rmse", "--out", str(out), "--seed", "3",
                 "--set", "mc.replications=2", "--set", "mc.t_set=60",
                 "--set", "mc.draws=150", "--threads", "1"])
    assert code == 0
    ratio = pd.read_csv(out / "rmse_b0_ratio.csv")
    assert "hmsh20" in ratio.columns and "hmsh2" in ratio.columns
    np.testing.assert_allclose(ratio["hmsh20"], 1.0, atol=1e-12)


def test_forecast_command(tmp_path):
    cfg = write_config(tmp_path / "run.cfg", tmp_path / "out", extra="""
forecast.models = hmsh3+sparse
forecast.first_origin = 290
forecast.draws = 60
""")
    assert main(["forecast", "--config", str(cfg)]) == 0
    summary = pd.read_csv(tmp_path / "out" / "forecast_summary.csv")
    assert {"lps_diff", "rmsfe_ratio", "mafe_ratio"} <= set(summary.columns)
    assert (tmp_path / "out" / "forecast_log_scores.csv").exists()


def test_forecast_command_exh_comparator_with_switching_primary(tmp_path):
    # breakpoints configure the exh member of forecast.models even though the
    # primary model keys describe a Markov-switching specification
    cfg = write_config(tmp_path / "run.cfg", tmp_path / "out", extra="""
model.breakpoints = 150
forecast.models = hmsh2,exh
forecast.benchmark = exh
forecast.first_origin = 293
forecast.draws = 60
""")
    assert main(["forecast", "--config", str(cfg)]) == 0
    summary = pd.read_csv(tmp_path / "out" / "forecast_summary.csv", index_col=0)
    assert summary.loc["exh", "rmsfe_ratio"] == 1.0
