"""Command-line entry points.

Configuration lives in a flat key=value text file with dotted keys
(``sampler.draws = 4000``); command-line ``--set key=value`` flags override
file values, and the shortcut flags ``--data``, ``--out``, ``--seed`` and
``--threads`` override the corresponding keys. Every command writes a
``manifest.json`` (command, resolved config, seed, version, wall time) beside
its outputs; re-running via ``--from-manifest`` reproduces every numeric
output byte for byte.

Exit codes: 0 success, 2 malformed configuration, 3 data errors, 4 numerical
failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, forecast, inference, persist, simulate
from .errors import ConfigError, DataError, NumericalError
from .gibbs import SamplerConfig, run_sampler
from .model import PriorSpec, VolatilitySpec, build_regressors

_FLOAT_FORMAT = "%.12g"

DEFAULTS = {
    "data.path": None,
    "data.lags": 1,
    "data.deterministic": "const",
    "model.volatility": "hmsh",
    "model.regimes": 2,
    "model.sparse": False,
    "model.breakpoints": [],
    "prior.nonstationary": True,
    "prior.b_shape": None,
    "prior.transition_diag_boost": 0.0,
    "sampler.draws": 2000,
    "sampler.burn_in": None,
    "sampler.thinning": 1,
    "sampler.seed": 0,
    "output.dir": "svarmsh_run",
    "verify.shocks": "all",
    "irf.horizon": 20,
    "irf.variable": 0,
    "forecast.models": ["hmsh2"],
    "forecast.benchmark": None,
    "forecast.first_origin": None,
    "forecast.draws": 600,
    "mc.preset": "desk",
    "mc.replications": None,
    "mc.t_set": None,
    "mc.dgps": None,
    "mc.models": None,
    "mc.scenarios": None,
    "mc.draws": 2500,
    "mc.benchmark": "hmsh20",
    "mc.threads": 0,
}


def _parse_value(raw: str):
    txt = raw.strip()
    if "," in txt:
        return [_parse_value(part) for part in txt.split(",") if part.strip() != ""]
    low = txt.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", ""):
        return None
    for cast in (int, float):
        try:
            return cast(txt)
        except ValueError:
            continue
    return txt


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        out[key.strip()] = _parse_value(value)
    return out


def resolve_config(args) -> dict:
    config = dict(DEFAULTS)
    if args.from_manifest:
        manifest = json.loads(Path(args.from_manifest).read_text())
        config.update(manifest["config"])
    if args.config:
        file_values = read_config_file(args.config)
        unknown = set(file_values) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        config.update(file_values)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        config[key] = _parse_value(value)
    if args.data:
        config["data.path"] = args.data
    if args.out:
        config["output.dir"] = args.out
    if args.seed is not None:
        config["sampler.seed"] = args.seed
    if args.threads is not None:
        config["mc.threads"] = args.threads
    return config


def _as_list(value) -> list:
    if value is None:
        return []
    return value if isinstance(value, list) else [value]


def _load_panel(config) -> tuple[np.ndarray, list[str]]:
    path = config["data.path"]
    if not path:
        raise ConfigError("data.path is required for this command")
    if not Path(path).exists():
        raise DataError(f"data file {path} does not exist")
    frame = pd.read_csv(path)
    if frame.empty:
        raise DataError(f"data file {path} is empty")
    try:
        values = frame.to_numpy(dtype=float)
    except (TypeError, ValueError) as exc:
        raise DataError(f"data file {path} has non-numeric columns") from exc
    return values, list(frame.columns)


def _volatility(config) -> VolatilitySpec:
    try:
        return VolatilitySpec(config["model.volatility"],
                              regimes=int(config["model.regimes"]),
                              sparse=bool(config["model.sparse"]),
                              breakpoints=tuple(_as_list(config["model.breakpoints"])))
    except ValueError as exc:
        raise ConfigError(f"model specification: {exc}") from exc


def _deterministic(config):
    det = config["data.deterministic"]
    if det in (None, "none"):
        return None
    if det == "const":
        return "const"
    raise ConfigError(f"data.deterministic must be 'const' or 'none', got {det!r}")


def _prior(config, n_vars: int, lags: int, det_count: int) -> PriorSpec:
    nonstat = config["prior.nonstationary"]
    if isinstance(nonstat, list):
        nonstat = [bool(v) for v in nonstat]
        if len(nonstat) != n_vars:
            raise ConfigError("prior.nonstationary list must have one flag per variable")
    prior = PriorSpec.default(n_vars, lags, det_count, nonstationary=nonstat)
    if config["prior.b_shape"] is not None:
        prior.b_shape = float(config["prior.b_shape"])
    prior.transition_diag_boost = float(config["prior.transition_diag_boost"])
    try:
        prior.validate(n_vars)
    except ValueError as exc:
        raise ConfigError(f"prior specification: {exc}") from exc
    return prior


def _prepare_run(config, with_volatility: bool = True):
    values, names = _load_panel(config)
    lags = int(config["data.lags"])
    data = build_regressors(values, lags, _deterministic(config))
    prior = _prior(config, data.n_vars, lags, data.deterministic_count)
    vol = _volatility(config) if with_volatility else None
    return data, prior, vol, names


def _out_dir(config) -> Path:
    out = Path(config["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".writable"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable") from exc
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_estimate(config) -> list[str]:
    data, prior, vol, _ = _prepare_run(config)
    try:
        sampler = SamplerConfig(total_draws=int(config["sampler.draws"]),
                                burn_in=config["sampler.burn_in"],
                                thinning=int(config["sampler.thinning"]),
                                seed=int(config["sampler.seed"]))
    except ValueError as exc:
        raise ConfigError(f"sampler settings: {exc}") from exc
    sample = run_sampler(data, vol, prior, sampler)
    out = _out_dir(config)
    written = [persist.save_posterior(sample, out / "posterior.npz")]
    summary = persist.posterior_summary(sample)
    summary_path = out / "summary.csv"
    summary.to_csv(summary_path, index=False, float_format=_FLOAT_FORMAT)
    written.append(str(summary_path))
    return written


def _load_run(config):
    out = Path(config["output.dir"])
    sample = persist.load_posterior(out / "posterior.npz")
    data, prior, vol, names = _prepare_run(config)
    if sample.draws and sample.draws[0].n_obs != data.n_obs:
        raise DataError("posterior draws do not match the configured data sample")
    return sample, data, prior, names


def cmd_verify(config) -> list[str]:
    sample, data, prior, _ = _load_run(config)
    shocks = config["verify.shocks"]
    if shocks == "all":
        shocks = list(range(data.n_vars))
    else:
        shocks = [int(s) for s in _as_list(shocks)]
    rows = []
    for shock in shocks:
        res = inference.compute_sddr(sample, data, prior, shock)
        rows.append({"shock": shock, "log_numerator": res.log_numerator,
                     "log_denominator": res.log_denominator,
                     "log_sddr": res.log_sddr,
                     "reject_homoskedasticity": inference.reject_l_value(res),
                     "draws_used": res.num_draws_used})
    out = _out_dir(config)
    path = out / "sddr.csv"
    pd.DataFrame(rows).to_csv(path, index=False, float_format=_FLOAT_FORMAT)
    return [str(path)]


def cmd_irf(config) -> list[str]:
    sample, data, prior, names = _load_run(config)
    horizon = int(config["irf.horizon"])
    variable = int(config["irf.variable"])
    if not 0 <= variable < data.n_vars:
        raise ConfigError(f"irf.variable {variable} out of range")
    normalized = inference.normalize_draws(sample)
    out = _out_dir(config)
    written = []

    irf = inference.irf_summary(normalized, horizon, data.lag_order)
    rows = [{"horizon": h, "variable": names[i], "shock": j,
             "mean": irf[h, i, j, 0], "hpd_lower": irf[h, i, j, 1],
             "hpd_upper": irf[h, i, j, 2]}
            for h in range(horizon + 1)
            for i in range(data.n_vars) for j in range(data.n_vars)]
    path = out / "irf.csv"
    pd.DataFrame(rows).to_csv(path, index=False, float_format=_FLOAT_FORMAT)
    written.append(str(path))

    fevd = np.mean([inference.fevd_impact(d) for d in normalized.draws], axis=0)
    fevd_frame = pd.DataFrame(fevd, index=pd.Index(names, name="variable"),
                              columns=[f"shock{j}" for j in range(data.n_vars)])
    path = out / "fevd.csv"
    fevd_frame.to_csv(path, float_format=_FLOAT_FORMAT)
    written.append(str(path))

    selected = inference.select_shock(normalized, variable)
    shock = int(np.bincount(selected).argmax())
    sd = inference.conditional_sd_path(normalized, shock)
    sd_frame = pd.DataFrame(sd, columns=["mean", "hpd_lower", "hpd_upper"])
    sd_frame.insert(0, "t", np.arange(sd.shape[0]))
    sd_frame.insert(1, "shock", shock)
    path = out / "sd_path.csv"
    sd_frame.to_csv(path, index=False, float_format=_FLOAT_FORMAT)
    written.append(str(path))
    return written


def _mc_settings(config, rejection: bool):
    preset = config["mc.preset"]
    if preset == "desk":
        base = {"replications": 20 if rejection else 10, "t_set": [260],
                "dgps": ["hmsh"], "models": ["hmsh20"] if rejection else ["hmsh20", "hmsh2"],
                "scenarios": ["1 & 2", "none"]}
    elif preset == "full":
        base = {"replications": 100, "t_set": [260, 780],
                "dgps": ["sv", "garch", "msh", "hmsh"],
                "models": ["exh", "msh20", "msh2", "hmsh20", "hmsh2"],
                "scenarios": ["1 & 2", "1", "2", "none"]}
    else:
        raise ConfigError(f"mc.preset must be 'desk' or 'full', got {preset!r}")
    if config["mc.replications"] is not None:
        base["replications"] = int(config["mc.replications"])
    if config["mc.t_set"] is not None:
        base["t_set"] = [int(t) for t in _as_list(config["mc.t_set"])]
    if config["mc.dgps"] is not None:
        base["dgps"] = [str(d) for d in _as_list(config["mc.dgps"])]
    if config["mc.models"] is not None:
        base["models"] = [str(m) for m in _as_list(config["mc.models"])]
    if config["mc.scenarios"] is not None:
        base["scenarios"] = [str(s) for s in _as_list(config["mc.scenarios"])]
    threads = int(config["mc.threads"]) or (os.cpu_count() or 1)
    return base, threads


def cmd_simulate_rmse(config) -> list[str]:
    base, threads = _mc_settings(config, rejection=False)
    benchmark = str(config["mc.benchmark"])
    if benchmark not in base["models"]:
        base["models"] = list(base["models"]) + [benchmark]
    report = simulate.run_rmse_experiment(
        dgp_kinds=tuple(base["dgps"]), model_names=tuple(base["models"]),
        t_set=tuple(base["t_set"]), replications=base["replications"],
        master_seed=int(config["sampler.seed"]) or 20260809,
        total_draws=int(config["mc.draws"]), benchmark=benchmark, n_jobs=threads)
    return report.to_csv(_out_dir(config))


def cmd_simulate_reject(config) -> list[str]:
    base, threads = _mc_settings(config, rejection=True)
    report = simulate.run_rejection_experiment(
        dgp_kinds=tuple(base["dgps"]), model_names=tuple(base["models"]),
        scenarios=tuple(base["scenarios"]), t_set=tuple(base["t_set"]),
        replications=base["replications"],
        master_seed=int(config["sampler.seed"]) or 20260809,
        total_draws=int(config["mc.draws"]), n_jobs=threads)
    return report.to_csv(_out_dir(config))


def cmd_forecast(config) -> list[str]:
    data, prior, _, _ = _prepare_run(config, with_volatility=False)
    names = [str(m) for m in _as_list(config["forecast.models"])]
    if not names:
        raise ConfigError("forecast.models must name at least one model")
    breakpoints = tuple(_as_list(config["model.breakpoints"]))
    specs = {}
    for name in names:
        try:
            specs[name] = (VolatilitySpec("exh", breakpoints=breakpoints)
                           if name == "exh" else VolatilitySpec.from_name(name))
        except ValueError as exc:
            raise ConfigError(f"forecast.models: {exc}") from exc
    benchmark = config["forecast.benchmark"] or names[0]
    first_origin = config["forecast.first_origin"]
    if first_origin is None:
        first_origin = max(1, int(0.8 * data.n_obs))
    report = forecast.evaluate(specs, data, int(first_origin), benchmark=str(benchmark),
                               prior=prior, draws_per_origin=int(config["forecast.draws"]),
                               seed=int(config["sampler.seed"]))
    return report.to_csv(_out_dir(config))


# ---------------------------------------------------------------------------


COMMANDS = {
    "estimate": cmd_estimate,
    "verify": cmd_verify,
    "irf": cmd_irf,
    "simulate-rmse": cmd_simulate_rmse,
    "simulate-reject": cmd_simulate_reject,
    "forecast": cmd_forecast,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svarmsh",
        description="Bayesian structural VARs with Markov-switching heteroskedasticity")
    parser.add_argument("--version", action="version", version=f"svarmsh {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("estimate", "run the Gibbs sampler and store the posterior"),
            ("verify", "Savage-Dickey homoskedasticity verification from a stored posterior"),
            ("irf", "impulse responses, variance decomposition and SD paths"),
            ("simulate-rmse", "Monte Carlo relative-RMSE experiment"),
            ("simulate-reject", "Monte Carlo homoskedasticity rejection-rate experiment"),
            ("forecast", "recursive expanding-window forecast comparison")]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="flat key=value configuration file")
        cmd.add_argument("--from-manifest", help="re-run using a previous manifest.json")
        cmd.add_argument("--set", action="append", metavar="KEY=VALUE",
                         help="override a config key (repeatable)")
        cmd.add_argument("--data", help="CSV data path (overrides data.path)")
        cmd.add_argument("--out", help="output directory (overrides output.dir)")
        cmd.add_argument("--seed", type=int, help="seed (overrides sampler.seed)")
        cmd.add_argument("--threads", type=int,
                         help="worker processes for replications (overrides mc.threads)")
        if name in ("simulate-rmse", "simulate-reject"):
            cmd.add_argument("--preset", choices=["desk", "full"],
                             help="experiment scale (overrides mc.preset)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        config = resolve_config(args)
        if getattr(args, "preset", None):
            config["mc.preset"] = args.preset
        outputs = COMMANDS[args.command](config)
        persist.write_manifest(config["output.dir"], args.command, config,
                               int(config["sampler.seed"]), started, outputs)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    for path in outputs:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
