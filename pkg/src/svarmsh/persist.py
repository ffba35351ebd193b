"""On-disk formats: posterior draws as a columnar .npz archive, posterior
summaries as CSV, and the JSON run manifest written beside every output.

The .npz layout stacks each parameter group across draws (``b0`` is
(S, N, N), ``paths`` is (S, P, T), ...), with the volatility specification and
chain settings in a JSON ``meta`` entry. Re-saving the same sample is
byte-identical, which is what makes manifest-driven re-runs checkable.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .errors import DataError
from .model import ParameterState, PosteriorSample, VolatilitySpec

_GROUPS = ("a", "b0", "variances", "paths", "transitions", "initials",
           "gamma_a", "s_a", "gamma_b", "s_b")


def save_posterior(sample: PosteriorSample, path) -> str:
    path = Path(path)
    stacked = {g: np.stack([getattr(d, g) for d in sample.draws]) for g in _GROUPS}
    stacked["s_a_glob"] = np.array([d.s_a_glob for d in sample.draws])
    stacked["s_b_glob"] = np.array([d.s_b_glob for d in sample.draws])
    vol = sample.volatility
    meta = {
        "burn_in": sample.burn_in,
        "thinning": sample.thinning,
        "diagnostics": {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                        for k, v in sample.diagnostics.items()},
        "volatility": None if vol is None else {
            "variant": vol.variant, "regimes": vol.regimes,
            "sparse": vol.sparse, "breakpoints": list(vol.breakpoints)},
    }
    np.savez(path, meta=np.array(json.dumps(meta, sort_keys=True)), **stacked)
    return str(path)


def load_posterior(path) -> PosteriorSample:
    path = Path(path)
    if not path.exists():
        raise DataError(f"posterior file {path} does not exist")
    with np.load(path, allow_pickle=False) as archive:
        meta = json.loads(str(archive["meta"]))
        arrays = {g: archive[g] for g in _GROUPS}
        s_a_glob = archive["s_a_glob"]
        s_b_glob = archive["s_b_glob"]
    n_draws = arrays["b0"].shape[0]
    draws = [ParameterState(
        a=arrays["a"][s], b0=arrays["b0"][s], variances=arrays["variances"][s],
        paths=arrays["paths"][s], transitions=arrays["transitions"][s],
        initials=arrays["initials"][s], gamma_a=arrays["gamma_a"][s],
        s_a=arrays["s_a"][s], s_a_glob=float(s_a_glob[s]),
        gamma_b=arrays["gamma_b"][s], s_b=arrays["s_b"][s],
        s_b_glob=float(s_b_glob[s])) for s in range(n_draws)]
    vol_meta = meta.get("volatility")
    vol = None
    if vol_meta is not None:
        vol = VolatilitySpec(vol_meta["variant"], regimes=vol_meta["regimes"],
                             sparse=vol_meta["sparse"],
                             breakpoints=tuple(vol_meta["breakpoints"]))
    return PosteriorSample(draws=draws, burn_in=meta["burn_in"],
                           thinning=meta["thinning"],
                           diagnostics=meta.get("diagnostics", {}), volatility=vol)


def posterior_summary(sample: PosteriorSample) -> pd.DataFrame:
    """Long-format posterior means and standard deviations of the main
    parameter groups."""
    rows = []

    def add(name: str, stacked: np.ndarray):
        mean = stacked.mean(axis=0)
        sd = stacked.std(axis=0, ddof=1) if stacked.shape[0] > 1 else np.zeros_like(mean)
        for idx in np.ndindex(mean.shape):
            rows.append({"parameter": name,
                         "index": ".".join(str(i) for i in idx),
                         "mean": mean[idx], "sd": sd[idx]})

    add("b0", sample.b0_draws())
    if sample.draws[0].a.shape[1]:
        add("a", sample.a_draws())
    add("variances", sample.variance_draws())
    add("gamma_b", np.stack([d.gamma_b for d in sample.draws]))
    if sample.draws[0].a.shape[1]:
        add("gamma_a", np.stack([d.gamma_a for d in sample.draws]))
    return pd.DataFrame(rows)


def write_manifest(out_dir, command: str, config: dict, seed: int,
                   started: float, outputs: list[str]) -> str:
    """Drop the run manifest: command, resolved config echo, seed, version,
    wall time, and the produced files. Re-running a command from its manifest
    reproduces every numeric output byte for byte.

    One manifest per command (manifest_<command>.json), so a pipeline of
    commands sharing an output directory keeps every run reproducible.
    """
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "seed": seed,
        "version": f"svarmsh-{__version__}",
        "wall_time_s": round(time.time() - started, 3),
        "outputs": sorted(Path(p).name for p in outputs),
    }
    path = out_dir / f"manifest_{command}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return str(path)
