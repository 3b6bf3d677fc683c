"""Epoch statistics over time and their lagged relations.

With ``--prices`` the real panel is used (M=20, shift 10 by default);
otherwise a panel that alternates calm and turbulent correlation regimes.
"""
import argparse
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from rmtmarket.correlation import ReturnMatrix, log_returns, rolling_correlations
from rmtmarket.dynamics import column, lag1_effect_tstat, lagged_relation, stats_series, write_stats_csv
from rmtmarket.ingest import load_prices
from rmtmarket.synth import regime_panel


@dataclass
class Config:
    n: int = 60
    segments: tuple = ((300, 0.1), (200, 0.6), (300, 0.15), (100, 0.8), (300, 0.2))
    epoch_len: int = 20
    shift: int = 10
    epsilon: float = 0.01
    max_lag: int = 3
    t_window: int = 20
    seed: int = 20240611


def run(cfg: Config, out: Path, prices=None) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    if prices:
        r = log_returns(load_prices(prices))
    else:
        r = ReturnMatrix(regime_panel(cfg.n, cfg.segments, cfg.seed).data)
    series = stats_series(rolling_correlations(r, cfg.epoch_len, cfg.shift), cfg.epsilon)
    write_stats_csv(series, out / "stats.csv")
    mc = column(series, "mean_c")
    result = {"config": asdict(cfg), "epochs": len(series), "relations": {}}
    for y in ("df", "variance", "skewness", "kurtosis", "lambda_max"):
        for lag in range(cfg.max_lag + 1):
            rel = lagged_relation(mc, column(series, y), lag)
            result["relations"][f"mean_c->{y}@{lag}"] = {"r": rel.r, "resid_var": rel.residual_variance()}
    lmin = column(series, "lambda_min_emerging")
    if np.all(np.isfinite(lmin)):
        for lag in range(cfg.max_lag + 1):
            rel = lagged_relation(lmin, mc, lag)
            rel.write_csv(out / f"lmin_mean_c_lag{lag}.csv")
            result["relations"][f"lambda_min->mean_c@{lag}"] = {"r": rel.r, "resid_var": rel.residual_variance()}
        t = lag1_effect_tstat(mc, lmin, cfg.t_window)
        np.savetxt(out / "tstat.csv", t, header="t", comments="")
        result["tstat_median"] = float(np.median(t))
    (out / "dynamics.json").write_text(json.dumps(result, indent=2))
    return result


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/fig7_9"))
    ap.add_argument("--prices", type=Path)
    args = ap.parse_args()
    res = run(Config(), args.out, args.prices)
    for k, v in res["relations"].items():
        print(f"{k:28s} r={v['r']:+.3f} residual var={v['resid_var']:.3e}")
