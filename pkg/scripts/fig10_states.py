"""Market states of a sticky four-regime surrogate (or a real panel)."""
import argparse
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from rmtmarket.correlation import ReturnMatrix, log_returns, rolling_correlations
from rmtmarket.ingest import cached_correlations, load_prices
from rmtmarket.states import fit_market_states, purity, transition_matrix
from rmtmarket.synth import markov_regime_panel

STICKY = ((0.95, 0.05, 0, 0), (0.025, 0.95, 0.025, 0), (0, 0.025, 0.95, 0.025), (0, 0, 0.05, 0.95))


@dataclass
class Config:
    n: int = 40
    epoch_len: int = 500
    shift: int = 500
    n_epochs: int = 400
    levels: tuple = (0.1, 0.25, 0.4, 0.7)
    chain: tuple = STICKY
    epsilon: float = 0.6
    k_range: tuple = (2, 8)
    n_init: int = 500
    seed: int = 20240611


def run(cfg: Config, out: Path, prices=None, cache=None) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    truth = None
    if prices:
        panel = load_prices(prices)
        cs = (cached_correlations(panel, cfg.epoch_len, cfg.shift, cache) if cache
              else rolling_correlations(log_returns(panel), cfg.epoch_len, cfg.shift))
    else:
        g, truth = markov_regime_panel(cfg.n, cfg.epoch_len, cfg.levels, np.array(cfg.chain),
                                       cfg.n_epochs, cfg.seed)
        cs = rolling_correlations(ReturnMatrix(g.data), cfg.epoch_len, cfg.epoch_len)
    model = fit_market_states(cs, cfg.epsilon, cfg.k_range, cfg.n_init, cfg.seed)
    model.write_points_csv(out / "points.csv")
    (out / "model.json").write_text(model.to_json())
    result = {"config": asdict(cfg), "k_star": model.k_star, "transition": model.transition.tolist()}
    if truth is not None:
        result["purity"] = purity(model.assignments, truth)
        result["realized_transition"] = transition_matrix(truth + 1, len(cfg.levels))[0].tolist()
    (out / "states.json").write_text(json.dumps(result, indent=2))
    return result


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/fig10"))
    ap.add_argument("--prices", type=Path)
    ap.add_argument("--cache", type=Path)
    ap.add_argument("--epoch-len", type=int, default=None)
    ap.add_argument("--shift", type=int, default=None)
    args = ap.parse_args()
    cfg = Config()
    if args.prices:
        cfg = Config(epoch_len=args.epoch_len or 20, shift=args.shift or 10)
    print(json.dumps(run(cfg, args.out, args.prices, args.cache), indent=2))
