"""Wishart eigenvalue density at Q = T/N against the Marcenko-Pastur curve."""
import argparse
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from rmtmarket.ensembles import GeneratorSpec, ensemble_spectrum, mp_bin_density, mp_bounds


@dataclass
class Config:
    n: int = 1024
    t: int = 10240
    n_ensemble: int = 200
    bins: int = 100
    seed: int = 20240611


def run(cfg: Config, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    spec = GeneratorSpec(cfg.n, cfg.t)
    sd = ensemble_spectrum(spec, cfg.n_ensemble, cfg.bins, cfg.seed)
    ref = mp_bin_density(sd.bin_edges, spec.q)
    np.savetxt(out / "mp_law.csv", np.column_stack([sd.bin_centers, sd.density, ref]),
               delimiter=",", header="bin_center,density,mp_density", comments="")
    lo, hi = mp_bounds(spec.q)
    result = {"config": asdict(cfg), "mean_abs_bin_error": float(np.mean(np.abs(sd.density - ref))),
              "edges_theory": [lo, hi], "edges_observed": [float(sd.member_min.mean()), float(sd.member_max.mean())]}
    (out / "mp_law.json").write_text(json.dumps(result, indent=2))
    return result


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/fig1"))
    ap.add_argument("--quick", action="store_true", help="N=256, T=2560")
    args = ap.parse_args()
    cfg = Config(n=256, t=2560) if args.quick else Config()
    print(json.dumps(run(cfg, args.out), indent=2))
