"""Mode decomposition of a full-period correlation matrix and an MDS map of the assets.

Uses ``--prices``/``--sectors`` when given, otherwise the ten-block surrogate.
Assets are embedded with classical MDS on the distance ``sqrt(2 (1 - C_ij))``
computed from each component.
"""
import argparse
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from rmtmarket.correlation import log_returns, pearson
from rmtmarket.ingest import load_prices, load_sectors, sector_sort
from rmtmarket.modes import block_contrast, decompose_modes, suggest_n_group
from rmtmarket.states import classical_mds, kmeans_ensemble, purity
from rmtmarket.synth import CorrelationTarget, block_surrogate

BLOCKS = ((30, 0.45), (25, 0.35), (20, 0.5), (22, 0.3), (18, 0.4),
          (15, 0.55), (20, 0.25), (16, 0.6), (14, 0.35), (14, 0.45))


@dataclass
class Config:
    blocks: tuple = BLOCKS
    t: int = 8068
    n_group: int | None = None
    n_init: int = 100
    seed: int = 20240611


def run(cfg: Config, out: Path, prices=None, sectors=None) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    if prices:
        panel = load_prices(prices)
        if sectors:
            panel = sector_sort(panel, load_sectors(sectors))
        x, labels = log_returns(panel).returns, np.array(panel.sector_labels)
    else:
        x = block_surrogate(cfg.blocks, cfg.t, cfg.seed).data
        labels = CorrelationTarget.blocks(cfg.blocks).block_labels()
    n, t = x.shape
    c = pearson(x)
    eig = np.linalg.eigvalsh(c)[::-1]
    n_group = cfg.n_group or suggest_n_group(eig, t / n)
    d = decompose_modes(c, n_group)
    np.savetxt(out / "ladder.csv", eig, header="eigenvalue", comments="")
    result = {"config": asdict(cfg), "n": n, "t": t, "n_group": n_group,
              "lambda_max": float(eig[0]), "lambda_min": float(eig[-1]),
              "group_contrast": block_contrast(d.group, labels)}
    for name in ("market", "group", "random"):
        comp = getattr(d, name)
        np.savetxt(out / f"{name}.csv", comp, delimiter=",")
        # the diagonal of a component is not 1, so normalize it into a correlation first
        s = np.sqrt(np.clip(np.diag(comp), 1e-300, None))
        cn = np.clip(comp / np.outer(s, s), -1, 1)
        emb = classical_mds(np.sqrt(2 * (1 - cn)), 3)
        np.savetxt(out / f"mds_{name}.csv", np.column_stack([emb.coords, np.unique(labels, return_inverse=True)[1]]),
                   delimiter=",", header="x,y,z,label", comments="")
        if name == "group":
            # ten blocks do not fit in three dimensions; cluster in the group rank instead
            full = classical_mds(np.sqrt(2 * (1 - cn)), max(3, n_group - 1))
            k = len(np.unique(labels))
            result["group_kmeans_purity"] = purity(kmeans_ensemble(full, k, cfg.n_init, cfg.seed).labels, labels)
    (out / "modes.json").write_text(json.dumps(result, indent=2, default=float))
    return result


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/fig5_6"))
    ap.add_argument("--prices", type=Path)
    ap.add_argument("--sectors", type=Path)
    args = ap.parse_args()
    print(json.dumps(run(Config(), args.out, args.prices, args.sectors), indent=2, default=float))
