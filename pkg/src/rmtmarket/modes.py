"""Market, group and random components of a correlation matrix."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .correlation import CorrelationMatrix
from .ensembles import mp_bounds
from .errors import NumericError, ParameterError


def _array(c) -> np.ndarray:
    return np.asarray(c.c if isinstance(c, CorrelationMatrix) else c, dtype=float)


def eigendecompose(c) -> tuple[np.ndarray, np.ndarray]:
    """Descending eigenvalues and matching eigenvector columns.

    Each eigenvector is scaled so that its largest-magnitude entry is positive.
    """
    a = _array(c)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, atol=1e-12):
        raise ParameterError("matrix is not symmetric")
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver did not converge: {exc}") from exc
    w, v = w[::-1], v[:, ::-1]
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return w.copy(), v * signs


def _projector_sum(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (v * w) @ v.T


@dataclass(eq=False)
class ModeDecomposition:
    market: np.ndarray
    group: np.ndarray
    random: np.ndarray
    n_group: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def total(self) -> np.ndarray:
        return self.market + self.group + self.random

    def write_csv(self, prefix, asset_ids=None) -> list[str]:
        """Write ``<prefix>_{market,group,random}.csv``; returns the paths."""
        n = self.market.shape[0]
        ids = list(asset_ids) if asset_ids is not None else [f"a{i}" for i in range(n)]
        paths = []
        for name in ("market", "group", "random"):
            path = f"{prefix}_{name}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["asset"] + ids)
                for aid, row in zip(ids, getattr(self, name)):
                    w.writerow([aid] + [repr(float(x)) for x in row])
            paths.append(path)
        return paths

    def ladder(self) -> dict:
        return {"n_group": self.n_group, "eigenvalues": self.eigenvalues.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.ladder(), indent=2)


def decompose_modes(c, n_group: int) -> ModeDecomposition:
    """Split ``C`` into mode 1, modes ``2..n_group`` and modes ``n_group+1..N``."""
    a = _array(c)
    n = a.shape[0]
    if not 1 <= n_group < n:
        raise ParameterError(f"n_group must satisfy 1 <= n_group < N={n}, got {n_group}")
    w, v = eigendecompose(a)
    market = w[0] * np.outer(v[:, 0], v[:, 0])
    group = _projector_sum(w[1:n_group], v[:, 1:n_group])
    # remainder keeps the identity exact up to the subtraction round-off
    random = a - market - group
    return ModeDecomposition(market, group, random, n_group, w, v)


def suggest_n_group(eigenvalues, q: float) -> int:
    """Eigenvalues above the MP bulk edge, minus the market mode, floored at 1."""
    edge = mp_bounds(q, 1.0)[1]
    above = int(np.count_nonzero(np.asarray(eigenvalues) > edge))
    return max(1, above - 1)


def block_contrast(component: np.ndarray, labels) -> tuple[float, float]:
    """Mean within-block and mean cross-block off-diagonal element."""
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    off = ~np.eye(len(labels), dtype=bool)
    return float(component[same & off].mean()), float(component[~same].mean())
