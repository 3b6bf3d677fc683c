"""Power-map distortion ``x -> sign(x)|x|^(1+eps)`` and the emerging spectrum.

For an epoch of ``M < N`` days the correlation matrix has ``N - M + 1`` zero
eigenvalues.  A small distortion lifts that degeneracy into a cloud near
zero, the emerging spectrum.  The cloud is taken to be the ``N - M + 1``
algebraically smallest eigenvalues of the mapped matrix; the remaining
``M - 1`` form the bulk.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .correlation import CorrelationMatrix, pearson
from .errors import DomainError, NumericError, ParameterError
from .synth import CorrelationTarget, correlate_panel, gaussian_panel, member_seed

# defaults for ensemble studies, empirical trackers, and state similarity
EPS_ENSEMBLE = 0.001
EPS_DYNAMICS = 0.01
EPS_STATES = 0.6


def power_map(m, epsilon: float):
    """Elementwise sign-preserving power ``sign(x)|x|^(1+epsilon)``.

    Accepts an array, a :class:`CorrelationMatrix` (returned with its metadata)
    or anything with a ``matrix`` attribute.
    """
    if not epsilon >= 0:
        raise ParameterError(f"epsilon must be >= 0, got {epsilon}")
    if isinstance(m, CorrelationMatrix):
        return CorrelationMatrix(power_map(m.c, epsilon), m.epoch_end, m.epoch_len, m.asset_ids, m.tau)
    a = np.asarray(getattr(m, "matrix", m), dtype=float)
    if epsilon == 0:
        return a.copy()
    return np.sign(a) * np.abs(a) ** (1.0 + epsilon)


@dataclass
class EmergingSpectrum:
    emerging: np.ndarray
    bulk: np.ndarray
    epsilon: float

    @property
    def lambda_min(self) -> float:
        return float(self.emerging[0])

    @property
    def neg_count(self) -> int:
        return int(np.count_nonzero(self.emerging < 0))

    @property
    def gap(self) -> float:
        """Distance from the top of the cloud to the bottom of the bulk."""
        if self.bulk.size == 0:
            return float("inf")
        return float(self.bulk[0] - self.emerging[-1])

    @property
    def width(self) -> float:
        return float(self.emerging[-1] - self.emerging[0])

    @property
    def separated(self) -> bool:
        return self.gap > self.width

    @property
    def location(self) -> float:
        return float(self.emerging.mean())

    def histogram(self, bins: int = 50) -> tuple[np.ndarray, np.ndarray]:
        dens, edges = np.histogram(self.emerging, bins=bins, density=True)
        return edges, dens

    def to_dict(self, bins: int = 50) -> dict:
        edges, dens = self.histogram(bins)
        return {
            "epsilon": self.epsilon,
            "lambda_min": self.lambda_min,
            "neg_count": self.neg_count,
            "separated": self.separated,
            "n_emerging": int(self.emerging.size),
            "n_bulk": int(self.bulk.size),
            "histogram": {"bin_edges": edges.tolist(), "density": dens.tolist()},
        }

    def to_json(self, bins: int = 50) -> str:
        return json.dumps(self.to_dict(bins), indent=2)


def split_spectrum(eigenvalues: np.ndarray, n: int, m: int, epsilon: float) -> EmergingSpectrum:
    """Split ascending eigenvalues into the ``n - m + 1`` smallest and the rest."""
    k = n - m + 1
    return EmergingSpectrum(eigenvalues[:k].copy(), eigenvalues[k:].copy(), float(epsilon))


def emerging_spectrum(c, epsilon: float, epoch_len: int | None = None) -> EmergingSpectrum:
    """Emerging spectrum of a short-epoch correlation (or Wishart) matrix.

    ``epoch_len`` defaults to ``c.epoch_len`` for a :class:`CorrelationMatrix`.
    """
    if not 0 < epsilon <= 1:
        raise ParameterError(f"epsilon must lie in (0, 1], got {epsilon}")
    a = c.c if isinstance(c, CorrelationMatrix) else np.asarray(getattr(c, "matrix", c), dtype=float)
    m = epoch_len if epoch_len is not None else getattr(c, "epoch_len", None)
    if not m:
        raise ParameterError("epoch length is required for a bare matrix")
    n = a.shape[0]
    if m >= n:
        raise DomainError(f"epoch length {m} >= N={n}: no zero cloud, use the plain spectrum")
    try:
        w = np.linalg.eigvalsh(power_map(a, epsilon))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    return split_spectrum(w, n, m, epsilon)


@dataclass
class EmergingStats:
    """Ensemble averages of emerging-spectrum statistics for one configuration."""

    n: int
    m: int
    u: float
    epsilon: float
    n_ensemble: int
    location: float
    lambda_min: float
    neg_count: float
    kurtosis: float
    width: float
    gap: float
    separated_fraction: float


def emerging_ensemble(n: int, m: int, u: float, epsilon: float, n_ensemble: int,
                      seed: int = 0, keep_values: bool = False):
    """Sample ``n_ensemble`` epoch correlation matrices and summarize their clouds.

    Member ``i`` uses ``member_seed(seed, i)``.  Kurtosis is the non-excess
    population kurtosis of each member's cloud, averaged over members.  With
    ``keep_values`` the pooled emerging eigenvalues are returned as well.
    """
    if n_ensemble < 1:
        raise ParameterError("n_ensemble must be >= 1")
    if m >= n:
        raise DomainError(f"epoch length {m} >= N={n}")
    target = CorrelationTarget.identity(n) if u == 0 else CorrelationTarget.constant(n, u)
    rows = np.empty((n_ensemble, 7))
    pooled = []
    for i in range(n_ensemble):
        g = correlate_panel(gaussian_panel(n, m, 1.0, member_seed(seed, i)), target)
        es = emerging_spectrum(pearson(g.data), epsilon, epoch_len=m)
        rows[i] = (es.location, es.lambda_min, es.neg_count,
                   stats.kurtosis(es.emerging, fisher=False), es.width, es.gap, es.separated)
        if keep_values:
            pooled.append(es.emerging)
    mean = rows.mean(axis=0)
    out = EmergingStats(n, m, float(u), float(epsilon), n_ensemble, *map(float, mean))
    if keep_values:
        return out, np.concatenate(pooled)
    return out


def emerging_shift_vs_M(n: int, u: float, epsilon: float, m_values: Sequence[int],
                        n_ensemble: int, seed: int = 0) -> list[EmergingStats]:
    """One :class:`EmergingStats` row per epoch length, in the order given."""
    bad = [m for m in m_values if m >= n]
    if bad:
        raise DomainError(f"epoch lengths {bad} are not below N={n}")
    return [emerging_ensemble(n, m, u, epsilon, n_ensemble, seed) for m in m_values]


def stats_table(rows: Sequence[EmergingStats]) -> list[dict]:
    return [asdict(r) for r in rows]
