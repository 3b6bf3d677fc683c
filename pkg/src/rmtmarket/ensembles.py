"""Wishart and correlated-Wishart ensembles and the Marcenko-Pastur law."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .correlation import pearson
from .errors import NumericError, ParameterError
from .powermap import power_map
from .synth import CorrelationTarget, GaussianPanel, correlate_panel, gaussian_panel, member_seed

# absolute cutoff below which an eigenvalue counts as zero
ZERO_TOL = 1e-10


@dataclass(eq=False)
class WishartMatrix:
    matrix: np.ndarray
    q_ratio: float
    correlated: bool = False
    source_params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def wishart(panel: GaussianPanel | np.ndarray, correlated: bool = False) -> WishartMatrix:
    """``W = B B^T / T`` for an N x T panel ``B``."""
    b = np.atleast_2d(np.asarray(getattr(panel, "data", panel), dtype=float))
    n, t = b.shape
    if n == 0 or t == 0:
        raise ParameterError("panel must be nonempty")
    w = (b @ b.T) / t
    w = 0.5 * (w + w.T)
    params = {"n": n, "t": t, "sigma": getattr(panel, "sigma", None), "seed": getattr(panel, "seed", None)}
    return WishartMatrix(w, t / n, correlated, params)


def mp_bounds(q: float, sigma2: float = 1.0) -> tuple[float, float]:
    if not (q > 0 and sigma2 > 0):
        raise ParameterError(f"q and sigma2 must be positive, got q={q}, sigma2={sigma2}")
    r = 1.0 / np.sqrt(q)
    return sigma2 * (1 - r) ** 2, sigma2 * (1 + r) ** 2


def mp_density(lam, q: float, sigma2: float = 1.0):
    """Continuous part of the Marcenko-Pastur density; zero outside the support.

    For ``q <= 1`` this integrates to ``q``; the point mass at zero is
    :func:`mp_zero_mass`.
    """
    lo, hi = mp_bounds(q, sigma2)
    lam = np.asarray(lam, dtype=float)
    inside = (lam > lo) & (lam < hi) & (lam > 0)
    safe = np.where(inside, lam, 1.0)
    val = q / (2 * np.pi * sigma2) * np.sqrt(np.clip((hi - safe) * (safe - lo), 0, None)) / safe
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


def mp_zero_mass(q: float) -> float:
    if not q > 0:
        raise ParameterError(f"q must be positive, got {q}")
    return max(0.0, 1.0 - q)


def mp_bin_density(edges: np.ndarray, q: float, sigma2: float = 1.0) -> np.ndarray:
    """Marcenko-Pastur density averaged over each histogram bin."""
    lo, hi = mp_bounds(q, sigma2)
    out = np.zeros(len(edges) - 1)
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        a2, b2 = max(a, lo), min(b, hi)
        if b2 > a2:
            out[k] = integrate.quad(mp_density, a2, b2, args=(q, sigma2), limit=200)[0] / (b - a)
    return out


@dataclass
class GeneratorSpec:
    """Recipe for one ensemble member.

    ``normalize=True`` demeans and standardizes each row before forming the
    product, which turns the member into an epoch correlation matrix (rank
    ``min(N, T-1)``).  ``epsilon`` applies the power map afterwards.
    """

    n: int
    t: int
    sigma: float = 1.0
    u: float = 0.0
    target: CorrelationTarget | None = None
    epsilon: float | None = None
    normalize: bool = False

    def __post_init__(self):
        if self.n < 1 or self.t < 1:
            raise ParameterError(f"n and t must be >= 1, got n={self.n}, t={self.t}")
        if self.target is None:
            self.target = (CorrelationTarget.identity(self.n) if self.u == 0
                           else CorrelationTarget.constant(self.n, self.u))
        if self.target.n != self.n:
            raise ParameterError("target dimension does not match n")
        if self.epsilon is not None and self.epsilon < 0:
            raise ParameterError(f"epsilon must be >= 0, got {self.epsilon}")

    @property
    def q(self) -> float:
        return self.t / self.n

    def member(self, seed: int) -> np.ndarray:
        g = correlate_panel(gaussian_panel(self.n, self.t, self.sigma, seed), self.target)
        if self.normalize:
            m = pearson(g.data)
        else:
            m = wishart(g).matrix
        if self.epsilon:
            m = power_map(m, self.epsilon)
        return m

    def describe(self) -> dict:
        return {"n": self.n, "t": self.t, "sigma": self.sigma, "target": list(_jsonable(self.target.structure)),
                "epsilon": self.epsilon, "normalize": self.normalize}


def _jsonable(x):
    if isinstance(x, (tuple, list)):
        return [_jsonable(v) for v in x]
    return x


@dataclass(eq=False)
class SpectralDensity:
    """Normalized histogram plus per-member bookkeeping.

    ``normalization`` is ``"unit"`` (all samples, integrates to 1) or
    ``"nonzero"`` (zero eigenvalues excluded, integrates to their complement).
    """

    bin_edges: np.ndarray
    density: np.ndarray
    n_samples: int
    n_ensemble: int
    normalization: str = "unit"
    zero_counts: np.ndarray | None = None
    member_min: np.ndarray | None = None
    member_max: np.ndarray | None = None
    sample_mean: float = float("nan")
    sample_var: float = float("nan")

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def bin_width(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    def mass(self) -> float:
        return float(np.sum(self.density * self.bin_width))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_center", "density"])
            for x, d in zip(self.bin_centers, self.density):
                w.writerow([repr(float(x)), repr(float(d))])

    def to_dict(self) -> dict:
        d = {
            "bin_edges": self.bin_edges.tolist(),
            "density": self.density.tolist(),
            "n_samples": self.n_samples,
            "n_ensemble": self.n_ensemble,
            "normalization": self.normalization,
            "sample_mean": self.sample_mean,
            "sample_var": self.sample_var,
        }
        for name in ("zero_counts", "member_min", "member_max"):
            v = getattr(self, name)
            d[name] = None if v is None else v.tolist()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def histogram_density(values: np.ndarray, bins: int = 100, total: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Uniform bins over ``[min - 1 bin, max + 1 bin]``; density per unit x.

    ``total`` is the normalizing sample count (defaults to ``values.size``).
    """
    if bins < 3:
        raise ParameterError(f"need at least 3 bins, got {bins}")
    values = np.asarray(values, dtype=float).ravel()
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo
    if span == 0:
        span = max(abs(hi), 1.0) * 1e-6
    width = span / (bins - 2)
    edges = lo - width + width * np.arange(bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    return edges, counts / ((total or values.size) * width)


def ensemble_spectrum(spec: GeneratorSpec, n_ensemble: int, bins: int = 100, seed: int = 0,
                      exclude_zero: bool = False) -> SpectralDensity:
    """Histogram all member eigenvalues into one density.

    Only eigenvalues are retained between members, never the matrices.
    """
    if n_ensemble < 1:
        raise ParameterError("n_ensemble must be >= 1")
    eig = np.empty((n_ensemble, spec.n))
    for i in range(n_ensemble):
        try:
            eig[i] = np.linalg.eigvalsh(spec.member(member_seed(seed, i)))
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"eigensolver failed on member {i}: {exc}") from exc
    zero = np.abs(eig) < ZERO_TOL
    vals = eig[~zero] if exclude_zero else eig.ravel()
    if vals.size == 0:
        raise NumericError("every eigenvalue is zero; nothing to histogram")
    edges, dens = histogram_density(vals, bins, total=eig.size)
    return SpectralDensity(edges, dens, int(vals.size), n_ensemble,
                           "nonzero" if exclude_zero else "unit",
                           zero.sum(axis=1), eig.min(axis=1), eig.max(axis=1),
                           float(vals.mean()), float(vals.var()))


def element_distribution(spec: GeneratorSpec, n_ensemble: int, bins: int = 100, seed: int = 0) -> SpectralDensity:
    """Histogram of the off-diagonal elements ``W_ij`` (i < j) across the ensemble."""
    if n_ensemble < 1:
        raise ParameterError("n_ensemble must be >= 1")
    iu = np.triu_indices(spec.n, k=1)
    if iu[0].size == 0:
        raise ParameterError("need n >= 2 for off-diagonal elements")
    vals = np.concatenate([spec.member(member_seed(seed, i))[iu] for i in range(n_ensemble)])
    edges, dens = histogram_density(vals, bins)
    return SpectralDensity(edges, dens, int(vals.size), n_ensemble, "unit",
                           sample_mean=float(vals.mean()), sample_var=float(vals.var()))
