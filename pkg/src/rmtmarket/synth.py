"""Seeded Gaussian and correlated-Gaussian time series.

Normal draws come from ``numpy.random.Generator.standard_normal`` (ziggurat
method) on a PCG64 bit generator seeded with the integer seed.  Ensemble
members derive their own integer seed from ``(seed, index)`` through
:func:`member_seed`, so member ``i`` is reproducible in isolation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, NumericError, ParameterError

# smallest eigenvalue must exceed this fraction of the largest
PD_RTOL = 1e-10


def member_seed(seed: int, index: int) -> int:
    """Integer seed of ensemble member ``index`` derived from a base seed."""
    ss = np.random.SeedSequence([int(seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _check_unit_symmetric(zeta: np.ndarray) -> None:
    if zeta.ndim != 2 or zeta.shape[0] != zeta.shape[1]:
        raise ParameterError(f"zeta must be square, got shape {zeta.shape}")
    if not np.array_equal(zeta, zeta.T):
        raise ParameterError("zeta must be exactly symmetric")
    if not np.all(np.diag(zeta) == 1.0):
        raise ParameterError("zeta must have a unit diagonal")


def _pd_eigh(zeta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(zeta)
    top = w[-1]
    if top <= 0 or w[0] <= PD_RTOL * top:
        raise NumericError(
            f"zeta is not positive definite: smallest eigenvalue {w[0]:.6g} "
            f"(largest {top:.6g})"
        )
    return w, v


@dataclass(frozen=True, eq=False)
class CorrelationTarget:
    """Population correlation matrix imposed on a Gaussian panel.

    ``structure`` is one of ``("identity",)``, ``("constant", U)`` or
    ``("blocks", ((size, U), ...))``.  Build instances with the class
    methods; direct construction validates an arbitrary matrix.
    """

    zeta: np.ndarray
    structure: tuple = ("custom",)
    eigenvalues: np.ndarray = field(init=False, repr=False, compare=False)
    eigenvectors: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        zeta = np.asarray(self.zeta, dtype=float)
        _check_unit_symmetric(zeta)
        w, v = _pd_eigh(zeta)
        zeta.setflags(write=False)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", v)

    @property
    def n(self) -> int:
        return self.zeta.shape[0]

    @classmethod
    def identity(cls, n: int) -> "CorrelationTarget":
        if n < 1:
            raise ParameterError(f"n must be >= 1, got {n}")
        return cls(np.eye(n), ("identity",))

    @classmethod
    def constant(cls, n: int, u: float) -> "CorrelationTarget":
        if n < 1:
            raise ParameterError(f"n must be >= 1, got {n}")
        if not 0.0 <= u < 1.0:
            raise ParameterError(f"constant correlation U must lie in [0, 1), got {u}")
        zeta = np.full((n, n), float(u))
        np.fill_diagonal(zeta, 1.0)
        target = cls(zeta, ("constant", float(u)))
        # 1 + (n-1)U once, 1 - U with multiplicity n-1
        expected = np.sort(np.r_[np.full(n - 1, 1.0 - u), 1.0 + (n - 1) * u])
        if not np.allclose(target.eigenvalues, expected, atol=1e-9 * n):
            raise NumericError("constant-correlation spectrum disagrees with 1+(n-1)U, 1-U")
        return target

    @classmethod
    def blocks(cls, block_spec: Sequence[tuple[int, float]]) -> "CorrelationTarget":
        """Block-diagonal target: ``U`` inside each block, zero across blocks."""
        spec = tuple((int(s), float(u)) for s, u in block_spec)
        if not spec:
            raise ParameterError("block_spec must contain at least one block")
        for size, u in spec:
            if size < 1:
                raise ParameterError(f"empty block in spec: size {size}")
            if not 0.0 <= u < 1.0:
                raise ParameterError(f"within-block U must lie in [0, 1), got {u}")
        n = sum(s for s, _ in spec)
        zeta = np.zeros((n, n))
        start = 0
        for size, u in spec:
            zeta[start:start + size, start:start + size] = u
            start += size
        np.fill_diagonal(zeta, 1.0)
        return cls(zeta, ("blocks", spec))

    def sqrt(self) -> np.ndarray:
        """Symmetric positive-definite square root ``V diag(sqrt(w)) V^T``."""
        v = self.eigenvectors
        return (v * np.sqrt(self.eigenvalues)) @ v.T

    def block_labels(self) -> np.ndarray:
        """Block index of every row (all zeros unless the target is block-structured)."""
        if self.structure[0] != "blocks":
            return np.zeros(self.n, dtype=int)
        return np.repeat(np.arange(len(self.structure[1])), [s for s, _ in self.structure[1]])


@dataclass(frozen=True, eq=False)
class GaussianPanel:
    data: np.ndarray
    seed: int | None
    sigma: float
    ids: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.ids:
            object.__setattr__(self, "ids", tuple(f"s{i}" for i in range(self.data.shape[0])))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


def gaussian_panel(n: int, t: int, sigma: float = 1.0, seed: int = 0) -> GaussianPanel:
    """N x T matrix of i.i.d. Normal(0, sigma^2) draws."""
    if n < 1 or t < 1:
        raise ParameterError(f"panel dimensions must be >= 1, got n={n}, t={t}")
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    rng = np.random.default_rng(seed)
    data = sigma * rng.standard_normal((n, t))
    return GaussianPanel(data, seed, float(sigma))


def correlate_panel(panel: GaussianPanel, target: CorrelationTarget) -> GaussianPanel:
    """Return ``G = zeta^{1/2} B`` for the panel ``B``."""
    n = panel.data.shape[0]
    if target.n != n:
        raise ParameterError(f"target is {target.n}x{target.n} but panel has {n} rows")
    if target.structure[0] == "identity":
        return GaussianPanel(panel.data.copy(), panel.seed, panel.sigma, panel.ids)
    return GaussianPanel(target.sqrt() @ panel.data, panel.seed, panel.sigma, panel.ids)


def block_surrogate(block_spec: Sequence[tuple[int, float]], t: int, seed: int = 0,
                    sigma: float = 1.0) -> GaussianPanel:
    target = CorrelationTarget.blocks(block_spec)
    return correlate_panel(gaussian_panel(target.n, t, sigma, seed), target)


def regime_panel(n: int, segments: Sequence[tuple[int, float]], seed: int = 0) -> GaussianPanel:
    """Concatenate constant-correlation segments ``(length, U)`` along time.

    Segment ``j`` uses seed ``member_seed(seed, j)``.
    """
    if not segments:
        raise ParameterError("segments must be nonempty")
    parts = []
    for j, (length, u) in enumerate(segments):
        target = CorrelationTarget.constant(n, u)
        parts.append(correlate_panel(gaussian_panel(n, int(length), 1.0, member_seed(seed, j)),
                                     target).data)
    return GaussianPanel(np.concatenate(parts, axis=1), seed, 1.0)


def markov_chain(transition: np.ndarray, length: int, seed: int = 0, start: int = 0) -> np.ndarray:
    """Sample a 0-based state sequence from a row-stochastic matrix."""
    p = np.asarray(transition, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ParameterError("transition matrix must be square")
    if np.any(p < 0) or not np.allclose(p.sum(axis=1), 1.0):
        raise ParameterError("transition matrix must be row-stochastic")
    if length < 1:
        raise ParameterError(f"length must be >= 1, got {length}")
    rng = np.random.default_rng(seed)
    cum = np.cumsum(p, axis=1)
    u = rng.random(length)
    states = np.empty(length, dtype=int)
    states[0] = start
    k = p.shape[0]
    for i in range(1, length):
        states[i] = min(int(np.searchsorted(cum[states[i - 1]], u[i], side="right")), k - 1)
    return states


def markov_regime_panel(n: int, epoch_len: int, u_levels: Sequence[float], transition,
                        n_epochs: int, seed: int = 0, start: int = 0) -> tuple[GaussianPanel, np.ndarray]:
    """Epochs of ``epoch_len`` days whose correlation level follows a Markov chain.

    Returns the concatenated panel and the 0-based regime of each epoch;
    non-overlapping rolling windows of ``epoch_len`` recover the epochs.
    """
    if len(u_levels) != np.asarray(transition).shape[0]:
        raise ParameterError("one U level per chain state is required")
    states = markov_chain(transition, n_epochs, member_seed(seed, -1 % 2**32), start)
    panel = regime_panel(n, [(epoch_len, u_levels[s]) for s in states], seed)
    return panel, states


def write_panel_csv(panel: GaussianPanel, path) -> None:
    """One row per series: ``series_id, x_0, ..., x_{T-1}`` under a header row."""
    n, t = panel.data.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series"] + [str(j) for j in range(t)])
        for sid, row in zip(panel.ids, panel.data):
            w.writerow([sid] + [repr(float(x)) for x in row])


def read_panel_csv(path, seed=None, sigma=float("nan")) -> GaussianPanel:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["series"]:
        raise DataError(f"{path}: missing 'series' header row")
    ids = tuple(r[0] for r in rows[1:])
    data = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    return GaussianPanel(data, seed, sigma, ids)
