"""Market states: similarity of noise-suppressed epochs, MDS, k-means, transitions.

The distance between two epochs is the mean absolute difference of their
power-mapped off-diagonal elements (an L1 metric on matrix space).  The
intra-cluster distance of a k-means run is the mean Euclidean distance of
each point to its assigned centroid.  The number of states is the largest k
whose spread of intra-cluster distance across random initializations is
minimal.

Plain Lloyd iterations from random points get stuck in local minima often
enough that the spread never vanishes at the true k.  Each run is therefore
polished by single-centroid relocations (see :func:`kmeans_single`).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .correlation import CorrelationMatrix
from .errors import DataError, ParameterError
from .powermap import EPS_STATES, power_map
from .synth import member_seed

MAX_ITER = 300
REFINE_MODES = ("none", "swap", "lloyd-swap")


@dataclass(eq=False)
class SimilarityMatrix:
    d: np.ndarray
    epoch_labels: tuple = ()


def similarity_matrix(correlations: Sequence[CorrelationMatrix], epsilon: float = EPS_STATES) -> SimilarityMatrix:
    if not correlations:
        raise ParameterError("need at least one epoch")
    n = correlations[0].n
    if any(cm.n != n for cm in correlations):
        raise ParameterError("all correlation matrices must share a dimension")
    if n < 2:
        raise ParameterError("need N >= 2")
    iu = np.triu_indices(n, k=1)
    x = np.stack([power_map(cm.c, epsilon)[iu] for cm in correlations])
    d = cdist(x, x, "cityblock") / x.shape[1]
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return SimilarityMatrix(d, tuple(cm.epoch_end for cm in correlations))


@dataclass(eq=False)
class MdsEmbedding:
    coords: np.ndarray
    eigvals_used: np.ndarray
    truncated: bool = False

    @property
    def k_dim(self) -> int:
        return self.coords.shape[1]


def classical_mds(d, k_dim: int = 3) -> MdsEmbedding:
    """Classical (Torgerson) scaling of a distance matrix.

    Keeps at most ``k_dim`` strictly positive eigenvalues of the doubly
    centered ``-D^2 / 2``; ``truncated`` is set when fewer are available.
    """
    d = np.asarray(getattr(d, "d", d), dtype=float)
    if k_dim < 1:
        raise ParameterError(f"k_dim must be >= 1, got {k_dim}")
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ParameterError("distance matrix must be square")
    n = d.shape[0]
    d2 = d * d
    b = -0.5 * (d2 - d2.mean(axis=0) - d2.mean(axis=1)[:, None] + d2.mean())
    b = 0.5 * (b + b.T)
    w, v = np.linalg.eigh(b)
    w, v = w[::-1], v[:, ::-1]
    tol = 1e-12 * max(abs(w[0]), 1.0) * n
    keep = min(k_dim, int(np.count_nonzero(w > tol)))
    v = v[:, :keep]
    if keep:
        idx = np.argmax(np.abs(v), axis=0)
        v = v * np.sign(v[idx, np.arange(keep)])
    coords = v * np.sqrt(w[:keep])
    if keep < k_dim:
        coords = np.hstack([coords, np.zeros((n, k_dim - keep))])
    coords -= coords.mean(axis=0)
    return MdsEmbedding(coords, w[:keep].copy(), keep < k_dim)


@dataclass(eq=False)
class KMeansRun:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    intra: float
    n_iter: int
    history: list = field(default_factory=list)


def _assign(x, centroids):
    d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1), d2


def _seed_centroids(x: np.ndarray, k: int, rng: np.random.Generator, init: str) -> np.ndarray:
    if init == "random":
        return x[rng.choice(len(x), size=k, replace=False)].copy()
    if init == "k-means++":
        trials = 1
    elif init == "greedy-k-means++":
        trials = 2 + int(np.log(k))
    else:
        raise ParameterError(f"unknown init {init!r}")
    idx = [int(rng.integers(len(x)))]
    d2 = ((x - x[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # every point already sits on a centroid
            idx.append(int(rng.choice(np.setdiff1d(np.arange(len(x)), idx))))
            continue
        cand = rng.choice(len(x), size=trials, p=d2 / total)
        cand_d2 = ((x[None, :, :] - x[cand][:, None, :]) ** 2).sum(axis=2)
        best = int(np.argmin(np.minimum(d2[None, :], cand_d2).sum(axis=1)))
        idx.append(int(cand[best]))
        d2 = np.minimum(d2, cand_d2[best])
    return x[idx].copy()


def _lloyd(x, centroids, history):
    k = len(centroids)
    rows = np.arange(len(x))
    labels, d2 = _assign(x, centroids)
    history.append(float(d2[rows, labels].sum()))
    for _ in range(MAX_ITER):
        for j in range(k):
            members = labels == j
            if members.any():
                centroids[j] = x[members].mean(axis=0)
        new, d2 = _assign(x, centroids)
        history.append(float(d2[rows, new].sum()))
        if np.array_equal(new, labels):
            break
        labels = new
    return labels, d2


def _swap_candidates(d2: np.ndarray, pair_d2: np.ndarray) -> list[tuple[int, int]]:
    """For each centroid, the data point that is its cheapest static replacement."""
    k = d2.shape[1]
    out = []
    for j in range(k):
        others = np.delete(d2, j, axis=1).min(axis=1)
        cost = np.minimum(others[:, None], pair_d2).sum(axis=0)
        p = int(np.argmin(cost))
        out.append((j, p, float(cost[p])))
    return out


def kmeans_single(x: np.ndarray, k: int, seed: int, init: str = "random", refine: str = "swap",
                  pair_d2: np.ndarray | None = None) -> KMeansRun:
    """One k-means run.

    ``init="random"`` seeds the centroids with ``k`` distinct data points drawn
    uniformly; ``"k-means++"`` and ``"greedy-k-means++"`` weight the draw by
    squared distance.  Lloyd iterations run until the assignment is stable (at
    most ``MAX_ITER``); an emptied cluster keeps its centroid.

    ``refine="swap"`` then tries, for each centroid, moving it onto the data
    point that most lowers the inertia with all other centroids held fixed.
    Moves that help are followed by fresh Lloyd iterations, and the best
    resulting solution replaces the current one; this repeats until nothing
    improves.  It escapes the split-one-cluster/merge-two-others minima that
    Lloyd iterations cannot leave.  ``"lloyd-swap"`` runs Lloyd after every
    candidate move, even statically unhelpful ones, and ``"none"`` is plain
    Lloyd.  ``history`` holds the inertia after every step and never increases.
    """
    if refine not in REFINE_MODES:
        raise ParameterError(f"refine must be one of {REFINE_MODES}, got {refine!r}")
    rng = np.random.default_rng(seed)
    centroids = _seed_centroids(x, k, rng, init)
    history: list[float] = []
    labels, d2 = _lloyd(x, centroids, history)
    if refine != "none" and 1 < k < len(x):
        if pair_d2 is None:
            pair_d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
        while True:
            current = history[-1]
            best = None
            for j, p, static in _swap_candidates(d2, pair_d2):
                if refine == "swap" and not static < current * (1 - 1e-12):
                    continue
                trial = centroids.copy()
                trial[j] = x[p]
                hist: list[float] = [static]
                t_labels, t_d2 = _lloyd(x, trial, hist)
                if hist[-1] < current * (1 - 1e-12) and (best is None or hist[-1] < best[3][-1]):
                    best = (trial, t_labels, t_d2, hist)
            if best is None:
                break
            centroids, labels, d2, hist = best
            # Lloyd is monotone, so the trial values at or below the current
            # inertia form a suffix; earlier ones belong to a rejected start
            history.extend(h for h in hist if h <= current)
    dist = np.sqrt(d2[np.arange(len(x)), labels])
    return KMeansRun(labels, centroids, history[-1], float(dist.mean()), len(history) - 1, history)


@dataclass(eq=False)
class KMeansEnsemble:
    k: int
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    intra_mean: float
    intra_sd: float
    intra: np.ndarray


def _coords(x) -> np.ndarray:
    return np.asarray(getattr(x, "coords", x), dtype=float)


def _spread(v: np.ndarray) -> float:
    # np.std of identical values can come out as a few ulps instead of 0
    return 0.0 if v.max() == v.min() else float(v.std())


def kmeans_ensemble(coords, k: int, n_init: int = 500, seed: int = 0,
                    init: str = "random", refine: str = "swap") -> KMeansEnsemble:
    """Best-inertia clustering plus mean/sd of intra-cluster distance over inits.

    Init ``i`` uses ``member_seed(seed, i)``; ties in inertia keep the first run.
    """
    x = _coords(coords)
    if k < 1 or n_init < 1:
        raise ParameterError(f"k and n_init must be >= 1, got k={k}, n_init={n_init}")
    if k > len(x):
        raise ParameterError(f"k={k} exceeds the {len(x)} points")
    pair_d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2) if refine != "none" else None
    best = None
    intra = np.empty(n_init)
    for i in range(n_init):
        run = kmeans_single(x, k, member_seed(seed, i), init, refine, pair_d2)
        intra[i] = run.intra
        if best is None or run.inertia < best.inertia:
            best = run
    return KMeansEnsemble(k, best.labels, best.centroids, best.inertia,
                          float(intra.mean()), _spread(intra), intra)


def optimal_k(coords, k_range: tuple[int, int], n_init: int = 500, seed: int = 0,
              init: str = "random", refine: str = "swap"):
    """Largest k among those with minimal intra-cluster-distance spread.

    Spreads within ``1e-12 + 1e-9 * max intra mean`` of the minimum count as
    tied, so round-off does not separate runs that found identical partitions.
    Returns ``(k_star, {k: KMeansEnsemble})``.
    """
    x = _coords(coords)
    lo, hi = k_range
    if not 1 <= lo <= hi <= len(x):
        raise ParameterError(f"need 1 <= k_lo <= k_hi <= {len(x)}, got {k_range}")
    if n_init < 2:
        raise ParameterError("n_init must be >= 2 for a spread to exist")
    runs = {k: kmeans_ensemble(x, k, n_init, seed, init, refine) for k in range(lo, hi + 1)}
    sds = np.array([runs[k].intra_sd for k in runs])
    tol = 1e-12 + 1e-9 * max(r.intra_mean for r in runs.values())
    k_star = max(k for k, s in zip(runs, sds) if s <= sds.min() + tol)
    return k_star, runs


def transition_matrix(assignments, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic transition estimate from a 1-based state sequence.

    Returns ``(P, empty)``; rows with no outgoing transition are all zero and
    flagged in ``empty``.
    """
    s = np.asarray(assignments)
    if s.ndim != 1 or len(s) < 2:
        raise ParameterError("need a state sequence of length >= 2")
    if np.any((s < 1) | (s > k)) or not np.all(s == np.round(s)):
        raise DataError(f"states must be integers in [1, {k}]")
    s = s.astype(int) - 1
    counts = np.zeros((k, k))
    np.add.at(counts, (s[:-1], s[1:]), 1.0)
    out = counts.sum(axis=1)
    empty = out == 0
    p = np.divide(counts, out[:, None], out=np.zeros_like(counts), where=~empty[:, None])
    return p, empty


def order_states(assignments, correlations) -> np.ndarray:
    """Relabel clusters 1..k by ascending mean of the epochs' mean correlation.

    ``correlations`` is a sequence of :class:`CorrelationMatrix` or an array
    of per-epoch mean correlations.  Equal means keep first-occurrence order.
    """
    a = np.asarray(assignments)
    if len(correlations) and isinstance(correlations[0], CorrelationMatrix):
        mc = np.array([cm.offdiag().mean() for cm in correlations])
    else:
        mc = np.asarray(correlations, dtype=float)
    if len(mc) != len(a):
        raise ParameterError("one mean correlation per epoch is required")
    labels, first = np.unique(a, return_index=True)
    by_first = labels[np.argsort(first, kind="stable")]
    means = [mc[a == lab].mean() for lab in by_first]
    ranked = [by_first[i] for i in np.argsort(means, kind="stable")]
    mapping = {lab: r + 1 for r, lab in enumerate(ranked)}
    return np.array([mapping[v] for v in a])


def purity(pred, truth) -> float:
    """Fraction of points carrying their cluster's majority true label."""
    pred, truth = np.asarray(pred), np.asarray(truth)
    hits = 0
    for lab in np.unique(pred):
        _, counts = np.unique(truth[pred == lab], return_counts=True)
        hits += counts.max()
    return hits / len(pred)


@dataclass(eq=False)
class MarketStateModel:
    k: int
    assignments: np.ndarray
    centroids: np.ndarray
    intra_stats: dict
    transition: np.ndarray
    empty_rows: np.ndarray
    embedding: MdsEmbedding
    similarity: SimilarityMatrix
    epoch_labels: tuple = ()
    k_star: int | None = None

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "k_star": self.k_star,
            "assignments": {str(t): int(s) for t, s in zip(self.epoch_labels, self.assignments)},
            "transition": self.transition.tolist(),
            "empty_rows": [int(i) + 1 for i in np.flatnonzero(self.empty_rows)],
            "centroids": self.centroids.tolist(),
            "intra_stats": {str(k): {"mean": m, "sd": s} for k, (m, s) in self.intra_stats.items()},
            "mds_eigvals": self.embedding.eigvals_used.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write_points_csv(self, path) -> None:
        c = self.embedding.coords
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau"] + ["xyz"[j] if j < 3 else f"x{j}" for j in range(c.shape[1])] + ["state"])
            for t, row, s in zip(self.epoch_labels, c, self.assignments):
                w.writerow([t] + [repr(float(v)) for v in row] + [int(s)])


def fit_market_states(correlations: Sequence[CorrelationMatrix], epsilon: float = EPS_STATES,
                      k_range: tuple[int, int] = (2, 8), n_init: int = 500, seed: int = 0,
                      k_dim: int = 3, init: str = "random", refine: str = "swap") -> MarketStateModel:
    """Similarity, embedding, clustering, ordering and transitions in one call.

    A single-value ``k_range`` such as ``(4, 4)`` clusters directly and leaves
    ``k_star`` as None.
    """
    sim = similarity_matrix(correlations, epsilon)
    emb = classical_mds(sim, k_dim)
    lo, hi = k_range
    if lo == hi:
        k_star = None
        ens = kmeans_ensemble(emb, lo, n_init, seed, init, refine)
        runs = {lo: ens}
    else:
        k_star, runs = optimal_k(emb, k_range, n_init, seed, init, refine)
        ens = runs[k_star]
    states = order_states(ens.labels, correlations)
    # centroids follow the relabeling
    cents = np.stack([emb.coords[states == s].mean(axis=0) for s in range(1, ens.k + 1)])
    p, empty = transition_matrix(states, ens.k)
    intra = {k: (r.intra_mean, r.intra_sd) for k, r in runs.items()}
    return MarketStateModel(ens.k, states, cents, intra, p, empty, emb, sim,
                            tuple(cm.epoch_end for cm in correlations), k_star)
