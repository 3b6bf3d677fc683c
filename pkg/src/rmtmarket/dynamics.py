"""Time series of correlation-matrix statistics over rolling epochs.

Moments are population (divide-by-n) central moments of the n = N(N-1)/2
strict upper-triangle elements.  Kurtosis is non-excess (Gaussian -> 3).
Skewness and kurtosis are NaN when the elements have zero variance.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from .correlation import CorrelationMatrix
from .errors import DataError, ParameterError, RmtError
from .powermap import EPS_DYNAMICS, emerging_spectrum

NAN = float("nan")


@dataclass
class EpochStats:
    tau: object
    mean_c: float
    mean_abs_c: float
    df: float
    variance: float
    skewness: float
    kurtosis: float
    lambda_max: float
    lambda_min_emerging: float = NAN
    neg_count: float = NAN


def offdiag_moments(x: np.ndarray) -> tuple[float, float, float, float, float]:
    """(mean, mean |x|, variance, skewness, kurtosis) of a flat sample."""
    x = np.asarray(x, dtype=float)
    mean = float(x.mean())
    d = x - mean
    var = float(np.mean(d * d))
    if var > 0:
        skew = float(np.mean(d ** 3) / var ** 1.5)
        kurt = float(np.mean(d ** 4) / var ** 2)
    else:
        skew = kurt = NAN
    return mean, float(np.abs(x).mean()), var, skew, kurt


def epoch_stats(c: CorrelationMatrix, epsilon: float | None = EPS_DYNAMICS) -> EpochStats:
    """Moments of one epoch plus the largest and emerging-spectrum eigenvalues.

    The emerging fields stay NaN when ``epsilon`` is falsy or the epoch is
    not shorter than N.
    """
    if c.n < 2:
        raise ParameterError("need N >= 2 for off-diagonal statistics")
    mean, mabs, var, skew, kurt = offdiag_moments(c.offdiag())
    lmax = float(np.linalg.eigvalsh(c.c)[-1])
    lmin = negc = NAN
    if epsilon and c.epoch_len and c.epoch_len < c.n:
        es = emerging_spectrum(c, epsilon)
        lmin, negc = es.lambda_min, es.neg_count
    return EpochStats(c.epoch_end, mean, mabs, mabs - mean, var, skew, kurt, lmax, lmin, negc)


def stats_series(correlations: Sequence[CorrelationMatrix], epsilon: float | None = EPS_DYNAMICS) -> list[EpochStats]:
    if not correlations:
        raise ParameterError("need at least one epoch")
    out = []
    for cm in sorted(correlations, key=lambda m: m.tau):
        try:
            out.append(epoch_stats(cm, epsilon))
        except RmtError as exc:
            raise type(exc)(f"tau={cm.epoch_end}: {exc}") from exc
    return out


def column(series: Sequence[EpochStats], name: str) -> np.ndarray:
    return np.array([getattr(s, name) for s in series], dtype=float)


def write_stats_csv(series: Sequence[EpochStats], path) -> None:
    names = [f.name for f in fields(EpochStats)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for s in series:
            w.writerow([s.tau] + [repr(float(getattr(s, k))) for k in names[1:]])


@dataclass
class LaggedRelation:
    lag: int
    r: float
    n_pairs: int
    x: np.ndarray
    y: np.ndarray
    tau: tuple = ()

    def residual_variance(self) -> float:
        """Variance of y about its least-squares line on x."""
        slope, icpt = np.polyfit(self.x, self.y, 1)
        return float(np.var(self.y - (slope * self.x + icpt)))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "tau"])
            taus = self.tau or range(self.n_pairs)
            for a, b, t in zip(self.x, self.y, taus):
                w.writerow([repr(float(a)), repr(float(b)), t])


def lagged_relation(x, y, lag: int = 0, tau: Sequence | None = None) -> LaggedRelation:
    """Pearson correlation of the pairs ``(x_t, y_{t+lag})``.

    ``tau`` labels the pairs by the time of ``y``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if lag < 0:
        raise ParameterError(f"lag must be >= 0, got {lag}")
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("x and y must be 1-d series of equal length")
    if len(x) <= lag + 2:
        raise ParameterError(f"series of length {len(x)} too short for lag {lag}")
    xs, ys = x[:len(x) - lag], y[lag:]
    r = float(np.corrcoef(xs, ys)[0, 1])
    labels = tuple(tau[lag:]) if tau is not None else ()
    return LaggedRelation(lag, r, len(xs), xs, ys, labels)


def lag1_effect_tstat(mu, lmin, window: int) -> np.ndarray:
    """Rolling t-statistic of the slope in ``mu(t) = a + b * lmin(t-1)``.

    Output has ``len(mu) - 1 - window + 1`` entries; entry ``k`` uses the
    pairs ``t = k+1 .. k+window``.  A zero-variance regressor gives NaN and a
    zero-residual fit gives ``+-inf``.
    """
    mu = np.asarray(mu, dtype=float)
    lmin = np.asarray(lmin, dtype=float)
    if window < 8:
        raise ParameterError(f"window must be >= 8, got {window}")
    if mu.shape != lmin.shape:
        raise DataError("mu and lambda_min series must be aligned")
    yv, xv = mu[1:], lmin[:-1]
    count = len(yv) - window + 1
    if count < 1:
        raise ParameterError(f"series too short for window {window}")
    out = np.empty(count)
    for k in range(count):
        out[k] = _slope_t(xv[k:k + window], yv[k:k + window])
    return out


def _slope_t(x: np.ndarray, y: np.ndarray) -> float:
    n = len(x)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        return NAN
    b = float(xc @ (y - y.mean())) / sxx
    resid = y - y.mean() - b * xc
    sse = float(resid @ resid)
    # relative cutoff so exact fits read as perfect despite round-off
    if sse <= 1e-26 * max(float((y - y.mean()) @ (y - y.mean())), 1e-300):
        return math.copysign(math.inf, b) if b != 0 else NAN
    se = math.sqrt(sse / (n - 2) / sxx)
    return b / se
