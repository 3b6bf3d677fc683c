"""Log returns and equal-time Pearson correlation matrices over epochs.

Epoch indexing is 0-based and inclusive: the epoch ending on day ``tau``
covers returns ``tau - M + 1 .. tau``.  Rolling epochs therefore end on
``M - 1, M - 1 + shift, ...``; in 1-based day counts that is ``M, M + shift, ...``.

Means and standard deviations use the biased (divide-by-M) convention, so an
epoch matrix equals ``Z Z^T / M`` for the row-standardized window ``Z`` and
has rank at most ``M - 1``.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, DegenerateSeriesError, FormatError, ParameterError


@dataclass(eq=False)
class PricePanel:
    prices: np.ndarray
    asset_ids: tuple[str, ...]
    dates: tuple[str, ...]
    sector_labels: tuple[str, ...] = ()

    def __post_init__(self):
        self.prices = np.asarray(self.prices, dtype=float)
        self.asset_ids = tuple(self.asset_ids)
        self.dates = tuple(self.dates)
        n, t = self.prices.shape
        if not self.sector_labels:
            self.sector_labels = ("other",) * n
        self.sector_labels = tuple(self.sector_labels)
        if len(self.asset_ids) != n or len(self.sector_labels) != n:
            raise DataError("asset_ids/sector_labels length does not match price rows")
        if len(self.dates) != t:
            raise DataError("dates length does not match price columns")
        if len(set(self.asset_ids)) != n:
            raise DataError("asset ids must be unique")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("dates must be strictly increasing")
        bad = ~(self.prices > 0)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise DataError(f"non-positive price for asset {self.asset_ids[i]} on {self.dates[j]}")

    @property
    def n(self) -> int:
        return self.prices.shape[0]


@dataclass(eq=False)
class ReturnMatrix:
    returns: np.ndarray
    asset_ids: tuple[str, ...] = ()
    dates: tuple = ()

    def __post_init__(self):
        self.returns = np.atleast_2d(np.asarray(self.returns, dtype=float))
        n, t = self.returns.shape
        if not self.asset_ids:
            self.asset_ids = tuple(f"a{i}" for i in range(n))
        if not self.dates:
            self.dates = tuple(range(t))
        self.asset_ids = tuple(self.asset_ids)
        self.dates = tuple(self.dates)
        if len(self.asset_ids) != n or len(self.dates) != t:
            raise DataError("labels do not match the return matrix shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.returns.shape


@dataclass(eq=False)
class CorrelationMatrix:
    c: np.ndarray
    epoch_end: object = None
    epoch_len: int = 0
    asset_ids: tuple[str, ...] = ()
    tau: int = -1

    def __post_init__(self):
        if not self.asset_ids:
            self.asset_ids = tuple(f"a{i}" for i in range(self.c.shape[0]))

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def offdiag(self) -> np.ndarray:
        """Strict upper-triangle elements, row-major."""
        return self.c[np.triu_indices(self.n, k=1)]


def log_returns(panel: PricePanel) -> ReturnMatrix:
    if panel.prices.shape[1] < 2:
        raise DataError("need at least 2 dates to form returns")
    r = np.diff(np.log(panel.prices), axis=1)
    return ReturnMatrix(r, panel.asset_ids, panel.dates[1:])


def pearson(x: np.ndarray) -> np.ndarray:
    """Biased-convention Pearson matrix of the rows of ``x`` with exact unit diagonal.

    Rows must have nonzero spread; callers check that.
    """
    z = x - x.mean(axis=1, keepdims=True)
    z /= np.sqrt((z * z).mean(axis=1, keepdims=True))
    c = (z @ z.T) / x.shape[1]
    c = 0.5 * (c + c.T)
    np.clip(c, -1.0, 1.0, out=c)
    np.fill_diagonal(c, 1.0)
    return c


def epoch_correlation(returns: ReturnMatrix, epoch_end: int, epoch_len: int) -> CorrelationMatrix:
    m = int(epoch_len)
    tau = int(epoch_end)
    n, t = returns.shape
    if m < 2:
        raise ParameterError(f"epoch length must be >= 2, got {m}")
    if tau - m + 1 < 0 or tau >= t:
        raise ParameterError(f"epoch ending at {tau} with length {m} exceeds the {t} available returns")
    window = returns.returns[:, tau - m + 1:tau + 1]
    if not np.all(np.isfinite(window)):
        i = int(np.argwhere(~np.isfinite(window))[0, 0])
        raise DataError(f"non-finite return for asset {returns.asset_ids[i]} in epoch ending {returns.dates[tau]}")
    flat = np.ptp(window, axis=1) == 0
    if flat.any():
        i = int(np.flatnonzero(flat)[0])
        raise DegenerateSeriesError(
            f"asset {returns.asset_ids[i]} has zero variance in epoch ending {returns.dates[tau]}",
            asset=returns.asset_ids[i], tau=tau)
    return CorrelationMatrix(pearson(window), returns.dates[tau], m, returns.asset_ids, tau)


def epoch_ends(t: int, epoch_len: int, shift: int) -> range:
    """0-based end indices of the rolling epochs."""
    if epoch_len < 2:
        raise ParameterError(f"epoch length must be >= 2, got {epoch_len}")
    if shift < 1:
        raise ParameterError(f"shift must be >= 1, got {shift}")
    if epoch_len > t:
        raise ParameterError(f"epoch length {epoch_len} exceeds series length {t}")
    return range(epoch_len - 1, t, shift)


def rolling_correlations(returns: ReturnMatrix, epoch_len: int, shift: int = 1) -> list[CorrelationMatrix]:
    out = []
    for tau in epoch_ends(returns.shape[1], epoch_len, shift):
        try:
            out.append(epoch_correlation(returns, tau, epoch_len))
        except DegenerateSeriesError as exc:
            raise DegenerateSeriesError(f"tau={tau}: {exc}", exc.asset, tau) from exc
    return out


# -- serialization ---------------------------------------------------------

def write_correlation_csv(cm: CorrelationMatrix, path) -> None:
    """Full matrix with a header row and a leading column of asset ids."""
    with open(path, "w") as fh:
        fh.write("asset," + ",".join(cm.asset_ids) + "\n")
        for aid, row in zip(cm.asset_ids, cm.c):
            fh.write(aid + "," + ",".join(repr(float(v)) for v in row) + "\n")


def read_correlation_csv(path) -> CorrelationMatrix:
    with open(path) as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    if header[0] != "asset":
        raise FormatError("expected 'asset' in the first header cell", line=1)
    ids = tuple(header[1:])
    rows = []
    for k, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(ids) + 1:
            raise FormatError(f"expected {len(ids) + 1} cells, got {len(cells)}", line=k)
        rows.append([float(v) for v in cells[1:]])
    return CorrelationMatrix(np.array(rows), None, 0, ids)


# Binary cache layout (little-endian):
#   b"RMTC" | u32 version | u64 n_matrices | u64 N
#   n_matrices * N * N f64, each matrix row-major
#   footer: utf-8 JSON {asset_ids, epoch_len, epoch_ends, taus, meta}
#   u64 footer byte length | b"RMTC"
_MAGIC = b"RMTC"
_VERSION = 1
_HEAD = struct.Struct("<4sIQQ")
_TAIL = struct.Struct("<Q4s")


def write_correlation_cache(mats: Sequence[CorrelationMatrix], path, meta: dict | None = None) -> None:
    if not mats:
        raise ParameterError("nothing to cache")
    n = mats[0].n
    if any(m.n != n for m in mats):
        raise ParameterError("all cached matrices must share a dimension")
    footer = json.dumps({
        "asset_ids": list(mats[0].asset_ids),
        "epoch_len": int(mats[0].epoch_len),
        "epoch_ends": [m.epoch_end for m in mats],
        "taus": [int(m.tau) for m in mats],
        "meta": meta or {},
    }).encode()
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(_MAGIC, _VERSION, len(mats), n))
        for m in mats:
            fh.write(np.ascontiguousarray(m.c, dtype="<f8").tobytes())
        fh.write(footer)
        fh.write(_TAIL.pack(len(footer), _MAGIC))


def read_correlation_cache(path) -> tuple[list[CorrelationMatrix], dict]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEAD.size + _TAIL.size:
        raise FormatError(f"{path}: truncated correlation cache")
    magic, version, count, n = _HEAD.unpack_from(blob, 0)
    flen, magic2 = _TAIL.unpack_from(blob, len(blob) - _TAIL.size)
    if magic != _MAGIC or magic2 != _MAGIC or version != _VERSION:
        raise FormatError(f"{path}: not a version-{_VERSION} correlation cache")
    body = count * n * n * 8
    if _HEAD.size + body + flen + _TAIL.size != len(blob):
        raise FormatError(f"{path}: size does not match header")
    arr = np.frombuffer(blob, dtype="<f8", count=count * n * n, offset=_HEAD.size)
    arr = arr.reshape(count, n, n).astype(float)
    foot = json.loads(blob[_HEAD.size + body:_HEAD.size + body + flen].decode())
    ids = tuple(foot["asset_ids"])
    mats = [CorrelationMatrix(arr[k].copy(), foot["epoch_ends"][k], foot["epoch_len"], ids, foot["taus"][k])
            for k in range(count)]
    return mats, foot["meta"]
