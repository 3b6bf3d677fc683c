"""Price and sector files, sector ordering, and a correlation-sequence cache.

Price CSV: a header row ``date,<asset>,<asset>,...`` followed by one row per
trading day with an ISO-8601 date and one price per asset.  Empty cells and
``NA``/``NaN`` count as missing.  Sector CSV: two columns ``asset_id,sector``
with an optional header row.
"""
from __future__ import annotations

import csv
import datetime as dt
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .correlation import (CorrelationMatrix, PricePanel, log_returns, read_correlation_cache,
                          rolling_correlations, write_correlation_cache)
from .errors import DataError, FormatError, ParameterError

log = logging.getLogger(__name__)

SECTOR_ORDER = ("CD", "CS", "HC", "EG", "FN", "ID", "IT", "MT", "TC", "UT", "other")
SECTOR_NAMES = {
    "CD": "Consumer Discretionary",
    "CS": "Consumer Staples",
    "HC": "Health Care",
    "EG": "Energy",
    "FN": "Financials",
    "ID": "Industrials",
    "IT": "Information Technology",
    "MT": "Materials",
    "TC": "Telecommunications Services",
    "UT": "Utilities",
    "other": "Unclassified",
}
_MISSING = {"", "na", "nan", "null"}


@dataclass
class LoadReport:
    """Assets removed while loading, with the reason for each."""

    dropped: dict[str, str] = field(default_factory=dict)

    def __str__(self) -> str:
        if not self.dropped:
            return "no assets dropped"
        return "; ".join(f"{a}: {why}" for a, why in self.dropped.items())


def _parse_date(text: str, line: int) -> str:
    try:
        dt.date.fromisoformat(text)
    except ValueError:
        raise FormatError(f"invalid ISO-8601 date {text!r}", line=line) from None
    return text


def load_prices(path, return_report: bool = False):
    """Read a price CSV into a :class:`PricePanel`.

    Assets with any missing or non-positive price are dropped and listed in
    the report (also logged).  ``return_report=True`` returns
    ``(panel, report)``.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file", line=1)
    header = [h.strip() for h in rows[0]]
    if header[0].lower() != "date":
        raise FormatError(f"first header cell must be 'date', got {header[0]!r}", line=1)
    ids = header[1:]
    if not ids:
        raise FormatError("no asset columns", line=1)
    if len(set(ids)) != len(ids):
        raise FormatError("duplicate asset id in header", line=1)
    dates: list[str] = []
    values = np.full((len(ids), len(rows) - 1), np.nan)
    for k, row in enumerate(rows[1:]):
        line = k + 2
        if len(row) != len(header):
            raise FormatError(f"expected {len(header)} cells, got {len(row)}", line=line)
        dates.append(_parse_date(row[0].strip(), line))
        for i, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell.lower() in _MISSING:
                continue
            try:
                values[i, k] = float(cell)
            except ValueError:
                raise FormatError(f"unparsable price {cell!r} for {ids[i]}", line=line) from None
    if not dates:
        raise DataError(f"{path}: no price rows")
    if any(a >= b for a, b in zip(dates, dates[1:])):
        raise DataError(f"{path}: dates must be strictly increasing")
    report = LoadReport()
    keep = []
    for i, aid in enumerate(ids):
        v = values[i]
        if np.isnan(v).any():
            report.dropped[aid] = f"missing price on {int(np.isnan(v).sum())} date(s)"
        elif not np.all(v > 0) or not np.all(np.isfinite(v)):
            report.dropped[aid] = "non-positive price"
        else:
            keep.append(i)
    for aid, why in report.dropped.items():
        log.warning("dropping %s: %s", aid, why)
    if not keep:
        raise DataError(f"{path}: no complete assets remain ({report})")
    panel = PricePanel(values[keep], tuple(ids[i] for i in keep), tuple(dates))
    return (panel, report) if return_report else panel


def write_prices(panel: PricePanel, path) -> None:
    """Inverse of :func:`load_prices` for a valid panel (floats written with ``repr``)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", *panel.asset_ids])
        for j, d in enumerate(panel.dates):
            w.writerow([d, *(repr(float(x)) for x in panel.prices[:, j])])


class SectorMap(dict):
    """``asset_id -> sector code``; unknown assets map to ``"other"``."""

    def __init__(self, mapping=None):
        super().__init__()
        for aid, code in (mapping or {}).items():
            self[aid] = code

    def __setitem__(self, aid, code):
        if code not in SECTOR_ORDER:
            raise DataError(f"unknown sector {code!r} for {aid}; expected one of {SECTOR_ORDER}")
        super().__setitem__(aid, code)

    def label(self, aid: str) -> str:
        return self.get(aid, "other")

    def labels(self, asset_ids) -> tuple[str, ...]:
        return tuple(self.label(a) for a in asset_ids)


def load_sectors(path) -> SectorMap:
    out = SectorMap()
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise FormatError(f"expected 2 cells, got {len(row)}", line=k)
            aid, code = row[0].strip(), row[1].strip()
            if k == 1 and code.lower() == "sector":
                continue
            if aid in out:
                raise FormatError(f"asset {aid!r} listed twice", line=k)
            try:
                out[aid] = code
            except DataError as exc:
                raise FormatError(str(exc), line=k) from None
    return out


def write_sectors(sectors: SectorMap, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["asset_id", "sector"])
        for aid, code in sectors.items():
            w.writerow([aid, code])


def sector_order(asset_ids, sectors: SectorMap) -> np.ndarray:
    """Permutation grouping assets by sector (fixed code order), then by id."""
    rank = {code: r for r, code in enumerate(SECTOR_ORDER)}
    keys = [(rank[sectors.label(a)], a) for a in asset_ids]
    return np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=int)


def sector_sort(panel: PricePanel, sectors: SectorMap) -> PricePanel:
    perm = sector_order(panel.asset_ids, sectors)
    ids = tuple(panel.asset_ids[i] for i in perm)
    return PricePanel(panel.prices[perm], ids, panel.dates, sectors.labels(ids))


def panel_hash(panel: PricePanel) -> str:
    h = hashlib.sha256()
    h.update("\x1f".join(panel.asset_ids).encode())
    h.update(b"\x1e")
    h.update("\x1f".join(panel.dates).encode())
    h.update(b"\x1e")
    h.update(np.ascontiguousarray(panel.prices, dtype="<f8").tobytes())
    return h.hexdigest()


def cached_correlations(panel: PricePanel, epoch_len: int, shift: int, cache_dir) -> list[CorrelationMatrix]:
    """Rolling epoch correlations of ``panel``, read from or written to ``cache_dir``.

    Entries are keyed by the panel's content hash, the epoch length and the
    shift, so a changed input never hits a stale file.
    """
    if epoch_len < 2 or shift < 1:
        raise ParameterError("need epoch length >= 2 and shift >= 1")
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = panel_hash(panel)
    path = cache_dir / f"corr_{key[:16]}_M{epoch_len}_s{shift}.bin"
    if path.exists():
        mats, meta = read_correlation_cache(path)
        if meta.get("panel_hash") == key:
            return mats
        log.warning("cache %s belongs to another panel; recomputing", path)
    mats = rolling_correlations(log_returns(panel), epoch_len, shift)
    tmp = path.with_suffix(".tmp")
    write_correlation_cache(mats, tmp, {"panel_hash": key, "epoch_len": epoch_len, "shift": shift})
    tmp.replace(path)
    return mats
