import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmtmarket.correlation import PricePanel
from rmtmarket.errors import DataError, FormatError
from rmtmarket.ingest import (SECTOR_ORDER, SectorMap, cached_correlations, load_prices, load_sectors,
                              panel_hash, sector_sort, write_prices, write_sectors)


CLEAN = """date,A,B,C
2000-01-03,10,20,30
2000-01-04,11,19,31
2000-01-05,12,21,29
2000-01-06,11.5,22,30
2000-01-07,12.5,20,32
"""


def write(tmp_path, text, name="p.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_clean_panel(tmp_path):
    panel, report = load_prices(write(tmp_path, CLEAN), return_report=True)
    assert panel.prices.shape == (3, 5)
    assert panel.asset_ids == ("A", "B", "C")
    assert panel.dates[0] == "2000-01-03"
    assert not report.dropped and str(report) == "no assets dropped"


def test_missing_value_drops_asset(tmp_path):
    text = CLEAN.replace("2000-01-05,12,21,29", "2000-01-05,12,,29")
    panel, report = load_prices(write(tmp_path, text), return_report=True)
    assert panel.asset_ids == ("A", "C")
    assert "B" in report.dropped and "missing" in report.dropped["B"]


def test_negative_price_drops_asset(tmp_path):
    text = CLEAN.replace("2000-01-06,11.5,22,30", "2000-01-06,11.5,22,-30")
    panel, report = load_prices(write(tmp_path, text), return_report=True)
    assert report.dropped == {"C": "non-positive price"}


def test_all_dropped_is_data_error(tmp_path):
    with pytest.raises(DataError):
        load_prices(write(tmp_path, "date,A\n2000-01-03,0\n2000-01-04,1\n"))


@pytest.mark.parametrize("text,line", [
    ("date,A\n2000-01-03,1\n2000-01-04,abc\n", 3),
    ("date,A\n2000-01-03,1,2\n", 2),
    ("date,A\nnot-a-date,1\n", 2),
    ("day,A\n2000-01-03,1\n", 1),
])
def test_format_errors_have_line(tmp_path, text, line):
    with pytest.raises(FormatError, match=f"line {line}"):
        load_prices(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_prices(tmp_path / "nope.csv")


@settings(max_examples=25)
@given(st.integers(1, 5), st.integers(2, 8), st.integers(0, 10_000))
def test_roundtrip(tmp_path_factory, n, t, seed):
    rng = np.random.default_rng(seed)
    prices = np.exp(rng.standard_normal((n, t)))
    dates = tuple(f"2001-02-{d + 1:02d}" for d in range(t))
    panel = PricePanel(prices, tuple(f"X{i}" for i in range(n)), dates)
    path = tmp_path_factory.mktemp("rt") / "p.csv"
    write_prices(panel, path)
    back = load_prices(path)
    assert back.asset_ids == panel.asset_ids and back.dates == panel.dates
    np.testing.assert_array_equal(back.prices, panel.prices)


def _panel(ids):
    return PricePanel(np.arange(1.0, 1 + 2 * len(ids)).reshape(len(ids), 2), ids, ("d1", "d2"))


def test_sector_sort_groups_and_trailing_other():
    sectors = SectorMap({"a": "IT", "b": "CD", "c": "IT", "d": "CD"})
    out = sector_sort(_panel(("z", "c", "b", "a", "d")), sectors)
    assert out.asset_ids == ("b", "d", "a", "c", "z")
    assert out.sector_labels == ("CD", "CD", "IT", "IT", "other")
    np.testing.assert_array_equal(out.prices[0], [5.0, 6.0])


def test_sector_sort_already_sorted():
    sectors = SectorMap({"a": "CD", "b": "CS"})
    p = _panel(("a", "b"))
    assert sector_sort(p, sectors).asset_ids == p.asset_ids


@given(st.permutations(["a", "b", "c", "d", "e", "f"]))
def test_sort_is_permutation(ids):
    sectors = SectorMap({"a": "UT", "c": "FN", "e": "FN"})
    p = _panel(tuple(ids))
    out = sector_sort(p, sectors)
    assert sorted(map(tuple, out.prices)) == sorted(map(tuple, p.prices))
    assert out.asset_ids == ("c", "e", "a", "b", "d", "f")


def test_sector_vocabulary():
    assert SECTOR_ORDER[:10] == ("CD", "CS", "HC", "EG", "FN", "ID", "IT", "MT", "TC", "UT")
    with pytest.raises(DataError):
        SectorMap({"a": "XX"})


def test_sector_file_roundtrip(tmp_path):
    s = SectorMap({"a": "HC", "b": "other"})
    write_sectors(s, tmp_path / "s.csv")
    assert load_sectors(tmp_path / "s.csv") == s


def test_sector_file_errors(tmp_path):
    with pytest.raises(FormatError, match="line 2"):
        load_sectors(write(tmp_path, "a,HC\nb,ZZ\n", "s.csv"))
    with pytest.raises(FormatError, match="line 2"):
        load_sectors(write(tmp_path, "a,HC\na,IT\n", "s.csv"))


def test_cache_hit_and_key(tmp_path):
    rng = np.random.default_rng(0)
    panel = PricePanel(np.exp(rng.standard_normal((4, 60)).cumsum(axis=1) * 0.01),
                       ("a", "b", "c", "d"), tuple(f"2002-{m:02d}-{d:02d}" for m in (1, 2, 3) for d in range(1, 21)))
    first = cached_correlations(panel, 10, 5, tmp_path)
    files = list(tmp_path.iterdir())
    assert len(files) == 1 and panel_hash(panel)[:16] in files[0].name
    second = cached_correlations(panel, 10, 5, tmp_path)
    assert [m.epoch_end for m in first] == [m.epoch_end for m in second]
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.c, b.c)
    cached_correlations(panel, 10, 7, tmp_path)
    assert len(list(tmp_path.iterdir())) == 2
