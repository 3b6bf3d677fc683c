import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_correlation
from rmtmarket.correlation import CorrelationMatrix, ReturnMatrix, pearson, rolling_correlations
from rmtmarket.dynamics import (column, epoch_stats, lag1_effect_tstat, lagged_relation, offdiag_moments,
                                stats_series, write_stats_csv)
from rmtmarket.errors import DataError, ParameterError
from rmtmarket.synth import regime_panel


def loop_moments(c):
    n = len(c)
    xs = [c[i][j] for i in range(n) for j in range(i + 1, n)]
    k = len(xs)
    mean = sum(xs) / k
    mabs = sum(abs(x) for x in xs) / k
    m2 = sum((x - mean) ** 2 for x in xs) / k
    m3 = sum((x - mean) ** 3 for x in xs) / k
    m4 = sum((x - mean) ** 4 for x in xs) / k
    return mean, mabs, m2, m3 / m2 ** 1.5, m4 / m2 ** 2


def test_moments_match_loops(rng):
    for n in (3, 7, 15):
        c = random_correlation(n, rng)
        s = epoch_stats(CorrelationMatrix(c, epoch_len=3 * n), epsilon=None)
        mean, mabs, var, skew, kurt = loop_moments(c.tolist())
        got = (s.mean_c, s.mean_abs_c, s.variance, s.skewness, s.kurtosis)
        np.testing.assert_allclose(got, (mean, mabs, var, skew, kurt), rtol=0, atol=1e-12)
        assert s.df == pytest.approx(mabs - mean, abs=1e-12)


def test_constant_elements_give_nan_shape():
    mean, mabs, var, skew, kurt = offdiag_moments(np.full(6, 0.3))
    assert var == 0 and math.isnan(skew) and math.isnan(kurt)


def test_df_nonnegative_on_many_matrices():
    rng = np.random.default_rng(8)
    for _ in range(10_000):
        x = rng.uniform(-1, 1, size=6)
        mean, mabs, *_ = offdiag_moments(x)
        assert mabs - mean >= 0


@given(arrays(float, 10, elements=st.floats(0, 1)))
def test_df_zero_without_negatives(x):
    mean, mabs, *_ = offdiag_moments(x)
    assert mabs - mean == pytest.approx(0.0, abs=1e-15)


def test_emerging_fields(rng):
    c = CorrelationMatrix(pearson(rng.standard_normal((30, 10))), epoch_end=9, epoch_len=10)
    s = epoch_stats(c, epsilon=0.01)
    assert s.lambda_min_emerging < 0.05 and not math.isnan(s.neg_count)
    long = CorrelationMatrix(pearson(rng.standard_normal((5, 50))), epoch_len=50)
    assert math.isnan(epoch_stats(long).lambda_min_emerging)


def test_lambda_max(rng):
    c = random_correlation(5, rng)
    assert epoch_stats(CorrelationMatrix(c)).lambda_max == pytest.approx(np.linalg.eigvalsh(c)[-1])


def test_regime_switch_signs():
    g = regime_panel(40, [(400, 0.1), (400, 0.7)], seed=3)
    series = stats_series(rolling_correlations(ReturnMatrix(g.data), 20, 5))
    mc = column(series, "mean_c")
    assert np.corrcoef(mc, column(series, "variance"))[0, 1] < 0
    assert np.corrcoef(mc, column(series, "kurtosis"))[0, 1] > 0


def test_series_sorted_and_written(tmp_path, rng):
    cs = rolling_correlations(ReturnMatrix(rng.standard_normal((6, 60))), 10, 10)
    series = stats_series(list(reversed(cs)))
    assert [s.tau for s in series] == [c.epoch_end for c in cs]
    write_stats_csv(series, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("tau,mean_c") and len(lines) == len(cs) + 1


def test_lagged_relation_pairs():
    x = np.arange(10.0)
    y = x ** 2
    rel = lagged_relation(x, y, lag=2, tau=list("abcdefghij"))
    assert rel.n_pairs == 8
    np.testing.assert_array_equal(rel.y, y[2:])
    assert rel.tau[0] == "c"
    assert rel.r == pytest.approx(np.corrcoef(x[:8], y[2:])[0, 1])


def test_lagged_relation_errors():
    with pytest.raises(ParameterError):
        lagged_relation([1, 2, 3], [1, 2, 3], lag=1)
    with pytest.raises(ParameterError):
        lagged_relation([1, 2, 3, 4], [1, 2, 3, 4], lag=-1)


def test_residual_variance_zero_for_line():
    rel = lagged_relation(np.arange(6.0), 2 * np.arange(6.0) + 1)
    assert rel.residual_variance() == pytest.approx(0.0, abs=1e-20)


def textbook_t(x, y):
    n = len(x)
    X = np.column_stack([np.ones(n), x])
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    resid = y - X @ beta
    s2 = resid @ resid / (n - 2)
    cov = s2 * np.linalg.inv(X.T @ X)
    return beta[1] / math.sqrt(cov[1, 1])


def test_tstat_matches_textbook(rng):
    mu = rng.standard_normal(40)
    lmin = rng.standard_normal(40)
    t = lag1_effect_tstat(mu, lmin, 12)
    assert len(t) == 39 - 12 + 1
    for k in (0, 7, len(t) - 1):
        ref = textbook_t(lmin[:-1][k:k + 12], mu[1:][k:k + 12])
        assert t[k] == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_tstat_edge_cases():
    x = np.arange(20.0)
    assert np.all(np.isnan(lag1_effect_tstat(np.arange(20.0), np.ones(20), 8)))
    perfect = lag1_effect_tstat(np.concatenate([[0.0], 3 * x[:-1] + 1]), x, 8)
    assert np.all(np.isposinf(perfect))
    with pytest.raises(ParameterError):
        lag1_effect_tstat(x, x, 5)
    with pytest.raises(DataError):
        lag1_effect_tstat(x, x[:-1], 8)


def test_lagged_identity_and_sign():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(50)
    assert lagged_relation(x, x).r == pytest.approx(1.0)
    assert lagged_relation(x, -x + 0.1 * rng.standard_normal(50)).r < 0


def test_lagged_decay_on_rolling_panel():
    g = regime_panel(30, [(300, 0.1), (200, 0.5), (300, 0.2), (200, 0.7)], seed=8)
    series = stats_series(rolling_correlations(ReturnMatrix(g.data), 20, 1), epsilon=None)
    mc, ma = column(series, "mean_c"), column(series, "mean_abs_c")
    rels = [lagged_relation(mc, ma, lag) for lag in range(4)]
    rs = [abs(r.r) for r in rels]
    res = [r.residual_variance() for r in rels]
    assert rs == sorted(rs, reverse=True)
    assert res == sorted(res)


def test_small_distortion_barely_moves_mean(rng):
    from rmtmarket.powermap import power_map
    c = pearson(rng.standard_normal((30, 20)))
    a = offdiag_moments(c[np.triu_indices(30, 1)])[0]
    b = offdiag_moments(power_map(c, 0.01)[np.triu_indices(30, 1)])[0]
    assert abs(a - b) < 0.01


def test_moments_permutation_invariant(rng):
    c = random_correlation(9, rng)
    perm = rng.permutation(9)
    s1 = epoch_stats(CorrelationMatrix(c), epsilon=None)
    s2 = epoch_stats(CorrelationMatrix(c[np.ix_(perm, perm)]), epsilon=None)
    for name in ("mean_c", "mean_abs_c", "variance", "skewness", "kurtosis", "lambda_max"):
        assert getattr(s1, name) == pytest.approx(getattr(s2, name), rel=1e-12, abs=1e-14)


def test_tstat_slope_one_window_fifty():
    rng = np.random.default_rng(10)
    lmin = rng.standard_normal(120)
    mu = np.concatenate([[0.0], lmin[:-1] + 0.1 * rng.standard_normal(119)])
    t = lag1_effect_tstat(mu, lmin, 50)
    for k in (0, 30, len(t) - 1):
        ref = textbook_t(lmin[:-1][k:k + 50], mu[1:][k:k + 50])
        assert t[k] == pytest.approx(ref, rel=1e-9)
    assert np.all(t > 10)
