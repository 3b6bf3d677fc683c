import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from rmtmarket.errors import ParameterError
from rmtmarket.ensembles import (GeneratorSpec, ensemble_spectrum, element_distribution, histogram_density,
                                 mp_bin_density, mp_bounds, mp_density, mp_zero_mass, wishart)
from rmtmarket.synth import gaussian_panel


def test_wishart_2x2_hand_product():
    b = np.array([[1.0, 2.0, 3.0], [0.0, -1.0, 4.0]])
    w = wishart(b).matrix
    expected = [[sum(b[i, k] * b[j, k] for k in range(3)) / 3 for j in range(2)] for i in range(2)]
    np.testing.assert_allclose(w, expected, rtol=0, atol=1e-15)
    assert wishart(b).q_ratio == 1.5


def test_wishart_of_panel_records_params():
    p = gaussian_panel(3, 12, 2.0, seed=4)
    w = wishart(p)
    assert w.source_params == {"n": 3, "t": 12, "sigma": 2.0, "seed": 4}
    np.testing.assert_allclose(w.matrix, w.matrix.T, atol=0)


@pytest.mark.parametrize("q,s2,lo,hi", [(10, 1, 0.467544, 1.732456), (4, 2, 0.5, 4.5), (1, 1, 0.0, 4.0)])
def test_mp_bounds(q, s2, lo, hi):
    a, b = mp_bounds(q, s2)
    assert a == pytest.approx(lo, abs=1e-6) and b == pytest.approx(hi, abs=1e-6)


@pytest.mark.parametrize("q,s2", [(0, 1), (-1, 1), (2, 0)])
def test_mp_bounds_rejects(q, s2):
    with pytest.raises(ParameterError):
        mp_bounds(q, s2)


def test_mp_density_at_one():
    # hand evaluation with exact edges (1 -+ 1/sqrt(10))^2
    lo, hi = (1 - 10 ** -0.5) ** 2, (1 + 10 ** -0.5) ** 2
    hand = 10 / (2 * math.pi) * math.sqrt((hi - 1) * (1 - lo))
    assert mp_density(1.0, 10, 1.0) == pytest.approx(hand, rel=1e-14)
    assert hand == pytest.approx(0.99392, abs=1e-5)
    # rounded edges 0.468/1.732 reproduce the commonly quoted 0.9932
    assert abs(hand - 0.9932) < 1e-3


def test_mp_density_outside_support_is_zero():
    assert mp_density(0.3, 10) == 0.0
    assert mp_density(2.0, 10) == 0.0
    assert np.all(mp_density(np.array([-1.0, 0.0, 6.0]), 0.5) == 0.0)


@pytest.mark.parametrize("q", [0.25, 0.5, 1.5, 4.0, 10.0])
def test_mp_density_mass(q):
    lo, hi = mp_bounds(q)
    mass = integrate.quad(mp_density, lo, hi, args=(q, 1.0), limit=400)[0]
    assert mass + mp_zero_mass(q) == pytest.approx(1.0, abs=1e-6)


@given(st.floats(0.05, 0.99))
def test_zero_mass_complement(q):
    assert mp_zero_mass(q) == pytest.approx(1 - q)
    assert mp_zero_mass(1 / q) == 0.0


def test_zero_mass_quarter():
    assert mp_zero_mass(0.25) == 0.75


def test_bin_density_integrates():
    edges = np.linspace(0.3, 2.0, 41)
    d = mp_bin_density(edges, 10)
    assert np.sum(d * np.diff(edges)) == pytest.approx(1.0, abs=1e-6)


def test_histogram_density_unit_mass():
    rng = np.random.default_rng(0)
    edges, dens = histogram_density(rng.standard_normal(5000), 50)
    assert len(edges) == 51
    assert np.sum(dens * np.diff(edges)) == pytest.approx(1.0)
    assert dens[0] == 0 and dens[-1] == 0


def test_histogram_needs_bins():
    with pytest.raises(ParameterError):
        histogram_density(np.arange(5.0), 2)


def test_ensemble_spectrum_mean_and_zero_counts():
    spec = GeneratorSpec(40, 20, normalize=True)
    sd = ensemble_spectrum(spec, 5, bins=30, seed=1)
    assert np.all(sd.zero_counts == 40 - 20 + 1)
    # the trace of a correlation matrix is N, so the mean eigenvalue is 1
    assert sd.sample_mean == pytest.approx(1.0, abs=1e-12)
    assert sd.mass() == pytest.approx(1.0)


def test_raw_wishart_zero_count():
    sd = ensemble_spectrum(GeneratorSpec(30, 10), 3, bins=20, seed=2)
    assert np.all(sd.zero_counts == 20)


def test_exclude_zero_mass():
    sd = ensemble_spectrum(GeneratorSpec(30, 10), 3, bins=20, seed=2, exclude_zero=True)
    assert sd.normalization == "nonzero"
    assert sd.mass() == pytest.approx(10 / 30)


def test_ensemble_seed_determinism(tmp_path):
    a = ensemble_spectrum(GeneratorSpec(20, 40), 4, seed=9)
    b = ensemble_spectrum(GeneratorSpec(20, 40), 4, seed=9)
    a.write_csv(tmp_path / "a.csv")
    b.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_correlated_spectrum_has_outlier():
    # constant correlation U pulls one eigenvalue near 1 + (N-1)U
    sd = ensemble_spectrum(GeneratorSpec(50, 2000, u=0.3), 3, seed=5)
    assert np.all(np.abs(sd.member_max - (1 + 49 * 0.3)) < 1.5)


def test_element_distribution_moments():
    # off-diagonal W_ij for sigma=1 has mean 0, variance 1/T
    d = element_distribution(GeneratorSpec(30, 50), 20, bins=40, seed=3)
    assert abs(d.sample_mean) < 0.01
    assert d.sample_var == pytest.approx(1 / 50, rel=0.1)


def test_generator_spec_validation():
    with pytest.raises(ParameterError):
        GeneratorSpec(0, 5)
    with pytest.raises(ParameterError):
        GeneratorSpec(3, 5, epsilon=-0.1)
    assert GeneratorSpec(4, 10).q == 2.5


def test_epsilon_member_is_power_mapped():
    spec = GeneratorSpec(5, 8, normalize=True, epsilon=0.5)
    plain = GeneratorSpec(5, 8, normalize=True)
    m, p = spec.member(3), plain.member(3)
    np.testing.assert_allclose(m, np.sign(p) * np.abs(p) ** 1.5, atol=1e-15)
