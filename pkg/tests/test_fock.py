import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import classical_pmf, thermal_pmf
from photodemon.errors import CutoffTooSmallError, UndefinedG2Error
from photodemon.fock import (
    PhotonDistribution,
    ThermalParams,
    bose_einstein_entropy,
    classical_thermal_distribution,
    cross_entropy,
    entropy,
    fock_state,
    moments,
    poisson_distribution,
    relative_entropy,
    source_distribution,
    source_inverse_temperature,
    thermal_cutoff,
    thermal_distribution,
)

n_bars = st.floats(0.05, 40.0)


def pmfs(max_size=30):
    return st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=max_size).map(
        lambda w: PhotonDistribution(np.array(w) / np.sum(w))
    )


@given(n_bars)
def test_thermal_matches_bose_einstein_formula(n_bar):
    d = thermal_distribution(ThermalParams(n_bar))
    ref = thermal_pmf(n_bar, d.n_max)
    np.testing.assert_allclose(d.probs, ref / ref.sum(), rtol=1e-11, atol=1e-300)
    assert d.tail_mass_bound < 1e-12


@given(n_bars)
def test_thermal_moments(n_bar):
    m = moments(thermal_distribution(ThermalParams(n_bar)))
    assert m.mean == pytest.approx(n_bar, rel=1e-9)
    assert m.variance == pytest.approx(n_bar * (n_bar + 1), rel=1e-8)
    assert m.g2 == pytest.approx(2.0, abs=1e-8)


def test_thermal_rejects_nonpositive_mean():
    with pytest.raises(ValueError):
        ThermalParams(0.0)
    with pytest.raises(ValueError):
        ThermalParams(-1.0)


def test_explicit_cutoff_too_small_for_tolerance():
    with pytest.raises(CutoffTooSmallError):
        thermal_distribution(ThermalParams(7.99), n_max=20)


@given(n_bars)
def test_thermal_cutoff_bounds_tail(n_bar):
    n_max = thermal_cutoff(n_bar, 1e-12)
    tail = (n_bar / (n_bar + 1)) ** (n_max + 1)
    assert tail < 1e-12
    assert (n_bar / (n_bar + 1)) ** n_max >= 1e-12 or n_max == 0


def test_beta_hw():
    assert ThermalParams(3.97).beta_hw == pytest.approx(math.log(1 + 1 / 3.97))
    assert source_inverse_temperature(3.97, "classical") == pytest.approx(1 / 3.97)


@given(st.floats(0.2, 50.0))
def test_classical_source_is_boltzmann_weighted(n_bar):
    d = classical_thermal_distribution(n_bar)
    ref = classical_pmf(n_bar, d.n_max)
    np.testing.assert_allclose(d.probs, ref / ref.sum(), rtol=1e-10)


def test_classical_mean_lags_quantum_by_half_photon_at_high_temperature():
    assert classical_thermal_distribution(200.0).mean == pytest.approx(199.5, abs=1e-3)


def test_poisson_and_fock_g2():
    assert moments(poisson_distribution(3.0)).g2 == pytest.approx(1.0, abs=1e-10)
    for n in (1, 2, 5):
        assert moments(fock_state(n)).g2 == pytest.approx(1 - 1 / n)


def test_vacuum_has_undefined_g2():
    with pytest.raises(UndefinedG2Error):
        moments(fock_state(0, n_max=4))


@given(n_bars)
def test_entropy_matches_bose_einstein(n_bar):
    assert entropy(thermal_distribution(ThermalParams(n_bar))) == pytest.approx(
        bose_einstein_entropy(n_bar), rel=1e-9, abs=1e-12
    )


@given(pmfs(), pmfs())
def test_relative_entropy_gibbs_inequality(p, q):
    D = relative_entropy(p, q)
    assert D >= -1e-12
    assert relative_entropy(p, p) == pytest.approx(0.0, abs=1e-12)
    assert cross_entropy(p, q) == pytest.approx(entropy(p) + D, rel=1e-9, abs=1e-12)


def test_relative_entropy_infinite_off_support():
    p = PhotonDistribution(np.array([0.5, 0.5]))
    q = PhotonDistribution(np.array([1.0, 0.0]))
    assert relative_entropy(p, q) == math.inf


def test_distribution_validation():
    with pytest.raises(ValueError):
        PhotonDistribution(np.array([0.5, -0.1, 0.6]))
    with pytest.raises(ValueError):
        PhotonDistribution(np.array([0.5, np.nan]))


@given(pmfs())
def test_json_round_trip(d):
    back = PhotonDistribution.from_json(d.to_json())
    np.testing.assert_array_equal(back.probs, d.probs)
    data = json.loads(d.to_json())
    assert set(data) == {"n_max", "probs"} and data["n_max"] == d.n_max


def test_csv_layout():
    lines = thermal_distribution(ThermalParams(1.0), n_max=60).to_csv().splitlines()
    assert lines[0] == "n,p_n"
    assert lines[1] == "0,0.5"
    assert len(lines) == 62


def test_padding_keeps_mass():
    d = source_distribution(2.0, "quantum")
    assert d.padded(d.n_max + 10).total == pytest.approx(d.total)
    assert d.padded(d.n_max + 10).n_max == d.n_max + 10


def test_classical_source_approaches_thermal_at_high_temperature():
    c = classical_thermal_distribution(100.0)
    q = thermal_distribution(ThermalParams(100.0))
    ratio = c.probs[:301] / q.probs[:301]
    assert np.max(np.abs(ratio - 1)) < 0.01
