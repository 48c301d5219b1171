import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from photodemon.errors import CutoffTooSmallError, NotUnimodalError
from photodemon.fock import moments
from photodemon.protocol import SweepError, SweepSpec, gain, optimal_r, run_protocol, sweep
from photodemon.subtraction import MeasurementConfig


def closed_form_gain(n_bar, r, eta):
    # single-click threshold: only P(no click | k) = (1 - eta)**k enters
    x = eta * r * n_bar
    return (1 - r) * (1 - 1 / (1 + x) ** 2) - x / (1 + x)


@pytest.mark.parametrize(
    "n_bar, r, eta, N, m_th, variant",
    [
        (3.97, 0.144, 1.0, 10, 1, "quantum"),
        (7.99, 0.115, 0.6, 10, 1, "quantum"),
        (3.97, 0.05, 1.0, 10, 3, "quantum"),
        (2.0, 0.2, 0.8, 4, 2, "classical"),
    ],
)
def test_output_matches_brute_force(n_bar, r, eta, N, m_th, variant):
    res = run_protocol(n_bar, MeasurementConfig(r, eta, N, m_th), variant=variant)
    n = res.output.n_max
    pin = oracles.thermal_pmf(n_bar, n) if variant == "quantum" else oracles.classical_pmf(n_bar, n)
    out = oracles.protocol_output(pin, r, oracles.response_stirling(N, eta, n), m_th, pin)
    np.testing.assert_allclose(res.output.probs, out / out.sum(), atol=1e-12)


@given(st.floats(0.1, 30), st.floats(0.001, 0.9), st.floats(0.05, 1.0), st.integers(1, 20))
def test_gain_closed_form_for_single_click_threshold(n_bar, r, eta, N):
    res = run_protocol(n_bar, MeasurementConfig(r, eta, N))
    assert res.gain == pytest.approx(closed_form_gain(n_bar, r, eta), abs=1e-9)


def test_reference_operating_points_ideal_detection():
    for n_bar, r in ((3.97, 0.144), (7.99, 0.115)):
        assert gain(n_bar, MeasurementConfig(r, 1.0, 10)) == pytest.approx(closed_form_gain(n_bar, r, 1.0), abs=1e-10)
    assert gain(3.97, MeasurementConfig(0.144, 1.0, 10)) == pytest.approx(0.14573, abs=1e-5)


def test_no_scattering_returns_source():
    res = run_protocol(3.97, MeasurementConfig(0.0, 1.0, 10))
    np.testing.assert_allclose(res.output.probs, res.source.probs, atol=1e-15)
    assert res.success_prob == 0.0


@given(st.floats(0.1, 20), st.floats(0.0, 0.9), st.floats(0.05, 1.0), st.integers(1, 10),
       st.sampled_from(["quantum", "classical"]))
def test_output_is_a_normalized_distribution(n_bar, r, eta, N, variant):
    res = run_protocol(n_bar, MeasurementConfig(r, eta, N), variant=variant)
    assert np.all(res.output.probs >= 0)
    assert res.output.total == pytest.approx(1.0, abs=1e-12)
    assert res.output.tail_mass_bound < 1e-12
    assert 0.0 <= res.success_prob <= 1.0


def test_output_is_less_bunched_than_thermal():
    m = moments(run_protocol(7.99, MeasurementConfig(0.115, 1.0, 10)).output)
    assert 1.0 < m.g2 < 2.0


def test_explicit_cutoff_too_small():
    with pytest.raises(CutoffTooSmallError):
        run_protocol(3.97, MeasurementConfig(0.144), n_max=30)


def test_sweep_order_and_errors():
    spec = SweepSpec((3.97, 7.99), (0.1, 0.2), variants=("classical", "quantum"))
    assert spec.variants == ("quantum", "classical")
    res = sweep(spec)
    assert [(r.n_bar, r.cfg.r, r.variant) for r in res] == list(spec.points())
    bad = sweep(spec, n_max=5)
    assert all(isinstance(r, SweepError) for r in bad)


def test_sweep_threads_do_not_change_results():
    spec = SweepSpec((3.97,), (0.05, 0.1, 0.15, 0.2))
    a, b = sweep(spec), sweep(spec, threads=4)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.output.probs, y.output.probs)


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec((3.97,), (1.5,))
    with pytest.raises(ValueError):
        SweepSpec((3.97,), (0.1,), variants=("bogus",))
    with pytest.raises(ValueError):
        SweepSpec((), (0.1,))


def test_optimal_r_matches_closed_form_optimum():
    n_bar = 3.97
    r_star, g_star = optimal_r(n_bar, MeasurementConfig(0.1, 1.0, 10))
    rs = np.linspace(0.001, 0.5, 20001)
    g = closed_form_gain(n_bar, rs, 1.0)
    assert r_star == pytest.approx(rs[np.argmax(g)], abs=1e-4)
    assert g_star == pytest.approx(g.max(), abs=1e-8)


def test_optimal_r_rejects_plateau():
    # without scattering headroom the gain is monotone on the scan window
    with pytest.raises(NotUnimodalError):
        optimal_r(3.97, MeasurementConfig(0.01, 1.0, 10), r_max=0.05, scan_points=32)
