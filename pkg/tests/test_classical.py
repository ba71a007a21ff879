import math

import numpy as np
import pytest

from oracles import harmonic_fit, relay_df, sat_df
from squaredf.classical import classical_predict, describing_function, df_locus, nyquist_locus
from squaredf.exceptions import InvalidArgumentError
from squaredf.linsys import TransferFunction
from squaredf.nonlin import StaticNonlinearity

G3 = TransferFunction([1], [1, 3, 3, 1])
OMEGA = np.logspace(-2, 2, 1000)
ALPHA = np.logspace(-3, 3, 600)


def test_identity_and_linear_regime():
    for a in (0.01, 1.0, 50.0):
        assert describing_function(StaticNonlinearity.identity(), a).value == pytest.approx(1)
    assert describing_function(StaticNonlinearity.sat(5), 0.19).value == pytest.approx(5)
    with pytest.raises(InvalidArgumentError):
        describing_function(StaticNonlinearity.relay(), 0.0)
    with pytest.raises(InvalidArgumentError):
        describing_function(StaticNonlinearity.relay(), 1.0, nodes=1024)


@pytest.mark.parametrize("alpha", [0.05, 0.3, 1.0, 4.0, 77.0])
def test_relay_closed_form(alpha):
    N = describing_function(StaticNonlinearity.relay(), alpha).value
    assert N.real == pytest.approx(relay_df(alpha), abs=1e-6)
    assert abs(N.imag) <= 1e-12


@pytest.mark.parametrize("alpha", np.logspace(-2, 1.5, 12))
def test_sat_closed_form(alpha):
    k = 3.0
    N = describing_function(StaticNonlinearity.sat(k), alpha).value
    assert N.real == pytest.approx(sat_df(k, alpha), abs=1e-6)
    assert abs(N.imag) <= 1e-12


@pytest.mark.parametrize("phi", [StaticNonlinearity.sat(2.0), StaticNonlinearity.relay()],
                         ids=["sat", "relay"])
def test_least_squares_harmonic_equals_fourier(phi):
    for alpha in np.logspace(-1, 1, 10):
        fit = harmonic_fit(phi, alpha)
        assert fit == pytest.approx(describing_function(phi, alpha).value, abs=1e-6)


def test_nyquist_loci():
    assert complex(nyquist_locus(G3, [math.sqrt(3), 2.0]).values[0]) == \
        pytest.approx(-1 / 8, abs=1e-12)
    np.testing.assert_array_equal(nyquist_locus(TransferFunction([1], [1]), OMEGA[:5]).values, 1)
    w = np.logspace(-1, 1, 20)
    v = nyquist_locus(TransferFunction([1], [1, 1]), w).values
    np.testing.assert_allclose(np.abs(v - 0.5), 0.5, atol=1e-14)
    assert np.all(v.imag < 0)


def test_df_locus_real_for_odd_maps():
    loc = df_locus(StaticNonlinearity.deadzone(0.5), np.linspace(0.6, 3, 10))
    assert np.max(np.abs(loc.values.imag)) <= 1e-12


def test_triple_lag_period():
    (p,) = classical_predict(G3, StaticNonlinearity.sat(12), OMEGA, ALPHA)
    assert p.method == "classical"
    assert p.T == pytest.approx(2 * math.pi / math.sqrt(3), abs=1e-6)
    assert p.residual <= 1e-3
    assert sat_df(12, p.alpha) == pytest.approx(8, rel=1e-5)


def test_below_onset_is_empty():
    assert classical_predict(G3, StaticNonlinearity.sat(4), OMEGA, ALPHA) == []
    # Brute interval check: -1/N stays left of -1/4, the Nyquist crossing is -1/8.
    N = df_locus(StaticNonlinearity.sat(4), ALPHA).values
    assert np.max((-1 / N).real) <= -0.25 + 1e-9


def test_onset_endpoint_counts():
    (p,) = classical_predict(G3, StaticNonlinearity.sat(8), OMEGA, ALPHA)
    assert p.T == pytest.approx(2 * math.pi / math.sqrt(3), abs=1e-6)
    assert classical_predict(G3, StaticNonlinearity.sat(7.999), OMEGA, ALPHA) == []


def test_zero_points_excluded_with_warning():
    with pytest.warns(RuntimeWarning, match="zero describing-function"):
        out = classical_predict(G3, StaticNonlinearity.deadzone(1.0, 30.0), OMEGA,
                                np.logspace(-1, 2, 200))
    assert len(out) == 1
