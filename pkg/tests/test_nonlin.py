import math

import numpy as np
import pytest

from squaredf.adf import Locus, best_square_fit
from squaredf.exceptions import InvalidArgumentError
from squaredf.nonlin import (SquarePreservingOp, StaticNonlinearity,
                             amplitude_dependent_delay, amplitude_response_static,
                             compose_square_preserving, neg_reciprocal, nyqa_operator,
                             nyqa_static)
from squaredf.signals import PeriodicSignal, SquareWave, render_square

BUILTINS = [
    StaticNonlinearity.sat(3.0), StaticNonlinearity.relay(),
    StaticNonlinearity.deadzone(0.5, 2.0), StaticNonlinearity.cubic(0.7),
    StaticNonlinearity.gain(-2.0), StaticNonlinearity.table([0.5, 1.0, 2.0], [1.0, 0.5, 3.0]),
]


def test_sat_flat_region_and_saturation():
    k = 12.0
    phi = StaticNonlinearity.sat(k)
    for a in (1e-3, 0.5 / k, 1 / k):
        p = amplitude_response_static(phi, a)
        assert (p.gain, p.phase) == (pytest.approx(k), 0.0)
    assert amplitude_response_static(phi, 10 / k).gain == pytest.approx(k / 10)


def test_sign_flip_is_half_period():
    p = amplitude_response_static(StaticNonlinearity.gain(-1.0), 1.0)
    assert (p.gain, p.phase) == (1.0, math.pi)
    with pytest.raises(InvalidArgumentError):
        amplitude_response_static(StaticNonlinearity.relay(), 0.0)


def test_deadzone_zero_output_is_degenerate():
    p = amplitude_response_static(StaticNonlinearity.deadzone(1.0), 0.5)
    assert p.degenerate and p.gain == 0 and p.phase == 0


def test_oddness_enforced():
    with pytest.raises(InvalidArgumentError):
        StaticNonlinearity("bad", lambda x: x ** 2)
    with pytest.raises(InvalidArgumentError):
        StaticNonlinearity("offset", lambda x: x + 1e-3)
    with pytest.raises(InvalidArgumentError):
        StaticNonlinearity.table([0.0, 1.0], [0.5, 1.0])


def test_table_is_odd_extension():
    phi = StaticNonlinearity.table([1.0, 2.0], [1.0, 1.5])
    np.testing.assert_allclose(phi(np.array([-3.0, -0.5, 0.5, 1.5, 5.0])),
                               [-1.5, -0.5, 0.5, 1.25, 1.5])


def test_from_config():
    phi = StaticNonlinearity.from_config({"type": "sat", "k": 4})
    assert phi(1.0) == 1.0 and phi(0.1) == pytest.approx(0.4)
    with pytest.raises(InvalidArgumentError):
        StaticNonlinearity.from_config({"type": "quadratic"})
    with pytest.raises(InvalidArgumentError):
        StaticNonlinearity.from_config({"type": "sat", "gain": 4})


def test_nyqa_static_loci():
    k = 5.0
    a = np.linspace(0.01, 100 / k, 200)
    loc = nyqa_static(StaticNonlinearity.sat(k), a)
    assert np.all(loc.values.imag == 0)
    assert loc.values.real.max() == k and np.all(loc.values.real > 0)
    assert np.all(np.diff(loc.values.real) <= 0)
    a = np.linspace(0.1, 10, 50)
    relay = nyqa_static(StaticNonlinearity.relay(), a)
    np.testing.assert_allclose(relay.values, 1 / a)
    ident = nyqa_static(StaticNonlinearity.identity(), a)
    np.testing.assert_array_equal(ident.values, 1)


def test_amplitude_dependent_delay():
    T = 3.0
    assert complex(amplitude_dependent_delay(T, T)) == pytest.approx(1)
    assert complex(amplitude_dependent_delay(T / 2, T)) == pytest.approx(-1)
    a = np.linspace(T / 400, T, 400)
    pts = np.array([complex(amplitude_dependent_delay(x, T)) for x in a])
    np.testing.assert_allclose(np.abs(pts), 1, atol=1e-15)
    # One clockwise turn.
    assert np.sum(np.angle(pts[1:] / pts[:-1])) == pytest.approx(-2 * math.pi * 399 / 400)


def test_sat_delay_composition():
    op = SquarePreservingOp.sat_delay()
    T = 10.0
    for a in (0.2, 0.7, 1.0):
        p = op(a, T)
        assert p.gain == pytest.approx(1) and p.phase == pytest.approx(-2 * math.pi * a / T)
    p = op(2.0, T)
    assert p.gain == pytest.approx(0.5) and p.phase == pytest.approx(-2 * math.pi * 2 / T)
    ident = SquarePreservingOp.from_static(StaticNonlinearity.identity())
    assert complex(compose_square_preserving(ident, ident, 0.3, 1.0)) == 1


def test_composition_tracks_sign_flips():
    neg = SquarePreservingOp.from_static(StaticNonlinearity.gain(-2.0))
    sat = SquarePreservingOp.from_static(StaticNonlinearity.sat(1.0))
    p = compose_square_preserving(neg, sat, 0.25, 1.0)
    # -2 * 0.25 = -0.5, then sat keeps -0.5: overall gain 2, phase pi.
    assert complex(p) == pytest.approx(-2.0)


def test_neg_reciprocal():
    loc = Locus([1.0, 2.0], [1.0, 2j], "alpha")
    r = neg_reciprocal(loc)
    np.testing.assert_allclose(r.values, [-1, 0.5j])
    np.testing.assert_allclose(neg_reciprocal(r).values, loc.values, rtol=1e-15)
    k = 4.0
    sat = neg_reciprocal(nyqa_static(StaticNonlinearity.sat(k), np.logspace(-3, 3, 50)))
    assert sat.values.real.max() == pytest.approx(-1 / k) and np.all(sat.values.imag == 0)
    with pytest.raises(ZeroDivisionError, match="alpha=0.5"):
        neg_reciprocal(nyqa_static(StaticNonlinearity.deadzone(1.0), [0.5, 2.0]))


def test_operator_locus_at_frozen_period():
    loc = nyqa_operator(SquarePreservingOp.delay(), np.linspace(0.1, 2.0, 20), 2.0)
    np.testing.assert_allclose(np.abs(loc.values), 1)


@pytest.mark.parametrize("phi", BUILTINS, ids=lambda p: p.name)
@pytest.mark.parametrize("alpha", [-2.3, -0.4, 0.3, 1.7])
def test_static_map_of_square_is_square(phi, alpha):
    T, n = 2.0, 256
    for j in (0, 17, 200):
        tau = j * T / n
        e = render_square(SquareWave(alpha, tau, T), n)
        out = PeriodicSignal(T, phi(e.samples))
        v = float(phi(alpha))
        if v == 0:
            assert not np.any(out.samples)
            continue
        # phi(alpha s) = phi(alpha) s for an odd map and s = +-1.
        shift = tau if v > 0 else math.fmod(tau + T / 2, T)
        expected = render_square(SquareWave(abs(v), shift, T), n)
        np.testing.assert_array_equal(out.samples, expected.samples)
        point, residual = best_square_fit(out, alpha)
        assert residual <= 1e-12
        assert complex(point) == pytest.approx(
            complex(amplitude_response_static(phi, alpha))
            * np.exp(-2j * math.pi * tau / T), abs=1e-12)
