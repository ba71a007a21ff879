import math
import warnings

import numpy as np
import pytest

from squaredf.adf import Locus, adf_locus, adf_point
from squaredf.exceptions import InvalidArgumentError, InvalidBracketError, NoConvergenceError
from squaredf.linsys import TransferFunction
from squaredf.nonlin import (SquarePreservingOp, StaticNonlinearity, neg_reciprocal,
                             nyqa_static)
from squaredf.predict import (PREDICTION_HEADER, Prediction, adf_predict,
                              adf_predict_T_dependent, default_alpha_grid, default_T_grid,
                              intersect_loci, prediction_onset,
                              unity_feedback_square_check, write_predictions)

G3 = TransferFunction([1], [1, 3, 3, 1])


def circle_arc():
    th = np.linspace(0.5 * math.pi, 1.5 * math.pi, 41)
    return Locus(th, np.exp(1j * th), "alpha", evaluator=lambda t: np.exp(1j * t))


def test_segment_meets_arc():
    A = Locus([1.0, 2.0], [-2.0, -0.5], "T")
    (c,) = intersect_loci(A, circle_arc())
    assert c.point == pytest.approx(-1, abs=1e-8)
    assert c.param_a == pytest.approx(1 + 1 / 1.5, abs=1e-8)
    assert c.param_b == pytest.approx(math.pi, abs=1e-8)


def test_disjoint_loci():
    A = Locus([1.0, 2.0], [2.0, 3.0], "T")
    assert intersect_loci(A, circle_arc()) == []
    with pytest.raises(InvalidArgumentError):
        intersect_loci(Locus([1.0], [0.0], "T"), circle_arc())


def test_collinear_overlap_is_diagnosed():
    A = Locus([0.0, 1.0], [0.0, 2.0], "T")
    B = Locus([0.0, 1.0], [1.0, 3.0], "alpha")
    diag = []
    with pytest.warns(RuntimeWarning, match="overlap"):
        assert intersect_loci(A, B, diagnostics=diag) == []
    kind, pa, pb, mid = diag[0]
    assert kind == "overlap" and mid == pytest.approx(1.5)


def test_zero_length_segments_are_skipped():
    A = Locus([0.0, 1.0, 2.0], [-1j, -1j, 1j], "T")
    B = Locus([0.0, 1.0], [-1.0, 1.0], "alpha")
    (c,) = intersect_loci(A, B)
    assert c.point == pytest.approx(0)


def test_triple_lag_adf_crossing_and_symmetry():
    A = adf_locus(G3, default_T_grid())
    B = neg_reciprocal(nyqa_static(StaticNonlinearity.sat(12), default_alpha_grid()))
    (c,) = intersect_loci(A, B)
    assert c.point.real == pytest.approx(-0.105, abs=0.002)
    (d,) = intersect_loci(B, A)
    assert abs(c.point - d.point) <= 1e-8
    assert (c.param_a, c.param_b) == pytest.approx((d.param_b, d.param_a), abs=1e-8)


def test_adf_predict_triple_lag():
    (p,) = adf_predict(G3, StaticNonlinearity.sat(12))
    assert p.method == "adf"
    assert p.T == pytest.approx(3.680, abs=0.01)
    assert p.residual <= 1e-3
    # Re-evaluate the balance independently of the returned residual.
    N = StaticNonlinearity.sat(12)(p.alpha) / p.alpha
    assert abs(adf_point(G3, p.T).value * N + 1) <= 1e-3
    assert p.alpha_after == pytest.approx(1.0)
    assert adf_predict(G3, StaticNonlinearity.sat(5)) == []


def test_adf_predict_grid_refinement():
    T1 = np.logspace(np.log10(0.2), 2, 400)
    T2 = np.logspace(np.log10(0.2), 2, 799)
    a1 = np.logspace(-3, 3, 600)
    a2 = np.logspace(-3, 3, 1199)
    (p1,) = adf_predict(G3, StaticNonlinearity.sat(12), T1, a1)
    (p2,) = adf_predict(G3, StaticNonlinearity.sat(12), T2, a2)
    assert abs(p1.T - p2.T) <= 2e-8


def test_degenerate_points_warned():
    with pytest.warns(RuntimeWarning, match="zero-gain"):
        adf_predict(G3, StaticNonlinearity.deadzone(0.5, 50.0), alpha_grid=np.logspace(-2, 2, 100))


def test_prediction_csv(tmp_path):
    p = Prediction("adf", 3.5, 0.1, complex(-0.1, 0.0), 1e-9)
    write_predictions([p], tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == ",".join(PREDICTION_HEADER) == "method,T,alpha_out,re,im,residual"
    assert lines[1] == "adf,3.5,0.1,-0.1,0.0,1e-09"


def test_t_dependent_k11():
    p = adf_predict_T_dependent(TransferFunction([11], [1, 1]), SquarePreservingOp.sat_delay(),
                                T_init=20.0)
    assert p.T == pytest.approx(20.4, abs=0.3)
    assert p.residual <= 1e-3


def test_t_dependent_below_onset():
    with pytest.raises(NoConvergenceError) as err:
        adf_predict_T_dependent(TransferFunction([2], [1, 1]), SquarePreservingOp.sat_delay(),
                                T_init=10.0)
    assert isinstance(err.value.trace, list)


def test_t_dependent_argument_checks():
    with pytest.raises(InvalidArgumentError):
        adf_predict_T_dependent(G3, SquarePreservingOp.sat_delay(), T_init=0.0)
    with pytest.raises(InvalidArgumentError):
        adf_predict_T_dependent(G3, SquarePreservingOp.sat_delay(), T_init=1.0, tol=-1)


def test_unity_feedback_checks():
    grid = np.linspace(0.05, 3.0, 60)
    found = unity_feedback_square_check(SquarePreservingOp.delay(), 2.0, grid)
    assert found.alpha == pytest.approx(1.0, abs=1e-6)
    assert found.y.delay == pytest.approx(1.0)
    found = unity_feedback_square_check(SquarePreservingOp.sat_delay(), 2.0, grid)
    assert found.alpha == pytest.approx(1.0, abs=1e-6)
    half = SquarePreservingOp.from_static(StaticNonlinearity.gain(0.5))
    assert unity_feedback_square_check(half, 2.0, grid) is None


def test_prediction_onset_bisection():
    k = prediction_onset(lambda k: k >= 9.53, 5.0, 12.0)
    assert k == pytest.approx(9.53, abs=1e-3)
    with pytest.raises(InvalidBracketError):
        prediction_onset(lambda k: True, 5.0, 12.0)
