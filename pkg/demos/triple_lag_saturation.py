"""
Saturated feedback around a triple lag
======================================

``G(s) = 1/(s+1)^3`` closed through ``sat(k x)``.  The sinusoidal describing
function predicts oscillation from ``k = 8``; the square-wave criterion
from about ``k = 9.5``.  Simulated periods settle between the two
predictions and approach the square-wave one as ``k`` grows.
"""

import warnings

import numpy as np
from scipy.optimize import brentq

from squaredf.adf import adf_point
from squaredf.classical import classical_predict
from squaredf.linsys import TransferFunction
from squaredf.nonlin import StaticNonlinearity
from squaredf.predict import adf_predict, default_alpha_grid, prediction_onset
from squaredf.simulate import SimConfig, detect_oscillation, simulate_lure

G = TransferFunction([1], [1, 3, 3, 1])
omega = np.logspace(-2, 2, 1000)
alpha = default_alpha_grid()
T_grid = np.geomspace(0.2, 100, 400)


def classical(k):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return classical_predict(G, StaticNonlinearity.sat(k), omega, alpha)


def square(k):
    return adf_predict(G, StaticNonlinearity.sat(k), T_grid, alpha)


# Where the square-wave locus crosses the negative real axis fixes the
# onset gain: sat(k x) has square-wave gain k for small amplitudes.
T_cross = brentq(lambda T: adf_point(G, T).value.imag, 3.0, 4.5)
x_cross = adf_point(G, T_cross).value.real
print(f"locus crosses the real axis at {x_cross:.5f} (T={T_cross:.4f}), "
      f"onset k = {-1 / x_cross:.3f}")

# Both onsets by bisection over the presence of a prediction.
print(f"df onset  {prediction_onset(lambda k: bool(classical(k)), 5, 12, 1e-2):.3f}")
print(f"adf onset {prediction_onset(lambda k: bool(square(k)), 8, 12, 1e-2):.3f}")

# Periods across gains.
cfg = SimConfig(step=1e-3, horizon=200.0)
print(f"{'k':>4} {'T_sim':>8} {'T_df':>8} {'T_adf':>8}")
for k in (8, 12, 18, 35, 60):
    report = detect_oscillation(simulate_lure(G, StaticNonlinearity.sat(k), cfg))
    df = classical(k)
    sq = square(k)
    cells = [report.period if report.sustained else float("nan"),
             df[0].T if df else float("nan"), sq[0].T if sq else float("nan")]
    print(f"{k:>4} " + " ".join(f"{c:8.4f}" for c in cells))
