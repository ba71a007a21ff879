"""
Fitting square waves to periodic responses
==========================================

The amplitude describing function of a linear system at period ``T`` is
the gain and phase of the square wave closest (in L2) to its steady-state
response to a unit square wave.
"""

import math

import numpy as np

from squaredf.adf import adf_locus, best_square_fit, brute_force_fit
from squaredf.linsys import TransferFunction, square_steady_state
from squaredf.nonlin import StaticNonlinearity
from squaredf.signals import PeriodicSignal, SquareWave, render_square

# A first-order lag driven by a unit square wave of period 4.
G = TransferFunction([1], [1, 1])
T = 4.0
y = square_steady_state(G, 1.0, T, 2048)
point, residual = best_square_fit(y, 1.0)
print(f"gain {point.gain:.6f}  phase {point.phase:.6f} rad  residual {residual:.3e}")

# The best delay solves y(tau) = y(tau + T/2); for 1/(s+1) it is known in
# closed form.
tau = -point.phase * T / (2 * math.pi)
print(f"delay {tau:.9f}  closed form {math.log(2 / (1 + math.exp(-T / 2))):.9f}")

# A brute-force scan over 4n delays agrees with the located stationary point.
brute, _ = brute_force_fit(y, 1.0, 4 * 2048)
print(f"brute force gain {brute.gain:.6f}  phase {brute.phase:.6f}")

# Odd static maps send square waves to square waves, so their fit is exact.
w = render_square(SquareWave(0.7, 0.5, T), 2048)
out = PeriodicSignal(T, StaticNonlinearity.sat(3.0)(w.samples))
point, residual = best_square_fit(out, 0.7)
print(f"saturated square: gain {point.gain:.12f} (1/0.7 = {1 / 0.7:.12f}) "
      f"residual {residual:.1e}")

# Sweeping the period traces the locus: the gain rises towards the DC gain
# and the lag vanishes as T grows.
locus = adf_locus(G, np.geomspace(0.1, 100, 7))
for T, v in zip(locus.params, locus.values):
    print(f"T={T:8.3f}  gain {abs(v):.4f}  phase {math.atan2(v.imag, v.real):+.4f}")
