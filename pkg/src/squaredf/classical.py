"""Classical (sinusoidal) describing function and Nyquist prediction.

Provided for side-by-side comparison with the square-wave analysis.  The
describing function is computed by quadrature, so any odd static map
(including tabulated ones) is supported.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .adf import Locus
from .exceptions import InvalidArgumentError
from .linsys import freq_response
from .nonlin import neg_reciprocal
from .predict import Prediction, intersect_loci

__all__ = ["DFPoint", "describing_function", "df_locus", "nyquist_locus",
           "classical_predict"]

DF_NODES = 16384


@dataclass(frozen=True)
class DFPoint:
    """Describing-function value ``N(alpha)`` at input amplitude `alpha`."""

    value: complex
    alpha: float


def describing_function(phi, alpha, nodes=DF_NODES):
    """First-harmonic gain of `phi` for the input ``alpha cos(theta)``.

    Computes ``(1 / (pi alpha)) * int_0^{2 pi} phi(alpha cos t) exp(-j t) dt``
    with the midpoint rule on `nodes` points.
    """
    if alpha == 0:
        raise InvalidArgumentError("alpha must be nonzero")
    if nodes < 4096:
        raise InvalidArgumentError(f"need at least 4096 quadrature nodes, got {nodes}")
    theta = (np.arange(nodes) + 0.5) * (2 * np.pi / nodes)
    out = np.asarray(phi(alpha * np.cos(theta)), dtype=float)
    c1 = np.sum(out * np.exp(-1j * theta)) * (2 * np.pi / nodes)
    return DFPoint(complex(c1 / (np.pi * alpha)), float(alpha))


def df_locus(phi, alpha_grid, nodes=DF_NODES):
    """Describing-function locus over an increasing amplitude grid."""
    a = np.asarray(alpha_grid, dtype=float).ravel()
    if a.size == 0 or np.any(a == 0) or np.any(np.diff(a) <= 0):
        raise InvalidArgumentError("alpha grid must be strictly increasing and nonzero")

    def ev(x):
        return describing_function(phi, x, nodes).value

    return Locus(a, [ev(x) for x in a], "alpha", evaluator=ev)


def nyquist_locus(G, omega_grid):
    """Frequency response locus ``G(j omega)``."""
    w = np.asarray(omega_grid, dtype=float).ravel()
    if w.size == 0 or np.any(w <= 0) or np.any(np.diff(w) <= 0):
        raise InvalidArgumentError("omega grid must be positive and strictly increasing")
    return Locus(w, freq_response(G, w), "omega",
                 evaluator=lambda x: freq_response(G, x))


def classical_predict(G, phi, omega_grid, alpha_grid, tol=1e-3):
    """Harmonic-balance predictions ``G(j omega) N(alpha) = -1``.

    Returns
    -------
    list of Prediction
        One per crossing of the Nyquist locus with ``-1/N``; empty when the
        loci do not meet.  An end of ``-1/N`` lying on the Nyquist locus
        counts (the onset case, where the small-amplitude limit of ``N``
        balances the loop).
    """
    A = nyquist_locus(G, omega_grid)
    N = df_locus(phi, alpha_grid)
    keep = np.abs(N.values) > 0
    if not np.all(keep):
        warnings.warn(f"{np.count_nonzero(~keep)} zero describing-function points "
                      "excluded", RuntimeWarning, stacklevel=2)
        if np.count_nonzero(keep) < 2:
            return []
        N = Locus(N.params[keep], N.values[keep], "alpha", evaluator=N.evaluator)
    B = neg_reciprocal(N)
    out = []
    for cr in intersect_loci(A, B, endpoints=True):
        w, a = cr.param_a, cr.param_b
        residual = abs(freq_response(G, w) * describing_function(phi, a).value + 1)
        if residual > tol:
            warnings.warn(f"discarding df crossing at omega={w:.6g}: balance residual "
                          f"{residual:.2e}", RuntimeWarning, stacklevel=2)
            continue
        out.append(Prediction("classical", 2 * math.pi / w, a, cr.point, residual,
                              alpha_after=a * abs(describing_function(phi, a).value)))
    return out
