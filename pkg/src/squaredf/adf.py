"""Amplitude describing functions: least-squares square-wave fits.

For a sampled periodic signal ``y`` the best fit ``b * alpha * s_tau``
maximises the squared correlation ``c(tau)^2`` with ``c(tau) = <y, s_tau>``.
Because ``dc/dtau = -2 (y(tau) - y(tau + T/2))``, the maximiser is found
among the zeros of ``g(tau) = y(tau) - y(tau + T/2)`` on ``[0, T/2)``.

The correlation is evaluated exactly for the piecewise-cubic interpolant
of the samples.  Signals that are already square on the grid (for example
the output of an odd static nonlinearity driven by a grid-aligned square)
are recognised first and fitted exactly under the rectangle rule.

Phase convention: a delay ``tau`` is reported as phase ``-2 pi tau / T``,
so lagging systems sit in the lower half plane.
"""

import csv
import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .exceptions import InvalidArgumentError
from .linsys import square_steady_state

__all__ = [
    "ComplexPoint", "Locus", "wrap_phase", "best_square_fit",
    "brute_force_fit", "adf_point", "adf_locus", "degenerate_candidates",
    "sample_locus",
]

# Relative residual below which a grid square is taken as an exact fit.
EXACT_SQUARE_RTOL = 1e-12


def wrap_phase(phi):
    """Wrap an angle to ``(-pi, pi]``."""
    w = math.remainder(float(phi), 2 * math.pi)
    return math.pi if w <= -math.pi else w


@dataclass(frozen=True)
class ComplexPoint:
    """Gain-phase pair ``gain * exp(j phase)`` with phase in ``(-pi, pi]``.

    `degenerate` marks points whose phase is undefined (zero gain).
    """

    gain: float
    phase: float = 0.0
    degenerate: bool = False

    def __post_init__(self):
        if not self.gain >= 0 or not math.isfinite(self.gain):
            raise InvalidArgumentError(f"gain must be finite and >= 0, got {self.gain}")
        object.__setattr__(self, "gain", float(self.gain))
        object.__setattr__(self, "phase", wrap_phase(self.phase))

    @classmethod
    def from_complex(cls, c):
        c = complex(c)
        return cls(abs(c), math.atan2(c.imag, c.real), degenerate=(c == 0))

    @property
    def value(self):
        return self.gain * complex(math.cos(self.phase), math.sin(self.phase))

    def __complex__(self):
        return self.value

    def __mul__(self, other):
        return ComplexPoint(self.gain * other.gain, self.phase + other.phase,
                            self.degenerate or other.degenerate)


@dataclass(frozen=True, eq=False)
class Locus:
    """A curve of complex points indexed by a strictly monotone parameter.

    Parameters
    ----------
    params : array_like
        Parameter values (strictly monotone).
    values : array_like of complex
        The point at each parameter value.
    kind : str
        One of ``"T"`` (period), ``"alpha"`` (amplitude), ``"omega"``.
    evaluator : callable, optional
        ``param -> complex``; when present, locus intersections are refined
        on the underlying curve instead of on the polyline.
    """

    params: np.ndarray
    values: np.ndarray
    kind: str
    evaluator: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        p = np.asarray(self.params, dtype=float).ravel()
        v = np.asarray(self.values, dtype=complex).ravel()
        if p.size != v.size or p.size == 0:
            raise InvalidArgumentError("params and values must be non-empty and aligned")
        if self.kind not in ("T", "alpha", "omega"):
            raise InvalidArgumentError(f"unknown parameter kind {self.kind!r}")
        d = np.diff(p)
        if p.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise InvalidArgumentError("locus parameters must be strictly monotone")
        if not np.all(np.isfinite(v)):
            bad = p[~np.isfinite(v)][0]
            raise InvalidArgumentError(f"non-finite locus point at {self.kind}={bad}")
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.params.size

    @property
    def points(self):
        return [(float(p), ComplexPoint.from_complex(v))
                for p, v in zip(self.params, self.values)]

    def at(self, param):
        """Point at `param`: the evaluator if present, else the polyline."""
        if self.evaluator is not None:
            return complex(self.evaluator(param))
        p, v = self.params, self.values
        if p[0] > p[-1]:
            p, v = p[::-1], v[::-1]
        return complex(np.interp(param, p, v.real) + 1j * np.interp(param, p, v.imag))

    def to_csv(self, path):
        """Write ``param,re,im,gain,phase_rad`` rows."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["param", "re", "im", "gain", "phase_rad"])
            for p, v in zip(self.params, self.values):
                v = complex(v)
                writer.writerow([repr(float(p)), repr(v.real), repr(v.imag),
                                 repr(abs(v)), repr(math.atan2(v.imag, v.real))])


# -- correlation with square waves -----------------------------------------

class _Interpolant:
    """Exact integrals of the periodic piecewise-cubic interpolant.

    On the cell ``[j h, (j + 1) h]`` the signal is the cubic through the
    samples ``j - 1 .. j + 2``.  The interpolant is continuous and linear in
    the samples, so ``y(tau) - y(tau + T/2)`` is the same construction
    applied to ``g`` and its zeros are the exact stationary points of the
    modelled correlation.
    """

    def __init__(self, y):
        self.T = y.period
        self.h = y.step
        self.n = y.n
        v = y.samples
        vm, v0, v1, v2 = np.roll(v, 1), v, np.roll(v, -1), np.roll(v, -2)
        # Newton form p(s) = v0 + d1 s + d2 s (s - 1) + d3 (s + 1) s (s - 1).
        self.v0 = v0
        self.d1 = v1 - v0
        self.d2 = (v1 - 2 * v0 + vm) / 2
        self.d3 = (v2 - 3 * v1 + 3 * v0 - vm) / 6
        cell = self.h * (13 * (v0 + v1) - vm - v2) / 24
        self.F = np.concatenate([[0.0], np.cumsum(cell)])
        self.total = self.F[-1]
        # Four-point Gauss-Legendre is exact for the squared cubic.
        x, w = np.polynomial.legendre.leggauss(4)
        s = (x + 1) / 2
        p = self._cubic(np.arange(self.n)[:, None], s[None, :])
        self.norm2 = self.h * float(np.sum(p ** 2 * w / 2))

    def _cubic(self, i, s):
        return (self.v0[i] + self.d1[i] * s + self.d2[i] * s * (s - 1)
                + self.d3[i] * (s + 1) * s * (s - 1))

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        k = np.floor(t / self.T)
        r = t - k * self.T
        i = np.minimum((r / self.h).astype(int), self.n - 1)
        s = (r - i * self.h) / self.h
        s2 = s * s
        part = (self.v0[i] * s + self.d1[i] * s2 / 2 + self.d2[i] * (s2 * s / 3 - s2 / 2)
                + self.d3[i] * (s2 * s2 / 4 - s2 / 2))
        return k * self.total + self.F[i] + self.h * part

    def corr(self, tau):
        """``<y, s_tau>`` for the interpolated signal."""
        return (2 * self.integral(np.asarray(tau) + self.T / 2)
                - 2 * self.integral(tau) - self.total)

    def residual(self, c):
        return max(0.0, 1.0 - c * c / (self.T * self.norm2))


class _GridSquare:
    """Correlation model for a signal that is an exact square on its grid.

    The rectangle rule is exact for grid-aligned delays, and between them
    the correlation of two ideal squares is linear in the delay.
    """

    def __init__(self, y, c_rect):
        self.T, self.h, self.n = y.period, y.step, y.n
        self.c = np.concatenate([c_rect, -c_rect, c_rect[:1]])
        self.norm2 = self.h * float(y.samples @ y.samples)

    @classmethod
    def detect(cls, y):
        c_rect = _grid_corr_rect(y.samples, y.step)
        model = cls(y, c_rect)
        return model if model.residual(np.abs(c_rect).max()) <= EXACT_SQUARE_RTOL else None

    def corr(self, tau):
        s = np.mod(np.asarray(tau, dtype=float) / self.h, self.n)
        return np.interp(s, np.arange(self.n + 1), self.c)

    def residual(self, c):
        return max(0.0, 1.0 - c * c / (self.T * self.norm2))


def _correlation_model(y):
    return _GridSquare.detect(y) or _Interpolant(y)


def _cell_zeros(v, cells, half):
    """Zeros of ``g(j) = v[j] - v[j + n/2]`` inside the given sign-change cells.

    Newton steps from the linear zero on the cubic through
    ``g(j - 1) .. g(j + 2)``, the interpolant used by the correlation model.
    """
    n = v.size

    def g(j):
        return v[j % n] - v[(j + half) % n]

    g0, g1 = g(cells), g(cells + 1)
    s = g0 / (g0 - g1)
    gm, g2 = g(cells - 1), g(cells + 2)
    # Cubic p(s) through s = -1, 0, 1, 2 in Newton form.
    d1 = g1 - g0
    d2 = (g1 - 2 * g0 + gm) / 2
    d3 = (g2 - 3 * g1 + 3 * g0 - gm) / 6
    x = s.copy()
    for _ in range(6):
        p = g0 + d1 * x + d2 * x * (x - 1) + d3 * (x + 1) * x * (x - 1)
        dp = d1 + d2 * (2 * x - 1) + d3 * (3 * x * x - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.where(dp != 0, x - p / dp, x)
    ok = np.isfinite(x) & (x >= 0) & (x <= 1)
    return np.where(ok, x, s)


def _grid_corr_rect(v, h):
    """Rectangle-rule ``<y, s_{j h}>`` for ``j = 0 .. n/2 - 1``."""
    n = v.size
    cs = np.concatenate([[0.0], np.cumsum(np.concatenate([v, v]))])
    j = np.arange(n // 2)
    window = cs[j + n // 2] - cs[j]
    return h * (2 * window - cs[n])


def _finish(c, tau, alpha, T, residual):
    b = c / (alpha * T)
    if b < 0:
        tau += T / 2
    tau = math.fmod(tau, T)
    return ComplexPoint(abs(b), -2 * math.pi * tau / T), residual


def best_square_fit(y, alpha, refine=True):
    """Least-squares square-wave fit to `y`, the response to ``alpha * s_0``.

    Parameters
    ----------
    y : PeriodicSignal
        The signal to approximate.
    alpha : float
        Amplitude of the square wave that produced `y` (nonzero).
    refine : bool
        Locate zeros of ``g(tau) = y(tau) - y(tau + T/2)`` between grid
        points.  When False only grid shifts are considered.

    Returns
    -------
    point : ComplexPoint
        ``beta * exp(j phi)`` with ``beta >= 0`` and ``phi = -2 pi tau / T``.
    residual : float
        ``||y - beta alpha s_tau||^2 / ||y||^2``.
    """
    if alpha == 0:
        raise InvalidArgumentError("alpha must be nonzero")
    v = y.samples
    n, h, T = y.n, y.step, y.period
    if not np.any(v):
        warnings.warn("zero signal: the square-wave phase is undefined", RuntimeWarning,
                      stacklevel=2)
        return ComplexPoint(0.0, 0.0, degenerate=True), 0.0

    # Signals that are square on the grid are fitted exactly.
    c_rect = _grid_corr_rect(v, h)
    j0 = int(np.argmax(c_rect ** 2))
    rect_res = max(0.0, 1.0 - c_rect[j0] ** 2 / (T * h * float(v @ v)))
    if rect_res <= EXACT_SQUARE_RTOL:
        return _finish(c_rect[j0], j0 * h, alpha, T, rect_res)

    model = _Interpolant(y)
    half = n // 2
    j = np.arange(half + 1)
    g = v[j % n] - v[(j + half) % n]

    exact = h * np.flatnonzero(g[:half] == 0)
    cells = np.flatnonzero(g[:-1] * g[1:] < 0)
    if refine:
        zeros = h * (cells + _cell_zeros(v, cells, half))
    else:
        zeros = h * np.concatenate([cells, cells + 1])
    zeros = np.mod(np.concatenate([exact, zeros]), T / 2)
    # Grid local maxima of c^2 are kept as safeguards.
    c2 = model.corr(h * np.arange(half)) ** 2
    peaks = h * np.flatnonzero((c2 >= np.roll(c2, 1)) & (c2 >= np.roll(c2, -1)))
    # A peak next to a located zero is the same stationary point; keeping it
    # would let the tie rule prefer the grid point over the true maximiser.
    if zeros.size and peaks.size:
        d = np.abs(peaks[:, None] - zeros[None, :])
        d = np.minimum(d, T / 2 - d)
        peaks = peaks[np.all(d > 1.5 * h, axis=1)]
    if refine:
        # A maximum not bracketed on the grid (two zeros of g in one cell).
        peaks = np.array([minimize_scalar(lambda t: -model.corr(t) ** 2,
                                          bounds=(p - h, p + h), method="bounded",
                                          options={"xatol": 1e-12 * T}).x
                          for p in peaks])

    cand = np.mod(np.concatenate([zeros, peaks]), T / 2)
    cand = np.sort(cand, kind="stable")
    score = model.corr(cand) ** 2
    tau = float(cand[int(np.flatnonzero(score >= score.max() * (1 - 1e-12))[0])])
    c = float(model.corr(tau))
    return _finish(c, tau, alpha, T, model.residual(c))


def brute_force_fit(y, alpha, m):
    """Square-wave fit by scanning `m` uniformly spaced delays.

    The correlation is evaluated over the whole period, so the sign of the
    gain is resolved by the scan itself.
    """
    if alpha == 0:
        raise InvalidArgumentError("alpha must be nonzero")
    if m < y.n:
        raise InvalidArgumentError(f"phase grid m={m} must be at least n={y.n}")
    T = y.period
    if not np.any(y.samples):
        return ComplexPoint(0.0, 0.0, degenerate=True), 0.0
    model = _correlation_model(y)
    taus = np.arange(m) * (T / m)
    c = model.corr(taus)
    k = int(np.argmax(c * math.copysign(1.0, alpha)))
    b = c[k] / (alpha * T)
    return ComplexPoint(b, -2 * math.pi * taus[k] / T), model.residual(float(c[k]))


def degenerate_candidates(y):
    """Delays in ``[0, T/2)`` where ``<y, s_tau>`` vanishes.

    These are the stationary points of the cost at which the fitted gain is
    zero.  For the zero signal every grid delay is returned.
    """
    n, h = y.n, y.step
    if not np.any(y.samples):
        return list(h * np.arange(n // 2))
    model = _correlation_model(y)
    grid = h * np.arange(n // 2 + 1)
    c = model.corr(grid)
    scale = np.abs(c).max()
    out = []
    for j in range(n // 2):
        if abs(c[j]) <= 1e-14 * scale:
            out.append(float(grid[j]))
        elif c[j] * c[j + 1] < 0 and abs(c[j + 1]) > 1e-14 * scale:
            out.append(brentq(lambda t: float(model.corr(t)), grid[j], grid[j + 1],
                              xtol=1e-14))
    return out


# -- loci --------------------------------------------------------------------

def adf_point(G, T, n=2048, alpha=1.0):
    """Amplitude describing function of the LTI system `G` at period `T`."""
    point, _ = best_square_fit(square_steady_state(G, alpha, T, n), alpha)
    return point


@functools.lru_cache(maxsize=64)
def _adf_values(num, den, T_grid, n):
    from .linsys import TransferFunction
    G = TransferFunction(num, den)
    return np.array([adf_point(G, T, n).value for T in T_grid])


def adf_locus(G, T_grid, n=2048):
    """ADF locus of `G` over the increasing period grid `T_grid`.

    The result is cached per ``(G, T_grid, n)``; its evaluator recomputes
    the ADF at arbitrary periods.
    """
    T_grid = tuple(float(T) for T in T_grid)
    if len(T_grid) > 1 and not np.all(np.diff(T_grid) > 0):
        raise InvalidArgumentError("T_grid must be strictly increasing")
    values = _adf_values(tuple(G.num), tuple(G.den), T_grid, n)
    # Linearity: the ADF does not depend on the input amplitude.
    spot = adf_point(G, T_grid[0], n, alpha=2.0).value
    if abs(spot - values[0]) > 1e-9 * max(1.0, abs(values[0])):
        raise ArithmeticError("ADF depends on amplitude; G is not linear?")
    return Locus(T_grid, values, "T",
                 evaluator=functools.partial(_adf_eval, G, n))


def _adf_eval(G, n, T):
    return adf_point(G, T, n).value


def sample_locus(evaluator, params, kind, max_turn=0.05, max_passes=12):
    """Sample ``evaluator`` on `params`, densifying where the curve turns.

    Midpoints are inserted between consecutive points whose angle, seen
    from the origin, differs by more than `max_turn` radians.  This keeps
    polylines of spiralling loci from cutting across the plane.
    """
    p = np.asarray(params, dtype=float)
    v = np.array([complex(evaluator(x)) for x in p])
    for _ in range(max_passes):
        with np.errstate(divide="ignore", invalid="ignore"):
            turn = np.abs(np.angle(v[1:] / v[:-1]))
        bad = np.flatnonzero((turn > max_turn) & np.isfinite(turn))
        if bad.size == 0:
            break
        mids = 0.5 * (p[bad] + p[bad + 1])
        mvals = np.array([complex(evaluator(x)) for x in mids])
        p = np.insert(p, bad + 1, mids)
        v = np.insert(v, bad + 1, mvals)
    return Locus(p, v, kind, evaluator=evaluator)
