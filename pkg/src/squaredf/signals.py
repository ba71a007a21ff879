"""Periodic signals sampled on a uniform grid, and square waves.

A :class:`PeriodicSignal` stores one period of a real signal at the grid
points ``t_i = i T / n``.  Between grid points the signal is read by
periodic linear interpolation; integrals use the left-point rectangle
rule, which is exact for signals that are constant on grid cells (such as
square waves whose switching instants are grid points).

The base square wave used throughout has levels +1 and -1::

    s_tau(t) = +1   if (t - tau) mod T in [0, T/2)
               -1   otherwise

so that ``<s_tau, s_tau> = T``.  Projections onto square waves carry an
explicit ``1/T`` normalisation.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError

__all__ = [
    "PeriodicSignal", "SquareWave", "render_square", "periodic_delay",
    "inner_product", "value_at", "norm_squared",
]

# Grid positions closer than this (in cells) to an integer are snapped.
_SNAP = 1e-9


@dataclass(frozen=True, eq=False)
class PeriodicSignal:
    """One period of a real T-periodic signal on a uniform grid.

    Parameters
    ----------
    period : float
        The period ``T > 0``.
    samples : array_like
        ``n`` finite real values; sample ``i`` is taken at ``i T / n``.
        ``n`` must be even and at least 8, so that ``t`` and ``t + T/2``
        are both grid points.
    """

    period: float
    samples: np.ndarray

    def __post_init__(self):
        period = float(self.period)
        if not period > 0 or not math.isfinite(period):
            raise InvalidArgumentError(f"period must be positive, got {self.period}")
        samples = np.array(self.samples, dtype=float).ravel()
        n = samples.size
        if n < 8 or n % 2:
            raise InvalidArgumentError(f"grid size must be even and >= 8, got {n}")
        if not np.all(np.isfinite(samples)):
            raise InvalidArgumentError("samples must be finite")
        samples.flags.writeable = False
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "samples", samples)

    @property
    def n(self):
        return self.samples.size

    @property
    def step(self):
        return self.period / self.n

    @property
    def times(self):
        return np.arange(self.n) * self.step

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"PeriodicSignal(period={self.period!r}, n={self.n})"

    def scaled(self, c):
        """Return the signal multiplied by the scalar `c`."""
        return PeriodicSignal(self.period, c * self.samples)

    def to_csv(self, path):
        """Write the signal as CSV with header ``t,value``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "value"])
            for t, v in zip(self.times, self.samples):
                writer.writerow([repr(float(t)), repr(float(v))])

    @classmethod
    def from_csv(cls, path, period):
        """Read a signal written by :meth:`to_csv`."""
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(period, [float(r["value"]) for r in rows])


@dataclass(frozen=True)
class SquareWave:
    """The exact square wave ``amplitude * s_delay`` of period `period`."""

    amplitude: float
    delay: float
    period: float

    def __post_init__(self):
        if not self.period > 0:
            raise InvalidArgumentError(f"period must be positive, got {self.period}")
        if not 0 <= self.delay < self.period:
            raise InvalidArgumentError(
                f"delay must lie in [0, T), got {self.delay} for T={self.period}")

    def __call__(self, t):
        phase = np.mod(np.asarray(t, dtype=float) - self.delay, self.period)
        return np.where(phase < self.period / 2, self.amplitude, -self.amplitude)


def _grid_positions(n, shift_cells):
    """Fractional grid positions ``(i - shift) mod n``, snapped to integers."""
    pos = np.mod(np.arange(n) - shift_cells, n)
    near = np.rint(pos)
    snap = np.abs(pos - near) < _SNAP
    pos[snap] = np.mod(near[snap], n)
    return pos


def render_square(w, n):
    """Sample a :class:`SquareWave` on an `n`-point grid.

    Sample ``i`` is ``+amplitude`` when ``(t_i - delay) mod T`` lies in
    ``[0, T/2)`` and ``-amplitude`` otherwise.

    Examples
    --------
    >>> render_square(SquareWave(1.0, 0.25, 1.0), 8).samples
    array([-1., -1.,  1.,  1.,  1.,  1., -1., -1.])
    """
    if n < 8 or n % 2:
        raise InvalidArgumentError(f"grid size must be even and >= 8, got {n}")
    pos = _grid_positions(n, w.delay * n / w.period)
    values = np.where(pos < n / 2, w.amplitude, -w.amplitude).astype(float)
    return PeriodicSignal(w.period, values)


def value_at(x, t):
    """Evaluate `x` at time(s) `t` by periodic linear interpolation."""
    t = np.asarray(t, dtype=float)
    s = np.mod(t / x.step, x.n)
    i = np.floor(s).astype(int) % x.n
    frac = s - np.floor(s)
    v = x.samples
    out = v[i] * (1 - frac) + v[(i + 1) % x.n] * frac
    return out if out.ndim else float(out)


def periodic_delay(x, tau):
    """Periodic delay: ``out(t) = x((t - tau) mod T)``.

    Off-grid delays are resolved by periodic linear interpolation.
    """
    T = x.period
    if not -1e-12 * T <= tau <= T * (1 + 1e-12):
        raise InvalidArgumentError(f"delay must lie in [0, T], got {tau}")
    pos = _grid_positions(x.n, tau / x.step)
    i = np.floor(pos).astype(int) % x.n
    frac = pos - np.floor(pos)
    v = x.samples
    return PeriodicSignal(T, v[i] * (1 - frac) + v[(i + 1) % x.n] * frac)


def _check_same_grid(a, b):
    if a.n != b.n or not math.isclose(a.period, b.period, rel_tol=1e-12):
        raise InvalidArgumentError(
            f"signals live on different grids: (T={a.period}, n={a.n}) "
            f"vs (T={b.period}, n={b.n})")


def inner_product(a, b):
    """Rectangle-rule approximation of ``int_0^T a(t) b(t) dt``."""
    _check_same_grid(a, b)
    return a.step * float(np.dot(a.samples, b.samples))


def norm_squared(x):
    return inner_product(x, x)
