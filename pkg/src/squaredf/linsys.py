"""SISO LTI systems and their periodic steady state under square-wave input.

The steady state is computed exactly: the input is constant on each half
period, so the state propagates through ``exp(A h)`` and the zero-order
hold input matrix over each cell, and the periodic initial state solves a
linear system.  :func:`square_steady_state_fourier` sums the odd-harmonic
series of the same response and is kept as an independent check.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .exceptions import (InvalidArgumentError, NoUniqueSteadyStateError,
                         PoleEvaluationError)
from .signals import PeriodicSignal

__all__ = [
    "TransferFunction", "StateSpace", "tf_to_ss", "freq_response",
    "matrix_exponential", "square_steady_state", "square_steady_state_fourier",
]


def _trim(c):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    nz = np.flatnonzero(c)
    return c[nz[0]:] if nz.size else np.zeros(1)


@dataclass(frozen=True, eq=False)
class TransferFunction:
    """Proper rational transfer function ``num(s) / den(s)``.

    Coefficients are in descending powers of ``s``.  The denominator is
    normalised to be monic on construction.

    Examples
    --------
    >>> G = TransferFunction([1], [1, 3, 3, 1])     # 1/(s+1)^3
    >>> G.is_hurwitz()
    True
    """

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        num, den = _trim(self.num), _trim(self.den)
        if not np.all(np.isfinite(num)) or not np.all(np.isfinite(den)):
            raise InvalidArgumentError("coefficients must be finite")
        if den[0] == 0:
            raise InvalidArgumentError("denominator must be nonzero")
        if num.size > den.size:
            raise InvalidArgumentError(
                f"improper transfer function: deg(num)={num.size - 1} > "
                f"deg(den)={den.size - 1}")
        num, den = num / den[0], den / den[0]
        num.flags.writeable = False
        den.flags.writeable = False
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @classmethod
    def from_config(cls, entry):
        """Build from a mapping with ``num`` and ``den`` coefficient lists."""
        return cls(entry["num"], entry["den"])

    @property
    def order(self):
        return self.den.size - 1

    def poles(self):
        return np.roots(self.den) if self.order else np.zeros(0, dtype=complex)

    def is_hurwitz(self):
        """True if every pole has strictly negative real part."""
        return bool(np.all(self.poles().real < 0))

    def is_strictly_proper(self):
        return self.num.size < self.den.size or not np.any(self.num)

    def scaled(self, k):
        return TransferFunction(k * self.num, self.den)

    def __call__(self, s):
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def __repr__(self):
        return f"TransferFunction(num={self.num.tolist()}, den={self.den.tolist()})"


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Realisation ``x' = A x + B u``, ``y = C x + D u`` of a SISO system."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        nx = 0 if A.size == 0 else A.shape[0]
        try:
            A = A.reshape(nx, nx)
            B = np.asarray(self.B, dtype=float).reshape(nx, 1)
            C = np.asarray(self.C, dtype=float).reshape(1, nx)
            D = np.asarray(self.D, dtype=float).reshape(1, 1)
        except ValueError:
            raise InvalidArgumentError(
                f"inconsistent single-input single-output shapes for {nx} states") from None
        for name, M in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, M)

    @property
    def nstates(self):
        return self.A.shape[0]

    def __call__(self, s):
        """Evaluate ``C (sI - A)^-1 B + D`` at the complex point `s`."""
        nx = self.nstates
        if nx == 0:
            return complex(self.D[0, 0])
        x = np.linalg.solve(s * np.eye(nx) - self.A, self.B)
        return complex((self.C @ x)[0, 0] + self.D[0, 0])


def tf_to_ss(G):
    """Controllable canonical realisation of `G`.

    The first state row of ``A`` holds the negated denominator coefficients
    and ``B = e_1``.  A static gain yields an empty ``A``.
    """
    if not isinstance(G, TransferFunction):
        raise InvalidArgumentError("expected a TransferFunction")
    den = G.den
    nx = den.size - 1
    num = np.concatenate([np.zeros(den.size - G.num.size), G.num])
    d = num[0]
    A = np.zeros((nx, nx))
    if nx:
        A[0, :] = -den[1:]
        A[1:, :-1] = np.eye(nx - 1)
    B = np.zeros(nx)
    if nx:
        B[0] = 1.0
    C = num[1:] - d * den[1:]
    return StateSpace(A, B, C, d)


def freq_response(G, omega):
    """Evaluate ``G(j omega)`` (scalar or array `omega`)."""
    s = 1j * np.asarray(omega, dtype=float)
    den = np.polyval(G.den, s)
    scale = np.polyval(np.abs(G.den), np.abs(s)) + 1.0
    if np.any(np.abs(den) <= 1e-14 * scale):
        raise PoleEvaluationError(f"G has a pole on the imaginary axis near omega={omega}")
    out = np.polyval(G.num, s) / den
    return complex(out) if np.ndim(out) == 0 else out


def matrix_exponential(M, h=1.0):
    """Return ``exp(M h)`` (scaling-and-squaring Pade, via scipy)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return M.copy()
    return expm(M * h)


def _zoh(A, B, h):
    """State transition and input matrices over a step `h` at constant input."""
    nx = A.shape[0]
    aug = np.zeros((nx + 1, nx + 1))
    aug[:nx, :nx] = A
    aug[:nx, nx] = B
    E = matrix_exponential(aug, h)
    return E[:nx, :nx], E[:nx, nx]


def _check_inputs(G, T, n):
    if not G.is_hurwitz():
        raise InvalidArgumentError("G must be strictly Hurwitz for a steady state")
    if not T > 0:
        raise InvalidArgumentError(f"period must be positive, got {T}")
    if n < 8 or n % 2:
        raise InvalidArgumentError(f"grid size must be even and >= 8, got {n}")


def square_steady_state(G, alpha, T, n=2048):
    """Exact periodic response of `G` to the square wave ``alpha * s_0``.

    Parameters
    ----------
    G : TransferFunction
        Strictly Hurwitz system.
    alpha : float
        Input amplitude (the input is ``+alpha`` on ``[0, T/2)``).
    T : float
        Period.
    n : int
        Even grid size.

    Returns
    -------
    PeriodicSignal
        The output on the grid ``i T / n``.

    Raises
    ------
    NoUniqueSteadyStateError
        If the two-half-period monodromy ``I - Phi^2`` is numerically
        singular.
    """
    _check_inputs(G, T, n)
    ss = tf_to_ss(G)
    u = np.where(np.arange(n) < n // 2, float(alpha), -float(alpha))
    d = ss.D[0, 0]
    nx = ss.nstates
    if nx == 0:
        return PeriodicSignal(T, d * u)
    A, B, C = ss.A, ss.B[:, 0], ss.C[0]

    # Periodic initial state over the two half periods (input +alpha, -alpha).
    Ph, Gh = _zoh(A, B, T / 2)
    M = Ph @ Ph
    lhs = np.eye(nx) - M
    if np.linalg.cond(lhs) > 1e12:
        raise NoUniqueSteadyStateError("I - Phi^2 is numerically singular")
    x0 = np.linalg.solve(lhs, (Ph - np.eye(nx)) @ Gh * alpha)

    # Sample each half by composing the one-step affine map
    # x -> Ps x + Gs u with itself (doubling): rows[i] = C Ps^i and
    # drive[i] = C (sum_{k<i} Ps^k) Gs.
    Ps, Gs = _zoh(A, B, T / n)
    half = n // 2
    rows = C[None, :]
    drive = np.zeros(1)
    P, g = Ps, Gs
    while rows.shape[0] < half:
        rows, drive = np.vstack([rows, rows @ P]), np.concatenate([drive, rows @ g + drive])
        P, g = P @ P, P @ g + g
    rows, drive = rows[:half], drive[:half] * alpha
    x_mid = Ph @ x0 + Gh * alpha
    y = np.concatenate([rows @ x0 + drive, rows @ x_mid - drive])
    x_end = Ph @ x_mid - Gh * alpha
    if np.linalg.norm(x_end - x0) > 1e-9 * (1 + np.linalg.norm(x0)):
        raise NoUniqueSteadyStateError(
            f"periodicity residual {np.linalg.norm(x_end - x0):.3e} too large")
    return PeriodicSignal(T, y + d * u)


def square_steady_state_fourier(G, alpha, T, n=2048, harmonics=501):
    """Odd-harmonic Fourier series of the square-wave response of `G`.

    Sums ``4 alpha / (k pi) Im{G(j k w) exp(j k w t)}`` over odd
    ``k <= 2 harmonics - 1`` with ``w = 2 pi / T``.
    """
    if harmonics < 1:
        raise InvalidArgumentError("need at least one harmonic")
    if not T > 0:
        raise InvalidArgumentError(f"period must be positive, got {T}")
    if n < 8 or n % 2:
        raise InvalidArgumentError(f"grid size must be even and >= 8, got {n}")
    w = 2 * np.pi / T
    k = np.arange(1, 2 * harmonics, 2)
    Gk = freq_response(G, k * w)
    t = np.arange(n) * (T / n)
    phase = np.exp(1j * w * np.outer(t, k))
    y = (phase * (4 * alpha / (np.pi * k) * Gk)).imag.sum(axis=1)
    return PeriodicSignal(T, y)
