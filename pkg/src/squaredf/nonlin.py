"""Odd static nonlinearities and square-preserving operators.

An odd static nonlinearity maps ``alpha * s_tau`` to ``|Phi(alpha)| * s_tau``
when ``Phi(alpha)`` has the sign of ``alpha``, and to the half-period
shifted wave otherwise.  More generally a square-preserving operator maps
``alpha * s_tau`` to ``|N| |alpha| s_{tau'}`` with an amplitude (and
possibly period) dependent gain ``|N|`` and delay, encoded here as the
complex point ``N(alpha, T)`` with phase ``-2 pi delay / T``.
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .adf import ComplexPoint, Locus
from .exceptions import InvalidArgumentError

__all__ = [
    "StaticNonlinearity", "SquarePreservingOp", "amplitude_response_static",
    "nyqa_static", "nyqa_operator", "amplitude_dependent_delay",
    "compose_square_preserving", "neg_reciprocal",
]

# Kind codes understood by the compiled simulator.
KIND_GAIN, KIND_SAT, KIND_RELAY, KIND_DEADZONE, KIND_CUBIC, KIND_TABLE = range(6)
KIND_CALLABLE = -1


@dataclass(frozen=True, eq=False)
class StaticNonlinearity:
    """A memoryless odd map ``Phi: R -> R``.

    Use the classmethod constructors (:meth:`sat`, :meth:`relay`, ...) for
    the builtins.  A custom evaluator is accepted if it passes the oddness
    probe.

    Parameters
    ----------
    name : str
        Short descriptor, e.g. ``"sat"``.
    evaluator : callable
        Vectorised ``x -> Phi(x)``.
    params : dict
        Descriptor parameters (for reports and the simulator).
    """

    name: str
    evaluator: Callable = field(repr=False)
    params: dict = field(default_factory=dict)
    kind: int = field(default=KIND_CALLABLE, repr=False)
    breakpoints: tuple = field(default=(), repr=False)

    def __post_init__(self):
        _check_odd(self.evaluator, self.name, self._probe_scale())

    def _probe_scale(self):
        if self.breakpoints:
            return float(self.breakpoints[0][-1]) * 1.5
        return 4.0

    def __call__(self, x):
        out = self.evaluator(np.asarray(x, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    @property
    def sim_params(self):
        """``(kind, p0, p1, xs, ys)`` for the compiled simulator."""
        p = self.params
        p0 = float(p.get("k", p.get("width", p.get("a", 1.0))))
        p1 = float(p.get("slope", 1.0))
        xs, ys = self.breakpoints if self.breakpoints else (np.zeros(1), np.zeros(1))
        return self.kind, p0, p1, np.asarray(xs, float), np.asarray(ys, float)

    # -- builtins -------------------------------------------------------------

    @classmethod
    def gain(cls, k=1.0):
        k = _finite("k", k)
        return cls("gain", lambda x: k * x, {"k": k}, KIND_GAIN)

    @classmethod
    def identity(cls):
        return cls.gain(1.0)

    @classmethod
    def zero(cls):
        return cls("zero", lambda x: 0.0 * x, {"k": 0.0}, KIND_GAIN)

    @classmethod
    def sat(cls, k=1.0):
        """Unit saturation of ``k x``: ``clip(k x, -1, 1)``."""
        k = _finite("k", k)
        return cls("sat", lambda x: np.clip(k * x, -1.0, 1.0), {"k": k}, KIND_SAT)

    @classmethod
    def relay(cls):
        """Ideal relay ``sign(x)``."""
        return cls("relay", np.sign, {}, KIND_RELAY)

    @classmethod
    def deadzone(cls, width=1.0, slope=1.0):
        """``slope * sign(x) * max(|x| - width, 0)``."""
        width = _finite("width", width)
        slope = _finite("slope", slope)
        if width < 0:
            raise InvalidArgumentError(f"dead-zone width must be >= 0, got {width}")
        return cls("deadzone",
                   lambda x: slope * np.sign(x) * np.maximum(np.abs(x) - width, 0.0),
                   {"width": width, "slope": slope}, KIND_DEADZONE)

    @classmethod
    def cubic(cls, a=1.0):
        """``a x^3``."""
        a = _finite("a", a)
        return cls("cubic", lambda x: a * x ** 3, {"a": a}, KIND_CUBIC)

    @classmethod
    def table(cls, x, y):
        """Odd extension of a piecewise-linear map given on ``x >= 0``.

        The points are joined to the origin and held constant beyond the
        last abscissa.
        """
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if x.size != y.size or x.size == 0:
            raise InvalidArgumentError("table x and y must be non-empty and of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidArgumentError("table entries must be finite")
        if x[0] < 0 or np.any(np.diff(x) <= 0):
            raise InvalidArgumentError("table x must be >= 0 and strictly increasing")
        if x[0] == 0:
            if y[0] != 0:
                raise InvalidArgumentError("an odd table must pass through the origin")
        else:
            x, y = np.concatenate([[0.0], x]), np.concatenate([[0.0], y])
        x.flags.writeable = False
        y.flags.writeable = False

        def ev(v):
            return np.sign(v) * np.interp(np.abs(v), x, y)

        return cls("table", ev, {"x": x.tolist(), "y": y.tolist()}, KIND_TABLE, (x, y))

    @classmethod
    def from_config(cls, entry):
        """Build from a descriptor such as ``{"type": "sat", "k": 12}``."""
        entry = dict(entry)
        kind = entry.pop("type", None)
        builders = {"sat": cls.sat, "relay": cls.relay, "deadzone": cls.deadzone,
                    "cubic": cls.cubic, "table": cls.table, "gain": cls.gain,
                    "zero": cls.zero}
        if kind not in builders:
            raise InvalidArgumentError(f"unknown static nonlinearity type {kind!r}")
        try:
            return builders[kind](**entry)
        except TypeError as exc:
            raise InvalidArgumentError(f"bad parameters for {kind!r}: {exc}") from None


def _finite(name, v):
    v = float(v)
    if not math.isfinite(v):
        raise InvalidArgumentError(f"{name} must be finite, got {v}")
    return v


def _check_odd(fn, name, scale):
    rng = np.random.default_rng(20240101)
    x = rng.uniform(-scale, scale, 64)
    with np.errstate(all="ignore"):
        a = np.asarray(fn(x), dtype=float)
        b = np.asarray(fn(-x), dtype=float)
        z = float(np.asarray(fn(np.zeros(1)), dtype=float)[0])
    err = np.abs(a + b)
    if not np.all(np.isfinite(a)) or np.any(err > 1e-12 * np.maximum(1.0, np.abs(a))) \
            or z != 0.0:
        raise InvalidArgumentError(f"nonlinearity {name!r} is not odd")


def amplitude_response_static(phi, alpha):
    """Gain and phase of ``phi`` on square waves of amplitude `alpha`.

    The phase is 0 when ``phi(alpha)`` has the sign of `alpha` and ``pi``
    otherwise.  A zero output gives a degenerate point of gain 0.
    """
    if alpha == 0:
        raise InvalidArgumentError("alpha must be nonzero")
    v = float(phi(alpha))
    if v == 0:
        return ComplexPoint(0.0, 0.0, degenerate=True)
    return ComplexPoint(abs(v) / abs(alpha), 0.0 if v * alpha > 0 else math.pi)


def _check_alpha_grid(alpha_grid):
    a = np.asarray(alpha_grid, dtype=float).ravel()
    if a.size == 0 or np.any(a == 0) or np.any(np.diff(a) <= 0):
        raise InvalidArgumentError("alpha grid must be strictly increasing and nonzero")
    return a


def nyqa_static(phi, alpha_grid):
    """Amplitude Nyquist locus of a static nonlinearity (T-independent)."""
    a = _check_alpha_grid(alpha_grid)

    def ev(x):
        return amplitude_response_static(phi, x).value

    return Locus(a, [ev(x) for x in a], "alpha", evaluator=ev)


def amplitude_dependent_delay(alpha, T):
    """Unit-gain operator delaying ``alpha * s_tau`` by ``|alpha|`` seconds."""
    if alpha == 0:
        raise InvalidArgumentError("alpha must be nonzero")
    if not T > 0:
        raise InvalidArgumentError(f"period must be positive, got {T}")
    return ComplexPoint(1.0, -2 * math.pi * math.fmod(abs(alpha), T) / T)


@dataclass(frozen=True, eq=False)
class SquarePreservingOp:
    """Operator mapping square waves to square waves.

    `response(alpha, T)` returns the complex point ``N(alpha, T)``.  The
    `parts` tuple lists the chain of elementary operators applied in order;
    it is what the simulator uses to realise the operator in time.
    """

    name: str
    response: Callable = field(repr=False)
    t_dependent: bool = False
    parts: tuple = field(default=(), repr=False)

    def __call__(self, alpha, T):
        return self.response(alpha, T)

    @classmethod
    def from_static(cls, phi):
        return cls(phi.name, lambda a, T: amplitude_response_static(phi, a), False, (phi,))

    @classmethod
    def delay(cls):
        """The amplitude-dependent delay ``alpha s_tau -> alpha s_{tau + |alpha|}``."""
        return cls("delay", amplitude_dependent_delay, True, ("delay",))

    @classmethod
    def compose(cls, first, second):
        """``second`` applied after ``first``."""
        return cls(f"{second.name}({first.name})",
                   lambda a, T: compose_square_preserving(first, second, a, T),
                   first.t_dependent or second.t_dependent,
                   first.parts + second.parts)

    @classmethod
    def sat_delay(cls, k=1.0):
        """Saturation after the amplitude-dependent delay."""
        return cls.compose(cls.delay(), cls.from_static(StaticNonlinearity.sat(k)))

    @classmethod
    def from_config(cls, entry):
        entry = dict(entry)
        if entry.get("type") == "sat_delay":
            entry.pop("type")
            return cls.sat_delay(**entry)
        if entry.get("type") == "delay":
            return cls.delay()
        return cls.from_static(StaticNonlinearity.from_config(entry))


def compose_square_preserving(first, second, alpha, T):
    """Response of ``second(first(.))`` to ``alpha * s_0`` at period `T`."""
    c1 = first.response(alpha, T)
    mid = c1.gain * alpha
    if c1.phase == math.pi:
        mid = -mid
    if mid == 0:
        return ComplexPoint(0.0, 0.0, degenerate=True)
    c2 = second.response(mid, T)
    return c1 * c2


def nyqa_operator(op, alpha_grid, T):
    """Amplitude Nyquist locus of `op` at a frozen period `T`."""
    a = _check_alpha_grid(alpha_grid)

    def ev(x):
        return op.response(x, T).value

    return Locus(a, [ev(x) for x in a], "alpha", evaluator=ev)


def neg_reciprocal(locus):
    """Map every point ``c`` of `locus` to ``-1/c``, keeping parameters."""
    zero = np.flatnonzero(locus.values == 0)
    if zero.size:
        raise ZeroDivisionError(
            f"locus passes through 0 at {locus.kind}={float(locus.params[zero[0]])!r}")
    ev = None
    if locus.evaluator is not None:
        inner = locus.evaluator

        def ev(p):
            v = complex(inner(p))
            if v == 0:
                raise ZeroDivisionError(f"locus passes through 0 at {locus.kind}={float(p)!r}")
            return -1.0 / v

    return Locus(locus.params, -1.0 / locus.values, locus.kind, evaluator=ev)
