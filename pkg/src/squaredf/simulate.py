"""Time-domain simulation of Lur'e loops and oscillation detection.

The loop is ``x' = A x + B u``, ``y = C x``, ``e = -y`` with ``u`` produced
from ``e`` by the feedback operator.  Static feedback is ``u = Phi(e)``.
The amplitude-dependent delay is realised with memory:

    v(t) = Phi_pre(e(t)),   gamma(t) = max |v| over the memory window,
    u(t) = Phi_post(v(t - gamma(t))),

where past values of ``v`` are read from a history buffer by linear
interpolation and the history before ``t = 0`` is held at ``v(0)``.

Fixed-step RK4 runs in compiled kernels; adaptive RK45 (scipy) is
available for static feedback.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import (DivergenceFault, InsufficientDataError, InvalidArgumentError,
                         InvalidBracketError, SimulationFault)
from .linsys import StateSpace, TransferFunction, tf_to_ss
from .nonlin import KIND_CALLABLE, KIND_GAIN, SquarePreservingOp, StaticNonlinearity

__all__ = [
    "SimConfig", "TimeSeries", "LureLoop", "OscillationReport", "simulate_lure",
    "detect_oscillation", "onset_search",
]

_OK, _DIVERGED, _UNDERRUN = 0, 1, 2

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    Parameters
    ----------
    solver : {"rk4", "rk45"}
        Fixed-step RK4 or adaptive RK45 (static feedback only).
    step : float
        RK4 step, and the output sampling interval for RK45.
    horizon : float
        Simulated time in seconds.
    transient : float
        Fraction of the run discarded before oscillation detection.
    x0 : sequence of float, optional
        Initial state.  Default: ``1e-2`` on the first state.
    initial_output : float, optional
        Start from the least-norm state with ``C x0 = initial_output``.
    seed : int, optional
        Draw ``x0`` from ``N(0, 1e-4 I)`` with this seed.
    memory_window : float, optional
        Window (seconds) of the running maximum that sets the delay; None
        uses the full history.
    history : float, optional
        Capacity (seconds) of the delay history buffer; None is unbounded.
        Delays reaching further back raise :class:`SimulationFault`.
    period_guess : float, optional
        When given, the horizon must cover at least 50 such periods.
    """

    solver: str = "rk4"
    step: float = 1e-3
    horizon: float = 200.0
    transient: float = 0.5
    x0: Optional[tuple] = None
    initial_output: Optional[float] = None
    seed: Optional[int] = None
    memory_window: Optional[float] = None
    history: Optional[float] = None
    rtol: float = 1e-8
    atol: float = 1e-10
    period_guess: Optional[float] = None

    def __post_init__(self):
        if self.solver not in ("rk4", "rk45"):
            raise InvalidArgumentError(f"unknown solver {self.solver!r}")
        if not self.step > 0:
            raise InvalidArgumentError(f"step must be positive, got {self.step}")
        if not self.horizon > self.step:
            raise InvalidArgumentError(f"horizon must exceed the step, got {self.horizon}")
        if not 0 <= self.transient < 1:
            raise InvalidArgumentError(f"transient fraction must be in [0, 1), "
                                       f"got {self.transient}")
        if self.period_guess is not None and self.horizon < 50 * self.period_guess:
            raise InvalidArgumentError(
                f"horizon {self.horizon} is shorter than 50 periods of {self.period_guess}")
        for name in ("memory_window", "history"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise InvalidArgumentError(f"{name} must be positive, got {v}")
        if self.x0 is not None:
            object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Sampled loop signals: time, nonlinearity output ``u``, plant output ``y``."""

    t: np.ndarray
    u: np.ndarray
    y: np.ndarray

    def __len__(self):
        return self.t.size

    def to_csv(self, path, stride=1):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "u", "y"])
            for i in range(0, self.t.size, stride):
                writer.writerow([repr(float(self.t[i])), repr(float(self.u[i])),
                                 repr(float(self.y[i]))])


@dataclass(frozen=True, eq=False)
class LureLoop:
    """A plant and the operator closing the loop around it."""

    plant: object
    feedback: object


# -- compiled kernels --------------------------------------------------------

@numba.njit(cache=True)
def _phi(kind, p0, p1, xs, ys, x):
    if kind == 0:
        return p0 * x
    if kind == 1:
        v = p0 * x
        return min(1.0, max(-1.0, v))
    if kind == 2:
        return 1.0 if x > 0 else (-1.0 if x < 0 else 0.0)
    if kind == 3:
        a = abs(x) - p0
        if a <= 0:
            return 0.0
        return p1 * a if x > 0 else -p1 * a
    if kind == 4:
        return p0 * x * x * x
    v = np.interp(abs(x), xs, ys)
    return v if x >= 0 else -v


@numba.njit(cache=True)
def _dot(c, x):
    s = 0.0
    for i in range(x.size):
        s += c[i] * x[i]
    return s


@numba.njit(cache=True)
def _deriv(A, B, x, u, out):
    n = x.size
    for i in range(n):
        s = B[i] * u
        for j in range(n):
            s += A[i, j] * x[j]
        out[i] = s


@numba.njit(cache=True)
def _rk4_static(A, B, C, x0, h, nsteps, kind, p0, p1, xs, ys):
    nx = x0.size
    x = x0.copy()
    y_out = np.empty(nsteps + 1)
    u_out = np.empty(nsteps + 1)
    k1 = np.empty(nx)
    k2 = np.empty(nx)
    k3 = np.empty(nx)
    k4 = np.empty(nx)
    xs_ = np.empty(nx)
    for n in range(nsteps + 1):
        y = _dot(C, x)
        u = _phi(kind, p0, p1, xs, ys, -y)
        y_out[n] = y
        u_out[n] = u
        if n == nsteps:
            break
        _deriv(A, B, x, u, k1)
        for i in range(nx):
            xs_[i] = x[i] + 0.5 * h * k1[i]
        _deriv(A, B, xs_, _phi(kind, p0, p1, xs, ys, -_dot(C, xs_)), k2)
        for i in range(nx):
            xs_[i] = x[i] + 0.5 * h * k2[i]
        _deriv(A, B, xs_, _phi(kind, p0, p1, xs, ys, -_dot(C, xs_)), k3)
        for i in range(nx):
            xs_[i] = x[i] + h * k3[i]
        _deriv(A, B, xs_, _phi(kind, p0, p1, xs, ys, -_dot(C, xs_)), k4)
        ok = True
        for i in range(nx):
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not np.isfinite(x[i]):
                ok = False
        if not ok:
            return y_out[:n + 1], u_out[:n + 1], _DIVERGED
    return y_out, u_out, _OK


@numba.njit(cache=True)
def _delayed(hist, n, h, tq, t_n, v_n, t_s, v_s, cap):
    """History value at time tq; (t_n, t_s] is filled from the stage value."""
    if tq <= 0.0:
        return hist[0], True
    if tq >= t_n:
        if t_s > t_n:
            return v_n + (v_s - v_n) * (tq - t_n) / (t_s - t_n), True
        return v_s, True
    s = tq / h
    i = int(s)
    if i >= n:
        i = n - 1
    if cap >= 0 and i < n - cap:
        return 0.0, False
    fr = s - i
    return hist[i] * (1.0 - fr) + hist[i + 1] * fr, True


@numba.njit(cache=True)
def _rk4_delay(A, B, C, x0, h, nsteps,
               pk, pp0, pp1, pxs, pys, qk, qp0, qp1, qxs, qys, window, cap):
    nx = x0.size
    x = x0.copy()
    y_out = np.empty(nsteps + 1)
    u_out = np.empty(nsteps + 1)
    hist = np.empty(nsteps + 1)
    dq = np.empty(nsteps + 1, dtype=np.int64)
    head = 0
    tail = 0
    k1 = np.empty(nx)
    k2 = np.empty(nx)
    k3 = np.empty(nx)
    k4 = np.empty(nx)
    xs_ = np.empty(nx)
    gamma = 0.0
    for n in range(nsteps + 1):
        t_n = n * h
        y = _dot(C, x)
        v_n = _phi(pk, pp0, pp1, pxs, pys, -y)
        hist[n] = v_n
        if window < 0:
            if abs(v_n) > gamma or n == 0:
                gamma = abs(v_n)
        else:
            while tail > head and abs(hist[dq[tail - 1]]) <= abs(v_n):
                tail -= 1
            dq[tail] = n
            tail += 1
            while dq[head] < n - window:
                head += 1
            gamma = abs(hist[dq[head]])
        vd, ok = _delayed(hist, n, h, t_n - gamma, t_n, v_n, t_n, v_n, cap)
        if not ok:
            return y_out[:n], u_out[:n], _UNDERRUN
        u = _phi(qk, qp0, qp1, qxs, qys, vd)
        y_out[n] = y
        u_out[n] = u
        if n == nsteps:
            break
        _deriv(A, B, x, u, k1)
        for stage in range(3):
            c = 0.5 if stage < 2 else 1.0
            kin = k1 if stage == 0 else (k2 if stage == 1 else k3)
            for i in range(nx):
                xs_[i] = x[i] + c * h * kin[i]
            t_s = t_n + c * h
            v_s = _phi(pk, pp0, pp1, pxs, pys, -_dot(C, xs_))
            vd, ok = _delayed(hist, n, h, t_s - gamma, t_n, v_n, t_s, v_s, cap)
            if not ok:
                return y_out[:n + 1], u_out[:n + 1], _UNDERRUN
            us = _phi(qk, qp0, qp1, qxs, qys, vd)
            kout = k2 if stage == 0 else (k3 if stage == 1 else k4)
            _deriv(A, B, xs_, us, kout)
        ok = True
        for i in range(nx):
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not np.isfinite(x[i]):
                ok = False
        if not ok:
            return y_out[:n + 1], u_out[:n + 1], _DIVERGED
    return y_out, u_out, _OK


# -- drivers -----------------------------------------------------------------

def _realise(G):
    ss = tf_to_ss(G) if isinstance(G, TransferFunction) else G
    if not isinstance(ss, StateSpace):
        raise InvalidArgumentError("plant must be a TransferFunction or StateSpace")
    if ss.D[0, 0] != 0:
        raise InvalidArgumentError("plant must be strictly proper (D = 0) to avoid "
                                   "an algebraic loop")
    if ss.nstates == 0:
        raise InvalidArgumentError("plant has no states")
    return ss


def _initial_state(ss, cfg):
    nx = ss.nstates
    if cfg.x0 is not None:
        if len(cfg.x0) != nx:
            raise InvalidArgumentError(f"x0 has {len(cfg.x0)} entries, plant has {nx} states")
        return np.array(cfg.x0, dtype=float)
    if cfg.initial_output is not None:
        c = ss.C[0]
        if not np.any(c):
            raise InvalidArgumentError("output matrix is zero; cannot set the output")
        return c * (cfg.initial_output / float(c @ c))
    if cfg.seed is not None:
        return 1e-2 * np.random.default_rng(cfg.seed).standard_normal(nx)
    x0 = np.zeros(nx)
    x0[0] = 1e-2
    return x0


def _compiled(phi):
    if phi is None:
        return (KIND_GAIN, 1.0, 1.0, np.zeros(1), np.zeros(1))
    kind, p0, p1, xs, ys = phi.sim_params
    if kind == KIND_CALLABLE:
        raise InvalidArgumentError(
            f"nonlinearity {phi.name!r} has no compiled form; use a builtin or the "
            "rk45 solver")
    return kind, p0, p1, xs, ys


def _split_operator(op):
    """``(pre, post)`` static maps around a single amplitude-dependent delay."""
    parts = list(op.parts)
    if parts.count("delay") != 1 or not all(
            p == "delay" or isinstance(p, StaticNonlinearity) for p in parts):
        raise InvalidArgumentError(f"cannot simulate operator {op.name!r}: need exactly "
                                   "one delay between static maps")
    k = parts.index("delay")
    pre, post = parts[:k], parts[k + 1:]
    if len(pre) > 1 or len(post) > 1:
        raise InvalidArgumentError("at most one static map on each side of the delay")
    return (pre[0] if pre else None), (post[0] if post else None)


def simulate_lure(G, feedback, cfg=SimConfig()):
    """Simulate the loop ``y = G u``, ``u = feedback(-y)``.

    Parameters
    ----------
    G : TransferFunction or StateSpace
        Strictly proper plant.
    feedback : StaticNonlinearity or SquarePreservingOp
        The feedback operator.  Operators are realised in time from their
        parts; at most one amplitude-dependent delay is supported.
    cfg : SimConfig

    Returns
    -------
    TimeSeries

    Raises
    ------
    DivergenceFault
        The state became non-finite.
    SimulationFault
        The delay reached beyond the configured history.
    """
    ss = _realise(G)
    x0 = _initial_state(ss, cfg)
    A, B, C = ss.A, np.ascontiguousarray(ss.B[:, 0]), np.ascontiguousarray(ss.C[0])
    nsteps = int(round(cfg.horizon / cfg.step))
    h = cfg.step

    static = feedback if isinstance(feedback, StaticNonlinearity) else None
    if isinstance(feedback, SquarePreservingOp) and "delay" not in feedback.parts:
        if len(feedback.parts) == 1:
            static = feedback.parts[0]
        else:
            raise InvalidArgumentError("compose static maps into one before simulating")
    if static is None and not isinstance(feedback, SquarePreservingOp):
        raise InvalidArgumentError("feedback must be a StaticNonlinearity or SquarePreservingOp")

    if cfg.solver == "rk45":
        if static is None:
            raise InvalidArgumentError("the adaptive solver supports static feedback only")
        return _simulate_rk45(A, B, C, x0, static, cfg, nsteps)

    if static is not None:
        y, u, status = _rk4_static(A, B, C, x0, h, nsteps, *_compiled(static))
    else:
        pre, post = _split_operator(feedback)
        window = -1 if cfg.memory_window is None else int(round(cfg.memory_window / h))
        cap = -1 if cfg.history is None else int(math.floor(cfg.history / h))
        y, u, status = _rk4_delay(A, B, C, x0, h, nsteps, *_compiled(pre),
                                  *_compiled(post), window, cap)
    if status == _DIVERGED:
        raise DivergenceFault(f"state became non-finite at t={(y.size - 1) * h:.6g}")
    if status == _UNDERRUN:
        raise SimulationFault(f"delay exceeded the {cfg.history} s history buffer at "
                              f"t={y.size * h:.6g}")
    t = np.arange(y.size) * h
    return TimeSeries(t, u, y)


def _simulate_rk45(A, B, C, x0, phi, cfg, nsteps):
    def rhs(_, x):
        return A @ x + B * phi(-(C @ x))

    t_eval = np.arange(nsteps + 1) * cfg.step
    sol = solve_ivp(rhs, (0.0, t_eval[-1]), x0, method="RK45", t_eval=t_eval,
                    rtol=cfg.rtol, atol=cfg.atol)
    if not sol.success or not np.all(np.isfinite(sol.y)):
        raise DivergenceFault(f"adaptive integration failed: {sol.message}")
    y = C @ sol.y
    return TimeSeries(sol.t, np.asarray(phi(-y), dtype=float), y)


# -- oscillation detection ---------------------------------------------------

@dataclass(frozen=True)
class OscillationReport:
    """Verdict on a simulated run.

    `period` is NaN when too few crossings were found.
    """

    sustained: bool
    period: float
    amplitude: float
    crossings: int
    cv: float = float("nan")
    notes: tuple = field(default=())

    def lines(self):
        return [f"sustained={str(self.sustained).lower()}", f"period={self.period!r}",
                f"amplitude={self.amplitude!r}", f"crossings={self.crossings}",
                f"cv={self.cv!r}", f"notes={'; '.join(self.notes)}"]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["sustained", "period", "amplitude", "crossings", "cv", "notes"])
            writer.writerow([str(self.sustained).lower(), repr(float(self.period)),
                             repr(float(self.amplitude)), self.crossings,
                             repr(float(self.cv)), "; ".join(self.notes)])


def _up_crossings(t, y, level):
    z = y - level
    idx = np.flatnonzero((z[:-1] < 0) & (z[1:] >= 0))
    frac = -z[idx] / (z[idx + 1] - z[idx])
    return t[idx] + frac * (t[idx + 1] - t[idx])


def detect_oscillation(ts, transient=0.5, cv_max=0.02, min_crossings=10,
                       min_amplitude=1e-4, envelope_rtol=1e-3):
    """Decide whether `ts` settles into a sustained oscillation.

    After dropping the first `transient` fraction of the run, upward
    crossings of the mean are located by linear interpolation (the mean is
    then recomputed over whole cycles and the crossings redone).  The
    period is the mean gap over the last (up to) 20 crossing intervals.
    A sustained oscillation needs at least `min_crossings` crossings, a
    coefficient of variation of the gaps no larger than `cv_max`, an
    amplitude of at least `min_amplitude`, and cycle peaks over the final
    quarter that do not shrink by more than `envelope_rtol`.

    Raises
    ------
    InsufficientDataError
        Fewer than 16 samples remain after the transient.
    """
    t0 = ts.t[0] + transient * (ts.t[-1] - ts.t[0])
    keep = ts.t >= t0
    t, y = ts.t[keep], ts.y[keep]
    if t.size < 16:
        raise InsufficientDataError(f"only {t.size} samples after the transient")
    notes = []
    level = float(np.mean(y))
    tc = _up_crossings(t, y, level)
    if tc.size >= 2:
        span = (t >= tc[0]) & (t <= tc[-1])
        level = float(_trapezoid(y[span], t[span]) / (tc[-1] - tc[0]))
        tc = _up_crossings(t, y, level)
    if tc.size < 3:
        amp = float(np.max(np.abs(y - level)))
        return OscillationReport(False, float("nan"), amp, int(tc.size),
                                 notes=("too few mean crossings",))
    gaps = np.diff(tc[-21:])
    period = float(np.mean(gaps))
    cv = float(np.std(gaps) / period)
    recent = t >= t[-1] - 5 * period
    amplitude = float(np.max(np.abs(y[recent] - level)))

    sustained = True
    if tc.size < min_crossings:
        sustained = False
        notes.append(f"{tc.size} crossings < {min_crossings}")
    if cv > cv_max:
        sustained = False
        notes.append(f"period spread cv={cv:.3g} > {cv_max}")
    if amplitude < min_amplitude:
        sustained = False
        notes.append(f"amplitude {amplitude:.3g} < {min_amplitude}")
    quarter = tc[tc >= t[-1] - 0.25 * (t[-1] - t[0])]
    if quarter.size >= 3:
        peaks = np.array([np.max(np.abs(y[(t >= a) & (t < b)] - level))
                          for a, b in zip(quarter[:-1], quarter[1:])])
        if peaks[-1] < peaks[0] * (1 - envelope_rtol):
            sustained = False
            notes.append("envelope shrinking")
    else:
        notes.append("too few cycles to judge the envelope")
    return OscillationReport(sustained, period, amplitude, int(tc.size), cv, tuple(notes))


def onset_search(builder, k_lo, k_hi, cfg=SimConfig(), iterations=12, transient=None):
    """Smallest gain with a sustained oscillation, by bisection.

    Parameters
    ----------
    builder : callable
        ``k -> LureLoop``.
    k_lo, k_hi : float
        Bracket: no oscillation at `k_lo`, oscillation at `k_hi`.
    iterations : int
        Bisection steps.

    Raises
    ------
    InvalidBracketError
        If the bracket does not straddle the onset.
    """
    transient = cfg.transient if transient is None else transient

    def sustained(k):
        loop = builder(k)
        try:
            ts = simulate_lure(loop.plant, loop.feedback, cfg)
        except DivergenceFault:
            return True
        return detect_oscillation(ts, transient).sustained

    if not k_lo < k_hi:
        raise InvalidBracketError(f"need k_lo < k_hi, got {k_lo}, {k_hi}")
    if sustained(k_lo):
        raise InvalidBracketError(f"oscillation already present at k_lo={k_lo}")
    if not sustained(k_hi):
        raise InvalidBracketError(f"no oscillation at k_hi={k_hi}")
    for _ in range(iterations):
        mid = 0.5 * (k_lo + k_hi)
        if sustained(mid):
            k_hi = mid
        else:
            k_lo = mid
    return 0.5 * (k_lo + k_hi)
