"""Limit-cycle prediction by square-wave harmonic balance.

A square oscillation of period ``T`` and amplitude ``alpha`` balances the
loop when ``Gbar(T) * N(alpha, T) = -1``, i.e. when the ADF locus of the
linear part meets ``-1/N``.  For period-dependent operators the balance is
found by iterating on ``T``.
"""

import csv
import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .adf import Locus, adf_locus, adf_point, sample_locus
from .exceptions import InvalidArgumentError, InvalidBracketError, NoConvergenceError
from .nonlin import (amplitude_response_static, neg_reciprocal, nyqa_static)
from .signals import SquareWave

__all__ = [
    "Prediction", "Crossing", "SquareOscillation", "intersect_loci",
    "adf_predict", "adf_predict_T_dependent", "unity_feedback_square_check",
    "prediction_onset", "default_T_grid", "default_alpha_grid", "write_predictions",
]

log = logging.getLogger(__name__)

BALANCE_TOL = 1e-3


def default_T_grid():
    return np.logspace(np.log10(0.2), 2, 400)


def default_alpha_grid():
    return np.logspace(-3, 3, 600)


@dataclass(frozen=True)
class Prediction:
    """A predicted oscillation.

    Attributes
    ----------
    method : str
        ``"adf"`` or ``"classical"``.
    T : float
        Period in seconds.
    alpha : float
        Amplitude at the output of the linear part (equal to the amplitude
        at the nonlinearity input).
    point : complex
        Where the loci meet.
    residual : float
        ``|Gbar(T) N(alpha) + 1|`` re-evaluated at the reported parameters.
    alpha_after : float, optional
        Amplitude after the nonlinearity.
    """

    method: str
    T: float
    alpha: float
    point: complex
    residual: float
    alpha_after: Optional[float] = None

    def row(self):
        return [self.method, repr(float(self.T)), repr(float(self.alpha)),
                repr(self.point.real), repr(self.point.imag), repr(float(self.residual))]


PREDICTION_HEADER = ["method", "T", "alpha_out", "re", "im", "residual"]


def write_predictions(predictions, path):
    """Write predictions as CSV ``method,T,alpha_out,re,im,residual``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PREDICTION_HEADER)
        for p in predictions:
            writer.writerow(p.row())


class Crossing(NamedTuple):
    param_a: float
    param_b: float
    point: complex


def _cross(u, v):
    return u.real * v.imag - u.imag * v.real


def _root(f, lo, hi):
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0:
        return None
    return brentq(f, lo, hi, xtol=1e-14 * max(1.0, abs(lo), abs(hi)), maxiter=200)


def _refine(A, B, i, j, pa, pb, point, gap_tol):
    """Alternate bracketed root finds of each curve against the other's chord."""
    a_lo, a_hi = sorted((A.params[i], A.params[i + 1]))
    b_lo, b_hi = sorted((B.params[j], B.params[j + 1]))
    best = (pa, pb, point)
    for _ in range(40):
        q0, q1 = B.at(b_lo), B.at(b_hi)
        r = _root(lambda p: _cross(q1 - q0, A.at(p) - q0), a_lo, a_hi)
        if r is None:
            break
        wa = (a_hi - a_lo) / 4
        a_lo, a_hi = max(a_lo, r - wa), min(a_hi, r + wa)
        p0, p1 = A.at(a_lo), A.at(a_hi)
        s = _root(lambda p: _cross(p1 - p0, B.at(p) - p0), b_lo, b_hi)
        if s is None:
            break
        wb = (b_hi - b_lo) / 4
        b_lo, b_hi = max(b_lo, s - wb), min(b_hi, s + wb)
        x, y = A.at(r), B.at(s)
        best = (r, s, 0.5 * (x + y))
        if abs(x - y) <= gap_tol:
            break
    return best


def intersect_loci(A, B, gap_tol=1e-8, diagnostics=None, endpoints=False):
    """Transversal crossings of two loci.

    The polylines are intersected segment by segment.  When a locus carries
    an evaluator, each crossing is then refined on the underlying curves
    until the two points agree to `gap_tol`.

    Parameters
    ----------
    A, B : Locus
        Curves with at least two points each.
    diagnostics : list, optional
        Receives ``("overlap", param_a, param_b, midpoint)`` entries for
        collinear overlapping segments, which are not crossings.
    endpoints : bool
        Also report the end points of `B` that lie on the curve `A` (within
        `gap_tol` after refinement).  A chord of `A` may miss such a point
        by its sagitta.

    Returns
    -------
    list of Crossing
        Ordered by the parameter of `A`.
    """
    if len(A) < 2 or len(B) < 2:
        raise InvalidArgumentError("each locus needs at least two points")
    P, R = A.values[:-1], np.diff(A.values)
    Q, S = B.values[:-1], np.diff(B.values)
    ia = np.flatnonzero(R != 0)
    jb = np.flatnonzero(S != 0)
    found = []
    for start in range(0, ia.size, 128):
        ii = ia[start:start + 128]
        Pi, Ri = P[ii][:, None], R[ii][:, None]
        Qj, Sj = Q[jb][None, :], S[jb][None, :]
        den = _cross(Ri, Sj)
        QP = Qj - Pi
        tn = _cross(QP, Sj)
        un = _cross(QP, Ri)
        scale = np.abs(Ri) * np.abs(Sj)
        par = np.abs(den) <= 1e-13 * scale
        with np.errstate(divide="ignore", invalid="ignore"):
            t = tn / den
            u = un / den
        eps = 1e-12
        hit = ~par & (t >= -eps) & (t <= 1 + eps) & (u >= -eps) & (u <= 1 + eps)
        for a, b in zip(*np.nonzero(hit)):
            found.append((ii[a], jb[b], min(max(t[a, b], 0.0), 1.0),
                          min(max(u[a, b], 0.0), 1.0)))
        coll = par & (np.abs(un) <= 1e-12 * np.abs(Ri) ** 2 + 1e-300)
        for a, b in zip(*np.nonzero(coll)):
            _overlap(A, B, ii[a], jb[b], diagnostics)

    out = []
    for i, j, t, u in sorted(found):
        pa = A.params[i] + t * (A.params[i + 1] - A.params[i])
        pb = B.params[j] + u * (B.params[j + 1] - B.params[j])
        point = A.values[i] + t * R[i]
        if A.evaluator is not None or B.evaluator is not None:
            pa, pb, point = _refine(A, B, i, j, pa, pb, point, gap_tol)
        if any(abs(point - c.point) <= 1e-9 * (1 + abs(point))
               and abs(pa - c.param_a) <= 1e-9 * (1 + abs(pa)) for c in out):
            continue
        out.append(Crossing(float(pa), float(pb), complex(point)))
    if endpoints:
        for j in (0, len(B) - 1):
            cr = _touch(A, B.params[j], B.values[j], gap_tol)
            if cr is not None and not any(
                    abs(cr.point - c.point) <= 1e-6 * (1 + abs(cr.point)) for c in out):
                out.append(cr)
    out.sort(key=lambda c: c.param_a)
    return out


def _touch(A, pb, q, gap_tol):
    """The point of `A` at `q`, if `q` lies on `A`."""
    P, R = A.values[:-1], np.diff(A.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.clip(((q - P) * np.conj(R)).real / np.abs(R) ** 2, 0.0, 1.0)
    t = np.where(np.isfinite(t), t, 0.0)
    d = np.abs(P + t * R - q)
    i = int(np.argmin(d))
    # Chords stay within their sagitta of the curve.
    sag = np.max(np.abs(R[max(i - 1, 0):i + 2]))
    if d[i] > sag:
        return None
    lo, hi = A.params[max(i - 1, 0)], A.params[min(i + 2, len(A) - 1)]
    if A.evaluator is None:
        pa, gap = A.params[i] + t[i] * (A.params[i + 1] - A.params[i]), d[i]
    else:
        res = minimize_scalar(lambda p: abs(A.at(p) - q), bounds=(lo, hi),
                              method="bounded",
                              options={"xatol": 1e-12 * max(1.0, abs(hi))})
        pa, gap = res.x, res.fun
    if gap > gap_tol * (1 + abs(q)):
        return None
    return Crossing(float(pa), float(pb), complex(q))


def _overlap(A, B, i, j, diagnostics):
    p0, r = A.values[i], A.values[i + 1] - A.values[i]
    ends = [((B.values[j + k] - p0) * np.conj(r)).real / abs(r) ** 2 for k in (0, 1)]
    lo, hi = max(min(ends), 0.0), min(max(ends), 1.0)
    if lo > hi:
        return
    mid = 0.5 * (lo + hi)
    pa = A.params[i] + mid * (A.params[i + 1] - A.params[i])
    point = p0 + mid * r
    # The parameter of B at the same point.
    s = ((point - B.values[j]) * np.conj(B.values[j + 1] - B.values[j])).real \
        / abs(B.values[j + 1] - B.values[j]) ** 2
    pb = B.params[j] + s * (B.params[j + 1] - B.params[j])
    warnings.warn(f"loci overlap along a segment near {point:.6g}", RuntimeWarning,
                  stacklevel=3)
    if diagnostics is not None:
        diagnostics.append(("overlap", float(pa), float(pb), complex(point)))


def _nonzero_locus(locus, what):
    keep = np.abs(locus.values) > 0
    if np.all(keep):
        return locus
    warnings.warn(f"{np.count_nonzero(~keep)} zero-gain {what} points excluded",
                  RuntimeWarning, stacklevel=3)
    if np.count_nonzero(keep) < 2:
        return None
    return Locus(locus.params[keep], locus.values[keep], locus.kind,
                 evaluator=locus.evaluator)


def adf_predict(G, phi, T_grid=None, alpha_grid=None, n=2048, tol=BALANCE_TOL):
    """Square-wave harmonic-balance predictions for a static nonlinearity.

    Parameters
    ----------
    G : TransferFunction
        Hurwitz linear part.
    phi : StaticNonlinearity
        Odd static nonlinearity in the feedback path.
    T_grid, alpha_grid : array_like, optional
        Increasing period and amplitude grids (log-spaced defaults).
    tol : float
        Crossings whose re-evaluated balance residual exceeds `tol` are
        dropped with a warning.

    Returns
    -------
    list of Prediction
    """
    T_grid = default_T_grid() if T_grid is None else T_grid
    alpha_grid = default_alpha_grid() if alpha_grid is None else alpha_grid
    A = adf_locus(G, T_grid, n)
    nyq = _nonzero_locus(nyqa_static(phi, alpha_grid), "nonlinearity")
    if nyq is None:
        return []
    B = neg_reciprocal(nyq)
    out = []
    for cr in intersect_loci(A, B):
        T, a = cr.param_a, cr.param_b
        N = amplitude_response_static(phi, a)
        residual = abs(adf_point(G, T, n).value * N.value + 1)
        if residual > tol:
            warnings.warn(f"discarding crossing at T={T:.6g}: balance residual "
                          f"{residual:.2e}", RuntimeWarning, stacklevel=2)
            continue
        out.append(Prediction("adf", T, a, cr.point, residual, alpha_after=N.gain * abs(a)))
    return out


def _operator_locus(op, alpha_grid, T, reach, max_turn=0.05):
    """``-1/N(., T)`` sampled densely enough to follow spirals.

    Only the amplitude range where ``|-1/N|`` can reach the ADF locus
    (``<= 2 * reach``) is kept.
    """
    a = np.asarray(alpha_grid, dtype=float)
    vals = np.array([op.response(x, T).value for x in a])
    with np.errstate(divide="ignore"):
        mag = np.where(vals != 0, 1 / np.abs(vals), np.inf)
    idx = np.flatnonzero(mag <= 2 * reach)
    if idx.size == 0:
        return None
    lo, hi = max(idx[0] - 1, 0), min(idx[-1] + 1, a.size - 1)
    a = a[lo:hi + 1]
    a = a[np.abs(vals[lo:hi + 1]) > 0]
    if a.size < 2:
        return None

    def ev(x):
        return -1.0 / op.response(x, T).value

    return sample_locus(ev, a, "alpha", max_turn=max_turn)


class _FrozenPeriodMap:
    """Crossings of the ADF locus with ``-1/N(., T)`` at frozen periods."""

    def __init__(self, A, op, alpha_grid):
        self.A = A
        self.coarse = Locus(A.params, A.values, A.kind)
        self.op = op
        self.alpha_grid = alpha_grid
        self.reach = float(np.abs(A.values).max())

    def crossings(self, T, refine=True):
        B = _operator_locus(self.op, self.alpha_grid, T, self.reach,
                            max_turn=0.05 if refine else 0.2)
        if B is None:
            return []
        if refine:
            return intersect_loci(self.A, B)
        return intersect_loci(self.coarse, Locus(B.params, B.values, B.kind))


def _track(crossings, T, ref):
    """The crossing on the branch whose ``alpha / T`` is nearest `ref`."""
    if not crossings:
        return None
    best = min(crossings, key=lambda c: abs(c.param_b / T - ref))
    return best if abs(best.param_b / T - ref) <= 0.25 else None


def _scan_brackets(fmap, T_lo, T_hi, points, max_depth=4):
    """Brackets ``(T_a, q_a, T_b, q_b)`` where ``F(T) - T`` changes sign.

    Branches are followed between neighbouring scan periods by continuity
    of ``q = alpha / T``.  Intervals where ``|F(T) - T|`` is small on some
    branch are subdivided, so that close pairs of fixed points are not
    stepped over.  A branch that vanishes before the next scan period
    while ``F(T) - T`` is heading toward zero is chased by bisection toward
    the point where it disappears.
    """
    Ts = np.geomspace(T_lo, T_hi, points)
    scans = [fmap.crossings(T, refine=False) for T in Ts]
    brackets = []

    def chase(Ta, qa, ra, Tb):
        lo, hi, q = Ta, Tb, qa
        while hi - lo > 1e-6 * hi:
            mid = 0.5 * (lo + hi)
            cm = _track(fmap.crossings(mid, refine=False), mid, q)
            if cm is None:
                hi = mid
                continue
            if ra * (cm.param_a - mid) <= 0:
                brackets.append((Ta, qa, mid, cm.param_b / mid))
                return
            lo, q = mid, cm.param_b / mid

    def interval(prev, left, right, depth):
        (Ta, sa), (Tb, sb) = left, right
        found, split = [], False
        for ca in sa:
            qa = ca.param_b / Ta
            ra = ca.param_a - Ta
            cb = _track(sb, Tb, qa)
            if cb is not None:
                rb = cb.param_a - Tb
                if ra * rb <= 0:
                    found.append((Ta, qa, Tb, cb.param_b / Tb))
                elif depth < max_depth and min(abs(ra), abs(rb)) < 0.05 * Tb:
                    split = True
                continue
            cp = _track(prev[1], prev[0], qa) if prev is not None else None
            if cp is not None and abs(cp.param_a - prev[0]) > abs(ra):
                chase(Ta, qa, ra, Tb)
        if split:
            Tm = math.sqrt(Ta * Tb)
            mid = (Tm, fmap.crossings(Tm, refine=False))
            interval(prev, left, mid, depth + 1)
            interval(left, mid, right, depth + 1)
        else:
            brackets.extend(found)

    for k in range(points - 1):
        prev = (Ts[k - 1], scans[k - 1]) if k else None
        interval(prev, (Ts[k], scans[k]), (Ts[k + 1], scans[k + 1]), 0)
    return brackets


def adf_predict_T_dependent(G, op, T_init, alpha_grid=None, tol=None, max_iter=60,
                            T_grid=None, n=2048, rtol=1e-4, balance_tol=BALANCE_TOL,
                            scan_points=48):
    """Harmonic balance for a period-dependent square-preserving operator.

    At a frozen period ``T`` the locus ``-1/N(., T)`` is intersected with
    the ADF locus of `G`; a crossing at ADF period ``T'`` defines the map
    ``F(T) = T'`` and a fixed point ``F(T) = T`` is a prediction.  ``F`` is
    multivalued when ``-1/N`` spirals (one value per turn), so each value
    is followed as a branch indexed by the relative amplitude
    ``alpha / T``.  The periods are scanned for sign changes of
    ``F(T) - T`` along a branch.  Among the brackets on the fundamental
    branch (smallest ``alpha / T``) the one nearest `T_init` is chosen and
    closed by Illinois regula falsi.

    Parameters
    ----------
    G : TransferFunction
        Hurwitz linear part.
    op : SquarePreservingOp
        Operator in the feedback path.
    T_init : float
        Period guess; selects among several fixed points.
    alpha_grid, T_grid : array_like, optional
        Amplitude grid of the operator locus and period grid of the ADF
        locus (log-spaced defaults).
    tol : float, optional
        Absolute stopping tolerance on ``|F(T) - T|`` in seconds; the
        default is ``rtol * T``.
    max_iter : int
        Bound on regula falsi iterations.

    Returns
    -------
    Prediction

    Raises
    ------
    NoConvergenceError
        No sign change of ``F(T) - T`` was found (the loci never balance)
        or the iteration did not meet `tol`.  ``trace`` lists the
        ``(T, F(T))`` pairs visited.
    """
    if not T_init > 0:
        raise InvalidArgumentError(f"T_init must be positive, got {T_init}")
    if tol is not None and not tol > 0:
        raise InvalidArgumentError(f"tol must be positive, got {tol}")
    T_grid = default_T_grid() if T_grid is None else np.asarray(T_grid, dtype=float)
    alpha_grid = default_alpha_grid() if alpha_grid is None else alpha_grid
    A = adf_locus(G, T_grid, n)
    fmap = _FrozenPeriodMap(A, op, alpha_grid)

    brackets = _scan_brackets(fmap, float(T_grid[0]), float(T_grid[-1]), scan_points)
    trace = []
    if not brackets:
        raise NoConvergenceError("the loci never balance: F(T) - T has no sign change "
                                 "on any branch", trace)
    # Prefer the fundamental branch (smallest alpha / T), then the bracket
    # nearest T_init.
    q_min = min(min(b[1], b[3]) for b in brackets)
    brackets = [b for b in brackets if min(b[1], b[3]) < q_min + 0.5]
    brackets.sort(key=lambda b: abs(math.log(0.5 * (b[0] + b[2]) / T_init)))
    Ta, qa, Tb, qb = brackets[0]
    log.debug("bracket [%.6g, %.6g] on branch alpha/T ~ %.4g", Ta, Tb, qa)

    def evaluate(T):
        q = qa + (qb - qa) * (T - Ta) / (Tb - Ta)
        cr = _track(fmap.crossings(T), T, q)
        trace.append((T, None if cr is None else cr.param_a))
        return cr

    ends = []
    for T in (Ta, Tb):
        cr = evaluate(T)
        if cr is None:
            raise NoConvergenceError(f"branch lost at T={T:.6g}", trace)
        ends.append([T, cr.param_a - T, cr])
    side = 0
    for _ in range(max_iter):
        (T0, r0, c0), (T1, r1, c1) = ends
        for T, r, cr in ends:
            if abs(r) <= (tol if tol is not None else rtol * T):
                N = op.response(cr.param_b, cr.param_a)
                residual = abs(adf_point(G, cr.param_a, n).value * N.value + 1)
                if residual > balance_tol:
                    raise NoConvergenceError(
                        f"balance residual {residual:.2e} at T={cr.param_a:.6g}", trace)
                return Prediction("adf", cr.param_a, cr.param_b, cr.point, residual,
                                  alpha_after=N.gain * abs(cr.param_b))
        T = T0 - r0 * (T1 - T0) / (r1 - r0) if r1 != r0 else 0.5 * (T0 + T1)
        if not min(T0, T1) < T < max(T0, T1):
            T = 0.5 * (T0 + T1)
        cr = evaluate(T)
        if cr is None:
            raise NoConvergenceError(f"branch lost at T={T:.6g}", trace)
        r = cr.param_a - T
        if r * r0 < 0:
            ends[1] = [T, r, cr]
            if side == -1:
                ends[0][1] *= 0.5
            side = -1
        else:
            ends[0] = [T, r, cr]
            if side == 1:
                ends[1][1] *= 0.5
            side = 1
    raise NoConvergenceError(f"no fixed point after {max_iter} iterations", trace)


class SquareOscillation(NamedTuple):
    """A self-sustaining square oscillation ``e = alpha s_0``, ``y = -e``."""

    alpha: float
    e: SquareWave
    y: SquareWave


def unity_feedback_square_check(op, T, alpha_grid, tol=1e-6):
    """Look for ``N(alpha, T) = -1`` along `alpha_grid`.

    Sign changes of ``|N| - 1`` and of the phase of ``-N`` between
    neighbouring grid amplitudes are bisected; the first amplitude where
    ``|N + 1| <= tol`` is returned.

    Returns
    -------
    SquareOscillation or None
    """
    if not T > 0:
        raise InvalidArgumentError(f"period must be positive, got {T}")
    a = np.asarray(alpha_grid, dtype=float).ravel()

    def value(x):
        return op.response(x, T).value

    def gain_err(x):
        return abs(value(x)) - 1.0

    def phase_err(x):
        return math.atan2(-value(x).imag, -value(x).real)

    def found(x):
        return SquareOscillation(float(x), SquareWave(float(x), 0.0, T),
                                 SquareWave(float(x), T / 2, T))

    vals = np.array([value(x) for x in a])
    cand = []
    cand.extend(a[np.abs(vals + 1) <= tol])
    g = np.abs(vals) - 1
    ph = np.angle(-vals)
    for k in range(a.size - 1):
        if g[k] * g[k + 1] < 0:
            cand.append(brentq(gain_err, a[k], a[k + 1], xtol=1e-14))
        if ph[k] * ph[k + 1] < 0 and abs(ph[k] - ph[k + 1]) < math.pi:
            cand.append(brentq(phase_err, a[k], a[k + 1], xtol=1e-14))
    for x in sorted(cand):
        if abs(value(x) + 1) <= tol:
            return found(x)
    return None


def prediction_onset(has_prediction, k_lo, k_hi, xtol=1e-3):
    """Smallest gain in ``[k_lo, k_hi]`` for which `has_prediction` holds.

    `has_prediction(k)` must be False at `k_lo` and True at `k_hi`; the
    transition is located by bisection to `xtol`.
    """
    if has_prediction(k_lo) or not has_prediction(k_hi):
        raise InvalidBracketError(
            f"prediction must be absent at k={k_lo} and present at k={k_hi}")
    while k_hi - k_lo > xtol:
        mid = 0.5 * (k_lo + k_hi)
        if has_prediction(mid):
            k_hi = mid
        else:
            k_lo = mid
    return 0.5 * (k_lo + k_hi)
