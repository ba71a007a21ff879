"""Command-line workflows writing CSV artifacts.

Usage::

    squaredf adf      --config run.json --out results/
    squaredf nyqa     --config run.json --out results/
    squaredf predict  --config run.json --out results/
    squaredf simulate --config run.json --out results/ [--extended]
    squaredf compare  --config run.json --out results/ [--extended]

Exit status is 0 on success, 2 for configuration errors and 3 for numeric
failures.
"""

import argparse
import csv
import dataclasses
import logging
import os
import sys
import warnings

import numpy as np

from .adf import adf_locus, best_square_fit
from .classical import classical_predict
from .config import ConfigError, load_config
from .exceptions import InvalidArgumentError, NoConvergenceError, SimulationFault
from .linsys import square_steady_state
from .nonlin import SquarePreservingOp, neg_reciprocal, nyqa_operator, nyqa_static
from .predict import adf_predict, adf_predict_T_dependent, write_predictions
from .simulate import detect_oscillation, simulate_lure

__all__ = ["main", "cmd_adf", "cmd_nyqa", "cmd_predict", "cmd_simulate", "cmd_compare"]

log = logging.getLogger("squaredf")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
EXTENDED_STEP = 1e-4


def _require(spec, *names):
    for name in names:
        if getattr(spec, name) is None:
            raise ConfigError("required for this command", name)


def _say(out, text):
    print(text, file=out if out is not None else sys.stdout)


def cmd_adf(spec, outdir, out=None):
    """Write the ADF locus of the plant over the period grid."""
    _require(spec, "tf")
    locus = adf_locus(spec.tf, spec.T_grid, spec.n)
    path = os.path.join(outdir, "adf_locus.csv")
    locus.to_csv(path)
    # Fit quality is reported but never gates the locus.
    worst_T, worst = None, 0.0
    for T in spec.T_grid:
        y = square_steady_state(spec.tf, T, spec.n)
        _, r = best_square_fit(y, 1.0)
        if r > worst:
            worst_T, worst = float(T), r
    if worst > spec.residual_warn:
        print(f"warning: square fit residual {worst:.3g} at T={worst_T:.6g} exceeds "
              f"{spec.residual_warn:g}", file=sys.stderr)
    _say(out, f"wrote {path} ({len(locus)} points)")
    return EXIT_OK


def cmd_nyqa(spec, outdir, out=None):
    """Write the amplitude Nyquist locus of the nonlinearity and its ``-1/N``."""
    _require(spec, "nonlinearity")
    nl = spec.build_nonlinearity()
    if isinstance(nl, SquarePreservingOp):
        _require(spec, "T")
        locus = nyqa_operator(nl, spec.alpha_grid, spec.T)
    else:
        locus = nyqa_static(nl, spec.alpha_grid)
    path = os.path.join(outdir, "nyqa.csv")
    locus.to_csv(path)
    _say(out, f"wrote {path} ({len(locus)} points)")
    if np.all(locus.values != 0):
        rpath = os.path.join(outdir, "neg_reciprocal.csv")
        neg_reciprocal(locus).to_csv(rpath)
        _say(out, f"wrote {rpath}")
    else:
        _say(out, "locus passes through 0; -1/N not written")
    return EXIT_OK


def _predictions(spec, plant, nl):
    """Classical and square-wave predictions for one configuration."""
    if isinstance(nl, SquarePreservingOp):
        try:
            return [adf_predict_T_dependent(plant, nl, spec.T_init, spec.alpha_grid,
                                            tol=spec.tol, max_iter=spec.max_iter,
                                            T_grid=spec.T_grid, n=spec.n)]
        except NoConvergenceError as exc:
            log.info("square-wave balance not found: %s", exc)
            return []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rows = classical_predict(plant, nl, spec.omega_grid, spec.alpha_grid)
    return rows + adf_predict(plant, nl, spec.T_grid, spec.alpha_grid, spec.n)


def _onset_hint(spec, plant):
    """Where the ADF locus crosses the negative real axis."""
    locus = adf_locus(plant, spec.T_grid, spec.n)
    v = locus.values
    hits = []
    for i in np.flatnonzero((v.imag[:-1] > 0) != (v.imag[1:] > 0)):
        s = v.imag[i] / (v.imag[i] - v.imag[i + 1])
        x = v.real[i] + s * (v.real[i + 1] - v.real[i])
        if x < 0:
            hits.append((locus.params[i] + s * (locus.params[i + 1] - locus.params[i]), x))
    if not hits:
        return "the ADF locus does not cross the negative real axis"
    T, x = min(hits, key=lambda h: h[1])
    return (f"the ADF locus crosses the negative real axis at {x:.6g} (T={T:.6g}); "
            f"a static gain above {-1 / x:.6g} is needed there")


def cmd_predict(spec, outdir, out=None):
    """Run the classical and square-wave predictions and write them."""
    _require(spec, "tf", "nonlinearity")
    rows = _predictions(spec, spec.tf, spec.build_nonlinearity())
    path = os.path.join(outdir, "predictions.csv")
    write_predictions(rows, path)
    if not rows:
        _say(out, "no intersection")
        _say(out, "hint: " + _onset_hint(spec, spec.tf))
    for p in rows:
        after = "" if p.alpha_after is None else f" alpha_after={p.alpha_after:.6g}"
        _say(out, f"{p.method}: T={p.T:.6g} alpha_out={p.alpha:.6g} "
                  f"alpha_in={p.alpha:.6g}{after} residual={p.residual:.2e}")
    _say(out, f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


def _sim_config(spec, extended):
    return dataclasses.replace(spec.sim, step=EXTENDED_STEP) if extended else spec.sim


def cmd_simulate(spec, outdir, out=None, extended=False):
    """Simulate the loop, write the time series and the oscillation verdict."""
    _require(spec, "tf", "nonlinearity")
    cfg = _sim_config(spec, extended)
    ts = simulate_lure(spec.tf, spec.build_nonlinearity(), cfg)
    report = detect_oscillation(ts, cfg.transient)
    ts_path = os.path.join(outdir, "timeseries.csv")
    rep_path = os.path.join(outdir, "oscillation.csv")
    ts.to_csv(ts_path, spec.csv_stride)
    report.to_csv(rep_path)
    for line in report.lines():
        _say(out, line)
    _say(out, f"wrote {ts_path} and {rep_path}")
    return EXIT_OK


def _first_period(rows, method):
    periods = [p.T for p in rows if p.method == method]
    return min(periods) if periods else None


def _compare_row(spec, k, cfg):
    plant, nl = spec.build_plant(k), spec.build_nonlinearity(k)
    try:
        report = detect_oscillation(simulate_lure(plant, nl, cfg), cfg.transient)
        T_sim = report.period if report.sustained else None
    except SimulationFault as exc:
        log.info("k=%g: simulation failed: %s", k, exc)
        T_sim = None
    rows = _predictions(spec, plant, nl)
    return k, T_sim, _first_period(rows, "classical"), _first_period(rows, "adf")


def cmd_compare(spec, outdir, out=None, extended=False):
    """Tabulate simulated and predicted periods over the gain sweep."""
    cfg = _sim_config(spec, extended)
    if spec.sweep_k:
        _require(spec, "tf", "nonlinearity")
    # Rows are computed in order; the compiled kernels hold the GIL.
    results = [_compare_row(spec, k, cfg) for k in spec.sweep_k]
    path = os.path.join(outdir, "compare.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "T_sim", "T_df", "T_adf"])
        for row in results:
            writer.writerow(["" if v is None else repr(float(v)) for v in row])
    for k, *periods in results:
        cells = " ".join(f"{name}={'-' if v is None else f'{v:.6g}'}"
                         for name, v in zip(("T_sim", "T_df", "T_adf"), periods))
        _say(out, f"k={k:g} {cells}")
    _say(out, f"wrote {path} ({len(results)} rows)")
    return EXIT_OK


COMMANDS = {"adf": cmd_adf, "nyqa": cmd_nyqa, "predict": cmd_predict,
            "simulate": cmd_simulate, "compare": cmd_compare}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="squaredf", description="Square-wave describing-function analysis.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=".", help="output directory (default: .)")
    parser.add_argument("--extended", action="store_true",
                        help=f"simulate with step {EXTENDED_STEP:g}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        fn = COMMANDS[args.command]
        if args.command in ("simulate", "compare"):
            return fn(spec, args.out, extended=args.extended)
        return fn(spec, args.out)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, FloatingPointError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
