"""``entangle-lab`` command-line entry point.

Angles are given in degrees on the command line. All randomness derives
from ``--seed`` (default :data:`entangle_lab.rng.DEFAULT_SEED`), so equal
arguments produce byte-identical output files. Any flag can also be given
in a JSON file passed with ``--config``; command-line flags win.

Errors are reported as a single JSON object on stderr with a nonzero exit
code.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import measures, optics, sampling, tomography
from .qcore import (
    StateError,
    fidelity,
    linear_entropy,
    load_state,
    partial_trace,
    save_state,
    state_to_dict,
)
from .rng import DEFAULT_SEED


class CliError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# output helpers


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_rows(rows: list[dict], path, columns=None) -> None:
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _emit(rows, args, columns=None):
    """Rows to ``--out`` (csv or json by ``--format``) or to stdout."""
    fmt = getattr(args, "format", "csv")
    out = getattr(args, "out", None)
    if out:
        if fmt == "json":
            write_json(rows, out)
        else:
            write_rows(rows, out, columns)
    elif fmt == "json":
        json.dump(_clean(rows), sys.stdout, indent=1, sort_keys=True)
        sys.stdout.write("\n")
    else:
        columns = list(columns or rows[0].keys())
        w = csv.writer(sys.stdout)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def _target(spec: str | None):
    if spec is None:
        return None
    if os.path.exists(spec):
        return load_state(spec)
    try:
        return measures.reference_state(spec)
    except StateError:
        raise CliError(f"target {spec!r} is neither a file nor a reference state name") from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_circuit(args):
    theta = math.radians(args.theta)
    out = optics.run_circuit(theta)
    rep = measures.robustness_profile(out.conditional_state, measures.ideal_state(theta))
    summary = {
        "theta_deg": args.theta,
        "success_probability": out.success_probability,
        "state": state_to_dict(out.conditional_state),
        "report": rep.to_dict(),
    }
    if args.out:
        save_state(out.conditional_state, args.out)
    if args.report:
        write_json(summary, args.report)
    json.dump(_clean(summary), sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")


def cmd_scan(args):
    if args.steps < 1:
        raise CliError("--steps must be >= 1")
    lo, hi = args.start, args.stop
    if not (0 <= lo <= 45 and 0 <= hi <= 45):
        raise CliError("scan range must lie within [0, 45] degrees")
    grid = np.radians(np.linspace(lo, hi, args.steps))
    rows = optics.theta_scan(grid)
    _emit(rows, args, optics.SCAN_COLUMNS)


def _report_row(name, state, target):
    rho = state.to_density()
    if rho.num_qubits == 3:
        rep = measures.robustness_profile(state, target)
        row = {"state": name}
        row.update(rep.scalar_measures())
        return row, rep.to_dict()
    row = {"state": name, **tomography.state_measures(rho, target)}
    return row, row


def cmd_measures(args):
    rows, reports = [], []
    target = _target(args.target)
    for path in args.inputs:
        row, rep = _report_row(Path(path).stem, load_state(path), target)
        rows.append(row)
        reports.append({"state": Path(path).stem, **rep})
    if args.format == "json":
        if args.out:
            write_json(reports, args.out)
        else:
            json.dump(_clean(reports), sys.stdout, indent=1, sort_keys=True)
            sys.stdout.write("\n")
    else:
        columns = []
        for r in rows:
            columns += [k for k in r if k not in columns]
        _emit(rows, args, columns)


def cmd_tomo_simulate(args):
    state = load_state(args.inputs)
    settings = tomography.build_projector_set(state.num_qubits)
    record = tomography.simulate_counts(state, settings, args.flux, args.seed, args.iteration)
    record.to_csv(args.out)


def cmd_tomo_reconstruct(args):
    labels = tuple(args.labels.split(",")) if args.labels else ()
    record = tomography.MeasurementRecord.from_csv(args.inputs, labels)
    res = tomography.reconstruct(record, starts=args.starts, seed=args.seed,
                                 objective=args.objective)
    save_state(res.rho, args.out)
    target = _target(args.target)
    report = {
        "objective_value": res.objective_value,
        "iterations_used": res.iterations_used,
        "converged": res.converged,
        "fitted_flux": res.fitted_flux,
        "measures": tomography.state_measures(res.rho, target),
    }
    write_json(report, _sidecar(args.out))


def _sidecar(path) -> str:
    p = Path(path)
    return str(p.with_name(p.stem + ".report.json"))


def cmd_tomo_iterate(args):
    state = load_state(args.inputs)
    target = _target(args.target)
    rows = tomography.iterative_tomography(state, args.iterations, args.flux, args.seed,
                                           target=target, starts=args.starts)
    _emit(rows, args)


def cmd_tomo_errors(args):
    labels = tuple(args.labels.split(",")) if args.labels else ()
    record = tomography.MeasurementRecord.from_csv(args.inputs, labels)
    target = _target(args.target)
    mc = tomography.monte_carlo_errors(record, args.resamples, args.seed, target=target,
                                       workers=args.workers)
    result = {"estimate": mc.estimate, "std": mc.std, "resamples": args.resamples}
    if args.out:
        write_json(result, args.out)
    else:
        json.dump(_clean(result), sys.stdout, indent=1, sort_keys=True)
        sys.stdout.write("\n")


def _haar_outputs(samples, seed, workers, out, curve_out=None, report_out=None):
    scatter = sampling.scatter_study(samples, seed, workers)
    scatter.to_csv(out)
    curve = sampling.ideal_curve(200)
    if curve_out:
        curve.to_csv(curve_out)
    boundary = sampling.boundary_check(scatter)
    avg = sampling.average_tangle_study(samples, seed, scatter=scatter)
    report = {
        "samples": samples,
        "seed": seed,
        "boundary_violations": boundary.violations,
        "max_excess_over_curve": boundary.max_excess,
        "violating_indices": boundary.violating_indices[:100],
        "clamped_beyond_w": boundary.clamped,
        "max_tau2_min": boundary.max_tau2_min,
        "w_class_fraction": boundary.w_class_fraction,
        "average_tangle_exceeding": avg.exceeding,
        "average_tangle_counterexamples": avg.counterexamples,
        "reference_points": sampling.reference_points(),
    }
    if report_out:
        write_json(report, report_out)
    return report


def cmd_haar(args):
    report = _haar_outputs(args.samples, args.seed, args.workers, args.out,
                           args.curve, args.report)
    summary = {k: report[k] for k in ("boundary_violations", "max_tau2_min", "w_class_fraction")}
    json.dump(_clean(summary), sys.stdout, sort_keys=True)
    sys.stdout.write("\n")


def _reproduce_fig2(args, out: Path):
    theta = math.pi / 4
    state = optics.run_circuit(theta).conditional_state
    w = measures.reference_state("W")
    save_state(state, out / "w_state.json")
    rows = tomography.iterative_tomography(state, args.iterations, args.flux, args.seed,
                                           target=w, starts=args.starts)
    write_rows(rows, out / "fig2c_trajectory.csv")
    # final estimate from all iterations, with error bars
    settings = tomography.build_projector_set(3)
    record = None
    for m in range(1, args.iterations + 1):
        rec = tomography.simulate_counts(state, settings, args.flux, args.seed, iteration=m)
        record = rec if record is None else record + rec
    record.to_csv(out / "fig2_counts.csv")
    res = tomography.reconstruct(record, starts=args.starts, seed=args.seed)
    save_state(res.rho, out / "fig2_reconstruction.json")
    ef = partial_trace(res.rho, ["e", "f"])
    mc = tomography.monte_carlo_errors(record, args.resamples, args.seed, target=w,
                                       workers=args.workers)
    report = {
        "three_qubit": measures.robustness_profile(res.rho, w).to_dict(),
        "reduced_ef": {"tau2": measures.tangle(ef), "s_linear": linear_entropy(ef)},
        "error_bars": mc.std,
        "converged": res.converged,
    }
    write_json(report, out / "fig2_report.json")


def _reproduce_fig3(args, out: Path):
    rows, plane = [], []
    for deg in (15.0, 21.0, 28.0, 45.0):
        theta = math.radians(deg)
        state = optics.run_circuit(theta).conditional_state
        ideal = measures.ideal_state(theta)
        rep = measures.robustness_profile(state, ideal)
        rows.append({"theta_deg": deg, **rep.scalar_measures()})
        for k, traced in enumerate(state.labels):
            kept = [l for l in state.labels if l != traced]
            ideal_red = partial_trace(ideal, kept)
            res = tomography.direct_reduced_tomography(state, traced, args.flux,
                                                       seed=args.seed + 1000 * k + int(deg),
                                                       starts=args.starts)
            plane.append({
                "theta_deg": deg,
                "traced": traced,
                "tau2": measures.tangle(res.rho),
                "s_linear": linear_entropy(res.rho),
                "fidelity_vs_ideal": fidelity(res.rho, ideal_red),
                "ideal_tau2": measures.tangle(ideal_red),
                "ideal_s_linear": linear_entropy(ideal_red),
            })
    write_rows(rows, out / "fig3a_reports.csv")
    write_rows(plane, out / "fig3b_plane.csv")
    cs = np.linspace(0, 1, 101)
    write_rows([{"c": c, "tau2": measures.tangle(measures.mems(c)),
                 "s_linear": linear_entropy(measures.mems(c))} for c in cs],
               out / "fig3b_mems.csv")
    write_rows([{"p": p, "tau2": measures.tangle(measures.werner(p)),
                 "s_linear": linear_entropy(measures.werner(p))} for p in cs],
               out / "fig3b_werner.csv")
    trend = []
    for theta in np.linspace(0, math.pi / 4, 91):
        red = partial_trace(measures.ideal_state(theta), ["e", "f"])
        trend.append({"theta_deg": math.degrees(theta), "tau2": measures.tangle(red),
                      "s_linear": linear_entropy(red)})
    write_rows(trend, out / "fig3b_ideal_trend.csv")


def _reproduce_fig4(args, out: Path):
    _haar_outputs(args.samples, args.seed, args.workers, out / "scatter.csv",
                  out / "curve.csv", out / "fig4_report.json")


def cmd_reproduce(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    {2: _reproduce_fig2, 3: _reproduce_fig3, 4: _reproduce_fig4}[args.fig](args, out)
    print(json.dumps({"fig": args.fig, "out_dir": str(out)}))


# ---------------------------------------------------------------------------
# parser


def _positive(kind):
    def check(text):
        val = kind(text)
        if val <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return val
    return check


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default values for any flag")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="master random seed")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="table output format")

    p = argparse.ArgumentParser(prog="entangle-lab", description=__doc__.split("\n")[0],
                                allow_abbrev=False)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, **kw):
        sp = sub.add_parser(name, parents=[common], allow_abbrev=False, **kw)
        sp.set_defaults(func=func)
        return sp

    sp = add("circuit", cmd_circuit, help="simulate the circuit at one wave-plate angle")
    sp.add_argument("--theta", type=float, required=True, help="wave-plate angle in degrees, 0..45")
    sp.add_argument("--out", help="write the conditional state (JSON state file)")
    sp.add_argument("--report", help="write the full report (JSON)")

    sp = add("scan", cmd_scan, help="tabulate circuit outputs over an angle grid")
    sp.add_argument("--from", dest="start", type=float, default=0.0, help="first angle in degrees")
    sp.add_argument("--to", dest="stop", type=float, default=45.0, help="last angle in degrees")
    sp.add_argument("--steps", type=int, default=46, help="number of grid points")
    sp.add_argument("--out", help="output file (stdout if omitted)")

    sp = add("measures", cmd_measures, help="entanglement report for state files")
    sp.add_argument("--in", dest="inputs", nargs="+", required=True, help="JSON state file(s)")
    sp.add_argument("--target", help="state file or reference name (W, GHZ, ...) for fidelity")
    sp.add_argument("--out", help="output file (stdout if omitted)")

    tomo = sub.add_parser("tomo", help="simulated tomography")
    tsub = tomo.add_subparsers(dest="tomo_command", required=True)

    def tadd(name, func, **kw):
        sp = tsub.add_parser(name, parents=[common], allow_abbrev=False, **kw)
        sp.set_defaults(func=func)
        return sp

    sp = tadd("simulate", cmd_tomo_simulate, help="Poisson counts for a state file")
    sp.add_argument("--in", dest="inputs", required=True, help="JSON state file")
    sp.add_argument("--flux", type=_positive(float), default=tomography.DEFAULT_FLUX,
                    help="expected counts per setting for unit probability")
    sp.add_argument("--iteration", type=int, default=0, help="iteration tag (also keys the seed)")
    sp.add_argument("--out", required=True, help="counts CSV")

    sp = tadd("reconstruct", cmd_tomo_reconstruct, help="fit a density matrix to a counts file")
    sp.add_argument("--in", dest="inputs", required=True, help="counts CSV")
    sp.add_argument("--out", required=True, help="JSON state file; a .report.json sidecar is also written")
    sp.add_argument("--starts", type=_positive(int), default=5, help="optimizer starts")
    sp.add_argument("--objective", choices=("lsq", "likelihood"), default="lsq",
                    help="weighted least squares or Poisson likelihood")
    sp.add_argument("--labels", help="comma-separated qubit labels")
    sp.add_argument("--target", help="state file or reference name for fidelity")

    sp = tadd("iterate", cmd_tomo_iterate, help="iterative tomography trajectory")
    sp.add_argument("--in", dest="inputs", required=True, help="JSON state file (true state)")
    sp.add_argument("--iterations", type=_positive(int), default=10, help="number of acquisition slices")
    sp.add_argument("--flux", type=_positive(float), default=tomography.DEFAULT_FLUX,
                    help="flux per iteration")
    sp.add_argument("--starts", type=_positive(int), default=5, help="optimizer starts")
    sp.add_argument("--target", help="state file or reference name; defaults to the true state")
    sp.add_argument("--out", help="output file (stdout if omitted)")

    sp = tadd("errors", cmd_tomo_errors, help="Monte-Carlo error bars for a counts file")
    sp.add_argument("--in", dest="inputs", required=True, help="counts CSV")
    sp.add_argument("--resamples", type=int, default=100, help="Poisson resamples (at least 2)")
    sp.add_argument("--labels", help="comma-separated qubit labels")
    sp.add_argument("--target", help="state file or reference name for fidelity")
    sp.add_argument("--workers", type=_positive(int), default=1, help="worker processes")
    sp.add_argument("--out", help="output JSON (stdout if omitted)")

    sp = add("haar", cmd_haar, help="Haar-random scatter of N3 vs weakest-link tangle")
    sp.add_argument("--samples", type=_positive(int), default=300_000, help="number of random states")
    sp.add_argument("--workers", type=_positive(int), default=1, help="worker processes")
    sp.add_argument("--out", required=True, help="scatter CSV")
    sp.add_argument("--curve", help="ideal-curve CSV")
    sp.add_argument("--report", help="boundary report JSON")

    sp = add("reproduce", cmd_reproduce, help="regenerate the data behind a figure")
    sp.add_argument("--fig", type=int, choices=(2, 3, 4), required=True, help="figure to regenerate")
    sp.add_argument("--out-dir", default="results", help="output directory")
    sp.add_argument("--iterations", type=_positive(int), default=10, help="fig 2: tomography iterations")
    sp.add_argument("--flux", type=_positive(float), default=tomography.DEFAULT_FLUX,
                    help="figs 2-3: counts per setting per iteration")
    sp.add_argument("--resamples", type=int, default=20, help="fig 2: Monte-Carlo resamples")
    sp.add_argument("--starts", type=_positive(int), default=5, help="figs 2-3: optimizer starts")
    sp.add_argument("--samples", type=_positive(int), default=300_000, help="fig 4: Haar samples")
    sp.add_argument("--workers", type=_positive(int), default=1, help="worker processes")
    return p


def _subparser_for(parser, argv):
    """The innermost subparser selected by ``argv`` (used to validate config keys)."""
    sp = parser
    for tok in argv:
        if tok.startswith("-"):
            continue
        acts = [a for a in sp._actions if isinstance(a, argparse._SubParsersAction)]
        if acts and tok in acts[0].choices:
            sp = acts[0].choices[tok]
    return sp


def parse_args(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        with open(known.config) as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise CliError("config file must hold a JSON object")
        sp = _subparser_for(parser, argv)
        dests = {a.dest for a in sp._actions}
        unknown = sorted(set(config) - dests)
        if unknown:
            raise CliError(f"unknown config keys {unknown}")
        sp.set_defaults(**config)
        # required flags satisfied by the config file
        for a in sp._actions:
            if a.dest in config:
                a.required = False
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        args.func(args)
    except (CliError, StateError, tomography.TomographyError, optics.OpticsError, ValueError,
            OSError, json.JSONDecodeError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        sys.stderr.write(json.dumps(record) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
