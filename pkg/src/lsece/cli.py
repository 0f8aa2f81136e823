"""Command-line front end.

Exit codes: 0 success, 2 input or parse error, 3 precondition violation,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .binned import BinningScheme, reliability, top_class_reduce
from .core import (DEFAULT_CLAMP_TOL, LINKS, DegenerateWeightsError, MulticlassPredictionSet,
                   NoiseKernel, PreconditionError, ValidationError, check_seed, get_link)
from .exact import (DEFAULT_WITNESS_TOL, discontinuity_witnesses, empirical_exact_ece,
                    population_ece)
from .experiments import (COMPARISON_HEADER, COMPARISON_BINS, REFERENCE_N, SWEEP_HEADER,
                          SweepRow, run_comparison, run_consistency, run_sigma_limit,
                          run_sweep, summarize_sweeps)
from .smooth import DEFAULT_CHUNK_SIZE, DEFAULT_MC_SAMPLES, ls_ece, smooth_reliability
from .synthetic import DEFAULT_ALPHA, DISTRIBUTIONS, synthetic_predictions

log = logging.getLogger("lsece")

EXIT_INPUT, EXIT_PRECONDITION, EXIT_NUMERIC = 2, 3, 4


def _int_list(text):
    """Parse ``1,10,20`` or ``1-100`` (inclusive) or ``10-100:10``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            rng, _, step = part.partition(":")
            lo, hi = rng.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1, int(step or 1)))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _float_list(text):
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _seed(text):
    try:
        return check_seed(int(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common_parser(suppress):
    p = argparse.ArgumentParser(add_help=False)
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=_seed, default=d(0), help="64-bit seed (default 0)")
    p.add_argument("--clamp-tol", type=float, default=d(DEFAULT_CLAMP_TOL),
                   help="probability clamp before taking logits (default 1e-7)")
    p.add_argument("--link", choices=sorted(LINKS), default=d("sigmoid"))
    p.add_argument("--quiet", action="store_true", default=d(False))
    return p


def _add_input(p, required=True):
    p.add_argument("--input", required=required, help="prediction file (CSV or JSONL)")
    p.add_argument("--format", choices=["csv", "jsonl"], help="override format detection")


def _add_smoothing(p, sigma_default=0.1):
    p.add_argument("--kernel", choices=["gaussian", "uniform"], default="gaussian")
    p.add_argument("--samples", type=int, default=DEFAULT_MC_SAMPLES,
                   help="Monte Carlo samples (default 10000)")
    if sigma_default is not None:
        p.add_argument("--sigma", type=float, default=sigma_default)


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser(suppress=True)
    parser = argparse.ArgumentParser(prog="lsece", parents=[_common_parser(False)],
                                     description="Calibration metrics: binned, exact and "
                                                 "logit-smoothed ECE.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ece", parents=[common], help="binned ECE")
    _add_input(p)
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--scheme", choices=["uniform", "equal-mass"], default="uniform")
    p.add_argument("--output", choices=["json", "csv"], default="json")
    p.add_argument("--out")

    p = sub.add_parser("reliability", parents=[common], help="reliability-diagram table")
    _add_input(p)
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--scheme", choices=["uniform", "equal-mass"], default="uniform")
    p.add_argument("--output", choices=["json", "csv"], default="csv")
    p.add_argument("--out")

    p = sub.add_parser("ls-ece", parents=[common], help="logit-smoothed ECE")
    _add_input(p)
    _add_smoothing(p)
    p.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK_SIZE)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--curve-out", help="write the smooth reliability curve CSV here")
    p.add_argument("--grid-size", type=int, default=200)
    p.add_argument("--output", choices=["json", "csv"], default="json")
    p.add_argument("--out")

    p = sub.add_parser("top-class", parents=[common],
                       help="reduce a multiclass file to binary top-class form")
    _add_input(p)
    p.add_argument("--output", choices=["csv", "jsonl"], default="csv")
    p.add_argument("--out")

    p = sub.add_parser("exact", parents=[common],
                       help="exact ECE of a population spec or of a sample")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="CSV with header mass,true_conditional,predictor")
    src.add_argument("--input", help="prediction file; uses its empirical measure")
    p.add_argument("--format", choices=["csv", "jsonl"])
    p.add_argument("--witness-tol", type=float, default=DEFAULT_WITNESS_TOL)
    p.add_argument("--out")

    p = sub.add_parser("synth", parents=[common], help="write a synthetic prediction file")
    p.add_argument("--dist", choices=DISTRIBUTIONS, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--delta", type=float,
                   help="score the counterexample with its delta-perturbed predictor")
    p.add_argument("--variant", choices=["printed", "quarter"], default="printed")
    p.add_argument("--output", choices=["csv", "jsonl"], default="csv")
    p.add_argument("--out")

    p = sub.add_parser("sweep", parents=[common], help="binned vs LS-ECE over bin counts")
    _add_input(p)
    _add_smoothing(p, sigma_default=None)
    p.add_argument("--bins", type=_int_list, default=list(range(1, 101)),
                   help="e.g. 1-100 or 1,10,20 (default 1-100)")
    p.add_argument("--sigma-list", type=_float_list,
                   help="bandwidths per bin count instead of 1/bins")
    p.add_argument("--model", help="model id (default: input file stem)")
    p.add_argument("--smece", type=float, help="externally computed smECE for this model")
    p.add_argument("--out")

    p = sub.add_parser("compare", parents=[common],
                       help="mean |binned - LS-ECE| across model files")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--inputs", nargs="+", help="one prediction file per model")
    src.add_argument("--from-sweep", nargs="+", help="summarise existing sweep CSVs")
    p.add_argument("--format", choices=["csv", "jsonl"])
    _add_smoothing(p, sigma_default=None)
    p.add_argument("--bins", type=_int_list, default=list(COMPARISON_BINS),
                   help="default 1,10,20,...,100")
    p.add_argument("--sigma-list", type=_float_list)
    p.add_argument("--smece", help="CSV with header model,smece")
    p.add_argument("--sweep-out", help="also write the per-model sweep CSV")
    p.add_argument("--out")

    p = sub.add_parser("consistency", parents=[common],
                       help="LS-ECE error against sample size")
    p.add_argument("--dist", choices=DISTRIBUTIONS, default="two-point")
    p.add_argument("--n-list", type=_int_list, default=[100, 400, 1600, 6400])
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--reference-n", type=int, default=REFERENCE_N)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    _add_smoothing(p)
    p.add_argument("--out")

    p = sub.add_parser("sigma-limit", parents=[common],
                       help="LS-ECE as sigma shrinks, against plug-in references")
    p.add_argument("--dist", choices=DISTRIBUTIONS, default="counterexample")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--sigma-list", type=_float_list, default=[0.2, 0.1, 0.05, 0.02])
    _add_smoothing(p, sigma_default=None)
    p.add_argument("--out")
    return parser


def _emit(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load(args, link):
    return io.load_binary(args.input, args.format, link, args.clamp_tol)


def _scheme(args):
    return BinningScheme(args.scheme, args.bins)


def cmd_ece(args, link):
    data = _load(args, link)
    diagram = reliability(data, link, _scheme(args))
    value = diagram.ece()
    if args.output == "csv":
        text = io.table_csv(["bins", "scheme", "n", "binned_ece"],
                            [[args.bins, diagram.scheme.kind, data.n, io.fmt_float(value)]])
    else:
        text = io.dumps_json({"binned_ece": value, "bins": args.bins,
                              "scheme": diagram.scheme.kind, "n": data.n,
                              "link": link.name})
    _emit(text, args.out)


def cmd_reliability(args, link):
    data = _load(args, link)
    diagram = reliability(data, link, _scheme(args))
    if args.output == "csv":
        rows = [[io.fmt_float(lo), io.fmt_float(hi), c, io.fmt_float(mc), io.fmt_float(ml)]
                for lo, hi, c, mc, ml in diagram.rows()]
        text = io.table_csv(["bin_lo", "bin_hi", "count", "mean_conf", "mean_label"], rows)
    else:
        text = io.dumps_json({
            "n": data.n, "scheme": diagram.scheme.kind, "binned_ece": diagram.ece(),
            "bins": [{"bin_lo": lo, "bin_hi": hi, "count": c, "mean_conf": mc,
                      "mean_label": ml} for lo, hi, c, mc, ml in diagram.rows()]})
    _emit(text, args.out)


def cmd_ls_ece(args, link):
    data = _load(args, link)
    kernel = NoiseKernel(args.sigma, args.kernel)
    est = ls_ece(data, link, kernel, args.samples, args.seed,
                 chunk_size=args.chunk_size, workers=args.workers)
    if args.curve_out:
        curve = smooth_reliability(data, link, kernel, args.grid_size)
        rows = [[io.fmt_float(v) if v == v else "" for v in row] for row in curve.rows()]
        Path(args.curve_out).write_text(
            io.table_csv(["t", "conf", "cond_mean", "density"], rows), encoding="utf-8")
    record = {"ls_ece": est.value, "sigma": est.sigma, "kernel": est.kernel,
              "samples": est.samples_used, "seed": est.seed,
              "chunk_size": est.chunk_size, "link": est.link, "n": data.n}
    if args.output == "csv":
        text = io.table_csv(list(record), [[io.fmt_float(v) if isinstance(v, float) else v
                                            for v in record.values()]])
    else:
        text = io.dumps_json(record)
    _emit(text, args.out)


def cmd_top_class(args, link):
    data = io.read_predictions(args.input, args.format)
    if not isinstance(data, MulticlassPredictionSet):
        raise ValidationError(f"{args.input}: expected a multiclass prediction file")
    reduced = top_class_reduce(data, link, args.clamp_tol)
    _emit(io.binary_csv(reduced) if args.output == "csv" else io.binary_jsonl(reduced),
          args.out)


def cmd_exact(args, link):
    if args.spec:
        spec = io.read_spec(args.spec)
        record = {"population_ece": population_ece(spec), "n": spec.n,
                  "witnesses": discontinuity_witnesses(spec, args.witness_tol)}
    else:
        data = _load(args, link)
        record = {"empirical_exact_ece": empirical_exact_ece(data, link), "n": data.n}
    _emit(io.dumps_json(record), args.out)


def cmd_synth(args, link):
    kwargs = {"alpha": args.alpha} if args.dist == "two-point" else {
        "delta": args.delta, "link": link, "tol": args.clamp_tol, "variant": args.variant}
    if args.dist == "two-point" and args.delta is not None:
        raise PreconditionError("--delta applies only to the counterexample distribution")
    data = synthetic_predictions(args.dist, args.n, args.seed, **kwargs)
    _emit(io.binary_csv(data) if args.output == "csv" else io.binary_jsonl(data), args.out)


def _sweep_text(rows):
    return io.table_csv(SWEEP_HEADER, [r.csv_row() for r in rows])


def _summary_text(summary):
    return io.table_csv(COMPARISON_HEADER, [r.csv_row() for r in summary.rows])


def cmd_sweep(args, link):
    data = _load(args, link)
    model = args.model or Path(args.input).stem
    rows = run_sweep(data, args.bins, args.kernel, args.samples, args.seed, link=link,
                     model=model, sigma_list=args.sigma_list, smece=args.smece)
    _emit(_sweep_text(rows), args.out)


def _opt_float(text):
    return float(text) if text != "" else None


def read_sweep_rows(path):
    header, body = io.read_table(path)
    if header != SWEEP_HEADER:
        raise io.ParseError(path, 1, f"expected header {','.join(SWEEP_HEADER)!r}")
    rows = []
    for r in body:
        b, ls = _opt_float(r[3]), _opt_float(r[4])
        rows.append(SweepRow(r[0], int(r[1]), float(r[2]), b, ls, _opt_float(r[5]),
                             None if b is not None and ls is not None else "missing"))
    return rows


def cmd_compare(args, link):
    if args.from_sweep:
        rows = [row for path in args.from_sweep for row in read_sweep_rows(path)]
        summary = summarize_sweeps(rows)
    else:
        stems = [Path(p).stem for p in args.inputs]
        if len(set(stems)) != len(stems):
            raise PreconditionError("input files must have distinct names (model ids)")
        inputs = [(s, io.load_binary(p, args.format, link, args.clamp_tol))
                  for s, p in zip(stems, args.inputs)]
        smece = io.read_smece(args.smece) if args.smece else None
        summary = run_comparison(inputs, args.bins, args.kernel, args.samples, args.seed,
                                 link=link, external_smece=smece, sigma_list=args.sigma_list)
    if args.sweep_out:
        Path(args.sweep_out).write_text(_sweep_text(summary.sweeps), encoding="utf-8")
    _emit(_summary_text(summary), args.out)


def cmd_consistency(args, link):
    kwargs = {"alpha": args.alpha} if args.dist == "two-point" else {"tol": args.clamp_tol}
    table = run_consistency(args.dist, args.n_list, args.sigma, args.kernel, args.repeats,
                            args.samples, args.seed, reference_n=args.reference_n,
                            link=link, **kwargs)
    rows = [[r.n, io.fmt_float(r.mean_error), io.fmt_float(r.std_error)] for r in table.rows]
    text = io.table_csv(["n", "mean_error", "std_error"], rows)
    log.info("reference %.6g at n=%d; log-log slope %.3f", table.reference,
             table.reference_n, table.slope())
    _emit(text, args.out)


def cmd_sigma_limit(args, link):
    kwargs = {"tol": args.clamp_tol} if args.dist == "counterexample" else {}
    rows = run_sigma_limit(args.dist, args.n, args.sigma_list, args.kernel, args.samples,
                           args.seed, link=link, **kwargs)
    text = io.table_csv(
        ["sigma", "ls_ece", "exact_grouped", "binned_reference", "bins"],
        [[io.fmt_float(r.sigma), io.fmt_float(r.ls_ece), io.fmt_float(r.exact_grouped),
          io.fmt_float(r.binned_reference), r.bins] for r in rows])
    _emit(text, args.out)


COMMANDS = {
    "ece": cmd_ece, "reliability": cmd_reliability, "ls-ece": cmd_ls_ece,
    "top-class": cmd_top_class, "exact": cmd_exact, "synth": cmd_synth,
    "sweep": cmd_sweep, "compare": cmd_compare, "consistency": cmd_consistency,
    "sigma-limit": cmd_sigma_limit,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s")
    try:
        COMMANDS[args.command](args, get_link(args.link))
    except (ValidationError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except DegenerateWeightsError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (PreconditionError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_PRECONDITION
    except (ArithmeticError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
