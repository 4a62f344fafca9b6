"""Command-line interface: ``ako simulate | infer | benchmark | version``.

Exit codes: 0 success, 2 usage or input error, 3 I/O error, 4 pipeline failure.
"""

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .aggregation import AkoConfig, run_ako
from .core_numerics import toeplitz_covariance
from .errors import AkoError, ConfigError, DegenerateFeatureError, DomainError, PipelineError, ShapeError
from .inference import knockoff_run, vanilla_select
from .knockoffs import estimate_gaussian, gaussian_model
from .simulation import (
    SimConfig,
    b_gamma_sweep,
    benchmark_grid,
    generate_dataset,
    spearman_diagnostic,
    stability_experiment,
    summarize,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PIPELINE = 4

SCHEMA = 1


class UsageError(Exception):
    pass


def fmt(v):
    return format(float(v), ".17g")


def read_matrix(path):
    """Read a numeric CSV; a first row with no numeric cell is a header."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise UsageError(f"{path}: file is empty")

    def numeric(cell):
        try:
            float(cell)
            return True
        except ValueError:
            return False

    first = 0
    if not any(numeric(c) for c in rows[0]):
        first = 1
    body = rows[first:]
    if not body:
        raise UsageError(f"{path}: no data rows")
    width = len(body[0])
    out = np.empty((len(body), width))
    for i, row in enumerate(body):
        line = i + first + 1
        if len(row) != width:
            raise UsageError(f"{path}: row {line} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise UsageError(f"{path}: row {line}, column {j + 1}: non-numeric value {cell!r}") from None
    if np.isnan(out).any():
        i, j = np.argwhere(np.isnan(out))[0]
        raise UsageError(f"{path}: row {i + first + 1}, column {j + 1}: NaN")
    return out


def write_matrix(path, a):
    a = np.atleast_2d(a)
    with open(path, "w", newline="") as fh:
        for row in a:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def parse_oracle_cov(spec, p):
    kind, _, value = spec.partition(":")
    if kind != "toeplitz" or not value:
        raise UsageError(f"--oracle-cov must look like toeplitz:<rho>, got {spec!r}")
    try:
        rho = float(value)
    except ValueError:
        raise UsageError(f"--oracle-cov: bad rho {value!r}") from None
    return gaussian_model(np.zeros(p), toeplitz_covariance(rho, p))


def float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


def int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def emit(text, out):
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w") as fh:
        fh.write(text)


def cmd_infer(args):
    x = read_matrix(args.x)
    y = read_matrix(args.y)
    if y.shape[1] != 1:
        raise UsageError(f"{args.y}: expected a single column, got {y.shape[1]}")
    if y.shape[0] != x.shape[0]:
        raise UsageError(f"row count mismatch: {args.x} has {x.shape[0]} rows, {args.y} has {y.shape[0]}")
    y = y[:, 0]
    config = AkoConfig(
        alpha=args.fdr,
        n_bootstraps=args.bootstraps,
        gamma=args.gamma,
        fdr_method=args.fdr_method,
        offset_c=args.offset,
        master_seed=args.seed,
        lambda_policy=args.lam,
        kappa_correct=args.kappa_correct,
    )
    p = x.shape[1]
    model = parse_oracle_cov(args.oracle_cov, p) if args.oracle_cov else estimate_gaussian(x)

    start = time.perf_counter()
    report = {
        "schema": SCHEMA,
        "version": __version__,
        "method": args.method,
        "alpha": args.fdr,
        "config": {
            "bootstraps": config.n_bootstraps,
            "gamma": config.gamma,
            "offset_c": config.offset_c,
            "fdr_method": config.fdr_method,
            "kappa_correct": config.kappa_correct,
            "seed": config.master_seed,
            "lambda_policy": args.lam,
            "oracle_cov": args.oracle_cov,
        },
        "n": int(x.shape[0]),
        "p": int(p),
    }
    if args.method == "ko":
        run = knockoff_run(x, y, model, config.master_seed, 1, config.lambda_policy, config.offset_c)
        selected = vanilla_select(run.w, config.effective_alpha)
        report["w"] = [float(v) for v in run.w]
        report["lambda"] = run.lam
        report["converged"] = run.converged
    else:
        result = run_ako(x, y, model, config, threads=args.threads)
        selected = result.selected
        report["pi_bar"] = [float(v) for v in result.pi_bar]
        report["k_hat"] = result.k_hat
        report["bootstraps"] = [
            {"b": r.bootstrap_id, "lambda": r.lam, "converged": r.converged} for r in result.per_bootstrap
        ]
    report["selected"] = sorted(int(j) + 1 for j in selected)
    report["runtime_ms"] = int(round(1000 * (time.perf_counter() - start)))
    emit(json.dumps(report, indent=2) + "\n", args.out)
    return EXIT_OK


def sim_config(args):
    return SimConfig(n=args.n, p=args.p, rho=args.rho, sparsity=args.sparsity, snr=args.snr,
                     master_seed=args.seed)


def cmd_simulate(args):
    config = sim_config(args)
    data = generate_dataset(config)
    out = args.out
    try:
        os.makedirs(out, exist_ok=True)
        write_matrix(os.path.join(out, "X.csv"), data.x)
        write_matrix(os.path.join(out, "y.csv"), data.y[:, None])
        write_matrix(os.path.join(out, "beta.csv"), data.beta_star[:, None])
        meta = {
            "schema": SCHEMA,
            "version": __version__,
            "config": {"n": config.n, "p": config.p, "rho": config.rho, "sparsity": config.sparsity,
                       "snr": config.snr, "seed": config.master_seed},
            "sigma_noise": data.sigma_noise,
            "support": [int(j) + 1 for j in data.support],
        }
        with open(os.path.join(out, "meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        print(f"error: cannot write to {out}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


RECORD_FIELDS = ("experiment", "cell", "method", "run", "fdp", "power")


def records_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_FIELDS)
    for r in records:
        writer.writerow([r.experiment, r.cell, r.method, r.run, fmt(r.fdp), fmt(r.power)])
    return buf.getvalue()


def cmd_benchmark(args):
    if args.runs is not None and args.runs < 1:
        raise UsageError("--runs must be at least 1")
    config = sim_config(args)
    ako = AkoConfig(alpha=args.fdr, n_bootstraps=args.bootstraps, gamma=args.gamma, fdr_method=args.fdr_method,
                    offset_c=args.offset, lambda_policy=args.lam, kappa_correct=args.kappa_correct)
    oracle = not args.estimated
    runs = args.runs or 30
    summary = {"schema": SCHEMA, "version": __version__, "experiment": args.experiment, "seed": args.seed,
               "threads_independent": True}
    if args.experiment == "stability":
        if args.ako_runs < 1 or args.ko_runs < 1:
            raise UsageError("--ako-runs and --ko-runs must be at least 1")
        records = stability_experiment(config, args.ako_runs, args.ko_runs, ako, threads=args.threads,
                                       oracle=oracle)
        summary["cells"] = summarize(records)
    elif args.experiment == "grid":
        values = args.values or {"rho": [0.2, 0.5, 0.7], "sparsity": [0.04, 0.06, 0.1], "snr": [1.0, 3.0, 5.0]}[args.vary]
        records, summary["cells"] = benchmark_grid(config, args.vary, values, runs, args.fdr, args.methods, ako,
                                                   threads=args.threads, oracle=oracle)
    elif args.experiment == "bgamma":
        records, summary["cells"] = b_gamma_sweep(config, args.b_list, args.gamma_list, runs, args.fdr,
                                                  args.fdr_method, ako, threads=args.threads, oracle=oracle)
    else:
        pairs = spearman_diagnostic(config, args.observations, replace(ako, master_seed=args.seed),
                                    max_pairs=args.max_pairs, threads=args.threads, oracle=oracle)
        rhos = np.array([pr.rho for pr in pairs])
        summary["pairs"] = len(pairs)
        summary["median_abs_rho"] = float(np.median(np.abs(rhos))) if len(pairs) else None
        summary["fraction_pvalue_below_0.05"] = float(np.mean([pr.pvalue < 0.05 for pr in pairs])) if pairs else None
        text = "feature_a,feature_b,spearman_rho,pvalue\n" + "".join(
            f"{pr.pair[0] + 1},{pr.pair[1] + 1},{fmt(pr.rho)},{fmt(pr.pvalue)}\n" for pr in pairs
        )
        return write_outputs(args.out, "spearman.csv", text, summary)
    return write_outputs(args.out, "records.csv", records_csv(records), summary)


def write_outputs(out, name, text, summary):
    try:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, name), "w") as fh:
            fh.write(text)
        with open(os.path.join(out, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        print(f"error: cannot write to {out}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_version(args):
    print(__version__)
    return EXIT_OK


def add_shared(p):
    p.add_argument("--seed", type=u64, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=1)


def add_sim(p):
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--p", type=int, default=1000)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--sparsity", type=float, default=0.06)
    p.add_argument("--snr", type=float, default=3.0)


def add_ako(p, fdr=0.1):
    p.add_argument("--fdr", type=float, default=fdr, help="target FDR level alpha")
    p.add_argument("--bootstraps", type=int, default=25)
    p.add_argument("--gamma", type=float, default=0.3)
    p.add_argument("--offset", type=float, default=1.0)
    p.add_argument("--fdr-method", choices=("bh", "by"), default="bh")
    p.add_argument("--kappa-correct", action="store_true")
    p.add_argument("--lambda", dest="lam", default="cv", help="cv or fixed:<value>")


def build_parser():
    parser = argparse.ArgumentParser(prog="ako", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer", help="run KO or AKO on CSV data")
    add_shared(p)
    add_ako(p)
    p.add_argument("--method", choices=("ako", "ko"), default="ako")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--oracle-cov", default=None, help="toeplitz:<rho> to use the true design law")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("simulate", help="write a synthetic Toeplitz dataset")
    add_shared(p)
    add_sim(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="run a simulation experiment")
    add_shared(p)
    add_sim(p)
    add_ako(p)
    p.add_argument("--experiment", required=True)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--ako-runs", type=int, default=100)
    p.add_argument("--ko-runs", type=int, default=2500)
    p.add_argument("--vary", choices=("rho", "sparsity", "snr"), default="rho")
    p.add_argument("--values", type=float_list, default=None)
    p.add_argument("--methods", type=lambda s: s.split(","), default=["ako", "ko"])
    p.add_argument("--b-list", type=int_list, default=[1, 5, 10, 25, 50])
    p.add_argument("--gamma-list", type=float_list, default=[0.1, 0.3, 0.5, 1.0])
    p.add_argument("--observations", type=int, default=100)
    p.add_argument("--max-pairs", type=int, default=1000)
    p.add_argument("--estimated", action="store_true", help="estimate the design law instead of using the truth")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("version", help="print the package version")
    p.set_defaults(func=cmd_version)
    return parser


EXPERIMENTS = ("stability", "grid", "bgamma", "spearman")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "out", None) is None and args.command in ("simulate", "benchmark"):
        args.out = "."
    if args.command == "benchmark" and args.experiment not in EXPERIMENTS:
        print(f"error: unknown experiment {args.experiment!r}; choose from {', '.join(EXPERIMENTS)}",
              file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError, DomainError, ShapeError, DegenerateFeatureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AkoError as exc:
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
