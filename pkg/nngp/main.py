"""
NNGP command-line interface.

Commands:
    kernel        Gram matrix and prior mean of a spec on a point set
    fit           Condition the GP on training data and save a model file
    predict       Posterior means and variances from a saved model
    verify-width  Compare finite-width ensembles with the induced kernel
    barron        1/N variance law of two-layer Barron networks
    expect        Evaluate one Gaussian expectation (debugging aid)

Usage:
    python -m nngp kernel --spec S --points P.csv --out K.csv

Exit codes: 0 ok, 2 parse error, 3 numeric failure, 4 model integrity, 5 FAIL verdict.
"""

import argparse
from pathlib import Path
import sys
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError
from scipy import linalg

from . import __version__
from .config import ACCEPTANCE_BANDS, EXIT_CODES, get_settings
from .data.dataset import load_dataset, load_points
from .exceptions import ConfigError, NNGPError, NonPSDError
from .kernel.activation import parse_activation
from .kernel.gauss_expect import (
    BivariateGaussianMoments,
    ExpectationMethod,
    GaussianMoments,
    expect_phi,
    expect_phi_pair,
)
from .kernel.recursion import gram
from .kernel.spec import load_kernel_spec
from .regression.gp import fit, model_log_marginal_likelihood, predict
from .regression.optimizer import OptimizerConfig, optimize_hyperparams
from .regression.persistence import load_model, save_model
from .simulation.barron import barron_variance_scaling, estimate_hpi_norm_sq, load_barron_spec
from .simulation.ensemble import width_convergence_report
from .utils.files import format_float, sibling_path, write_csv
from .utils.logger import RunLogger, get_cli_logger, set_level
from .utils.rng import check_seed

logger = get_cli_logger()


def _int_list(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of integers, got '{text}'")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of numbers, got '{text}'")


def _seed(text: str) -> int:
    try:
        return check_seed(int(text))
    except (ValueError, ConfigError):
        raise argparse.ArgumentTypeError(f"seed must be a 64-bit unsigned integer, got '{text}'")


def _emit(line: str) -> None:
    """Summary lines go to stdout; everything else goes through the logger."""
    print(line, flush=True)


def _journal(command: str, seed: Optional[int], verdict: str, summary: Dict) -> None:
    log_dir = get_settings().run_log_dir
    if log_dir:
        RunLogger(log_dir).log_run(command, seed, verdict, summary)


# --------------------------------------------------------------------------- commands


def cmd_kernel(args: argparse.Namespace) -> int:
    spec = load_kernel_spec(args.spec)
    points = load_points(args.points, spec.d_in)
    logger.info(f"Evaluating {spec.depth}-layer {spec.activation} kernel on {points.shape[0]} points")

    h, K = gram(spec, points)
    eig = linalg.eigvalsh(K)
    scale = max(1.0, float(np.max(np.abs(np.diag(K)))))
    if eig[0] < -ACCEPTANCE_BANDS["psd_tol"] * scale:
        raise NonPSDError("Gram matrix is not positive semidefinite", float(eig[0]))

    out = write_csv(pd.DataFrame(K, columns=[f"k{j}" for j in range(K.shape[0])]), args.out)
    mean_out = write_csv(pd.DataFrame({"h": h}), args.mean_out or sibling_path(args.out, "_mean"))
    logger.info(f"Wrote {out} and {mean_out}")

    _emit(f"points: {points.shape[0]}")
    _emit(f"min_eigenvalue: {format_float(eig[0])}")
    _emit(f"max_eigenvalue: {format_float(eig[-1])}")
    _journal("kernel", spec.seed, "ok", {"points": points.shape[0], "min_eig": f"{eig[0]:.3g}"})
    return EXIT_CODES["ok"]


def cmd_fit(args: argparse.Namespace) -> int:
    spec = load_kernel_spec(args.spec)
    data = load_dataset(args.train, spec.d_in)
    noise = args.noise
    summary: Dict = {"points": data.n_samples}

    if args.optimize:
        free = tuple(args.free.split(",")) if args.free is not None else spec.free
        settings = get_settings()
        search = OptimizerConfig(
            free=tuple(f.strip() for f in free if f.strip()),
            noise_var=noise,
            restarts=args.restarts or settings.optimizer_restarts,
            max_evals=args.max_evals or settings.optimizer_max_evals,
            seed=args.seed,
        )
        result = optimize_hyperparams(spec, data, search)
        trace_path = args.trace_out or sibling_path(Path(args.out_model).with_suffix(".csv"), "_trace")
        trace_out = write_csv(result.trace_frame(), trace_path)
        _emit(f"initial_lml: {format_float(result.initial_lml)}")
        _emit(f"trace: {trace_out}")
        spec, noise = result.spec, result.noise_var
        summary["evaluations"] = len(result.trace)

    model = fit(spec, data, noise)
    lml = model_log_marginal_likelihood(model)
    path = save_model(model, args.out_model)

    _emit(f"lml: {format_float(lml)}")
    _emit(f"noise_var: {format_float(model.noise_var)}")
    _emit(f"jitter_used: {format_float(model.jitter_used)}")
    _emit(f"model: {path}")
    summary["lml"] = f"{lml:.6g}"
    _journal("fit", args.seed, "ok", summary)
    return EXIT_CODES["ok"]


def cmd_predict(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    points = load_points(args.points, model.spec.d_in)
    means, variances = predict(model, points)

    df = pd.DataFrame(points, columns=[f"x{i}" for i in range(points.shape[1])])
    if means.ndim == 1:
        df["post_mean"] = means
    else:
        for k in range(means.shape[1]):
            df[f"post_mean{k}"] = means[:, k]
    df["post_var"] = variances
    out = write_csv(df, args.out)

    _emit(f"points: {points.shape[0]}")
    _emit(f"output: {out}")
    _journal("predict", None, "ok", {"points": points.shape[0]})
    return EXIT_CODES["ok"]


def cmd_verify_width(args: argparse.Namespace) -> int:
    spec = load_kernel_spec(args.spec)
    probes = load_points(args.probes, spec.d_in)
    report = width_convergence_report(spec, args.widths, probes, args.ensembles, args.seed,
                                      d_out=args.d_out, n_jobs=args.jobs)
    write_csv(report.table, args.out)
    write_csv(report.summary, sibling_path(args.out, "_summary"))

    verdict = report.evaluate()
    for notice in verdict.notices:
        logger.warning(notice)
    _emit(report.format_table())
    for line in verdict.checks:
        _emit(line)
    _emit(verdict.label)
    last = report.summary.iloc[-1]
    _journal("verify-width", args.seed, verdict.label,
             {"widths": ",".join(map(str, args.widths)), "max_abs_z": f"{last['max_abs_z']:.3g}"})
    return EXIT_CODES["ok"] if verdict.passed else EXIT_CODES["fail"]


def cmd_barron(args: argparse.Namespace) -> int:
    bs = load_barron_spec(args.spec)
    xs = load_points(args.x, bs.d_in)
    n_list = args.n_list or [bs.n, 2 * bs.n]

    per_n, ratios = [], []
    passed = True
    for i, x in enumerate(xs):
        report = barron_variance_scaling(bs, x, n_list, args.reps, args.seed, n_boot=args.boot, n_jobs=args.jobs)
        verdict = report.evaluate()
        for notice in verdict.notices:
            logger.warning(f"x{i}: {notice}")
        for line in verdict.checks:
            _emit(f"x{i}: {line}")
        passed &= verdict.passed
        per_n.append(report.per_n.assign(x_index=i))
        ratios.append(report.ratios.assign(x_index=i))

    hpi, hpi_err = estimate_hpi_norm_sq(bs, args.hpi_samples, args.seed)
    table = pd.concat(per_n, ignore_index=True)
    table = table[["x_index"] + [c for c in table.columns if c != "x_index"]]
    ratio_table = pd.concat(ratios, ignore_index=True)
    ratio_table = ratio_table[["x_index"] + [c for c in ratio_table.columns if c != "x_index"]]
    write_csv(table, args.out)
    write_csv(ratio_table.astype({"in_band": int}), sibling_path(args.out, "_ratios"))
    write_csv(pd.DataFrame({"hpi_norm_sq": [hpi], "stderr": [hpi_err]}), sibling_path(args.out, "_hpi"))

    label = "PASS" if passed else "FAIL"
    _emit(f"hpi_norm_sq: {format_float(hpi)} +- {format_float(hpi_err)}")
    _emit(label)
    _journal("barron", args.seed, label, {"n_list": ",".join(map(str, n_list)), "hpi_norm_sq": f"{hpi:.6g}"})
    return EXIT_CODES["ok"] if passed else EXIT_CODES["fail"]


def cmd_expect(args: argparse.Namespace) -> int:
    kind = parse_activation(args.kind)
    method = ExpectationMethod.parse(args.method)
    m = args.moments
    if len(m) == 2:
        value = expect_phi(GaussianMoments(m[0], m[1]), kind, method)
    elif len(m) == 5:
        value = expect_phi_pair(BivariateGaussianMoments(*m), kind, method)
    else:
        raise ConfigError(f"expected 2 (mean,var) or 5 (m1,m2,v1,v2,c) moments, got {len(m)}", key="moments")
    _emit(format_float(value))
    return EXIT_CODES["ok"]


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "kernel": cmd_kernel,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "verify-width": cmd_verify_width,
    "barron": cmd_barron,
    "expect": cmd_expect,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--log-file", default=None, help="Also log to this file")

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=_seed, default=0, help="Master seed (64-bit unsigned)")

    parser = argparse.ArgumentParser(prog="nngp", description="Neural-network-induced Gaussian processes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", parents=[common], help="Gram matrix and prior mean")
    p.add_argument("--spec", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mean-out", default=None)

    p = sub.add_parser("fit", parents=[common, seeded], help="Fit a GP model")
    p.add_argument("--spec", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--noise", type=float, default=1e-2)
    p.add_argument("--optimize", action="store_true")
    p.add_argument("--free", default=None, help="Comma list of tuned parameters (overrides the optimize key)")
    p.add_argument("--max-evals", type=int, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--trace-out", default=None)
    p.add_argument("--out-model", required=True)

    p = sub.add_parser("predict", parents=[common], help="Predict from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify-width", parents=[common, seeded], help="Finite-width convergence check")
    p.add_argument("--spec", required=True)
    p.add_argument("--widths", type=_int_list, required=True)
    p.add_argument("--ensembles", type=int, default=4000)
    p.add_argument("--probes", required=True)
    p.add_argument("--d-out", type=int, default=2)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("barron", parents=[common, seeded], help="Barron network variance scaling")
    p.add_argument("--spec", required=True)
    p.add_argument("--x", required=True, help="CSV of evaluation points")
    p.add_argument("--n-list", type=_int_list, default=None)
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--hpi-samples", type=int, default=None)
    p.add_argument("--boot", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("expect", parents=[common], help="One Gaussian expectation")
    p.add_argument("--kind", required=True)
    p.add_argument("--moments", type=_float_list, required=True, help="mean,var or m1,m2,v1,v2,c")
    p.add_argument("--method", default="quad:64")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    set_level(args.log_level or settings.log_level, args.log_file or settings.log_file)

    try:
        return COMMANDS[args.command](args)
    except NNGPError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"ConfigError: {e}")
        return EXIT_CODES["parse"]


if __name__ == "__main__":
    sys.exit(main())
