"""Command-line interface.

Subcommands::

    estimate    run a diagonal estimate and write index,estimate,exact,abs_err CSV
    plan        print the sample count for an (eps, delta) target, plus constants
    bounds      print the bound constants applicable to a matrix / estimator
    experiment  run one of the standard experiments (1-4) and write its CSV

Exit codes: 0 success, 1 usage error, 2 data error, 3 infeasible plan.
The environment variable ``DIAGMC_OUTPUT_DIR`` sets the default output
directory for generated CSV files.
"""

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from .estimators import estimate_diagonal, estimate_diagonal_normalized
from .harness import (
    parse_estimator_spec,
    run_experiment,
    standard_experiment_configs,
    write_experiment_csv,
)
from .matrixmarket import MatrixMarketError, load_matrix_market
from .operators import (
    TEST_MATRIX_KINDS,
    UnsupportedOperationError,
    make_test_matrix,
)
from .probes import gaussian, rademacher, sparse_rademacher

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INFEASIBLE = 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to exit code 1
        raise UsageError(message)


def _parse_test_matrix(spec: str):
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError("test-matrix spec must be kind:n:theta, e.g. tridiag:100:0.5")
    kind, n_text, theta_text = parts
    if kind not in TEST_MATRIX_KINDS:
        raise UsageError(
            f"unknown test-matrix kind {kind!r}; choose from {sorted(TEST_MATRIX_KINDS)}"
        )
    try:
        n = int(n_text)
        theta = float(theta_text)
    except ValueError:
        raise UsageError(f"cannot parse test-matrix spec {spec!r}") from None
    try:
        return make_test_matrix(kind, n, theta)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def _load_operator(args):
    if getattr(args, "test_matrix", None):
        return _parse_test_matrix(args.test_matrix)
    if getattr(args, "matrix_file", None):
        try:
            return load_matrix_market(args.matrix_file)
        except MatrixMarketError as exc:
            raise DataError(f"cannot parse {args.matrix_file}: {exc}") from None
        except OSError as exc:
            raise DataError(f"cannot read {args.matrix_file}: {exc}") from None
    raise UsageError("provide --test-matrix or --matrix-file")


def _default_out(name: str) -> Path:
    base = os.environ.get("DIAGMC_OUTPUT_DIR", ".")
    return Path(base) / name


def _cmd_estimate(args) -> int:
    op = _load_operator(args)
    spec = parse_estimator_spec(args.dist)
    if args.samples < 1:
        raise UsageError("--samples must be at least 1")
    try:
        if spec.method == "normalized_gaussian":
            est = estimate_diagonal_normalized(op, args.samples, args.seed)
        elif spec.method == "sparse":
            est = estimate_diagonal(op, sparse_rademacher(spec.s), args.samples, args.seed)
        elif spec.method == "gaussian":
            est = estimate_diagonal(op, gaussian(), args.samples, args.seed)
        elif spec.method == "rademacher":
            est = estimate_diagonal(op, rademacher(), args.samples, args.seed)
        else:
            raise UsageError(f"estimator {spec.label} is not available here")
    except ValueError as exc:
        raise DataError(str(exc)) from None
    values = est.value
    try:
        exact = op.exact_diag()
    except UnsupportedOperationError:
        exact = None
    out = Path(args.out) if args.out else _default_out("diagonal.csv")
    try:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write("index,estimate,exact,abs_err\n")
            for i, v in enumerate(values):
                if exact is None:
                    fh.write(f"{i},{v:.17g},,\n")
                else:
                    fh.write(
                        f"{i},{v:.17g},{exact[i]:.17g},{abs(v - exact[i]):.17g}\n"
                    )
    except OSError as exc:
        raise DataError(f"cannot write {out}: {exc}") from None
    print(f"wrote {len(values)} diagonal estimates to {out}")
    return EXIT_OK


def _print_normwise(nc) -> None:
    print(f"K1 = {nc.k1:.17g}")
    print(f"K2 = {nc.k2:.17g}")
    print(f"d = {nc.d:.17g}")
    print(f"Delta1 = {nc.delta1:.17g}")
    print(f"Delta2 = {nc.delta2:.17g}")
    print(f"norm_DA = {nc.norm_da:.17g}")


def _print_component(cc) -> None:
    print(f"a_ii = {cc.a_ii:.17g}")
    print(f"col_norm = {cc.col_norm:.17g}")
    print(f"off2sq = {cc.off2sq:.17g}")
    print(f"L1 = {cc.l1:.17g}")
    print(f"L2 = {cc.l2:.17g}")
    print(f"Delta1i = {cc.delta1i:.17g}")
    print(f"Delta2i = {cc.delta2i:.17g}")
    print(f"Psi = {'undefined (diagonal row)' if cc.psi is None else format(cc.psi, '.17g')}")


def _dense_or_refuse(op):
    try:
        return op.to_dense()
    except UnsupportedOperationError as exc:
        raise DataError(
            f"bound constants need explicit entries: {exc}"
        ) from None


def _cmd_plan(args) -> int:
    op = _load_operator(args)
    dense = _dense_or_refuse(op)
    name = args.dist.strip().lower().replace("-", "_")
    try:
        if args.component is not None:
            if name not in ("rademacher", "gaussian", "normalized_gaussian"):
                raise UsageError(
                    "componentwise planning supports rademacher, gaussian or "
                    "normalized-gaussian"
                )
            cc = bounds_mod.component_constants(dense, args.component)
            n_planned = bounds_mod.plan_samples_component(cc, name, args.eps, args.delta)
            print(f"N = {n_planned}")
            _print_component(cc)
            return EXIT_OK
        if name == "gaussian_normwise":
            plan = bounds_mod.plan_samples_gaussian_normwise(dense, args.eps, args.delta)
            print(f"required (pre-window) = {plan.required:.17g}")
            print(f"window = [{plan.window_low:.17g}, {plan.window_high}]")
            if not plan.feasible:
                print(f"infeasible: {plan.violation}")
                return EXIT_INFEASIBLE
            print(f"N = {plan.n_samples}")
            return EXIT_OK
        if name == "rademacher":
            s = 1.0
        elif name.startswith("sparse"):
            s = parse_estimator_spec(name).s
        else:
            raise UsageError(
                "normwise planning supports rademacher, sparse:S or gaussian-normwise"
            )
        nc = bounds_mod.normwise_constants(dense, s=s)
        n_planned = bounds_mod.plan_samples_normwise(nc, args.eps, args.delta)
        print(f"N = {n_planned}")
        _print_normwise(nc)
        return EXIT_OK
    except (ValueError, IndexError) as exc:
        raise DataError(str(exc)) from None


def _cmd_bounds(args) -> int:
    op = _load_operator(args)
    dense = _dense_or_refuse(op)
    name = args.dist.strip().lower().replace("-", "_")
    try:
        if args.component is not None:
            cc = bounds_mod.component_constants(dense, args.component)
            _print_component(cc)
            return EXIT_OK
        if name == "gaussian_normwise":
            norm_inf = float(np.max(np.sum(np.abs(dense), axis=1)))
            diag_inf = float(np.max(np.abs(np.diag(dense))))
            n = dense.shape[0]
            print(f"norm_ratio = {norm_inf / diag_inf:.17g}")
            print(f"window = [{8.0 * math.e * math.log(n):.17g}, {n}]")
            return EXIT_OK
        s = 1.0
        if name.startswith("sparse"):
            s = parse_estimator_spec(name).s
        nc = bounds_mod.normwise_constants(dense, s=s)
        if nc.is_diagonal:
            print("matrix is diagonal: a single Rademacher sample is exact")
        _print_normwise(nc)
        return EXIT_OK
    except (ValueError, IndexError) as exc:
        raise DataError(str(exc)) from None


def _cmd_experiment(args) -> int:
    grid = None
    if args.n_grid:
        try:
            grid = tuple(int(tok) for tok in args.n_grid.split(","))
        except ValueError:
            raise UsageError("--n-grid must be a comma-separated integer list") from None
    thetas = None
    if args.thetas:
        try:
            thetas = tuple(float(tok) for tok in args.thetas.split(","))
        except ValueError:
            raise UsageError("--thetas must be a comma-separated float list") from None
    try:
        configs = standard_experiment_configs(
            args.id, seed=args.seed, n=args.n, replicates=args.replicates,
            n_grid=grid, thetas=thetas, delta=args.delta,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out) if args.out else _default_out(f"experiment_{args.id}.csv")
    records, summaries = [], []
    for config in configs:
        r, s = run_experiment(config)
        records.extend(r)
        summaries.extend(s)
    try:
        write_experiment_csv(out, records, summaries)
    except OSError as exc:
        raise DataError(f"cannot write {out}: {exc}") from None
    print(f"wrote {len(records)} replicate rows and {len(summaries)} aggregate rows to {out}")
    return EXIT_OK


def _add_matrix_args(parser) -> None:
    parser.add_argument("--test-matrix", help="kind:n:theta (kinds: rank1, decay, tridiag)")
    parser.add_argument("--matrix-file", help="Matrix Market file (.mtx)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="diagmc", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="estimate a matrix diagonal")
    _add_matrix_args(p_est)
    p_est.add_argument("--dist", default="rademacher",
                       help="rademacher | sparse:S | gaussian | normalized-gaussian")
    p_est.add_argument("--samples", type=int, required=True)
    p_est.add_argument("--seed", type=int, default=0)
    p_est.add_argument("--out", help="output CSV path")
    p_est.set_defaults(func=_cmd_estimate)

    p_plan = sub.add_parser("plan", help="sample count for an (eps, delta) target")
    _add_matrix_args(p_plan)
    p_plan.add_argument("--dist", default="rademacher",
                        help="rademacher | sparse:S | gaussian-normwise, or a "
                             "componentwise method with --component")
    p_plan.add_argument("--eps", type=float, required=True)
    p_plan.add_argument("--delta", type=float, required=True)
    p_plan.add_argument("--component", type=int,
                        help="0-based index for componentwise planning")
    p_plan.set_defaults(func=_cmd_plan)

    p_bounds = sub.add_parser("bounds", help="print bound constants")
    _add_matrix_args(p_bounds)
    p_bounds.add_argument("--dist", default="rademacher")
    p_bounds.add_argument("--component", type=int)
    p_bounds.set_defaults(func=_cmd_bounds)

    p_exp = sub.add_parser("experiment", help="run a standard experiment")
    p_exp.add_argument("--id", type=int, required=True, choices=(1, 2, 3, 4))
    p_exp.add_argument("--out", help="output CSV path")
    p_exp.add_argument("--seed", type=int, default=0)
    p_exp.add_argument("--n", type=int, default=100)
    p_exp.add_argument("--replicates", type=int)
    p_exp.add_argument("--n-grid", help="comma-separated sample sizes")
    p_exp.add_argument("--thetas", help="comma-separated theta values")
    p_exp.add_argument("--delta", type=float)
    p_exp.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
