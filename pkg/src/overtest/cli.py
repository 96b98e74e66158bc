"""Command line entry point: ``overtest <study> [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .kernels import make_kernel
from .problems import MANUFACTURED, ProblemKind, make_problem
from .study import (NODE_RULES, StudyResult, kernel_family, run_convergence_study, run_mlpg_norm_check,
                    run_noise_study, run_nodal_study, run_stability_study)


def _floats(s: str) -> list:
    return [float(x) for x in s.split(",") if x.strip()]


def _ints(s: str) -> list:
    return [int(x) for x in s.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", default="poisson-strong", choices=[k.value for k in ProblemKind])
    common.add_argument("--domain", default="square", choices=["square", "disk", "interval"])
    common.add_argument("--solution", default=None, choices=sorted(MANUFACTURED),
                        help="manufactured solution (default depends on the domain)")
    common.add_argument("--kernel", default="matern", help="matern, gaussian or multiquadric")
    common.add_argument("--smoothness", type=float, default=4.5, help="Sobolev order m of the Matern kernel")
    common.add_argument("--shape", type=float, default=1.0, help="kernel length scale")
    common.add_argument("--degrees", type=_ints, default=[2, 3, 5, 10, 20],
                        help="comma-separated space dimensions M for polynomial studies")
    common.add_argument("--fill-distances", type=_floats, default=[0.25, 0.177, 0.125, 0.088])
    common.add_argument("--target", type=float, default=2.0, help="stability factor for greedy overtesting")
    common.add_argument("--pool-density", type=int, default=2000)
    common.add_argument("--reference-density", type=int, default=4000)
    common.add_argument("--solver", choices=["chebyshev", "lsq"], default="chebyshev")
    common.add_argument("--ca", type=float, default=1.5, help="cap on the achieved residual ratio C_A")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="CSV path (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="overtest", description="Overtesting studies for well-posed linear recovery.")
    sub = p.add_subparsers(dest="command", required=True)
    st = sub.add_parser("stability-study", parents=[common], help="C(M, N) of polynomial point evaluation")
    st.add_argument("--rules", default=",".join(NODE_RULES))
    st.add_argument("--oversampling", type=float, default=1.0)
    sub.add_parser("converge", parents=[common], help="convergence over a kernel trial space family")
    nz = sub.add_parser("noise", parents=[common], help="noisy-data error bound check")
    nz.add_argument("--eps", type=_floats, default=[0.0, 1e-4, 1e-2])
    nz.add_argument("--repeats", type=int, default=20)
    nz.add_argument("--noise-shape", choices=["uniform", "signed"], default="uniform")
    sub.add_parser("nodal", parents=[common], help="nodal-basis error against test residual")
    ml = sub.add_parser("mlpg-norm-check", parents=[common], help="ball averages against the sup norm")
    ml.add_argument("--fields", type=int, default=20)
    ml.add_argument("--radii", type=_floats, default=[0.2, 0.1, 0.05, 0.025])
    return p


def _problem(args):
    return make_problem(args.problem, args.domain, args.solution, pool_density=args.pool_density,
                        reference_density=args.reference_density)


def _spaces(args, problem):
    dim = problem.domain.dim
    kernel = make_kernel(args.kernel, args.smoothness, args.shape, dim)
    return kernel_family(problem, kernel, args.fill_distances)


def run(args) -> StudyResult:
    if args.command == "stability-study":
        return run_stability_study(args.degrees, [r for r in args.rules.split(",") if r],
                                   args.oversampling, args.reference_density, args.seed)
    if args.command == "mlpg-norm-check":
        return run_mlpg_norm_check(args.fields, args.radii, args.seed)
    problem = _problem(args)
    spaces = _spaces(args, problem)
    if args.command == "converge":
        params = {"kernel": args.kernel, "smoothness": args.smoothness, "shape": args.shape,
                  "fill_distances": args.fill_distances}
        return run_convergence_study(problem, spaces, args.target, args.solver, args.ca, args.seed,
                                     params=params)
    if args.command == "noise":
        return run_noise_study(problem, spaces[0], args.eps, args.ca, args.repeats, args.seed,
                               args.noise_shape, args.target)
    if args.command == "nodal":
        return run_nodal_study(problem, spaces, args.target, args.ca, args.seed)
    raise ValueError(args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = run(args)
    except (ValueError, NotImplementedError) as exc:
        print(f"overtest: error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        result.to_csv(args.out)
        if result.fitted_rate is not None:
            print(f"fitted rate {result.fitted_rate:.4f}")
    else:
        result.write_csv(sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
