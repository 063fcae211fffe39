"""``miest`` command line.

Exit codes: 0 success, 1 selftest failure, 2 usage, 3 data, 4 numerical,
5 weight solver.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from importlib import resources
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .bench import (BenchPlan, PlanError, TooManyDropped, emit_results,
                    load_plan, plan_oracle, run_bench)
from .core import (BandwidthSet, Case, Dataset, DegenerateDataset, FunctionalKind,
                   InfeasibleError, KernelSpec, MIEstError, MissingContinuousY, MissingParts,
                   NoFeasibleRange, NonPositiveArgument, OutOfBox, Profile,
                   RejectionStall, SingletonClass, ToleranceNotMet, TooFewSamples,
                   UnsafeKernelError, UnsupportedDimension, renyi, shannon)
from .ensemble import (BasisCase, BasisFamily, EnsembleConfig, EtaPolicy, Program,
                       ensemble_estimate_cont, ensemble_estimate_mixed,
                       select_parameters, solve_weights)
from .inference import confidence_interval
from .io import read_dataset, write_dataset
from .kde import class_indices
from .plugin import (PluginConfig, plugin_mi_cont, plugin_mi_mixed,
                     plugin_mi_mixed_general)
from .synthetic import (OracleMethod, TruncGaussMixtureSpec, case1_spec,
                        case2_spec, oracle_mi, sample)

EXIT_OK, EXIT_SELFTEST, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL, EXIT_SOLVER = 0, 1, 2, 3, 4, 5

_DATA_ERRORS = (DegenerateDataset, MissingParts, MissingContinuousY, SingletonClass,
                OutOfBox, NoFeasibleRange, TooFewSamples, RejectionStall,
                UnsupportedDimension, OSError)
_NUMERICAL_ERRORS = (NonPositiveArgument, FloatingPointError, TooManyDropped)
_SOLVER_ERRORS = (InfeasibleError, ToleranceNotMet)


class UsageError(Exception):
    pass


# Argument groups
# -----------------------------------

def _add_functional(p):
    g = p.add_argument_group("functional")
    g.add_argument("--functional", choices=["shannon", "renyi"], default="shannon",
                   help="integrand g: shannon (log ratio) or renyi (ratio**alpha)")
    g.add_argument("--alpha", type=float,
                   help="Renyi order alpha (required with --functional renyi)")
    g.add_argument("--strict", action="store_true",
                   help="fail on zero density estimates instead of flooring them")


def _add_ensemble(p, data_driven=True):
    g = p.add_argument_group("ensemble")
    g.add_argument("--odin", choices=["1", "2", "none"], default="1",
                   help="bias basis: 1 gives rate h = l N^(-1/(2d)) with terms l^i, "
                        "2 gives h = l N^(-1/(d+delta)) with the extended family; "
                        "none drops every bias term (weights only)")
    g.add_argument("--delta", type=float, default=1.0,
                   help="smoothness offset delta > 0 of the ODin2 rate (default 1)")
    g.add_argument("--L-count", dest="L_count", type=int, default=40,
                   help="number |L| of bandwidth parameters l (default 40)")
    g.add_argument("--l-min", dest="l_min", type=float,
                   help="smallest parameter l" + (" (default: data-driven)" if data_driven
                                                  else " (default 1.2)"))
    g.add_argument("--l-max", dest="l_max", type=float,
                   help="largest parameter l" + (" (default: data-driven)" if data_driven
                                                 else " (default 3.0)"))
    prog = g.add_mutually_exclusive_group()
    prog.add_argument("--exact", dest="program", action="store_const", const="exact",
                      help="exact program: min ||w|| with every bias term cancelled")
    prog.add_argument("--relaxed", dest="program", action="store_const", const="relaxed",
                      help="relaxed program: min epsilon, the largest scaled bias "
                           "residual, subject to ||w||^2 <= eta (default)")
    g.add_argument("--eta", default="auto",
                   help="norm cap eta on ||w||^2: 'auto' couples eta = epsilon, "
                        "a number fixes it (must be >= 1/|L|)")
    p.set_defaults(program="relaxed")


def _add_kernel(p):
    g = p.add_argument_group("kernel")
    g.add_argument("--kernel", choices=[m.value for m in Profile], default="uniform",
                   help="per-axis kernel profile (default uniform on [-1/2, 1/2])")
    g.add_argument("--support-radius", type=float,
                   help="half-width of the kernel support in bandwidth units")
    g.add_argument("--unsafe-kernel", action="store_true",
                   help="allow the unbounded gaussian kernel (comparison runs only)")


def _add_common(p, formats=("json", "csv")):
    p.add_argument("--out", help="write the primary result to this path")
    p.add_argument("--format", choices=list(formats), default=formats[0],
                   help=f"format of --out (default {formats[0]})")
    p.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")
    p.add_argument("--threads", type=int,
                   help="worker count (default: $MIEST_THREADS, else all cores); "
                        "results do not depend on it")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="miest", description="Nonparametric mutual "
                                 "information estimation with weighted KDE ensembles.")
    ap.add_argument("--version", action="version", version=f"miest {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("estimate", help="estimate MI from a dataset file",
                       description="Estimate a generalized MI from a CSV or binary "
                                   "column file (columns x0.., yc0.., y, xd).")
    p.add_argument("input", help="dataset path")
    p.add_argument("--case", choices=["auto"] + [c.value for c in Case], default="auto",
                   help="estimation case; auto infers it from the columns")
    p.add_argument("--estimator", choices=["ensemble", "plugin"], default="ensemble",
                   help="weighted ensemble (default) or a single plug-in estimate")
    p.add_argument("--l", dest="l_plugin", type=float, default=2.1,
                   help="plug-in parameter l, bandwidth h = l N^(-rate) (default 2.1)")
    _add_functional(p)
    _add_ensemble(p)
    _add_kernel(p)
    g = p.add_argument_group("confidence interval")
    g.add_argument("--ci", type=float, metavar="LEVEL",
                   help="attach a normal confidence interval at LEVEL in (0, 1)")
    g.add_argument("--ci-method", choices=["bootstrap", "subsample"], default="bootstrap",
                   help="standard-error method (default stratified bootstrap)")
    g.add_argument("--B", type=int, default=200, help="number of resamples (>= 50)")
    _add_common(p)

    p = sub.add_parser("weights", help="solve the offline weight program",
                       description="Solve for ensemble weights; no data needed.")
    p.add_argument("--N", type=int, required=True, help="sample size N")
    p.add_argument("--dx", type=int, required=True, help="dimension d_X")
    p.add_argument("--dy", type=int, help="dimension d_Y (continuous-Y case)")
    p.add_argument("--case", choices=["mixed", "cont"], default="mixed",
                   help="mixed (discrete Y) or cont (continuous Y) basis")
    p.add_argument("--L", dest="L_values",
                   help="explicit comma-separated parameters l (overrides the range)")
    _add_ensemble(p, data_driven=False)
    _add_common(p, formats=("json",))

    p = sub.add_parser("oracle", help="ground-truth MI of a synthetic mixture")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=["case1", "case2"], default="case1")
    src.add_argument("--spec", help="mixture spec JSON file")
    p.add_argument("--d", type=int, default=4, help="dimension of the case1 preset")
    p.add_argument("--method", choices=[m.value for m in OracleMethod], default="mc")
    p.add_argument("--M", type=int, default=10 ** 7, help="Monte-Carlo evaluations")
    _add_functional(p)
    _add_common(p, formats=("json",))

    p = sub.add_parser("sample", help="draw a synthetic dataset")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=["case1", "case2"], default="case1")
    src.add_argument("--spec", help="mixture spec JSON file")
    p.add_argument("--d", type=int, default=4, help="dimension of the case1 preset")
    p.add_argument("--N", type=int, required=True, help="sample size")
    p.add_argument("--out", required=True, help="dataset path")
    p.add_argument("--format", choices=["csv", "bin"], default="csv")
    p.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")

    p = sub.add_parser("bench", help="run a Monte-Carlo MSE plan",
                       description="Run a bench plan (a JSON file or a shipped plan "
                                   "name such as fig1_d4) and write its results.")
    p.add_argument("plan", help="plan path or shipped plan name")
    p.add_argument("--out", default="bench",
                   help="output path prefix; one file per format (default 'bench')")
    p.add_argument("--format", default="csv,json,svg",
                   help="comma-separated subset of csv,json,svg")
    p.add_argument("--trials", type=int, help="override the plan's trial count")
    p.add_argument("--seed", type=int, help="override the plan's seed")
    p.add_argument("--record-runtime", action="store_true",
                   help="record wall-clock runtimes (makes outputs non-reproducible)")
    p.add_argument("--threads", type=int,
                   help="worker count (default: $MIEST_THREADS, else all cores)")

    sub.add_parser("selftest", help="run fast internal consistency checks")
    return ap


# Helpers
# -----------------------------------

def _threads(arg: Optional[int]) -> int:
    if arg is not None:
        if arg < 1:
            raise UsageError("--threads must be >= 1")
        return arg
    env = os.environ.get("MIEST_THREADS")
    if env:
        try:
            k = int(env)
        except ValueError:
            raise UsageError("MIEST_THREADS must be an integer") from None
        if k < 1:
            raise UsageError("MIEST_THREADS must be >= 1")
        return k
    return os.cpu_count() or 1


def _functional(args):
    if args.functional == "renyi":
        if args.alpha is None:
            raise UsageError("--functional renyi requires --alpha")
        if not args.alpha > 0:
            raise UsageError("--alpha must be positive")
        return renyi(args.alpha, strict=args.strict)
    if args.alpha is not None:
        raise UsageError("--alpha only applies to --functional renyi")
    return shannon(strict=args.strict)


def _kernel(args) -> KernelSpec:
    prof = Profile(args.kernel)
    if prof is Profile.GAUSSIAN and not args.unsafe_kernel:
        raise UsageError("the gaussian kernel needs --unsafe-kernel")
    if prof is Profile.GAUSSIAN and args.support_radius is not None:
        raise UsageError("--support-radius does not apply to the gaussian kernel")
    return KernelSpec(prof, args.support_radius, unsafe=args.unsafe_kernel)


def _eta(args):
    if args.eta == "auto":
        return EtaPolicy.EQUAL_EPSILON, None
    try:
        eta = float(args.eta)
    except ValueError:
        raise UsageError("--eta must be 'auto' or a number") from None
    if not eta > 0:
        raise UsageError("--eta must be positive")
    if args.program == "exact":
        raise UsageError("--eta only applies to the relaxed program")
    return EtaPolicy.FIXED, eta


def _check_ensemble_flags(args):
    if not args.delta > 0:
        raise UsageError("--delta must be positive")
    if args.L_count < 1:
        raise UsageError("--L-count must be >= 1")
    if (args.l_min is None) != (args.l_max is None):
        raise UsageError("give both --l-min and --l-max, or neither")
    if args.l_min is not None and not 0 < args.l_min < args.l_max:
        raise UsageError("need 0 < --l-min < --l-max")


def _basis(args, case: str, dx: int, dy: Optional[int]) -> BasisFamily:
    cont = case == "cont"
    if args.odin == "none":
        return BasisFamily(BasisCase.CONT_ODIN1 if cont else BasisCase.MIXED_ODIN1,
                           dx, dy, terms=())
    if cont:
        if args.odin == "1":
            return BasisFamily.cont_odin1(dx, dy)
        return BasisFamily.cont_odin2(dx, dy, args.delta)
    if args.odin == "1":
        return BasisFamily.mixed_odin1(dx)
    return BasisFamily.mixed_odin2(dx, args.delta)


def _detect_case(data: Dataset, override: str) -> Case:
    if override != "auto":
        return Case(override)
    if data.x_disc is not None or (data.y_disc is not None and data.y_cont is not None):
        return Case.MIXED_GENERAL
    if data.x_cont is None:
        return Case.MIXED_GENERAL
    if data.y_disc is not None:
        return Case.CONT_DISC
    return Case.CONT_CONT


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def _write_text(path, text):
    Path(path).write_text(text)


# Commands
# -----------------------------------

def _make_estimator(args, data: Dataset, case: Case, functional, kernel):
    """Returns ``(callable Dataset -> EstimateReport, description dict)``."""
    if case is Case.CONT_DISC:
        basis = _basis(args, "mixed", data.d_x, None)
    elif case is Case.CONT_CONT:
        if data.y_cont is None:
            raise MissingContinuousY("cont_cont case needs yc* columns")
        basis = _basis(args, "cont", data.d_x, data.d_y)
    else:
        basis = None
    if args.estimator == "plugin" or case is Case.MIXED_GENERAL:
        if args.estimator == "ensemble":
            raise UsageError("the ensemble is not defined for mixed_general; "
                             "use --estimator plugin")
        return _plugin_estimator(args, case, functional, kernel, basis), {"kind": "plugin"}

    if args.l_min is not None:
        L = BandwidthSet.linspace(args.l_min, args.l_max, args.L_count)
    else:
        L = select_parameters(data, kernel, args.L_count, basis)
    policy, eta = _eta(args)
    cfg = EnsembleConfig(L, basis, program=args.program, eta_policy=policy, eta=eta)
    pcfg = PluginConfig(functional, kernel_x=kernel)
    fn = ensemble_estimate_mixed if case is Case.CONT_DISC else ensemble_estimate_cont
    desc = {"kind": "ensemble", "l_min": L.params[0], "l_max": L.params[-1],
            "L_count": len(L), "basis": basis.to_dict()}
    return (lambda d: fn(d, cfg, pcfg)), desc


def _plugin_estimator(args, case, functional, kernel, basis):
    l = args.l_plugin
    if not l > 0:
        raise UsageError("--l must be positive")

    def run(data: Dataset):
        if case is Case.CONT_DISC:
            a = basis.rate
            given = {lab: l * len(idx) ** -a
                     for lab, idx in class_indices(data.y_disc).items()}
            return plugin_mi_mixed(data, PluginConfig(functional, kernel_x=kernel,
                                                      h_x=l * data.n ** -a,
                                                      h_x_given_y=given))
        if case is Case.CONT_CONT:
            h = l * data.n ** -basis.rate
            return plugin_mi_cont(data, PluginConfig(functional, kernel_x=kernel,
                                                     h_x=h, h_y=h))
        a = 1.0 / (2 * max(1, data.d_x + data.d_y))
        h = l * data.n ** -a
        return plugin_mi_mixed_general(data, PluginConfig(functional, kernel_x=kernel,
                                                          h_x=h, h_y=h))
    return run


def cmd_estimate(args) -> int:
    functional = _functional(args)
    kernel = _kernel(args)
    _check_ensemble_flags(args)
    _eta(args)
    if args.ci is not None and not 0 < args.ci < 1:
        raise UsageError("--ci LEVEL must lie in (0, 1)")
    if args.B < 50:
        raise UsageError("--B must be at least 50")
    threads = _threads(args.threads)
    data = read_dataset(args.input)
    case = _detect_case(data, args.case)
    est, desc = _make_estimator(args, data, case, functional, kernel)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        rep = est(data)
        ci = None
        if args.ci is not None:
            ci = confidence_interval(data, est, args.ci, args.ci_method, args.B,
                                     args.seed, n_jobs=threads)
    if not np.isfinite(rep.value):
        raise FloatingPointError("non-finite estimate")

    out = {"estimate": rep.value, "case": case.value, "N": data.n,
           "functional": functional.name, "estimator": desc, "report": rep.to_dict()}
    if ci is not None:
        out["confidence"] = ci.to_dict()
    lines = [f"estimate    {_fmt(rep.value)}", f"case        {case.value}",
             f"N           {data.n}", f"functional  {functional.name}",
             f"estimator   {desc['kind']}"]
    if functional.kind is FunctionalKind.SHANNON:
        # g = log(t) integrates to minus the Shannon information
        out["shannon_mi"] = -rep.value
        lines.insert(1, f"shannon MI  {_fmt(-rep.value)}")
    if rep.per_class_values:
        lines.append("per-class values:")
        for lab, v in rep.per_class_values.items():
            lines.append(f"  {lab!s:>10}  {_fmt(v)}")
    if rep.weights_used is not None:
        w = rep.weights_used
        lines.append(f"weights     |L|={len(w.weights)} l in [{_fmt(desc['l_min'])}, "
                     f"{_fmt(desc['l_max'])}] program={w.program.value} "
                     f"epsilon={_fmt(w.epsilon)} ||w||={_fmt(w.norm2)} "
                     f"status={w.status.value}")
    if rep.n_clamped:
        lines.append(f"floored     {rep.n_clamped} zero density estimate(s)")
    if ci is not None:
        lo, hi = ci.interval
        lines.append(f"ci          {ci.level:g}: [{_fmt(lo)}, {_fmt(hi)}] "
                     f"(se {_fmt(ci.std_error)}, {ci.variance_method.value})")
    print("\n".join(lines))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if args.out:
        if args.format == "json":
            _write_text(args.out, json.dumps(out, indent=1) + "\n")
        else:
            row = [_fmt_csv(rep.value), case.value, str(data.n), functional.name,
                   desc["kind"], str(rep.n_clamped)]
            header = "estimate,case,N,functional,estimator,n_floored"
            if ci is not None:
                header += ",ci_level,ci_lo,ci_hi,std_error"
                row += [repr(ci.level), _fmt_csv(ci.interval[0]),
                        _fmt_csv(ci.interval[1]), _fmt_csv(ci.std_error)]
            _write_text(args.out, header + "\n" + ",".join(row) + "\n")
    return EXIT_OK


def _fmt_csv(v):
    return repr(float(v))


def cmd_weights(args) -> int:
    _check_ensemble_flags(args)
    policy, eta = _eta(args)
    if args.N < 2:
        raise UsageError("--N must be >= 2")
    if args.dx < 1:
        raise UsageError("--dx must be >= 1")
    if args.case == "cont" and (args.dy is None or args.dy < 1):
        raise UsageError("--case cont needs --dy >= 1")
    if args.L_values:
        try:
            params = [float(v) for v in args.L_values.split(",") if v.strip()]
            L = BandwidthSet(params)
        except ValueError as exc:
            raise UsageError(f"--L: {exc}") from None
    else:
        lo = 1.2 if args.l_min is None else args.l_min
        hi = 3.0 if args.l_max is None else args.l_max
        L = BandwidthSet.linspace(lo, hi, args.L_count)
    basis = _basis(args, args.case, args.dx, args.dy)
    cfg = EnsembleConfig(L, basis, program=args.program, eta_policy=policy, eta=eta)
    sol = solve_weights(cfg, args.N)
    text = sol.to_json(indent=1) + "\n"
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _spec(args) -> TruncGaussMixtureSpec:
    if args.spec:
        try:
            return TruncGaussMixtureSpec.from_json(Path(args.spec).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.spec}: line {exc.lineno} column {exc.colno}: "
                             f"{exc.msg}") from None
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"{args.spec}: invalid spec: {exc}") from None
    if args.preset == "case2":
        return case2_spec()
    if args.d < 1:
        raise UsageError("--d must be >= 1")
    return case1_spec(args.d)


def cmd_oracle(args) -> int:
    functional = _functional(args)
    spec = _spec(args)
    if args.method == "mc" and args.M < 10 ** 6:
        raise UsageError("--M must be at least 1e6")
    res = oracle_mi(spec, functional, args.method, M=args.M, seed=args.seed)
    out = dict(res.to_dict(), functional=functional.name, spec=spec.to_dict())
    text = json.dumps(out, indent=1) + "\n"
    if args.out:
        _write_text(args.out, text)
    print(f"oracle      {_fmt(res.value)}  (std_error {res.std_error:.3g}, "
          f"bound {res.error_bound:.3g}, {res.method.value})")
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.N < 2:
        raise UsageError("--N must be >= 2")
    spec = _spec(args)
    write_dataset(sample(spec, args.N, args.seed), args.out, args.format)
    return EXIT_OK


def _resolve_plan(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    shipped = resources.files("miest") / "plans" / f"{name}.json"
    if shipped.is_file():
        return Path(str(shipped))
    raise UsageError(f"no plan file or shipped plan named {name!r}")


def cmd_bench(args) -> int:
    formats = [f.strip() for f in args.format.split(",") if f.strip()]
    bad = [f for f in formats if f not in ("csv", "json", "svg")]
    if bad or not formats:
        raise UsageError(f"--format must be a subset of csv,json,svg (got {args.format!r})")
    threads = _threads(args.threads)
    path = _resolve_plan(args.plan)
    try:
        plan = load_plan(path)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except PlanError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if args.trials is not None or args.seed is not None:
        d = plan.to_dict()
        if args.trials is not None:
            d["trials"] = args.trials
        if args.seed is not None:
            d["seed"] = args.seed
        try:
            plan = BenchPlan.from_dict(d)
        except PlanError as exc:
            raise UsageError(str(exc)) from None
    result = run_bench(plan, n_jobs=threads, record_runtime=args.record_runtime,
                       oracle=plan_oracle(plan))
    for fmt in formats:
        emit_results(result, fmt, f"{args.out}.{fmt}")
    print(f"oracle {_fmt(result.oracle_value)} (std_error {result.oracle_std_error:.3g})")
    print(f"{'estimator':<16}{'N':>7}{'trials':>8}{'mse':>14}{'bias':>14}"
          f"{'variance':>14}{'dropped':>9}")
    for c in result.cells:
        print(f"{c.estimator:<16}{c.N:>7}{c.trials:>8}{c.mse:>14.4e}{c.bias:>14.4e}"
              f"{c.variance:>14.4e}{c.dropped:>9}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest
    ok = run_selftest(print)
    return EXIT_OK if ok else EXIT_SELFTEST


_COMMANDS = {"estimate": cmd_estimate, "weights": cmd_weights, "oracle": cmd_oracle,
             "sample": cmd_sample, "bench": cmd_bench, "selftest": cmd_selftest}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, UnsafeKernelError) as exc:
        print(f"miest {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _SOLVER_ERRORS as exc:
        print(f"miest {args.command}: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except _NUMERICAL_ERRORS as exc:
        print(f"miest {args.command}: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except _DATA_ERRORS as exc:
        print(f"miest {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (MIEstError, ValueError) as exc:
        print(f"miest {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
