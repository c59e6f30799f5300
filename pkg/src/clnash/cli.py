"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 sweep with failed rows, 4 Monte Carlo check failed under ``--strict``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import benchmarks
from .equilibrium import closed_loop_policy
from .errors import ConfigError, DomainError, SolverError
from .model import (EquilibriumKind, ModelParams, ScalingMode, apply_scaling,
                    default_config_path, load_config)
from .simulate import (Perturbation, SimConfig, _thread_count, deviation_experiment,
                       estimate_value, path_values)
from .valuation import closed_form_value

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_PARTIAL, EXIT_STRICT = 0, 1, 2, 3, 4

SWEEP_COLUMNS = (
    "cl_rate_mult", "ol_rate_mult", "cp_rate_mult",
    "cl_rate_leading", "ol_rate_leading", "cp_rate_leading", "cl_asym_gap",
    "cl_aim", "ol_aim", "cp_aim",
    "cl_value_frac", "ol_value_frac", "cp_value_frac", "cl_ol_ratio",
)
KIND_ORDER = (EquilibriumKind.CENTRAL_PLANNER, EquilibriumKind.CLOSED_LOOP, EquilibriumKind.OPEN_LOOP)


def fmt(x) -> str:
    """CSV cell: 12 significant digits in scientific notation for floats."""
    if isinstance(x, bool) or isinstance(x, (int, np.integer)):
        return str(x)
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.11e}"
    return str(x)


def write_csv(header, rows, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])


def _emit(text: str, path) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args, default_name="table1.ini") -> tuple[ModelParams, ScalingMode]:
    path = args.config or default_config_path(default_name)
    params, scaling = load_config(path)
    changes = {}
    if getattr(args, "n_agents", None) is not None:
        changes["n_agents"] = args.n_agents
    if getattr(args, "lambda_scale", None) is not None:
        changes["lambda_"] = params.lambda_ * args.lambda_scale
    if changes:
        try:
            params = params.with_(**changes)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
    if getattr(args, "scaling", None):
        scaling = ScalingMode.parse(args.scaling)
    return params, scaling


def policy_for(kind: EquilibriumKind, params: ModelParams):
    if kind is EquilibriumKind.CLOSED_LOOP:
        return closed_loop_policy(params)[0]
    if kind is EquilibriumKind.OPEN_LOOP:
        return benchmarks.open_loop_policy(params)
    return benchmarks.central_planner_policy(params)


# -- solve --------------------------------------------------------------------

def cmd_solve(args) -> int:
    params, scaling = _load(args)
    solved = apply_scaling(params, scaling)
    policy, coeffs, report = closed_loop_policy(solved)
    out = {
        "params": solved.to_dict(),
        "scaling": scaling.value,
        "policy": policy.to_dict(),
        "coefficients": coeffs.to_dict(),
        "report": report.to_dict(),
    }
    _emit(json.dumps(out, indent=2) + "\n", args.output)
    return EXIT_OK


# -- compare ------------------------------------------------------------------

def compare_rows(params: ModelParams, scaling: ScalingMode) -> list[list]:
    solved = apply_scaling(params, scaling)
    rows = []
    for kind in KIND_ORDER:
        pol = policy_for(kind, solved)
        value = closed_form_value(solved, pol)
        rows.append([kind.value, pol.m_rate, pol.m_aim, value, value / solved.frictionless_value])
    return rows


def cmd_compare(args) -> int:
    params, scaling = _load(args)
    buf = io.StringIO()
    write_csv(["kind", "m_rate", "m_aim", "value", "value_fraction"], compare_rows(params, scaling), buf)
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


# -- sweep --------------------------------------------------------------------

def sweep_row(params: ModelParams, scaling: ScalingMode) -> dict:
    """All sweep columns for one parameter set.

    Rate multipliers are sqrt(lambda/gamma) M_rate with the unscaled
    lambda, so under mean-field scaling the closed-loop leading value is
    Delta(N) sqrt(N).
    """
    solved = apply_scaling(params, scaling)
    unit = math.sqrt(params.lambda_ / params.gamma_)
    stretch = math.sqrt(params.lambda_ / solved.lambda_)
    n = params.n_agents
    cl = closed_loop_policy(solved)[0]
    ol = benchmarks.open_loop_policy(solved)
    cp = benchmarks.central_planner_policy(solved)
    fr = solved.frictionless_value
    v_cl, v_ol, v_cp = (closed_form_value(solved, p) for p in (cl, ol, cp))
    lead = {k: benchmarks.asymptotic_policy(k, n).rate_leading * stretch for k in KIND_ORDER}
    return {
        "cl_rate_mult": unit * cl.m_rate,
        "ol_rate_mult": unit * ol.m_rate,
        "cp_rate_mult": unit * cp.m_rate,
        "cl_rate_leading": lead[EquilibriumKind.CLOSED_LOOP],
        "ol_rate_leading": lead[EquilibriumKind.OPEN_LOOP],
        "cp_rate_leading": lead[EquilibriumKind.CENTRAL_PLANNER],
        "cl_asym_gap": abs(unit * cl.m_rate - lead[EquilibriumKind.CLOSED_LOOP]),
        "cl_aim": cl.m_aim, "ol_aim": ol.m_aim, "cp_aim": cp.m_aim,
        "cl_value_frac": v_cl / fr, "ol_value_frac": v_ol / fr, "cp_value_frac": v_cp / fr,
        "cl_ol_ratio": v_cl / v_ol,
    }


def parse_sweep_values(variable: str, values: str | None, range_: str | None,
                       logspace: str | None) -> list:
    if sum(x is not None for x in (values, range_, logspace)) != 1:
        raise ConfigError("give exactly one of --values, --range, --logspace")
    try:
        if values is not None:
            items = [v for v in values.split(",") if v.strip()]
            out = [int(v) if variable == "n_agents" else float(v) for v in items]
        elif range_ is not None:
            parts = [int(p) for p in range_.split(":")]
            if len(parts) not in (2, 3):
                raise ValueError
            step = parts[2] if len(parts) == 3 else 1
            out = list(range(parts[0], parts[1] + 1, step))
            if variable != "n_agents":
                out = [float(v) for v in out]
        else:
            lo, hi, num = logspace.split(":")
            out = [float(v) for v in np.logspace(float(lo), float(hi), int(num))]
            if variable == "n_agents":
                raise ConfigError("--logspace applies to lambda_ sweeps only")
    except ValueError:
        raise ConfigError("cannot parse sweep values") from None
    if not out:
        raise ConfigError("sweep has no values")
    if variable == "n_agents" and min(out) < 2:
        raise ConfigError("n_agents values must all be >= 2")
    return out


def run_sweep(params: ModelParams, scaling: ScalingMode, variable: str, values, columns) -> tuple[list, int]:
    """Rows in input order plus the number of failed rows."""

    def one(v):
        try:
            row = sweep_row(params.with_(**{variable: v}), scaling)
            return [v, "ok"] + [row[c] for c in columns], False
        except (SolverError, DomainError) as exc:
            return [v, type(exc).__name__] + [float("nan")] * len(columns), True

    workers = min(_thread_count(), len(values))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, values))
    else:
        results = [one(v) for v in values]
    return [r for r, _ in results], sum(failed for _, failed in results)


def cmd_sweep(args) -> int:
    params, scaling = _load(args)
    columns = SWEEP_COLUMNS if not args.columns else tuple(c.strip() for c in args.columns.split(","))
    unknown = [c for c in columns if c not in SWEEP_COLUMNS]
    if unknown:
        raise ConfigError(f"unknown sweep columns: {', '.join(unknown)}")
    values = parse_sweep_values(args.variable, args.values, args.range, args.logspace)
    rows, failed = run_sweep(params, scaling, args.variable, values, columns)
    buf = io.StringIO()
    write_csv([args.variable, "status", *columns], rows, buf)
    _emit(buf.getvalue(), args.output)
    if failed:
        print(f"{failed} of {len(rows)} sweep rows failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


# -- simulate -----------------------------------------------------------------

def cmd_simulate(args) -> int:
    params, scaling = _load(args, default_name="synthetic_mc.ini")
    solved = apply_scaling(params, scaling)
    config = SimConfig(dt=args.dt, horizon=args.horizon, n_paths=args.paths, seed=args.seed,
                       scheme=args.scheme)
    config.check_discount(solved.rho)
    kind = EquilibriumKind(args.policy)
    policy = policy_for(kind, solved)
    closed = closed_form_value(solved, policy)
    est = estimate_value(solved, policy, 0, config)
    out = {
        "params": solved.to_dict(),
        "policy": policy.to_dict(),
        "config": {"dt": config.dt, "horizon": config.horizon, "paths": config.n_paths,
                   "seed": config.seed, "scheme": config.scheme},
        "estimate": est.to_dict(),
        "closed_form": closed,
        "z_score": (est.mean - closed) / est.std_error if est.std_error > 0 else 0.0,
        "within_3se": bool(est.within(closed) or est.mean == closed),
    }
    ok = out["within_3se"]
    if args.deviate is not None:
        pert = Perturbation(**{args.deviate_target: args.deviate})
        base = path_values(solved, policy, 0, config)
        dev = deviation_experiment(solved, config, pert, policy=policy, baseline=base)
        out["deviation"] = {"target": args.deviate_target, "factor": args.deviate, **dev.to_dict()}
        ok = ok and dev.deviation_gain_bounded
    _emit(json.dumps(out, indent=2) + "\n", args.output)
    if args.strict and not ok:
        print("Monte Carlo check failed", file=sys.stderr)
        return EXIT_STRICT
    return EXIT_OK


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clnash", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_scaling=True):
        p.add_argument("--config", help="INI file with a [model] section (default: bundled)")
        p.add_argument("--n-agents", type=int, dest="n_agents")
        p.add_argument("--lambda-scale", type=float, dest="lambda_scale",
                       help="multiply the configured lambda by this factor")
        if with_scaling:
            p.add_argument("--scaling", help="raw or mean_field (overrides the config)")
        p.add_argument("--output", "-o", help="write to this file instead of stdout")

    p = sub.add_parser("solve", help="closed-loop equilibrium as JSON")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="CSV with one row per equilibrium kind")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="CSV over a range of N or lambda")
    common(p)
    p.add_argument("--variable", choices=("n_agents", "lambda_"), default="n_agents")
    p.add_argument("--values", help="comma-separated values")
    p.add_argument("--range", help="start:stop[:step], inclusive integers")
    p.add_argument("--logspace", help="lo_exp:hi_exp:num for lambda_ sweeps")
    p.add_argument("--columns", help="comma-separated subset of: " + ",".join(SWEEP_COLUMNS))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo value against the closed form")
    common(p)
    p.add_argument("--dt", type=float, default=0.25)
    p.add_argument("--horizon", type=float, default=200.0)
    p.add_argument("--paths", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scheme", choices=("exact", "euler"), default="exact")
    p.add_argument("--policy", choices=[k.value for k in EquilibriumKind], default="closed_loop")
    p.add_argument("--deviate", type=float, help="factor applied to agent 0's rule")
    p.add_argument("--deviate-target", choices=("rate", "aim", "a", "b", "c"), default="rate")
    p.add_argument("--strict", action="store_true", help="exit 4 if a 3-SE check fails")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
