"""Command-line front end.

Subcommands: optimize, sweep, curves, baseline, simulate. Tables go to
stdout (or ``--out``) as CSV or JSON; exit codes are 0 ok, 2 usage,
3 infeasible, 4 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .ack_model import AckModel, parse_model_spec
from .baselines import fr_no_replace_aoi, fr_replace_aoi, geometric_dist, iir_aoi, iir_dist
from .errors import HarqAoiError, InfeasibleError, NonBracketingError
from .sdo import SdoConfig, lambda_curve, rho_curve, solve
from .service_time import Schedule, ServiceTimeDist, build_dist, rho_zero_wait
from .simulator import FrReplaceScheme, SimConfig, analytical_aoi, simulate
from .waiting import solve_gamma

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_VALIDATION = 0, 2, 3, 4
JSON_SCHEMA_VERSION = 1

SWEEP_FIELDS = ["beta", "scheme", "n1", "m", "aoi_zero_wait", "aoi_with_wait", "gamma_star", "error"]


@dataclass
class SweepRecord:
    beta: float
    scheme: str
    n1: float | None = None
    m: int | None = None
    aoi_zero_wait: float | None = None
    aoi_with_wait: float | None = None
    gamma_star: float | None = None
    error: str = ""


class UsageError(Exception):
    pass


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(round(v, 10)) if math.isfinite(v) else str(v)
    return str(v)


def _write_csv(rows, fields, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r.get(f)) for f in fields])
    _emit(buf.getvalue(), out)


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_table(rows, fields, args):
    if args.format == "json":
        _emit(json.dumps([{f: r.get(f) for f in fields} for r in rows], indent=2) + "\n", args.out)
    else:
        _write_csv(rows, fields, args.out)


# ----------------------------------------------------------------- helpers


def _config(args, beta=None) -> SdoConfig:
    return SdoConfig(
        k=args.k,
        beta=args.beta if beta is None else beta,
        n_max=args.nmax,
        n1_step=args.n1_step,
        n1_refine=args.n1_refine,
        fixed_m=args.fixed_m,
    )


def _model(args) -> AckModel:
    try:
        return parse_model_spec(args.model, args.k)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _harq_records(beta, args, model):
    cfg = _config(args, beta)
    sol = solve(cfg, model)
    rows = []
    for name, sched in (("harq", sol.real_schedule), ("harq-rounded", sol.schedule)):
        dist = build_dist(sched, model)
        ws = solve_gamma(dist)
        rows.append(
            SweepRecord(
                beta=beta,
                scheme=name,
                n1=sched.n[0],
                m=sched.m,
                aoi_zero_wait=rho_zero_wait(dist),
                aoi_with_wait=ws.aoi_with_wait,
                gamma_star=ws.gamma_star,
            )
        )
    return rows


def _sweep_beta(job):
    beta, args, model = job
    rows = []
    tasks = [
        ("harq", lambda: _harq_records(beta, args, model)),
        ("iir", lambda: [_baseline_record(beta, iir_aoi(args.k, beta, model), args, model)]),
        ("fr-no-replace", lambda: [_baseline_record(beta, fr_no_replace_aoi(args.k, beta, model), args, model)]),
        ("fr-replace", lambda: [_baseline_record(beta, fr_replace_aoi(args.k, beta, model), args, model)]),
    ]
    for name, task in tasks:
        try:
            rows.extend(task())
        except HarqAoiError as exc:
            names = ["harq", "harq-rounded"] if name == "harq" else [name]
            rows.extend(SweepRecord(beta=beta, scheme=n, error=str(exc)) for n in names)
    return rows


def _baseline_record(beta, res, args, model):
    m = None
    if res.scheme.value == "iir":
        from .baselines import find_n_cap

        m = find_n_cap(model) - res.n1_star + 1
    elif res.scheme.value == "fr-replace":
        m = 1
    return SweepRecord(
        beta=beta,
        scheme=res.scheme.value,
        n1=res.n1_star,
        m=m,
        aoi_zero_wait=res.aoi_zero_wait,
        aoi_with_wait=res.aoi,
        gamma_star=res.gamma_star if res.gamma_star is not None else 0.0,
    )


def sweep_records(betas, args, model, workers=1) -> list[SweepRecord]:
    """All scheme rows for every beta, ordered by beta then scheme name."""
    jobs = [(float(b), args, model) for b in sorted(set(betas))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_sweep_beta, jobs))
    else:
        chunks = [_sweep_beta(j) for j in jobs]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r.beta, r.scheme))
    return rows


def _parse_betas(args):
    if args.betas:
        try:
            betas = [float(x) for x in args.betas.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"cannot parse --betas {args.betas!r}") from None
    elif args.beta_range:
        try:
            start, stop, step = (float(x) for x in args.beta_range.split(":"))
        except ValueError:
            raise UsageError("--beta-range must be start:stop:step") from None
        if step <= 0:
            raise UsageError("--beta-range step must be positive")
        betas = list(np.round(np.arange(start, stop + step / 2, step), 10))
    else:
        betas = [args.beta]
    if not betas:
        raise UsageError("beta set is empty")
    if any(b < 0 for b in betas):
        raise UsageError("beta must be ≥ 0")
    return betas


# ---------------------------------------------------------------- commands


def cmd_optimize(args) -> int:
    model = _model(args)
    cfg = _config(args)
    sol = solve(cfg, model, fixed_n1_route=args.route == "fixed-n1", workers=args.workers)
    ws = solve_gamma(build_dist(sol.schedule, model))
    sched = [int(x) for x in sol.schedule.n]
    ir = [sched[0]] + [b - a for a, b in zip(sched, sched[1:])]
    lines = [
        f"route            {sol.route}",
        f"lambda*          {sol.lambda_star:.6f}",
        f"p(lambda*)       {sol.p_of_lambda:.6f}",
        f"rho0* (real)     {sol.rho_star:.6f}",
        f"rho0 (rounded)   {sol.rho_rounded:.6f}",
        f"real schedule    {' '.join(f'{x:.3f}' for x in sol.real_schedule.n)}",
        f"schedule         {' '.join(map(str, sched))}",
        f"IR lengths       {' '.join(map(str, ir))}",
        f"transmissions m  {len(sched)}",
        f"gamma*           {ws.gamma_star:.6f}",
        f"AoI with wait    {ws.aoi_with_wait:.6f}",
    ]
    sys.stdout.write("\n".join(lines) + "\n")
    if args.out:
        payload = {
            "schema": JSON_SCHEMA_VERSION,
            "config": {
                "k": cfg.k,
                "n_max": cfg.n_max,
                "beta": cfg.beta,
                "model": args.model,
                "n1_step": cfg.n1_step,
                "n1_refine": cfg.n1_refine,
                "fixed_m": cfg.fixed_m,
                "route": sol.route,
            },
            "lambda_star": sol.lambda_star,
            "p_of_lambda": sol.p_of_lambda,
            "rho_star": sol.rho_star,
            "rho_rounded": sol.rho_rounded,
            "real_schedule": list(sol.real_schedule.n),
            "schedule": sched,
            "ir_lengths": ir,
            "gamma_star": ws.gamma_star,
            "aoi_with_wait": ws.aoi_with_wait,
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    model = _model(args)
    rows = sweep_records(_parse_betas(args), args, model, workers=args.workers)
    _emit_table([asdict(r) for r in rows], SWEEP_FIELDS, args)
    return EXIT_OK


def cmd_curves(args) -> int:
    model = _model(args)
    cfg = _config(args)
    if args.curve == "p-lambda":
        lambdas = np.linspace(0.0, args.lambda_max, args.points)
        rows = [
            {"lambda": lam, "p": p, "e_tau": e, "g": p - e, "n1": s.n[0], "m": s.m}
            for lam, p, e, s in lambda_curve(cfg, model, lambdas)
        ]
        _emit_table(rows, ["lambda", "p", "e_tau", "g", "n1", "m"], args)
        return EXIT_OK
    lo = args.n1_min if args.n1_min is not None else args.k
    hi = args.n1_max if args.n1_max is not None else int(args.nmax)
    curve = rho_curve(cfg, model, range(lo, hi + 1), workers=args.workers)
    rows = []
    for n1, sol in curve:
        if sol is None:
            rows.append({"n1": int(n1)})
            continue
        sched = sol.real_schedule
        rows.append(
            {
                "n1": int(n1),
                "rho": sol.rho_star,
                "lambda": sol.lambda_star,
                "m": sched.m,
                "ir_lengths": ";".join(f"{x:.4f}" for x in sched.ir_lengths[1:]),
                "schedule": ";".join(f"{x:.4f}" for x in sched.n),
            }
        )
    fields = ["n1", "rho", "lambda", "m"] if args.curve == "rho-n1" else ["n1", "m", "ir_lengths", "schedule"]
    _emit_table(rows, fields, args)
    return EXIT_OK


def cmd_baseline(args) -> int:
    model = _model(args)
    funcs = {"iir": iir_aoi, "fr-no-replace": fr_no_replace_aoi, "fr-replace": fr_replace_aoi}
    names = sorted(funcs) if args.scheme == "all" else [args.scheme]
    rows = [asdict(_baseline_record(args.beta, funcs[n](args.k, args.beta, model), args, model)) for n in names]
    _emit_table(rows, SWEEP_FIELDS[:-1], args)
    return EXIT_OK


def _sim_source(args, model):
    """Resolve --scheme into (source, gamma, analytical AoI)."""
    beta = args.beta
    if args.schedule:
        try:
            ns = [float(x) for x in args.schedule.split(",")]
            sched = Schedule(args.k, beta, tuple(ns))
        except ValueError as exc:
            raise UsageError(f"bad --schedule: {exc}") from None
        source = build_dist(sched, model)
    elif args.scheme in ("harq", "harq-rounded"):
        sol = solve(_config(args), model)
        source = build_dist(sol.schedule if args.scheme == "harq-rounded" else sol.real_schedule, model)
    elif args.scheme == "iir":
        from .baselines import find_n_cap

        res = iir_aoi(args.k, beta, model)
        source = iir_dist(res.n1_star, beta, model, find_n_cap(model))
    elif args.scheme == "fr-no-replace":
        res = fr_no_replace_aoi(args.k, beta, model)
        source = geometric_dist(res.n1_star, beta, model.prob(res.n1_star))
    else:
        res = fr_replace_aoi(args.k, beta, model)
        src = FrReplaceScheme(res.n1_star, beta, model.prob(res.n1_star))
        return src, 0.0, analytical_aoi(src)
    gamma = solve_gamma(source).gamma_star if args.wait == "optimal" else 0.0
    return source, gamma, analytical_aoi(source, gamma)


def cmd_simulate(args) -> int:
    model = _model(args)
    source, gamma, expected = _sim_source(args, model)
    res = simulate(SimConfig(epochs=args.epochs, seed=args.seed, gamma=gamma, workers=args.workers), source)
    # slack for the zero-variance case, where both sides are exact up to rounding
    ok = abs(res.aoi_estimate - expected) <= 3.0 * res.std_error + 1e-9 * abs(expected)
    label = "single atom" if isinstance(source, ServiceTimeDist) and source.support.size == 1 else args.scheme
    sys.stdout.write(
        f"scheme           {label}\n"
        f"gamma            {gamma:.6f}\n"
        f"analytical AoI   {expected:.6f}\n"
        f"simulated AoI    {res.aoi_estimate:.6f}\n"
        f"std error        {res.std_error:.6f}\n"
        f"epochs           {res.epochs_used}\n"
        f"3-sigma check    {'PASS' if ok else 'FAIL'}\n"
    )
    return EXIT_OK if ok else EXIT_VALIDATION


# ------------------------------------------------------------------ parser


def _nonneg_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--k", type=_nonneg_int, default=64, help="message length in bits")
    common.add_argument("--nmax", type=float, default=192, help="terminal cumulative blocklength N_m")
    common.add_argument("--beta", type=float, default=10.0, help="processing delay per decoding attempt")
    common.add_argument("--model", default="gaussian-tbcc", help="'gaussian-tbcc' or 'table:<csv path>'")
    common.add_argument("--out", help="write output to this file instead of stdout")
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--fixed-m", type=_nonneg_int, default=None, help="require exactly m transmissions")
    common.add_argument("--n1-step", type=float, default=1.0, help="coarse N_1 grid step of the lambda route")
    common.add_argument("--n1-refine", type=float, default=1e-3, help="fine N_1 step around the best coarse point (0 = off)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--epochs", type=_nonneg_int, default=1_000_000)
    common.add_argument("--workers", type=_nonneg_int, default=1)

    parser = argparse.ArgumentParser(prog="harq-aoi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", parents=[common], help="optimal HARQ schedule and waiting threshold")
    p.add_argument("--route", choices=["lambda", "fixed-n1"], default="lambda")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", parents=[common], help="HARQ vs baselines over beta")
    p.add_argument("--betas", help="comma-separated beta values")
    p.add_argument("--beta-range", help="start:stop:step (stop inclusive)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("curves", parents=[common], help="plot-ready curve samples")
    p.add_argument("curve", choices=["p-lambda", "rho-n1", "ir-n1"])
    p.add_argument("--lambda-max", type=float, default=150.0)
    p.add_argument("--points", type=_nonneg_int, default=151)
    p.add_argument("--n1-min", type=int)
    p.add_argument("--n1-max", type=int)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("baseline", parents=[common], help="IIR and FR baselines")
    p.add_argument("--scheme", choices=["iir", "fr-no-replace", "fr-replace", "all"], default="all")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo check of an analytical AoI")
    p.add_argument(
        "--scheme",
        choices=["harq", "harq-rounded", "iir", "fr-no-replace", "fr-replace"],
        default="harq",
    )
    p.add_argument("--schedule", help="explicit comma-separated cumulative blocklengths")
    p.add_argument("--wait", choices=["optimal", "zero"], default="optimal")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.beta < 0:
        parser.error("beta must be ≥ 0")
    if args.nmax < args.k:
        parser.error("nmax must be ≥ k")
    if args.n1_step <= 0:
        parser.error("n1-step must be positive")
    if args.n1_refine < 0:
        parser.error("n1-refine must be >= 0")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (InfeasibleError, NonBracketingError) as exc:
        sys.stderr.write(f"harq-aoi: infeasible: {exc}\n")
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
