"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Every sub-command
accepts ``--config run.json``; its keys (flag names, ``-`` or ``_``) override
the command-line flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import diagnostics
from .covariance import HorizontalCovarianceOp, resolve_threads
from .grid import load_field, load_grid, load_scale_field, save_field, uniform_scale
from .rf import CALIBRATIONS, rf1_coefficients, rf3_coefficients, rf3_polynomials
from .varsolver import DEFAULT_MAX_ITER, load_obs, misfit, obs_operator, solve


def _ints(text):
    return [int(t) for t in str(text).split(",") if t.strip()]


def _add_filter_flags(p, scales=True):
    p.add_argument("--grid", required=True, help="grid file (binary or .csv)")
    if scales:
        p.add_argument("--scales", help="correlation-radius file with rx, ry sections")
        p.add_argument("--radius", type=float, help="constant correlation radius in meters")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--k", type=int, default=1, help="first-order iterations")
    p.add_argument("--unit-dc", action="store_true", help="unit response to a constant for the 3rd-order filter")
    p.add_argument("--calibration", choices=CALIBRATIONS, default="young")
    p.add_argument("--ghost-width", type=int, default=None)
    p.add_argument("--threads", type=int, default=None, help="sweep threads (default RGFVAR_THREADS or all cores)")


def build_parser():
    parser = argparse.ArgumentParser(prog="rgfvar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", help="print filter coefficients as JSON")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--calibration", choices=CALIBRATIONS, default="young")

    p = sub.add_parser("impulse", help="1-D impulse response versus the sampled Gaussian")
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--length", type=int, default=300)
    p.add_argument("--calibration", choices=CALIBRATIONS, default="young")
    p.add_argument("--out", help="CSV with offset,h,g columns")
    p.add_argument("--json", help="write the JSON report here as well as to stdout")

    p = sub.add_parser("filter", help="apply the covariance smoothing to a field")
    _add_filter_flags(p)
    p.add_argument("--in", dest="input", required=True, help="input field file")
    p.add_argument("--out", required=True, help="output field file")
    p.add_argument("--direction", choices=("xy", "x", "y"), default="xy",
                   help="x: G_x only, y: G_y only, xy: G_y G_x")

    p = sub.add_parser("assimilate", help="3D-VAR analysis increment from point observations")
    _add_filter_flags(p)
    p.add_argument("--obs", required=True, help="CSV i,j,value,error_std")
    p.add_argument("--background", help="background field file (default zero)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--out", required=True, help="increment field file")
    p.add_argument("--diagnostics", help="JSON diagnostics path (default <out>.json)")

    p = sub.add_parser("bench", help="time the filters on an all-sea square grid")
    p.add_argument("--grid-size", type=int, default=1024)
    p.add_argument("--orders", default="1,3")
    p.add_argument("--ks", default="1,5,10")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--t-calc-iterations", type=int, default=100_000_000)
    p.add_argument("--out", help="JSON report path (stdout if omitted)")

    for action in sub.choices.values():
        action.add_argument("--config", help="JSON run-spec overriding flags")
    return parser, sub


def _apply_config(args, sub_parser):
    if not getattr(args, "config", None):
        return
    try:
        spec = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        sub_parser.error(f"cannot read --config: {exc}")
    if not isinstance(spec, dict):
        sub_parser.error("--config must hold a JSON object")
    dests = {a.dest: a for a in sub_parser._actions}
    for key, value in spec.items():
        dest = key.replace("-", "_")
        if dest == "in":
            dest = "input"
        if dest not in dests or dest in ("help", "config"):
            sub_parser.error(f"unknown --config key {key!r}")
        setattr(args, dest, value)


def _validate(args, p):
    order = getattr(args, "order", None)
    if order is not None and order not in (1, 3):
        p.error(f"--order must be 1 or 3, got {order}")
    k = getattr(args, "k", None)
    if k is not None and k < 1:
        p.error("--k must be >= 1")
    if order == 3 and k not in (None, 1):
        p.error("the third-order filter is single-iteration; use --k 1")
    sigma = getattr(args, "sigma", None)
    if sigma is not None and not sigma > 0:
        p.error("--sigma must be positive")
    if args.command == "impulse" and args.length < 4:
        p.error("--length must be >= 4")
    if args.command in ("filter", "assimilate"):
        if (args.scales is None) == (args.radius is None):
            p.error("give exactly one of --scales or --radius")
        if args.radius is not None and not args.radius > 0:
            p.error("--radius must be positive")
        if args.threads is not None and args.threads < 1:
            p.error("--threads must be >= 1")
    if args.command == "assimilate":
        if not args.tol > 0:
            p.error("--tol must be positive")
        if args.max_iter < 0:
            p.error("--max-iter must be >= 0")
    if args.command == "bench":
        try:
            args.orders, args.ks = _ints(args.orders), _ints(args.ks)
        except ValueError:
            p.error("--orders and --ks take comma-separated integers")
        bad = [o for o in args.orders if o not in (1, 3)]
        if bad or not args.orders:
            p.error(f"unknown filter order(s) {bad}; choose from 1,3")
        if not args.ks or min(args.ks) < 1:
            p.error("--ks must list positive integers")
        if args.repeats < 1:
            p.error("--repeats must be >= 1")
        if args.grid_size < 4:
            p.error("--grid-size must be >= 4")


def _operator(args):
    grid = load_grid(args.grid)
    scales = uniform_scale(grid, args.radius) if args.radius is not None else load_scale_field(args.scales, grid)
    op = HorizontalCovarianceOp(grid, scales, order=args.order, k=args.k, unit_dc=args.unit_dc,
                                ghost_width=args.ghost_width, calibration=args.calibration,
                                threads=resolve_threads(args.threads))
    return grid, op


def cmd_coeffs(args):
    if args.order == 1:
        c = rf1_coefficients(args.sigma, args.k)
        out = {"order": 1, "sigma": args.sigma, "k": args.k, "alpha": float(c.alpha), "beta": float(c.beta)}
    else:
        c = rf3_coefficients(args.sigma, args.calibration)
        a = rf3_polynomials(c.q)
        out = {
            "order": 3,
            "sigma": args.sigma,
            "calibration": args.calibration,
            "q": float(c.q),
            "a": [float(v) for v in a],
            "alpha": [float(v) for v in c.alpha],
            "beta": float(c.beta),
            "dc_gain": float(np.sqrt(2 * np.pi) * args.sigma),
        }
    print(json.dumps(out, indent=2))


def cmd_impulse(args):
    rep = diagnostics.impulse_response(args.sigma, args.order, args.k, args.length, args.calibration)
    if args.out:
        rep.to_csv(args.out)
    if args.json:
        rep.to_json(args.json)
    print(json.dumps(rep.summary(), indent=2))


def cmd_filter(args):
    grid, op = _operator(args)
    field = load_field(args.input, grid)
    fn = {"xy": op.apply_v, "x": op.apply_gx, "y": op.apply_gy}[args.direction]
    save_field(fn(field), args.out)


def cmd_assimilate(args):
    grid, op = _operator(args)
    obs = load_obs(args.obs)
    hb = np.zeros(len(obs))
    if args.background and len(obs):
        hb = obs_operator(load_field(args.background, grid), obs, grid)
    an = solve(obs, op, misfit(hb, obs) if len(obs) else None, tol=args.tol, max_iter=args.max_iter)
    save_field(an.increment, args.out)
    diag = an.diagnostics()
    diag.update(order=args.order, k=args.k, unit_dc=args.unit_dc, tol=args.tol, max_iter=args.max_iter)
    path = args.diagnostics or str(args.out) + ".json"
    Path(path).write_text(json.dumps(diag, indent=2))


def cmd_bench(args):
    configs = [(1, k) for k in args.ks if 1 in args.orders] + ([(3, 1)] if 3 in args.orders else [])
    report = diagnostics.run_benchmark(args.grid_size, configs, args.repeats, args.threads, args.seed,
                                       args.sigma, t_calc_iterations=args.t_calc_iterations)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)


COMMANDS = {
    "coeffs": cmd_coeffs,
    "impulse": cmd_impulse,
    "filter": cmd_filter,
    "assimilate": cmd_assimilate,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser, sub = build_parser()
    try:
        args = parser.parse_args(argv)
        p = sub.choices[args.command]
        _apply_config(args, p)
        _validate(args, p)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"rgfvar {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
