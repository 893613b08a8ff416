"""Command-line front end: ``run``, ``verify-nash``, ``sweep`` and ``list-scenarios``."""

import argparse
import itertools
import json
import logging
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import report
from .errors import ConfigError, MixNashError, NonFiniteDerivative, NonFiniteState, NotStronglyMonotone, \
    SingularSystem
from .game import (OPERATING_BOX, QuadraticGame, gradient_check, lipschitz_constants, monotonicity_constant,
                   monotonicity_slack, nash_oracle)
from .scenarios import BUILTINS, OVERRIDE_KEYS, build_scenario
from .sim import SCHEMA_VERSION, StepSizeWarning, integrate, metrics

OUTPUT_ENV = "MIXNASH_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_VERIFY = 4

SWEEP_KEYS = ("k1", "k2", "k3", "k4", "beta", "dt")
NASH_TOL = 1e-10


def _output_dir(arg, default_name):
    base = arg or os.environ.get(OUTPUT_ENV) or os.path.join("out", default_name)
    path = Path(base)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}", field="--out") from exc
    if not os.access(path, os.W_OK):
        raise ConfigError(f"{path} is not writable", field="--out")
    return path


def _source(args):
    if args.config and args.scenario:
        raise ConfigError("give either --scenario or --config, not both", field="--config")
    if args.config:
        return args.config
    return args.scenario or "vehicles5"


def _overrides(args):
    return {k: getattr(args, k, None) for k in OVERRIDE_KEYS}


def _blowup_summary(scenario, exc):
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario.name,
        "variant": scenario.variant,
        "dt": scenario.dt,
        "final_err_2": None,
        "final_err_inf": None,
        "final_vnorm": None,
        "fitted_rate": None,
        "max_wnorm": None,
        "blown_up": True,
        "error": str(exc),
    }


def cmd_run(args):
    scenario = build_scenario(_source(args), _overrides(args))
    out = _output_dir(args.out, scenario.name)
    try:
        traj = integrate(scenario)
    except (NonFiniteState, NonFiniteDerivative) as exc:
        report.write_summary_json(_blowup_summary(scenario, exc), out / "summary.json")
        print(f"{scenario.name} [{scenario.variant}]: blown up ({exc})")
        return EXIT_BLOWUP
    summary = metrics(traj)
    report.write_trajectory_csv(traj, out / "trajectory.csv")
    report.write_summary_json(summary, out / "summary.json")
    if args.gnuplot_script:
        (out / "plot.gp").write_text(report.gnuplot_script(traj))
    if not args.no_figures:
        from .plotting import render_run_figures
        render_run_figures(traj, out)

    def fmt(v):
        return "n/a" if v is None else f"{v:.4g}"
    print(f"{scenario.name} [{scenario.variant}]: final_err={fmt(summary['final_err_2'])} "
          f"rate={fmt(summary['fitted_rate'])} max_wnorm={summary['max_wnorm']:.4g} "
          f"runtime={summary['runtime_s']:.2f}s -> {out}")
    return EXIT_OK


def cmd_verify_nash(args):
    scenario = build_scenario(_source(args), {})
    game = scenario.game
    if not isinstance(game, QuadraticGame):
        raise ConfigError("verify-nash needs a quadratic game", field="game")
    start = time.perf_counter()
    try:
        x_star = nash_oracle(game)
    except SingularSystem as exc:
        print(f"no unique equilibrium: {exc}")
        return EXIT_VERIFY
    residual = float(np.linalg.norm(game.pseudo_gradient(x_star)))
    try:
        m = monotonicity_constant(game)
    except NotStronglyMonotone as exc:
        print(f"x* = {np.array2string(x_star, precision=12)}")
        print(f"residual = {residual:.3e}")
        print(f"not strongly monotone: {exc}")
        return EXIT_VERIFY
    lbar = lipschitz_constants(game)
    elapsed = time.perf_counter() - start

    print(f"x* = {np.array2string(x_star, precision=12)}")
    print(f"residual = {residual:.3e}")
    print(f"m = {m:.6g}")
    print("lbar = " + " ".join(f"{v:.6g}" for v in lbar))
    print(f"runtime = {elapsed * 1e3:.2f} ms")
    ok = residual < NASH_TOL and m > 0
    if args.samples:
        rng = np.random.default_rng(args.seed)
        N = game.size
        pts = rng.uniform(-OPERATING_BOX, OPERATING_BOX, (args.samples, N))
        grad_err = gradient_check(game, pts)
        pairs = rng.uniform(-OPERATING_BOX, OPERATING_BOX, (args.samples, 2, N))
        slack = monotonicity_slack(game, pairs, m)
        print(f"gradient_fd_rel_err = {grad_err:.3e} (seed {args.seed}, {args.samples} points)")
        print(f"monotonicity_slack = {slack:.3e}")
        ok = ok and grad_err < 1e-6 and slack >= -1e-9
    print("verified" if ok else "verification failed")
    return EXIT_OK if ok else EXIT_VERIFY


def parse_grid(items, zipped=False):
    """``["k1=1,2", "k2=3,4"]`` to a list of override dicts (Cartesian product unless zipped)."""
    axes = []
    for axis in items or []:
        key, sep, values = axis.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in SWEEP_KEYS:
            raise ConfigError(f"expected key=v1,v2,... with key in {SWEEP_KEYS}, got {axis!r}", field="--grid")
        try:
            vals = [float(v) for v in values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"non-numeric value in {axis!r}", field="--grid") from exc
        if not vals:
            raise ConfigError(f"no values for {key}", field="--grid")
        axes.append((key, vals))
    if not axes:
        raise ConfigError("empty parameter grid", field="--grid")
    keys = [k for k, _ in axes]
    if zipped:
        lengths = {len(v) for _, v in axes}
        if len(lengths) != 1:
            raise ConfigError("zipped axes must have equal lengths", field="--grid")
        combos = zip(*(v for _, v in axes))
    else:
        combos = itertools.product(*(v for _, v in axes))
    return [dict(zip(keys, c)) for c in combos]


def run_point(source, base_overrides, point, index):
    """One sweep row; failures are recorded in the row instead of raised."""
    ov = dict(base_overrides)
    ov.update(point)
    row = {"point": index, **point}
    try:
        scenario = build_scenario(source, ov)
    except MixNashError as exc:
        row.update(blown_up=False, error=f"config: {exc}")
        return row
    g = scenario.gains
    row.update(k1=g.k1, k2=g.k2, k3=g.k3, k4=g.k4, beta=scenario.rbf.beta, dt=scenario.dt)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", StepSizeWarning)
            traj = integrate(scenario)
    except (NonFiniteState, NonFiniteDerivative) as exc:
        row.update(blown_up=True, error=str(exc))
        return row
    s = metrics(traj)
    row.update({k: s[k] for k in ("final_err_2", "final_err_inf", "final_window_err", "final_vnorm",
                                  "fitted_rate", "max_wnorm", "blown_up")})
    xT = traj.x[-1]
    for i in range(xT.shape[0]):
        for k in range(xT.shape[1]):
            row[f"xT_{i + 1}_{k + 1}"] = repr(float(xT[i, k]))
    return row


def cmd_sweep(args):
    grid = parse_grid(args.grid, args.zip)
    source = _source(args)
    base = {k: v for k, v in _overrides(args).items() if v is not None}
    first = build_scenario(source, {**base, **grid[0]})
    out = _output_dir(args.out, first.name + "_sweep")
    workers = max(1, min(args.workers or os.cpu_count() or 1, len(grid)))
    if workers == 1:
        rows = [run_point(source, base, p, k) for k, p in enumerate(grid)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(run_point, source, base, p, k) for k, p in enumerate(grid)]
            rows = [f.result() for f in futs]
    rows.sort(key=lambda r: r["point"])
    report.write_sweep_csv(rows, out / "sweep.csv")
    if not args.no_figures:
        from .plotting import render_sweep_figure
        render_sweep_figure(rows, out / "sweep.png")
    for r in rows:
        err = r.get("final_window_err")
        status = "blown up" if r.get("blown_up") else (r.get("error") or f"final_window_err={err:.4g}")
        params = " ".join(f"{k}={r[k]:g}" for k in grid[0])
        print(f"[{r['point']}] {params}: {status}")
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_list_scenarios(args):
    for name, desc in BUILTINS.items():
        print(f"{name}\t{desc}")
    return EXIT_OK


def _add_source(p):
    p.add_argument("--scenario", help="built-in scenario name (default vehicles5)")
    p.add_argument("--config", help="path to a JSON scenario config")


def _add_overrides(p):
    g = p.add_argument_group("overrides (take precedence over config fields)")
    for k in ("k1", "k2", "k3", "k4", "beta", "dt"):
        g.add_argument(f"--{k}", type=float)
    g.add_argument("--t-final", dest="t_final", type=float)
    g.add_argument("--stride", type=int)
    g.add_argument("--variant", choices=["full", "disturbance_free"])
    g.add_argument("--y0", choices=["seeded", "zero"], help="initial estimates")


def build_parser():
    parser = argparse.ArgumentParser(prog="mixnash", description="Distributed Nash equilibrium seeking "
                                     "for mixed first/second-order players.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate a scenario and write trajectory.csv / summary.json")
    _add_source(p)
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or out/<scenario>)")
    _add_overrides(p)
    p.add_argument("--gnuplot-script", action="store_true", help="also write plot.gp")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify-nash", help="certify the Nash equilibrium of a quadratic game")
    _add_source(p)
    p.add_argument("--seed", type=int, default=0, help="seed for the sampled gradient/monotonicity checks")
    p.add_argument("--samples", type=int, default=0, help="number of sampled checks (0 skips them)")
    p.set_defaults(func=cmd_verify_nash)

    p = sub.add_parser("sweep", help="run a parameter grid in parallel and write sweep.csv")
    _add_source(p)
    p.add_argument("--out")
    p.add_argument("--grid", action="append", metavar="KEY=V1,V2",
                   help=f"axis over one of {','.join(SWEEP_KEYS)}; repeatable")
    p.add_argument("--zip", action="store_true", help="pair axes element-wise instead of the product")
    p.add_argument("--workers", type=int)
    p.add_argument("--no-figures", action="store_true")
    _add_overrides(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("list-scenarios", help="list built-in scenarios")
    p.set_defaults(func=cmd_list_scenarios)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotStronglyMonotone as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (NonFiniteState, NonFiniteDerivative) as exc:
        print(f"blown up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except MixNashError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
