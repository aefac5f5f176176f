"""Command-line interface.

Each subcommand maps onto one analysis operation, reads a YAML scenario,
writes CSV to --out, and prints a one-line summary.  Exit codes: 0 success,
1 configuration/validation error, 2 numerical failure (quadrature tolerance,
unbracketed root, unusable fit, infeasible search).
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import opt
from .arq import all_state_probs
from .channel import RayleighSampler
from .config import ConfigError, ScenarioConfig, load_scenario
from .qos import QuadratureError
from .rates import ControlParams, bc_rates, mac_rates_timeshared
from .sim import SimConfig, UnusableFitError, simulate_queues, write_fit_csv, write_overflow_csv
from .throughput import (
    RootBracketError,
    fd_stability_check,
    stability_check_variable,
    throughput_fixed,
    throughput_fullduplex,
    throughput_variable,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _require(value, name: str):
    if value is None:
        raise ConfigError(name, "section is required by this subcommand")
    return value


def _parse_grid_flag(text: str, name: str):
    """Grid flags accept 'start:stop:num' or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(name, "expected start:stop:num")
        return tuple(float(x) for x in np.linspace(float(parts[0]), float(parts[1]), int(parts[2])))
    return tuple(float(x) for x in text.split(","))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_rates(cfg: ScenarioConfig, args) -> str:
    ctrl = _require(cfg.control, "control")
    z, w = RayleighSampler(cfg.network, cfg.seed).sample(1)
    r_src = mac_rates_timeshared(cfg.network, z[0], ctrl.delta)
    r_dst = bc_rates(cfg.network, w[0], ctrl.rho)
    rows = [(f"source-{j + 1}-relay", repr(float(r))) for j, r in enumerate(r_src)]
    rows += [(f"relay-destination-{j + 1}", repr(float(r))) for j, r in enumerate(r_dst)]
    _write_rows(args.out, ["link", "rate"], rows)
    return f"rates: one block at seed {cfg.seed}; " + " ".join(f"{k}={v}" for k, v in rows)


def cmd_throughput(cfg: ScenarioConfig, args) -> str:
    ctrl = _require(cfg.control, "control")
    qos = _require(cfg.qos, "qos")
    backend = cfg.make_backend(args.backend, args.samples)
    if args.mode == "variable":
        res = throughput_variable(cfg.network, ctrl, qos, backend)
        extra = {}
    elif args.mode == "fixed":
        rates = _require(cfg.fixed_rates, "fixed_rates")
        probs = all_state_probs(cfg.network, rates, ctrl.tau, ctrl.rho[0])
        res = throughput_fixed(rates, probs, qos)
        extra = {}
    elif args.mode == "full-duplex":
        res, case = throughput_fullduplex(cfg.network, ctrl, qos, backend)
        extra = {"case": case.case_id, "theta_bar": case.theta_bar, "theta_star": case.theta_star}
    else:
        raise ConfigError("mode", f"unknown mode {args.mode!r}")
    def cell(v):
        return v if isinstance(v, str) or v is None else repr(v)

    header = ["stream", "arrival_rate", "bottleneck"] + list(extra)
    rows = []
    for j in range(len(res.arrival_rates)):
        row = [j + 1, repr(float(res.arrival_rates[j])), res.bottleneck[j]]
        row += [cell(extra[k][j]) for k in extra]
        rows.append(row)
    _write_rows(args.out, header, rows)
    rates_txt = ", ".join(f"R{j + 1}={r:.6f}" for j, r in enumerate(res.arrival_rates))
    return f"throughput[{args.mode}]: {rates_txt} stable={res.stable}"


def cmd_stability(cfg: ScenarioConfig, args) -> str:
    if args.trace:
        rates = _require(cfg.fixed_rates, "fixed_rates")
        rho_grid = _parse_grid_flag(args.rho_grid, "--rho-grid")
        result = opt.trace_stability_boundary_fixed(cfg.network, rates, rho_grid)
        _write_rows(args.out, ["rho", "tau_max"],
                    [(repr(float(r)), repr(float(t))) for r, t in zip(result.grid, result.values)])
        return (f"stability trace: {len(result.grid)} points, "
                f"highest tau_max={result.argmax_value:.4f} at rho={result.argmax:.4f}")
    ctrl = _require(cfg.control, "control")
    backend = cfg.make_backend(args.backend, args.samples)
    if ctrl.tau is None:
        stable, margins = fd_stability_check(cfg.network, ctrl, backend)
    else:
        stable, margins = stability_check_variable(cfg.network, ctrl, backend)
    _write_rows(args.out, ["stream", "margin"],
                [(j + 1, repr(float(m))) for j, m in enumerate(margins)])
    return f"stability: stable={stable} margins=" + ",".join(f"{m:.6f}" for m in margins)


def cmd_arq_probs(cfg: ScenarioConfig, args) -> str:
    ctrl = _require(cfg.control, "control")
    rates = _require(cfg.fixed_rates, "fixed_rates")
    method = "mc" if args.backend == "mc" else "quadrature"
    probs = all_state_probs(cfg.network, rates, ctrl.tau, ctrl.rho[0],
                            method=method, n=args.samples or 1_000_000, seed=cfg.seed)
    names = ["pm1", "pm2", "pm3", "pm4", "p1", "p2", "p3", "p4"]
    values = list(probs.p_mac_case) + list(probs.p_on)
    _write_rows(args.out, ["name", "value"], [(n, repr(float(v))) for n, v in zip(names, values)])
    return "arq-probs: " + " ".join(f"{n}={v:.6f}" for n, v in zip(names, values))


def cmd_simulate(cfg: ScenarioConfig, args) -> str:
    ctrl = _require(cfg.control, "control")
    sim_doc = _require(cfg.sim, "sim")
    arrivals = sim_doc.arrival_rates
    if isinstance(arrivals, str):  # from-analysis
        qos = _require(cfg.qos, "qos")
        backend = cfg.make_backend(args.backend, args.samples)
        if sim_doc.mode == "fixed-rate":
            rates = _require(cfg.fixed_rates, "fixed_rates")
            probs = all_state_probs(cfg.network, rates, ctrl.tau, ctrl.rho[0])
            arrivals = throughput_fixed(rates, probs, qos).arrival_rates
        else:
            arrivals = throughput_variable(cfg.network, ctrl, qos, backend).arrival_rates
    sim_cfg = SimConfig(
        n_blocks=sim_doc.n_blocks,
        n_reps=sim_doc.n_reps,
        warmup=sim_doc.warmup,
        thresholds=sim_doc.thresholds,
        arrival_rates=arrivals,
        mode=sim_doc.mode,
        seed=cfg.seed,
        fixed_rates=cfg.fixed_rates,
    )
    result = simulate_queues(cfg.network, ctrl, sim_cfg, workers=args.workers)
    if all(fit is None for fit in result.fits.values()):
        raise UnusableFitError("no buffer produced a usable decay fit; widen or lower the threshold grid")
    write_overflow_csv(result, args.out)
    fit_path = str(args.out) + ".fits.csv" if args.fit_out is None else args.fit_out
    write_fit_csv(result, fit_path)
    slopes = {label: (fit.slope if fit else None) for label, fit in result.fits.items()}
    slope_txt = " ".join(
        f"{k}={v:.4f}" if v is not None else f"{k}=unusable" for k, v in slopes.items()
    )
    return f"simulate[{sim_doc.mode}]: arrivals={tuple(round(a, 6) for a in arrivals)} slopes: {slope_txt}"


def _sweep_objective(cfg: ScenarioConfig, args):
    sweep = _require(cfg.sweep, "sweep")
    ctrl = _require(cfg.control, "control")
    qos = _require(cfg.qos, "qos")
    backend = cfg.make_backend(args.backend, args.samples)
    if sweep.scheme == "fixed":
        rates = _require(cfg.fixed_rates, "fixed_rates")
        if sweep.axis not in ("tau", "rho"):
            raise ConfigError("sweep.axis", "fixed-rate sweeps support tau and rho")
        f = opt.fixed_objective(cfg.network, rates, qos, sweep.axis, ctrl.tau, ctrl.rho[0],
                                objective=sweep.objective, optimize_tau=sweep.optimize_tau)
        return sweep, f
    if sweep.axis == "placement":
        placement = _require(cfg.placement, "placement")
        f = opt.placement_objective(cfg.network, qos, backend, ctrl,
                                    placement.total_distance, placement.pathloss_exponent,
                                    objective=sweep.objective, optimize_tau=sweep.optimize_tau)
        return sweep, f
    if sweep.optimize_tau:
        base = ctrl

        def f(x):
            moved = opt._ctrl_on_axis(base, sweep.axis, x)
            return opt.optimize_tau_variable(cfg.network, qos, backend, moved, sweep.objective)[1]

        return sweep, f
    return sweep, opt.variable_objective(cfg.network, qos, backend, ctrl, sweep.axis, sweep.objective)


def cmd_sweep(cfg: ScenarioConfig, args) -> str:
    sweep_doc, objective = _sweep_objective(cfg, args)
    grid = _parse_grid_flag(args.grid, "--grid") if args.grid else sweep_doc.grid
    result = opt.sweep(objective, grid, axis=sweep_doc.axis)
    opt.write_sweep_csv(result, args.out)
    return (f"sweep[{sweep_doc.axis}/{sweep_doc.objective}]: argmax={result.argmax:.4f} "
            f"value={result.argmax_value:.6f} over {len(grid)} points")


def cmd_region(cfg: ScenarioConfig, args) -> str:
    region = _require(cfg.region, "region")
    qos = _require(cfg.qos, "qos")
    backend = cfg.make_backend(args.backend, args.samples)
    frontier = opt.throughput_region(cfg.network, qos, backend,
                                     region.tau_grid, region.rho_grid, region.delta_grid)
    opt.write_frontier_csv(frontier, args.out)
    return f"region: {len(frontier.points)} frontier points"


def cmd_concavity_check(cfg: ScenarioConfig, args) -> str:
    sweep_doc, objective = _sweep_objective(cfg, args)
    grid = _parse_grid_flag(args.grid, "--grid") if args.grid else sweep_doc.grid
    ok, worst = opt.numeric_concavity_check(objective, grid, tol=args.tol)
    _write_rows(args.out, ["axis", "concave", "worst_second_difference"],
                [(sweep_doc.axis, ok, repr(float(worst)))])
    return f"concavity-check[{sweep_doc.axis}]: concave={ok} worst_second_difference={worst:.3e}"


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relayq",
                                     description="Queueing-constrained relay network throughput")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML scenario file")
        p.add_argument("--out", required=True, help="output CSV path")
        p.add_argument("--seed", type=int, default=None, help="override scenario seed")
        p.add_argument("--workers", type=int, default=1, help="max concurrent workers")
        p.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count")
        p.add_argument("--backend", choices=("mc", "quadrature"), default=None,
                       help="expectation backend override")

    common(sub.add_parser("rates", help="single-block instantaneous rates"))
    p = sub.add_parser("throughput", help="maximum constant arrival rates")
    common(p)
    p.add_argument("--mode", choices=("variable", "fixed", "full-duplex"), default="variable")
    p = sub.add_parser("stability", help="stability margins or boundary trace")
    common(p)
    p.add_argument("--trace", action="store_true", help="trace the fixed-rate tau_max(rho) boundary")
    p.add_argument("--rho-grid", default="0.05:0.95:31")
    common(sub.add_parser("arq-probs", help="fixed-rate ON-OFF probabilities"))
    p = sub.add_parser("simulate", help="fluid queue simulation")
    common(p)
    p.add_argument("--fit-out", default=None, help="fit summary CSV (default <out>.fits.csv)")
    p = sub.add_parser("sweep", help="1-D parameter sweep")
    common(p)
    p.add_argument("--grid", default=None, help="override grid: start:stop:num or comma list")
    common(sub.add_parser("region", help="throughput-region Pareto frontier"))
    p = sub.add_parser("concavity-check", help="numeric concavity verdict along an axis")
    common(p)
    p.add_argument("--grid", default=None)
    p.add_argument("--tol", type=float, default=1e-8)
    return parser


COMMANDS = {
    "rates": cmd_rates,
    "throughput": cmd_throughput,
    "stability": cmd_stability,
    "arq-probs": cmd_arq_probs,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "region": cmd_region,
    "concavity-check": cmd_concavity_check,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_scenario(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        summary = COMMANDS[args.command](cfg, args)
    except (ConfigError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, RootBracketError, UnusableFitError, opt.InfeasibleError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
