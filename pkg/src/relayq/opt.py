"""Parameter searches: concave 1-D maximization, grid sweeps, stability
boundary tracing, and throughput-region frontiers.

The variable-rate arrival rates are concave in the decoding time share and in
the phase time split, which licenses golden-section search on those axes;
everything else is swept on grids.  Objectives that are zero outside the
stability region get their feasible sub-interval bracketed first so the
golden section only ever sees the concave part.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .arq import FixedRates, OnOffProbs, all_state_probs, bc_on_probs, mac_state_probs
from .channel import NetworkParams, PlacementParams, pathloss_means
from .qos import QosExponents
from .rates import ControlParams
from .throughput import fixed_stability_margins, throughput_fixed, throughput_variable

INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

_PICK = {
    "sum": lambda rates: rates[0] + rates[1],
    "r1": lambda rates: rates[0],
    "r2": lambda rates: rates[1],
}


class InfeasibleError(RuntimeError):
    """The objective vanished on the whole search interval."""


@dataclass(frozen=True)
class SweepResult:
    axis: str
    grid: tuple[float, ...]
    values: tuple[float, ...]
    argmax: float
    argmax_value: float


@dataclass(frozen=True)
class FrontierPoint:
    r1: float
    r2: float
    tau: float
    rho: float
    delta: float


@dataclass(frozen=True)
class RegionFrontier:
    points: tuple[FrontierPoint, ...]


def _golden_section(f, a: float, b: float, tol: float):
    c = b - INV_GOLDEN * (b - a)
    d = a + INV_GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while d - c > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def maximize_concave_1d(objective, interval, tol: float = 1e-4, probe_points: int = 33):
    """Maximize a concave objective on a closed interval.

    Objectives that vanish outside the stability region are handled by first
    probing a coarse grid, bisecting onto the feasible sub-interval's edges,
    and golden-sectioning inside it.  Raises :class:`InfeasibleError` when the
    objective is zero everywhere on the interval.
    """
    a, b = float(interval[0]), float(interval[1])
    if not b > a:
        raise ValueError("interval must have positive length")
    grid = np.linspace(a, b, probe_points)
    vals = [objective(x) for x in grid]
    nonzero = [i for i, v in enumerate(vals) if v != 0.0]
    if not nonzero:
        raise InfeasibleError(f"objective is zero on all of [{a}, {b}]")
    lo_i, hi_i = nonzero[0], nonzero[-1]

    def edge(x_zero, x_live):
        # bisect the stability edge between a vanishing and a live point
        while abs(x_zero - x_live) > tol:
            mid = 0.5 * (x_zero + x_live)
            if objective(mid) != 0.0:
                x_live = mid
            else:
                x_zero = mid
        return x_live

    lo = grid[lo_i] if lo_i == 0 else edge(grid[lo_i - 1], grid[lo_i])
    hi = grid[hi_i] if hi_i == len(grid) - 1 else edge(grid[hi_i + 1], grid[hi_i])
    return _golden_section(objective, lo, hi, tol)


def numeric_concavity_check(objective, grid, tol: float = 1e-8):
    """Central second differences of the objective on a grid.

    Returns (is_concave, worst_second_difference); concave means every second
    difference is at most ``tol`` (use 3x the estimator noise for sampled
    objectives, the default for quadrature-backed ones).
    """
    grid = np.asarray(grid, dtype=float)
    if len(grid) < 5:
        raise ValueError("need at least 5 grid points")
    vals = np.array([objective(x) for x in grid])
    second = vals[:-2] - 2.0 * vals[1:-1] + vals[2:]
    worst = float(second.max())
    return worst <= tol, worst


def sweep(objective, axis_grid, axis: str = "x") -> SweepResult:
    """Evaluate the objective on every grid point and record the argmax."""
    grid = tuple(float(x) for x in axis_grid)
    values = tuple(float(objective(x)) for x in grid)
    i = int(np.argmax(values))
    return SweepResult(axis=axis, grid=grid, values=values, argmax=grid[i], argmax_value=values[i])


def trace_stability_boundary_fixed(
    params: NetworkParams,
    rates: FixedRates,
    rho_grid,
    tau_tol: float = 1e-6,
    method: str = "quadrature",
) -> SweepResult:
    """Largest stable tau per rho for the fixed-rate scheme.

    Each of the two relay-buffer inequalities bounds tau from above (the
    multiple-access ON probabilities grow with tau while the broadcast ones
    shrink); the boundary is the pointwise minimum of the two, each located by
    bisection.
    """
    def tau_max_one(rho: float, stream: int) -> float:
        def margin(tau: float) -> float:
            probs = all_state_probs(params, rates, tau, rho, method=method)
            return fixed_stability_margins(rates, probs)[stream]

        lo, hi = 1e-6, 1.0 - 1e-6
        if margin(lo) < 0.0:
            return lo
        if margin(hi) >= 0.0:
            return hi
        while hi - lo > tau_tol:
            mid = 0.5 * (lo + hi)
            if margin(mid) >= 0.0:
                lo = mid
            else:
                hi = mid
        return lo

    grid = tuple(float(r) for r in rho_grid)
    taus = tuple(min(tau_max_one(r, 0), tau_max_one(r, 1)) for r in grid)
    i = int(np.argmax(taus))
    return SweepResult(axis="rho", grid=grid, values=taus, argmax=grid[i], argmax_value=taus[i])


def pareto_filter(points: list[FrontierPoint]) -> tuple[FrontierPoint, ...]:
    """Drop every point componentwise-dominated by another."""
    kept = []
    for p in points:
        if any(
            (q.r1 >= p.r1 and q.r2 >= p.r2 and (q.r1 > p.r1 or q.r2 > p.r2))
            for q in points
        ):
            continue
        kept.append(p)
    # deduplicate exact ties
    seen, unique = set(), []
    for p in kept:
        key = (p.r1, p.r2)
        if key not in seen:
            seen.add(key)
            unique.append(p)
    return tuple(unique)


def throughput_region(
    params: NetworkParams,
    qos: QosExponents,
    backend,
    tau_grid,
    rho_grid,
    delta_grid,
) -> RegionFrontier:
    """Pareto frontier of (R1, R2) over the three-dimensional parameter grid."""
    points = []
    for tau in tau_grid:
        for rho in rho_grid:
            for delta in delta_grid:
                ctrl = ControlParams(tau=float(tau), rho=float(rho), delta=float(delta))
                res = throughput_variable(params, ctrl, qos, backend)
                if res.stable:
                    points.append(FrontierPoint(res.arrival_rates[0], res.arrival_rates[1],
                                                float(tau), float(rho), float(delta)))
    return RegionFrontier(points=pareto_filter(points))


# ---------------------------------------------------------------------------
# objective builders shared by the CLI and the figure reproductions
# ---------------------------------------------------------------------------

def _ctrl_on_axis(base: ControlParams, axis: str, x: float) -> ControlParams:
    tau, rho, delta = base.tau, base.rho, base.delta
    if axis == "tau":
        tau = x
    elif axis == "rho":
        rho = x
    elif axis == "delta":
        delta = x
    else:
        raise ValueError(f"unknown control axis {axis!r}")
    return ControlParams(tau=tau, rho=rho, delta=delta, alpha=base.alpha)


def variable_objective(
    params: NetworkParams,
    qos: QosExponents,
    backend,
    base: ControlParams,
    axis: str,
    objective: str = "sum",
):
    """Arrival-rate objective along one control axis, zero outside stability."""
    pick = _PICK[objective]

    def value(x: float) -> float:
        res = throughput_variable(params, _ctrl_on_axis(base, axis, x), qos, backend)
        return pick(res.arrival_rates) if res.stable else 0.0

    return value


def variable_tau_interval(params: NetworkParams, backend, base: ControlParams) -> tuple[float, float]:
    """Stable tau range for given rho/delta: margins are linear in tau, so the
    upper edge is min_j E{R_dst_j} / (E{R_src_j} + E{R_dst_j})."""
    tau_max = min(
        backend.bc_mean(params, base, j)
        / (backend.mac_mean(params, base, j) + backend.bc_mean(params, base, j))
        for j in range(params.n_sources)
    )
    return 0.0, tau_max


def optimize_tau_variable(
    params: NetworkParams,
    qos: QosExponents,
    backend,
    base: ControlParams,
    objective: str = "sum",
    tol: float = 1e-3,
):
    """Best tau and its objective value; golden section is licensed by the
    concavity of the arrival rates in tau inside the stability region."""
    lo, hi = variable_tau_interval(params, backend, base)
    f = variable_objective(params, qos, backend, base, "tau", objective)
    return _golden_section(f, lo + 1e-6, hi - 1e-9, tol)


def placement_objective(
    params_template: NetworkParams,
    qos: QosExponents,
    backend,
    base: ControlParams,
    placement_distance: float,
    pathloss_exponent: float = 4.0,
    objective: str = "sum",
    optimize_tau: bool = True,
    tau_tol: float = 1e-3,
):
    """Objective as a function of the relay position d in (0, 1).

    Path loss folds into the fading means; the remaining network parameters
    come from the template.  With ``optimize_tau`` the phase split is tuned
    per position, mirroring how the placement studies are run.
    """
    def value(d: float) -> float:
        mean_z, mean_w = pathloss_means(
            PlacementParams(placement_distance, d, pathloss_exponent)
        )
        params = NetworkParams(
            snr_sources=params_template.snr_sources,
            snr_relay=params_template.snr_relay,
            mean_z=(mean_z,) * params_template.n_sources,
            mean_w=(mean_w,) * params_template.n_sources,
            bandwidth=params_template.bandwidth,
        )
        if optimize_tau:
            return optimize_tau_variable(params, qos, backend, base, objective, tau_tol)[1]
        f = variable_objective(params, qos, backend, base, "tau", objective)
        return f(base.tau)

    return value


def fixed_objective(
    params: NetworkParams,
    rates: FixedRates,
    qos: QosExponents,
    axis: str,
    base_tau: float,
    base_rho: float,
    objective: str = "sum",
    optimize_tau: bool = False,
    tau_grid=None,
    method: str = "quadrature",
):
    """Fixed-rate arrival-rate objective along tau or rho.

    The fixed-rate scheme has no concavity guarantee in tau, so the inner
    tau maximization is a dense grid search; multiple-access probabilities
    depend only on tau and are cached across the sweep.
    """
    pick = _PICK[objective]
    if tau_grid is None:
        tau_grid = np.linspace(0.02, 0.98, 97)
    mac_cache: dict = {}

    def rate_value(tau: float, rho: float) -> float:
        if tau not in mac_cache:
            mac_cache[tau] = mac_state_probs(params, rates, tau, method=method).p_mac_case
        probs = OnOffProbs(
            p_mac_case=mac_cache[tau],
            p_bc_on=bc_on_probs(params, rates, rho, tau),
        )
        res = throughput_fixed(rates, probs, qos)
        return pick(res.arrival_rates) if res.stable else 0.0

    if axis == "rho":
        if optimize_tau:
            return lambda rho: max(rate_value(t, rho) for t in tau_grid)
        return lambda rho: rate_value(base_tau, rho)
    if axis == "tau":
        return lambda tau: rate_value(tau, base_rho)
    raise ValueError(f"unknown fixed-rate axis {axis!r}")


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([result.axis, "value"])
        for x, v in zip(result.grid, result.values):
            writer.writerow([repr(float(x)), repr(float(v))])


def write_frontier_csv(frontier: RegionFrontier, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r1", "r2", "tau", "rho", "delta"])
        for p in frontier.points:
            writer.writerow([repr(float(p.r1)), repr(float(p.r2)), repr(float(p.tau)), repr(float(p.rho)), repr(float(p.delta))])
