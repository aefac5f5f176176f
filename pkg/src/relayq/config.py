"""Scenario documents: a YAML file describing one analysis run.

Every nested section maps onto one of the library's parameter types and is
validated on load; unknown keys are rejected so typos fail loudly, and every
error names the offending field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .arq import FixedRates
from .channel import NetworkParams, snr_from_db
from .qos import MonteCarloBackend, QosExponents, QuadratureBackend
from .rates import ControlParams


class ConfigError(ValueError):
    def __init__(self, fieldname: str, message: str):
        super().__init__(f"config field '{fieldname}': {message}")
        self.fieldname = fieldname


def _pop(doc: dict, key: str, default=None, required: bool = False):
    if key in doc:
        return doc.pop(key)
    if required:
        raise ConfigError(key, "is required")
    return default


def _no_leftovers(doc: dict, section: str):
    if doc:
        raise ConfigError(f"{section}.{next(iter(doc))}", "unknown key")


def _floats(value, fieldname: str) -> tuple[float, ...]:
    try:
        if isinstance(value, (int, float)):
            return (float(value),)
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(fieldname, f"expected number or list of numbers, got {value!r}")


def grid_from_doc(doc, fieldname: str) -> tuple[float, ...]:
    """A grid is either an explicit list or {start, stop, num}."""
    if isinstance(doc, dict):
        d = dict(doc)
        start = _pop(d, "start", required=True)
        stop = _pop(d, "stop", required=True)
        num = _pop(d, "num", required=True)
        _no_leftovers(d, fieldname)
        return tuple(float(x) for x in np.linspace(float(start), float(stop), int(num)))
    return _floats(doc, fieldname)


@dataclass(frozen=True)
class SimDoc:
    n_blocks: int
    n_reps: int
    warmup: int
    thresholds: tuple[float, ...]
    arrival_rates: tuple[float, ...] | str  # explicit rates or "from-analysis"
    mode: str


@dataclass(frozen=True)
class SweepDoc:
    axis: str                      # tau | rho | delta | placement
    grid: tuple[float, ...]
    objective: str = "sum"         # sum | r1 | r2
    scheme: str = "variable"       # variable | fixed
    optimize_tau: bool = False


@dataclass(frozen=True)
class RegionDoc:
    tau_grid: tuple[float, ...]
    rho_grid: tuple[float, ...]
    delta_grid: tuple[float, ...]


@dataclass(frozen=True)
class PlacementDoc:
    total_distance: float
    pathloss_exponent: float


@dataclass(frozen=True)
class EstimatorDoc:
    backend: str = "quadrature"
    mc_samples: int = 1_000_000
    tol: float = 1e-9


@dataclass
class ScenarioConfig:
    network: NetworkParams
    seed: int = 0
    control: ControlParams | None = None
    qos: QosExponents | None = None
    fixed_rates: FixedRates | None = None
    sim: SimDoc | None = None
    sweep: SweepDoc | None = None
    region: RegionDoc | None = None
    placement: PlacementDoc | None = None
    estimator: EstimatorDoc = field(default_factory=EstimatorDoc)

    def make_backend(self, override: str | None = None, samples: int | None = None, seed: int | None = None):
        name = override or self.estimator.backend
        if name == "quadrature":
            return QuadratureBackend(tol=self.estimator.tol)
        if name == "mc":
            return MonteCarloBackend(
                n_samples=samples or self.estimator.mc_samples,
                seed=self.seed if seed is None else seed,
            )
        raise ConfigError("estimator.backend", f"unknown backend {name!r}")


def _parse_network(doc: dict) -> NetworkParams:
    d = dict(doc)
    if "snr_sources_db" in d:
        snr_sources = tuple(snr_from_db(x) for x in _floats(_pop(d, "snr_sources_db"), "network.snr_sources_db"))
    else:
        snr_sources = _floats(_pop(d, "snr_sources", required=True), "network.snr_sources")
    if "snr_relay_db" in d:
        snr_relay = snr_from_db(float(_pop(d, "snr_relay_db")))
    else:
        snr_relay = float(_pop(d, "snr_relay", required=True))
    mean_z = _floats(_pop(d, "mean_z", required=True), "network.mean_z")
    mean_w = _floats(_pop(d, "mean_w", required=True), "network.mean_w")
    bandwidth = float(_pop(d, "bandwidth", 1.0))
    _no_leftovers(d, "network")
    if len(mean_z) == 1:
        mean_z = mean_z * len(snr_sources)
    if len(mean_w) == 1:
        mean_w = mean_w * len(snr_sources)
    try:
        return NetworkParams(snr_sources, snr_relay, mean_z, mean_w, bandwidth)
    except ValueError as e:
        raise ConfigError("network", str(e))


def _parse_control(doc: dict) -> ControlParams:
    d = dict(doc)
    tau = _pop(d, "tau")
    rho = _pop(d, "rho", required=True)
    delta = _pop(d, "delta", required=True)
    alpha = _pop(d, "alpha")
    _no_leftovers(d, "control")
    rho = rho if isinstance(rho, (int, float)) else _floats(rho, "control.rho")
    delta = delta if isinstance(delta, (int, float)) else _floats(delta, "control.delta")
    try:
        return ControlParams(
            tau=None if tau is None else float(tau),
            rho=rho,
            delta=delta,
            alpha=None if alpha is None else _floats(alpha, "control.alpha"),
        )
    except ValueError as e:
        field_name = "control.tau" if "tau" in str(e) else "control"
        raise ConfigError(field_name, str(e))


def _parse_qos(doc: dict, n_sources: int) -> QosExponents:
    d = dict(doc)
    theta_src = _floats(_pop(d, "theta_src", required=True), "qos.theta_src")
    theta_relay = float(_pop(d, "theta_relay", required=True))
    _no_leftovers(d, "qos")
    if len(theta_src) == 1:
        theta_src = theta_src * n_sources
    try:
        return QosExponents(theta_src, theta_relay)
    except ValueError as e:
        raise ConfigError("qos", str(e))


def _parse_fixed_rates(doc: dict) -> FixedRates:
    d = dict(doc)
    r_src = _floats(_pop(d, "r_src", required=True), "fixed_rates.r_src")
    r_dst = _floats(_pop(d, "r_dst", required=True), "fixed_rates.r_dst")
    _no_leftovers(d, "fixed_rates")
    try:
        return FixedRates(r_src, r_dst)
    except ValueError as e:
        raise ConfigError("fixed_rates", str(e))


def _parse_sim(doc: dict) -> SimDoc:
    d = dict(doc)
    arrivals = _pop(d, "arrival_rates", "from-analysis")
    if not isinstance(arrivals, str):
        arrivals = _floats(arrivals, "sim.arrival_rates")
    elif arrivals != "from-analysis":
        raise ConfigError("sim.arrival_rates", "must be a list or 'from-analysis'")
    sim = SimDoc(
        n_blocks=int(_pop(d, "n_blocks", required=True)),
        n_reps=int(_pop(d, "n_reps", required=True)),
        warmup=int(_pop(d, "warmup", 0)),
        thresholds=grid_from_doc(_pop(d, "thresholds", required=True), "sim.thresholds"),
        arrival_rates=arrivals,
        mode=str(_pop(d, "mode", "variable-rate")),
    )
    _no_leftovers(d, "sim")
    return sim


def _parse_sweep(doc: dict) -> SweepDoc:
    d = dict(doc)
    sweep = SweepDoc(
        axis=str(_pop(d, "axis", required=True)),
        grid=grid_from_doc(_pop(d, "grid", required=True), "sweep.grid"),
        objective=str(_pop(d, "objective", "sum")),
        scheme=str(_pop(d, "scheme", "variable")),
        optimize_tau=bool(_pop(d, "optimize_tau", False)),
    )
    _no_leftovers(d, "sweep")
    if sweep.axis not in ("tau", "rho", "delta", "placement"):
        raise ConfigError("sweep.axis", f"unknown axis {sweep.axis!r}")
    if sweep.objective not in ("sum", "r1", "r2"):
        raise ConfigError("sweep.objective", f"unknown objective {sweep.objective!r}")
    if sweep.scheme not in ("variable", "fixed"):
        raise ConfigError("sweep.scheme", f"unknown scheme {sweep.scheme!r}")
    if sweep.axis == "tau" and sweep.optimize_tau:
        raise ConfigError("sweep.optimize_tau", "cannot optimize the sweep axis itself")
    return sweep


def _parse_region(doc: dict) -> RegionDoc:
    d = dict(doc)
    region = RegionDoc(
        tau_grid=grid_from_doc(_pop(d, "tau_grid", required=True), "region.tau_grid"),
        rho_grid=grid_from_doc(_pop(d, "rho_grid", required=True), "region.rho_grid"),
        delta_grid=grid_from_doc(_pop(d, "delta_grid", required=True), "region.delta_grid"),
    )
    _no_leftovers(d, "region")
    return region


def _parse_placement(doc: dict) -> PlacementDoc:
    d = dict(doc)
    placement = PlacementDoc(
        total_distance=float(_pop(d, "total_distance", required=True)),
        pathloss_exponent=float(_pop(d, "pathloss_exponent", 4.0)),
    )
    _no_leftovers(d, "placement")
    return placement


def _parse_estimator(doc: dict) -> EstimatorDoc:
    d = dict(doc)
    est = EstimatorDoc(
        backend=str(_pop(d, "backend", "quadrature")),
        mc_samples=int(_pop(d, "mc_samples", 1_000_000)),
        tol=float(_pop(d, "tol", 1e-9)),
    )
    _no_leftovers(d, "estimator")
    if est.backend not in ("quadrature", "mc"):
        raise ConfigError("estimator.backend", f"unknown backend {est.backend!r}")
    return est


def load_scenario(path) -> ScenarioConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "scenario file must be a mapping")
    d = dict(raw)
    network = _parse_network(_pop(d, "network", required=True))
    cfg = ScenarioConfig(network=network, seed=int(_pop(d, "seed", 0)))
    if (control := _pop(d, "control")) is not None:
        cfg.control = _parse_control(control)
    if (qos := _pop(d, "qos")) is not None:
        cfg.qos = _parse_qos(qos, network.n_sources)
    if (fixed := _pop(d, "fixed_rates")) is not None:
        cfg.fixed_rates = _parse_fixed_rates(fixed)
    if (sim := _pop(d, "sim")) is not None:
        cfg.sim = _parse_sim(sim)
    if (sweep := _pop(d, "sweep")) is not None:
        cfg.sweep = _parse_sweep(sweep)
    if (region := _pop(d, "region")) is not None:
        cfg.region = _parse_region(region)
    if (placement := _pop(d, "placement")) is not None:
        cfg.placement = _parse_placement(placement)
    if (est := _pop(d, "estimator")) is not None:
        cfg.estimator = _parse_estimator(est)
    _no_leftovers(d, "<root>")
    return cfg
