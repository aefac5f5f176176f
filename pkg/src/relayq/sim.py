"""Seeded discrete-time fluid simulation of the four-buffer relay network.

Each block: the two source buffers receive their constant arrivals and drain
at the multiple-access phase service; what departs a source buffer arrives at
the matching relay buffer within the same block (multiple access precedes
broadcast inside a block) and the relay buffers drain at the broadcast-phase
service.  Queues are real-valued bits.  Overflow probabilities are long-run
time averages after a warmup, with replications supplying error bars.

The Lindley recursion is evaluated in closed form: with net increments
u_t = arrival - service, Q_t = X_t - min(0, min_{k<=t} X_k) where X is the
running sum of u, which keeps every replication a handful of vectorized
passes over the block axis.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .arq import FixedRates, bc_decode_states, mac_decode_states
from .channel import NetworkParams, RayleighSampler
from .qos import QosExponents
from .rates import ControlParams, bc_rates, mac_rates_timeshared

BUFFER_LABELS = ("source-1", "source-2", "relay-1", "relay-2")

VARIABLE_RATE = "variable-rate"
FIXED_RATE = "fixed-rate"

FIT_MIN_EVENTS = 100
FIT_SKIP_FRACTION = 0.10
FIT_MIN_POINTS = 4


class UnusableFitError(RuntimeError):
    """Too few usable thresholds to fit a decay slope."""


@dataclass(frozen=True)
class SimConfig:
    n_blocks: int
    n_reps: int
    warmup: int
    thresholds: tuple[float, ...]
    arrival_rates: tuple[float, ...]
    mode: str
    seed: int = 0
    fixed_rates: FixedRates | None = None

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(q) for q in self.thresholds))
        object.__setattr__(self, "arrival_rates", tuple(float(a) for a in self.arrival_rates))
        if self.mode not in (VARIABLE_RATE, FIXED_RATE):
            raise ValueError(f"mode must be {VARIABLE_RATE!r} or {FIXED_RATE!r}")
        if self.mode == FIXED_RATE and self.fixed_rates is None:
            raise ValueError("fixed-rate mode needs fixed_rates")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])) or not self.thresholds:
            raise ValueError("thresholds must be strictly increasing and nonempty")
        if not 0 <= self.warmup < self.n_blocks:
            raise ValueError("warmup must be < n_blocks")
        if self.n_reps < 1:
            raise ValueError("need at least one replication")
        if any(a < 0 for a in self.arrival_rates):
            raise ValueError("arrival rates must be nonnegative")


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    fit_range: tuple[int, ...]  # threshold indices that entered the fit


@dataclass
class SimResult:
    buffers: tuple[str, ...]
    thresholds: tuple[float, ...]
    overflow_prob: np.ndarray   # (n_buffers, n_thresholds), mean over reps
    overflow_se: np.ndarray     # std error over reps
    event_counts: np.ndarray    # total overflow events across reps
    fits: dict = field(default_factory=dict)          # label -> SlopeFit or None
    final_queues: np.ndarray | None = None            # (n_buffers, n_reps)
    total_src_departures: np.ndarray | None = None    # (2, n_reps)
    total_relay_arrivals: np.ndarray | None = None    # (2, n_reps)


def _lindley(increments: np.ndarray) -> np.ndarray:
    """Queue trajectory from net increments, starting empty."""
    x = np.cumsum(increments)
    floor = np.minimum(np.minimum.accumulate(x), 0.0)
    return x - floor


def _count_at_least(q: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Number of entries of q that are >= each threshold."""
    edges = np.concatenate(([-np.inf], thresholds, [np.inf]))
    hist, _ = np.histogram(q, bins=edges)
    return np.cumsum(hist[::-1])[::-1][1:]


def _one_replication(params: NetworkParams, ctrl: ControlParams, cfg: SimConfig, rep: int):
    sampler = RayleighSampler(params, cfg.seed)
    z, w = sampler.sample(cfg.n_blocks, stream=rep)
    if cfg.mode == VARIABLE_RATE:
        src_service = ctrl.tau * mac_rates_timeshared(params, z, ctrl.delta)
        rel_service = (1.0 - ctrl.tau) * bc_rates(params, w, ctrl.rho)
    else:
        on1, on2 = mac_decode_states(params, cfg.fixed_rates, ctrl.tau, z)
        on3, on4 = bc_decode_states(params, cfg.fixed_rates, ctrl.rho[0], ctrl.tau, w)
        r = cfg.fixed_rates
        src_service = np.stack([r.r_src[0] * on1, r.r_src[1] * on2], axis=1)
        rel_service = np.stack([r.r_dst[0] * on3, r.r_dst[1] * on4], axis=1)

    thresholds = np.asarray(cfg.thresholds)
    n_thr = len(thresholds)
    probs = np.empty((4, n_thr))
    counts = np.empty((4, n_thr), dtype=np.int64)
    finals = np.empty(4)
    dep_src = np.empty(2)
    arr_rel = np.empty(2)
    kept = cfg.n_blocks - cfg.warmup
    for j in range(2):
        q_src = _lindley(cfg.arrival_rates[j] - src_service[:, j])
        departures = cfg.arrival_rates[j] - np.diff(q_src, prepend=0.0)
        dep_src[j] = departures.sum()
        arr_rel[j] = dep_src[j]  # same-block store and forward
        q_rel = _lindley(departures - rel_service[:, j])
        for row, q in ((j, q_src), (j + 2, q_rel)):
            c = _count_at_least(q[cfg.warmup:], thresholds)
            counts[row] = c
            probs[row] = c / kept
        finals[j], finals[j + 2] = q_src[-1], q_rel[-1]
    return probs, counts, finals, dep_src, arr_rel


def simulate_queues(
    params: NetworkParams, ctrl: ControlParams, cfg: SimConfig, workers: int = 1
) -> SimResult:
    """Run all replications and aggregate overflow curves and decay fits.

    Replication i always uses sub-stream i of the seed, so the result is
    identical for any worker count; workers only bound concurrency.
    """
    if params.n_sources != 2:
        raise ValueError("the queue simulator models the two-pair network")
    n_thr = len(cfg.thresholds)
    probs = np.empty((cfg.n_reps, 4, n_thr))
    counts = np.zeros((4, n_thr), dtype=np.int64)
    finals = np.empty((4, cfg.n_reps))
    dep_src = np.empty((2, cfg.n_reps))
    arr_rel = np.empty((2, cfg.n_reps))

    def run(rep: int):
        p, c, f, d, a = _one_replication(params, ctrl, cfg, rep)
        probs[rep] = p
        finals[:, rep] = f
        dep_src[:, rep] = d
        arr_rel[:, rep] = a
        return c

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for c in pool.map(run, range(cfg.n_reps)):
                counts += c
    else:
        for rep in range(cfg.n_reps):
            counts += run(rep)

    mean = probs.mean(axis=0)
    if cfg.n_reps > 1:
        se = probs.std(axis=0, ddof=1) / math.sqrt(cfg.n_reps)
    else:
        se = np.zeros_like(mean)

    result = SimResult(
        buffers=BUFFER_LABELS,
        thresholds=cfg.thresholds,
        overflow_prob=mean,
        overflow_se=se,
        event_counts=counts,
        final_queues=finals,
        total_src_departures=dep_src,
        total_relay_arrivals=arr_rel,
    )
    for i, label in enumerate(BUFFER_LABELS):
        try:
            result.fits[label] = fit_slope(cfg.thresholds, mean[i], counts[i])
        except UnusableFitError:
            result.fits[label] = None
    return result


def fit_slope(
    thresholds,
    probs,
    event_counts,
    min_events: int = FIT_MIN_EVENTS,
    skip_fraction: float = FIT_SKIP_FRACTION,
) -> SlopeFit:
    """Least-squares decay fit of log P(Q >= q) against q.

    Thresholds with fewer than ``min_events`` observed overflows are dropped
    (tail noise), as is the smallest ``skip_fraction`` of the grid
    (pre-asymptotic region).  Fewer than four surviving points is an error.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    probs = np.asarray(probs, dtype=float)
    event_counts = np.asarray(event_counts)
    skip = math.ceil(skip_fraction * len(thresholds))
    usable = (event_counts >= min_events) & (probs > 0.0)
    usable[:skip] = False
    idx = np.flatnonzero(usable)
    if len(idx) < FIT_MIN_POINTS:
        raise UnusableFitError(
            f"only {len(idx)} usable thresholds (need {FIT_MIN_POINTS}); "
            "grid too sparse or queue too short"
        )
    slope, intercept = np.polyfit(thresholds[idx], np.log(probs[idx]), 1)
    return SlopeFit(slope=float(slope), intercept=float(intercept), fit_range=tuple(int(i) for i in idx))


BINDING = "binding"
SLACK = "slack"
DEFICIT = "deficit"


def bottleneck_report(result: SimResult, qos: QosExponents, rel_tol: float = 0.15) -> dict:
    """Classify each buffer against its required QoS exponent.

    binding: fitted |slope| within rel_tol of the requirement; slack: decays
    faster than required (margin reported); deficit: decays slower, meaning
    the constraint is violated.  Buffers without a usable fit map to None.
    """
    required = {
        "source-1": qos.theta_src[0],
        "source-2": qos.theta_src[1],
        "relay-1": qos.theta_relay,
        "relay-2": qos.theta_relay,
    }
    report = {}
    for label in result.buffers:
        fit = result.fits.get(label)
        if fit is None:
            report[label] = None
            continue
        theta_hat = abs(fit.slope)
        theta_req = required[label]
        margin = theta_hat / theta_req - 1.0
        if abs(margin) <= rel_tol:
            verdict = BINDING
        elif margin > 0:
            verdict = SLACK
        else:
            verdict = DEFICIT
        report[label] = {"verdict": verdict, "fitted": theta_hat, "required": theta_req,
                         "margin": margin}
    return report


def write_overflow_csv(result: SimResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["buffer", "threshold", "prob", "std_err"])
        for i, label in enumerate(result.buffers):
            for k, q in enumerate(result.thresholds):
                writer.writerow([label, repr(float(q)), repr(float(result.overflow_prob[i, k])),
                                 repr(float(result.overflow_se[i, k]))])


def write_fit_csv(result: SimResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["buffer", "slope", "intercept", "n_points"])
        for label in result.buffers:
            fit = result.fits.get(label)
            if fit is None:
                writer.writerow([label, "", "", 0])
            else:
                writer.writerow([label, repr(fit.slope), repr(fit.intercept), len(fit.fit_range)])
