"""Stability checks and maximum supportable constant arrival rates.

The headline quantity is, per stream j, the largest constant arrival rate
whose buffer-overflow tails decay at least as fast as required both at the
source (exponent theta_j) and at the relay (exponent theta_r).  It is the
minimum of a source-side effective capacity and a relay-side term whose form
depends on the ordering of the exponents:

    theta_r <= theta_j:
        min( -(1/theta_j) log E{e^{-theta_j tau R_src}},
             -(1/theta_r) log E{e^{-theta_r (1-tau) R_dst}} )
    theta_r >  theta_j:
        min( -(1/theta_j) log E{e^{-theta_j tau R_src}},
             -(1/theta_j) [ log E{e^{-theta_r (1-tau) R_dst}}
                            + log E{e^{(theta_r-theta_j) tau R_src}} ] )

The fixed-rate variant substitutes the ON-OFF closed forms; the full-duplex
variant drops the tau scaling and splits into three cases with auxiliary
exponents found by root bracketing and bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .arq import FixedRates, OnOffProbs
from .channel import NetworkParams
from .qos import QosExponents, lmgf_onoff
from .rates import ControlParams

SOURCE_QUEUE = "source-queue"
RELAY_QUEUE = "relay-queue"
UNSTABLE = "unstable"

THETA_LO = 1e-6
THETA_HI = 1e3
BISECT_TOL = 1e-8


@dataclass(frozen=True)
class ThroughputResult:
    """Per-source maximum constant arrival rates with their binding queues."""

    arrival_rates: tuple[float, ...]
    bottleneck: tuple[str, ...]
    stable: bool


@dataclass(frozen=True)
class FdThroughputCase:
    """Which full-duplex throughput case applied per stream, with any auxiliary roots."""

    case_id: tuple[str, ...]
    theta_bar: tuple[float | None, ...]
    theta_star: tuple[float | None, ...]

    def __post_init__(self):
        for t in self.theta_bar + self.theta_star:
            if t is not None and not (t > 0 or math.isinf(t)):
                raise ValueError("auxiliary exponents must be positive when present")


class RootBracketError(RuntimeError):
    """A defining equation had no sign change in the searched exponent range."""


# ---------------------------------------------------------------------------
# variable rate (half duplex)
# ---------------------------------------------------------------------------

def stability_check_variable(params: NetworkParams, ctrl: ControlParams, backend):
    """Mean-rate stability of every relay buffer: tau E{R_src} <= (1-tau) E{R_dst}.

    Returns (stable, margins) with margin_j = (1-tau) E{R_dst_j} - tau E{R_src_j}.
    """
    if ctrl.tau is None:
        raise ValueError("variable-rate stability needs tau; use fd_stability_check for full duplex")
    margins = tuple(
        (1.0 - ctrl.tau) * backend.bc_mean(params, ctrl, j)
        - ctrl.tau * backend.mac_mean(params, ctrl, j)
        for j in range(params.n_sources)
    )
    return all(m >= 0.0 for m in margins), margins


def throughput_variable(
    params: NetworkParams, ctrl: ControlParams, qos: QosExponents, backend
) -> ThroughputResult:
    """Maximum constant arrival rates for the variable-rate half-duplex scheme."""
    n = params.n_sources
    if len(qos.theta_src) != n:
        raise ValueError("need one source QoS exponent per source")
    stable, _ = stability_check_variable(params, ctrl, backend)
    if not stable:
        return ThroughputResult((0.0,) * n, (UNSTABLE,) * n, False)
    tau, theta_r = ctrl.tau, qos.theta_relay
    rates, tags = [], []
    for j in range(n):
        theta_j = qos.theta_src[j]
        t_src = -backend.mac_lmgf(params, ctrl, j, -theta_j * tau) / theta_j
        log_bc = backend.bc_lmgf(params, ctrl, j, -theta_r * (1.0 - tau))
        if theta_r <= theta_j:
            t_rel = -log_bc / theta_r
        else:
            log_extra = backend.mac_lmgf(params, ctrl, j, (theta_r - theta_j) * tau)
            t_rel = -(log_bc + log_extra) / theta_j
        rate, tag = _pick_min(t_src, t_rel)
        rates.append(rate)
        tags.append(tag)
    return ThroughputResult(tuple(rates), tuple(tags), True)


def _pick_min(t_src: float, t_rel: float) -> tuple[float, str]:
    # ties go to the source queue; a negative value means the relay constraint
    # admits no positive constant arrival, so the supportable rate is zero
    if t_src <= t_rel:
        return max(t_src, 0.0), SOURCE_QUEUE
    return max(t_rel, 0.0), RELAY_QUEUE


# ---------------------------------------------------------------------------
# fixed rate (ARQ)
# ---------------------------------------------------------------------------

def fixed_stability_margins(rates: FixedRates, probs: OnOffProbs) -> tuple[float, float]:
    """Per-stream slack of the relay buffers: r_dst_j P_{bc,j} - r_src_j P_{src,j}."""
    p1, p2 = probs.p_src_on
    p3, p4 = probs.p_bc_on
    return (
        rates.r_dst[0] * p3 - rates.r_src[0] * p1,
        rates.r_dst[1] * p4 - rates.r_src[1] * p2,
    )


def stability_check_fixed(rates: FixedRates, probs: OnOffProbs) -> bool:
    """Mean-rate stability of the relay buffers under the ON-OFF model."""
    return all(m >= 0.0 for m in fixed_stability_margins(rates, probs))


def throughput_fixed(
    rates: FixedRates, probs: OnOffProbs, qos: QosExponents
) -> ThroughputResult:
    """Maximum constant arrival rates for the fixed-rate ARQ scheme (closed form)."""
    if len(qos.theta_src) != 2:
        raise ValueError("fixed-rate scheme is defined for two streams")
    if not stability_check_fixed(rates, probs):
        return ThroughputResult((0.0, 0.0), (UNSTABLE, UNSTABLE), False)
    theta_r = qos.theta_relay
    p_src = probs.p_src_on
    p_bc = probs.p_bc_on
    out_rates, tags = [], []
    for j in range(2):
        theta_j = qos.theta_src[j]
        r_s, r_d = rates.r_src[j], rates.r_dst[j]
        t_src = -lmgf_onoff(r_s, p_src[j], -theta_j) / theta_j
        if theta_r <= theta_j:
            t_rel = -lmgf_onoff(r_d, p_bc[j], -theta_r) / theta_r
        else:
            t_rel = -(
                lmgf_onoff(r_d, p_bc[j], -theta_r)
                + lmgf_onoff(r_s, p_src[j], theta_r - theta_j)
            ) / theta_j
        rate, tag = _pick_min(t_src, t_rel)
        out_rates.append(rate)
        tags.append(tag)
    return ThroughputResult(tuple(out_rates), tuple(tags), True)


# ---------------------------------------------------------------------------
# full duplex
# ---------------------------------------------------------------------------

def fd_stability_check(params: NetworkParams, ctrl: ControlParams, backend):
    """Full-duplex relay stability: E{R_src_j} <= E{R_dst_j} per stream."""
    margins = tuple(
        backend.bc_mean(params, ctrl, j) - backend.mac_mean(params, ctrl, j)
        for j in range(params.n_sources)
    )
    return all(m >= 0.0 for m in margins), margins


def _bisect(f, lo: float, hi: float, f_lo: float, tol: float = BISECT_TOL) -> float:
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (f(mid) < 0.0) == (f_lo < 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _smallest_root_scan(f, lo: float, hi: float, n_grid: int = 400) -> float:
    """First sign change of f on a log-spaced grid, refined by bisection."""
    grid = [lo * (hi / lo) ** (i / (n_grid - 1)) for i in range(n_grid)]
    prev_x, prev_v = grid[0], f(grid[0])
    for x in grid[1:]:
        v = f(x)
        if v == 0.0:
            return x
        if (v < 0.0) != (prev_v < 0.0):
            return _bisect(f, prev_x, x, prev_v)
        prev_x, prev_v = x, v
    raise RootBracketError(
        f"no sign change of the fixed-point equation in theta range ({lo:g}, {hi:g})"
    )


def throughput_fullduplex(
    params: NetworkParams, ctrl: ControlParams, qos: QosExponents, backend
) -> tuple[ThroughputResult, FdThroughputCase]:
    """Maximum constant arrival rates with a full-duplex relay.

    Sources transmit continuously with power backoff alpha and the relay
    broadcasts continuously, so no rate carries a time-share factor.  The
    characterization splits on the exponent ordering; the auxiliary exponents
    theta_bar and theta_star are located by bracketing plus bisection on the
    defining equations, scanning a log-spaced grid for the smallest root
    where several can exist.
    """
    if ctrl.tau is not None:
        raise ValueError("full-duplex mode has no tau; build ControlParams with tau=None")
    if ctrl.alpha is None:
        raise ValueError("full-duplex mode requires alpha")
    n = params.n_sources
    stable, _ = fd_stability_check(params, ctrl, backend)
    if not stable:
        return (
            ThroughputResult((0.0,) * n, (UNSTABLE,) * n, False),
            FdThroughputCase(("unstable",) * n, (None,) * n, (None,) * n),
        )

    theta_r = qos.theta_relay
    rates, tags, case_ids, theta_bars, theta_stars = [], [], [], [], []
    for j in range(n):
        theta_j = qos.theta_src[j]
        mac_l = lambda s: backend.mac_lmgf(params, ctrl, j, s)
        bc_l = lambda s: backend.bc_lmgf(params, ctrl, j, s)
        ec_src = -mac_l(-theta_j) / theta_j
        theta_bar = theta_star = None

        if theta_j >= theta_r:
            case = "1"
            rate, tag = _pick_min(ec_src, -bc_l(-theta_r) / theta_r)
        else:
            theta_bar = _find_theta_bar(mac_l, bc_l, theta_j)
            if theta_r <= theta_bar:
                case = "2"
                rate, tag = max(ec_src, 0.0), SOURCE_QUEUE
            else:
                ec_rel_service = -bc_l(-theta_r) / theta_r
                if ec_rel_service >= -mac_l(-theta_r) / theta_r:
                    case = "3a"
                    rhs = bc_l(-theta_r)
                    theta_star = _smallest_root_scan(
                        lambda t: mac_l(-t) - mac_l(theta_r - t) - rhs, THETA_LO, THETA_HI
                    )
                    rate, tag = max(-mac_l(-theta_star) / theta_star, 0.0), RELAY_QUEUE
                elif ec_rel_service >= 0.0:
                    # inf of the source rate is zero under Rayleigh fading, so
                    # this branch is reached whenever (a) fails
                    case = "3b"
                    f = lambda t: -mac_l(-t) / t - ec_rel_service
                    lo, f_lo = theta_r, f(theta_r)
                    hi = theta_r * 2.0
                    while f(hi) * f_lo > 0.0 and hi < THETA_HI:
                        lo, f_lo = hi, f(hi)
                        hi *= 2.0
                    if f(hi) * f_lo > 0.0:
                        raise RootBracketError(
                            f"effective-capacity match equation not bracketed below theta={THETA_HI:g}"
                        )
                    theta_star = _bisect(f, lo, hi, f_lo)
                    rate, tag = max(-mac_l(-theta_star) / theta_star, 0.0), RELAY_QUEUE
                else:
                    case = "3c"
                    rate, tag = max(ec_rel_service, 0.0), RELAY_QUEUE
        rates.append(rate)
        tags.append(tag)
        case_ids.append(case)
        theta_bars.append(theta_bar)
        theta_stars.append(theta_star)
    return (
        ThroughputResult(tuple(rates), tuple(tags), True),
        FdThroughputCase(tuple(case_ids), tuple(theta_bars), tuple(theta_stars)),
    )


def _find_theta_bar(mac_l, bc_l, theta_j: float) -> float:
    """Root of  mac_l(-theta_j) = bc_l(-theta) + mac_l(theta - theta_j)  for theta >= theta_j.

    Returns theta_j when the source side is already the binding one there (no
    root above theta_j) and +inf when the relay side stays slack over the
    whole searched range.
    """
    lhs = mac_l(-theta_j)
    g = lambda t: lhs - bc_l(-t) - mac_l(t - theta_j)
    g_lo = g(theta_j)
    if g_lo <= 0.0:
        return theta_j
    lo, hi = theta_j, max(2.0 * theta_j, 1e-3)
    while g(hi) > 0.0:
        lo = hi
        hi *= 2.0
        if hi > THETA_HI:
            return math.inf
    return _bisect(g, lo, hi, g_lo)
