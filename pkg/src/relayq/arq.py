"""ON-OFF link-state model for fixed-rate transmission with ARQ.

Without transmitter CSI every link either delivers its fixed rate (the rate
is at or below the instantaneous capacity of the decoding step that applies)
or delivers nothing and the packet is retransmitted.  The multiple-access
phase has four joint outcomes driven by the relay's sequential decoding
procedure; the broadcast phase reduces to per-destination threshold tests on
the own-channel power.  Everything is computed twice: closed form plus a
one-dimensional adaptive integral, and an independent Monte Carlo oracle
that simulates the decoding procedure verbatim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .channel import NetworkParams, RayleighSampler
from .qos import QuadratureError

PROB_TOL = 1e-9
QUAD_ABS_TOL = 1e-9
TAIL_CUT = 700.0  # exp(-700) is ~1e-304; beyond this the exponential weight is gone


@dataclass(frozen=True)
class FixedRates:
    """Fixed transmission rates per link: sources to relay, relay to destinations."""

    r_src: tuple[float, ...]
    r_dst: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "r_src", tuple(float(r) for r in self.r_src))
        object.__setattr__(self, "r_dst", tuple(float(r) for r in self.r_dst))
        if len(self.r_src) != len(self.r_dst):
            raise ValueError("r_src and r_dst must have equal length")
        if any(r <= 0 for r in self.r_src + self.r_dst):
            raise ValueError("fixed rates must be strictly positive")


@dataclass(frozen=True)
class OnOffProbs:
    """Link-state probabilities of the fixed-rate scheme.

    p_mac_case holds the four joint multiple-access outcomes (neither
    decoded, only source 1, only source 2, both); p_bc_on holds the ON
    probabilities of the two broadcast links when known.  The per-source ON
    probabilities follow from the cases: P1 = PM2 + PM4, P2 = PM3 + PM4.
    """

    p_mac_case: tuple[float, float, float, float]
    p_bc_on: tuple[float, float] | None = None

    def __post_init__(self):
        pm = tuple(float(p) for p in self.p_mac_case)
        # the residual case can come out a hair negative from float arithmetic
        pm = tuple(0.0 if -PROB_TOL < p < 0.0 else p for p in pm)
        object.__setattr__(self, "p_mac_case", pm)
        if any(not 0.0 <= p <= 1.0 + PROB_TOL for p in pm):
            raise ValueError(f"case probabilities outside [0, 1]: {pm}")
        if abs(sum(pm) - 1.0) > PROB_TOL:
            raise ValueError(f"case probabilities must sum to 1, got {sum(pm)!r}")
        if self.p_bc_on is not None:
            pb = tuple(float(p) for p in self.p_bc_on)
            object.__setattr__(self, "p_bc_on", pb)
            if any(not 0.0 <= p <= 1.0 for p in pb):
                raise ValueError(f"broadcast ON probabilities outside [0, 1]: {pb}")

    @property
    def p_src_on(self) -> tuple[float, float]:
        pm = self.p_mac_case
        return pm[1] + pm[3], pm[2] + pm[3]

    @property
    def p_on(self) -> tuple[float, float, float, float]:
        if self.p_bc_on is None:
            raise ValueError("broadcast ON probabilities not set")
        return self.p_src_on + self.p_bc_on


def _pow2(exponent: float) -> float:
    # 2^x saturates to +inf instead of raising once x exceeds the float range
    # (reached when a phase's time share collapses toward zero)
    return math.inf if exponent > 1020.0 else 2.0 ** exponent


def mac_decode_thresholds(rates: FixedRates, tau: float, bandwidth: float = 1.0) -> tuple[float, float]:
    """SINR thresholds for decoding in the multiple-access phase.

    Success needs r <= tau B log2(1 + SINR), so the threshold is
    beta_j = 2^{r_j / (tau B)} - 1.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie strictly inside (0, 1)")
    return (
        _pow2(rates.r_src[0] / (tau * bandwidth)) - 1.0,
        _pow2(rates.r_src[1] / (tau * bandwidth)) - 1.0,
    )


def _mac_pair_probs(s1, s2, mz1, mz2, beta1, beta2):
    """Joint MAC case probabilities over exponential (z1, z2).

    Only-source-1 and only-source-2 regions integrate in closed form; the
    neither-decoded region keeps one adaptive 1-D integral over z2 (adaptive
    Gauss-Kronrod, absolute tolerance 1e-9).
    """
    # case "only S1": z1 >= beta1 (1 + s2 z2)/s1 and s2 z2 < beta2
    k = beta1 * s2 / (s1 * mz1) + 1.0 / mz2
    pm2 = np.exp(-beta1 / (s1 * mz1)) * (1.0 - np.exp(-k * beta2 / s2)) / (mz2 * k)
    # case "only S2", symmetric
    k3 = beta2 * s1 / (s2 * mz2) + 1.0 / mz1
    pm3 = np.exp(-beta2 / (s2 * mz2)) * (1.0 - np.exp(-k3 * beta1 / s1)) / (mz1 * k3)

    # case "neither": (s2 z2/beta2 - 1)/s1 < z1 < beta1 (1 + s2 z2)/s1; the z2
    # band is finite only when beta1*beta2 < 1
    if beta1 * beta2 < 1.0:
        z2_hi = beta2 * (1.0 + beta1) / (s2 * (1.0 - beta1 * beta2))
    else:
        z2_hi = np.inf
    z2_hi = min(z2_hi, TAIL_CUT * mz2)

    def inner(z2):
        lo = max(0.0, (s2 * z2 / beta2 - 1.0) / s1)
        hi = beta1 * (1.0 + s2 * z2) / s1
        if hi <= lo:
            return 0.0
        return (np.exp(-lo / mz1) - np.exp(-hi / mz1)) * np.exp(-z2 / mz2) / mz2

    pm1, abserr = integrate.quad(inner, 0.0, z2_hi, epsabs=QUAD_ABS_TOL / 10, epsrel=1e-12, limit=500)
    if abserr > QUAD_ABS_TOL:
        raise QuadratureError("MAC case-1 integral did not reach tolerance", abserr)
    pm4 = 1.0 - pm1 - pm2 - pm3
    return float(pm1), float(pm2), float(pm3), float(pm4)


def mac_state_probs(
    params: NetworkParams,
    rates: FixedRates,
    tau: float,
    method: str = "quadrature",
    n: int = 1_000_000,
    seed: int = 0,
) -> OnOffProbs:
    """Multiple-access case probabilities, by quadrature or Monte Carlo."""
    if method == "quadrature":
        beta1, beta2 = mac_decode_thresholds(rates, tau, params.bandwidth)
        pm = _mac_pair_probs(
            params.snr_sources[0], params.snr_sources[1],
            params.mean_z[0], params.mean_z[1], beta1, beta2,
        )
        return OnOffProbs(p_mac_case=pm)
    if method == "mc":
        return mac_state_mc_oracle(params, rates, tau, n, seed)
    raise ValueError(f"unknown method {method!r}")


def mac_decode_states(params: NetworkParams, rates: FixedRates, tau: float, z, start_with: int = 0):
    """Per-block ON flags of the two source-relay links under sequential decoding.

    Mirrors the relay procedure: decode one source treating the other as
    noise; on success cancel it and decode the second cleanly; on failure try
    the other source with interference, then the first cleanly.
    ``start_with`` picks which source is attempted first.
    """
    z = np.asarray(z, dtype=float)
    b = params.bandwidth
    s = params.snr_sources
    r = rates.r_src
    i, k = (0, 1) if start_with == 0 else (1, 0)
    cap_i_intf = tau * b * np.log2(1.0 + s[i] * z[..., i] / (1.0 + s[k] * z[..., k]))
    cap_k_intf = tau * b * np.log2(1.0 + s[k] * z[..., k] / (1.0 + s[i] * z[..., i]))
    cap_i_clean = tau * b * np.log2(1.0 + s[i] * z[..., i])
    cap_k_clean = tau * b * np.log2(1.0 + s[k] * z[..., k])
    first_ok = r[i] <= cap_i_intf
    # if the first decode succeeds, the second is attempted interference free;
    # otherwise roles swap, and the first is retried clean after cancellation
    on_i = np.where(first_ok, True, (r[k] <= cap_k_intf) & (r[i] <= cap_i_clean))
    on_k = np.where(first_ok, r[k] <= cap_k_clean, r[k] <= cap_k_intf)
    return (on_i, on_k) if start_with == 0 else (on_k, on_i)


def mac_state_mc_oracle(
    params: NetworkParams,
    rates: FixedRates,
    tau: float,
    n: int = 10_000_000,
    seed: int = 0,
    check_mirrored: bool = True,
) -> OnOffProbs:
    """Simulate the decoding procedure on sampled fading and count the cases.

    Also runs the mirrored procedure (start with source 2) on the same
    samples; the resulting link states must coincide, which is asserted here
    rather than merely compared.
    """
    z, _ = RayleighSampler(params, seed).sample(n)
    on1, on2 = mac_decode_states(params, rates, tau, z, start_with=0)
    if check_mirrored:
        m1, m2 = mac_decode_states(params, rates, tau, z, start_with=1)
        if not (np.array_equal(on1, m1) and np.array_equal(on2, m2)):
            raise AssertionError("mirrored decoding start changed the link states")
    pm1 = float(np.mean(~on1 & ~on2))
    pm2 = float(np.mean(on1 & ~on2))
    pm3 = float(np.mean(~on1 & on2))
    pm4 = 1.0 - pm1 - pm2 - pm3
    return OnOffProbs(p_mac_case=(pm1, pm2, pm3, pm4))


def _bc_thresholds(params: NetworkParams, rates: FixedRates, rho: float, tau: float):
    """Own-channel power thresholds for the two broadcast links.

    prc/prd are 2^{r/((1-tau)B)} for the two fixed rates.  For destination 1:
    a1 gates direct decoding with interference, a2 interference-free
    decoding, a3 decoding the other message first; b1..b3 mirror them for
    destination 2.  A nonpositive denominator means the condition cannot be
    met at any fading level, which the sign-based branch split encodes.
    """
    b = params.bandwidth
    sr = params.snr_relay
    prc = _pow2(rates.r_dst[0] / ((1.0 - tau) * b))
    prd = _pow2(rates.r_dst[1] / ((1.0 - tau) * b))

    def ratio(num, den):
        if den == 0.0:
            return math.inf
        if math.isinf(num):
            # an unreachable rate: the clean-decode threshold is +inf and a
            # negative denominator keeps the unsatisfiable-branch semantics
            return math.inf if den > 0 else -math.inf
        return num / den

    a1 = ratio(prc - 1.0, sr * (1.0 - (1.0 - rho) * prc))
    a2 = (prc - 1.0) / (sr * rho)
    a3 = ratio(prd - 1.0, sr * (1.0 - rho * prd))
    b1 = ratio(prd - 1.0, sr * (1.0 - rho * prd))
    b2 = (prd - 1.0) / (sr * (1.0 - rho))
    b3 = ratio(prc - 1.0, sr * (1.0 - (1.0 - rho) * prc))
    return (a1, a2, a3), (b1, b2, b3)


def _on_prob_from_thresholds(t1: float, t2: float, t3: float, mean_w: float) -> float:
    """Three-branch ON probability of a broadcast link from its thresholds."""
    def tail(x):
        return float(np.exp(-x / mean_w)) if x > 0 else 1.0

    if t1 < 0 and t3 < 0:
        return 0.0
    if (t1 > 0 and t3 < 0) or (t3 > t1 > 0):
        return tail(t1)
    return tail(max(t2, t3))


def bc_on_probs(
    params: NetworkParams,
    rates: FixedRates,
    rho: float,
    tau: float,
    method: str = "closed-form",
    n: int = 1_000_000,
    seed: int = 0,
) -> tuple[float, float]:
    """ON probabilities (P3, P4) of the two broadcast links."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie strictly inside (0, 1)")
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie strictly inside (0, 1)")
    if method == "closed-form":
        (a1, a2, a3), (b1, b2, b3) = _bc_thresholds(params, rates, rho, tau)
        p3 = _on_prob_from_thresholds(a1, a2, a3, params.mean_w[0])
        p4 = _on_prob_from_thresholds(b1, b2, b3, params.mean_w[1])
        return p3, p4
    if method == "mc":
        return bc_on_mc_oracle(params, rates, rho, tau, n, seed)
    raise ValueError(f"unknown method {method!r}")


def bc_decode_states(params: NetworkParams, rates: FixedRates, rho: float, tau: float, w):
    """Per-block ON flags of the two relay-destination links.

    A destination is ON if it decodes its own message treating the other as
    noise, or failing that, decodes the other message first, cancels it, and
    then decodes its own message cleanly.
    """
    w = np.asarray(w, dtype=float)
    b = params.bandwidth
    sr = params.snr_relay
    out = []
    for j, (p_own, p_oth) in enumerate([(rho, 1.0 - rho), (1.0 - rho, rho)]):
        wj = w[..., j]
        r_own, r_oth = rates.r_dst[j], rates.r_dst[1 - j]
        cap_own_intf = (1.0 - tau) * b * np.log2(1.0 + p_own * sr * wj / (1.0 + p_oth * sr * wj))
        cap_oth_intf = (1.0 - tau) * b * np.log2(1.0 + p_oth * sr * wj / (1.0 + p_own * sr * wj))
        cap_own_clean = (1.0 - tau) * b * np.log2(1.0 + p_own * sr * wj)
        direct = r_own <= cap_own_intf
        via_sic = (r_oth <= cap_oth_intf) & (r_own <= cap_own_clean)
        out.append(direct | via_sic)
    return out[0], out[1]


def bc_on_mc_oracle(
    params: NetworkParams,
    rates: FixedRates,
    rho: float,
    tau: float,
    n: int = 10_000_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo estimate of (P3, P4) from the decoding procedure."""
    _, w = RayleighSampler(params, seed).sample(n)
    on3, on4 = bc_decode_states(params, rates, rho, tau, w)
    return float(on3.mean()), float(on4.mean())


def all_state_probs(
    params: NetworkParams,
    rates: FixedRates,
    tau: float,
    rho: float,
    method: str = "quadrature",
    n: int = 1_000_000,
    seed: int = 0,
) -> OnOffProbs:
    """Complete ON-OFF description: MAC cases plus broadcast ON probabilities."""
    mac = mac_state_probs(params, rates, tau, method="quadrature" if method == "quadrature" else "mc",
                          n=n, seed=seed)
    bc = bc_on_probs(params, rates, rho, tau,
                     method="closed-form" if method == "quadrature" else "mc", n=n, seed=seed + 1)
    return OnOffProbs(p_mac_case=mac.p_mac_case, p_bc_on=bc)
