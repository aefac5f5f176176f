"""Instantaneous link rates for every transmission mode.

All functions are pure maps from a fading sample and control parameters to
rates.  Multiple-access rates depend on the successive-decoding order at the
relay (later-decoded sources see less interference); broadcast rates depend
on the power split and on which destination has the stronger channel.  Rates
use log base 2 throughout; fading arguments may be scalars or arrays of
blocks (vectorized along the leading axis).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import NetworkParams

SIMPLEX_TOL = 1e-12
MAX_FULL_TIMESHARE_SOURCES = 6


@dataclass(frozen=True)
class ControlParams:
    """The three transmission knobs, plus the full-duplex power backoff.

    tau      fraction of each block given to the multiple-access phase
             (None in full-duplex mode, where there is no phase split)
    rho      relay power shares per destination; scalar rho means (rho, 1-rho)
    delta    time shares over the decoding orders, in lexicographic order of
             the permutations; scalar delta means (delta, 1-delta) for N=2
    alpha    per-source transmit power backoff in [0,1], full-duplex only
    """

    tau: float | None
    rho: tuple[float, ...]
    delta: tuple[float, ...]
    alpha: tuple[float, ...] | None = None

    def __post_init__(self):
        if isinstance(self.rho, (int, float)):
            object.__setattr__(self, "rho", (float(self.rho), 1.0 - float(self.rho)))
        else:
            object.__setattr__(self, "rho", tuple(float(x) for x in self.rho))
        if isinstance(self.delta, (int, float)):
            object.__setattr__(self, "delta", (float(self.delta), 1.0 - float(self.delta)))
        else:
            object.__setattr__(self, "delta", tuple(float(x) for x in self.delta))
        if self.alpha is not None:
            object.__setattr__(self, "alpha", tuple(float(x) for x in self.alpha))
            if any(not 0.0 <= a <= 1.0 for a in self.alpha):
                raise ValueError("alpha entries must lie in [0, 1]")
        if self.tau is not None and not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie strictly inside (0, 1)")
        _check_simplex(self.rho, "rho")
        _check_simplex(self.delta, "delta")


def _check_simplex(vec: tuple[float, ...], name: str) -> None:
    if any(not 0.0 <= v <= 1.0 for v in vec):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    if abs(sum(vec) - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"{name} must sum to 1 within {SIMPLEX_TOL}, got {sum(vec)!r}")


@dataclass(frozen=True)
class ServiceRates:
    """Per-source and per-destination instantaneous rates for one block."""

    r_src: np.ndarray
    r_dst: np.ndarray


def decoding_orders(n: int):
    """All decoding orders (permutations of 0..n-1) in lexicographic order."""
    return itertools.permutations(range(n))


def mac_rates_order(params: NetworkParams, z, order) -> np.ndarray:
    """Multiple-access rates for one decoding order.

    With order (k_1, ..., k_N), source k_i is decoded i-th and suffers
    interference from the not-yet-decoded sources k_{i+1}..k_N:

        R_{k_i} = B log2(1 + snr_{k_i} z_{k_i} / (1 + sum_{j>i} snr_{k_j} z_{k_j}))

    so the last-decoded source is interference free.  ``z`` may be a vector
    (one block) or an (n_blocks, N) array.
    """
    z = np.asarray(z, dtype=float)
    n = params.n_sources
    order = tuple(int(k) for k in order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"order must be a permutation of 0..{n - 1}, got {order}")
    snr = np.asarray(params.snr_sources)
    recv = snr * z  # received powers, shape (..., N)
    rates = np.empty_like(recv)
    interference = np.zeros_like(recv[..., 0])
    for k in reversed(order):
        rates[..., k] = params.bandwidth * np.log2(1.0 + recv[..., k] / (1.0 + interference))
        interference = interference + recv[..., k]
    return rates


def mac_rates_timeshared(params: NetworkParams, z, delta) -> np.ndarray:
    """Decoding-order time-shared multiple-access rates: sum_k delta_k R(order_k).

    ``delta`` weights the lexicographically ordered permutations; a scalar is
    the N=2 shorthand for (delta, 1-delta) with order {1,2} first.  Exact
    affine combination, so the result is affine in delta by construction.
    """
    n = params.n_sources
    if isinstance(delta, (int, float)):
        if n != 2:
            raise ValueError("scalar delta is only defined for 2 sources")
        delta = (float(delta), 1.0 - float(delta))
    delta = tuple(float(x) for x in delta)
    if n > MAX_FULL_TIMESHARE_SOURCES:
        raise ValueError(
            f"full time-sharing over {math.factorial(n)} orders refused for "
            f"n_sources={n} > {MAX_FULL_TIMESHARE_SOURCES}; pass sparse per-order "
            "weights to mac_rates_order instead"
        )
    if len(delta) != math.factorial(n):
        raise ValueError(f"delta must have {math.factorial(n)} entries, got {len(delta)}")
    _check_simplex(delta, "delta")
    z = np.asarray(z, dtype=float)
    out = np.zeros(z.shape, dtype=float)
    for d_k, order in zip(delta, decoding_orders(n)):
        if d_k != 0.0:
            out += d_k * mac_rates_order(params, z, order)
    return out


def bc_rates(params: NetworkParams, w, rho) -> np.ndarray:
    """Broadcast-phase rates under superposition with power shares rho.

    Destination j treats as noise the power shares of every destination l
    whose channel is strictly stronger (w_j < w_l); at a tie nobody counts
    interference:

        R_j = B log2(1 + rho_j snr_r w_j / (1 + sum_{l != j} rho_l snr_r w_j 1{w_j < w_l}))
    """
    n = params.n_sources
    if isinstance(rho, (int, float)):
        if n != 2:
            raise ValueError("scalar rho is only defined for 2 destinations")
        rho = (float(rho), 1.0 - float(rho))
    rho = tuple(float(x) for x in rho)
    if len(rho) != n:
        raise ValueError(f"rho must have {n} entries, got {len(rho)}")
    _check_simplex(rho, "rho")
    w = np.asarray(w, dtype=float)
    rho_arr = np.asarray(rho)
    recv = params.snr_relay * w  # snr_r * w_j, shape (..., N)
    # stronger[..., j, l] = 1 if w_j < w_l
    stronger = (w[..., :, None] < w[..., None, :]).astype(float)
    interference = np.einsum("...jl,l->...j", stronger * recv[..., :, None], rho_arr)
    return params.bandwidth * np.log2(1.0 + rho_arr * recv / (1.0 + interference))


def fd_mac_rates(params: NetworkParams, z, delta, alpha) -> np.ndarray:
    """Full-duplex multiple-access rates: sources back off power by alpha.

    Identical to :func:`mac_rates_timeshared` with snr_j replaced by
    alpha_j * snr_j (self-interference at the relay assumed perfectly
    cancelled); alpha = (1, ..., 1) reduces to the half-duplex rates.
    """
    alpha = tuple(float(a) for a in alpha)
    if len(alpha) != params.n_sources:
        raise ValueError(f"alpha must have {params.n_sources} entries")
    if any(not 0.0 <= a <= 1.0 for a in alpha):
        raise ValueError("alpha entries must lie in [0, 1]")
    # snr_j and z_j enter only as a product, so backing off power is the same
    # as scaling the fading argument
    z_scaled = np.asarray(z, dtype=float) * np.asarray(alpha)
    return mac_rates_timeshared(params, z_scaled, delta)
