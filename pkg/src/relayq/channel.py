"""Physical scenario description and block-fading sample generation.

The network is a two-hop relay topology: N source nodes talk to one relay
over a multiple-access channel, and the relay talks to N destination nodes
over a broadcast channel.  All links are block fading: gains are constant
within a block and independent across blocks.  Fading powers are exponential
(Rayleigh amplitude) with configurable means, but the sampler is pluggable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def snr_from_db(db: float) -> float:
    """Convert a power ratio in dB to linear scale: 10^(db/10)."""
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class NetworkParams:
    """Static scenario: per-source SNRs, relay SNR, mean fading powers.

    All SNRs are linear (use :func:`snr_from_db` for dB inputs).  ``mean_z``
    are the mean source-relay fading powers E{|g_j|^2}; ``mean_w`` the mean
    relay-destination powers E{|h_j|^2}.  ``bandwidth`` rescales all rates;
    with the default of 1 every rate is in bits per block.
    """

    snr_sources: tuple[float, ...]
    snr_relay: float
    mean_z: tuple[float, ...]
    mean_w: tuple[float, ...]
    bandwidth: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "snr_sources", tuple(float(x) for x in self.snr_sources))
        object.__setattr__(self, "mean_z", tuple(float(x) for x in self.mean_z))
        object.__setattr__(self, "mean_w", tuple(float(x) for x in self.mean_w))
        n = len(self.snr_sources)
        if n < 2:
            raise ValueError("need at least 2 sources, got %d" % n)
        if len(self.mean_z) != n or len(self.mean_w) != n:
            raise ValueError("snr_sources, mean_z and mean_w must have equal length")
        for name in ("snr_sources", "mean_z", "mean_w"):
            if any(v <= 0 for v in getattr(self, name)):
                raise ValueError(f"{name} entries must be strictly positive")
        if self.snr_relay <= 0:
            raise ValueError("snr_relay must be strictly positive")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be strictly positive")

    @property
    def n_sources(self) -> int:
        return len(self.snr_sources)


@dataclass(frozen=True)
class FadingSample:
    """One block's fading powers: z for source-relay links, w for relay-destination."""

    z: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if z.shape != w.shape:
            raise ValueError("z and w must have equal length")
        if np.any(z < 0) or np.any(w < 0):
            raise ValueError("fading powers must be nonnegative")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class PlacementParams:
    """Relay position on the source-destination line.

    ``position`` is the source-relay distance as a fraction of the total
    distance; path loss folds into the fading means with the given exponent.
    """

    total_distance: float
    position: float
    pathloss_exponent: float = 4.0

    def __post_init__(self):
        if self.total_distance <= 0:
            raise ValueError("total_distance must be positive")
        if not 0.0 < self.position < 1.0:
            raise ValueError("position must lie strictly inside (0, 1)")


def pathloss_means(p: PlacementParams) -> tuple[float, float]:
    """Mean fading powers implied by relay placement.

    mean_z = (1/(D d))^eta for the source-relay hop and
    mean_w = (1/(D (1-d)))^eta for the relay-destination hop.
    """
    d, big_d, eta = p.position, p.total_distance, p.pathloss_exponent
    return (1.0 / (big_d * d)) ** eta, (1.0 / (big_d * (1.0 - d))) ** eta


class RayleighSampler:
    """Exponential fading-power sampler (Rayleigh amplitudes), seeded and counter-based.

    Uses the Philox counter-based generator so that (seed, index) fully
    determines every draw; independent sub-streams come from spawning the
    seed sequence, which keeps parallel replications reproducible.
    Instances are immutable after construction.
    """

    def __init__(self, params: NetworkParams, seed: int):
        self.params = params
        self.seed = int(seed)

    def _rng(self, stream: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed)
        child = ss.spawn(stream + 1)[stream]
        return np.random.Generator(np.random.Philox(child))

    def sample(self, n: int, stream: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Draw n blocks of fading powers: arrays of shape (n, n_sources)."""
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = self._rng(stream)
        mz = np.asarray(self.params.mean_z)
        mw = np.asarray(self.params.mean_w)
        z = rng.exponential(1.0, size=(n, len(mz))) * mz
        w = rng.exponential(1.0, size=(n, len(mw))) * mw
        return z, w


def sample_fading(params: NetworkParams, seed: int, n: int) -> list[FadingSample]:
    """Generate n i.i.d. fading blocks, reproducible for a given (params, seed, n)."""
    z, w = RayleighSampler(params, seed).sample(n)
    return [FadingSample(z=z[i], w=w[i]) for i in range(n)]
