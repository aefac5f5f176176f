"""Throughput of two-hop multi-source multi-destination relay networks under
statistical queueing constraints: analytical characterizations plus a seeded
fluid-queue simulator, for variable-rate (CSI at transmitters) and fixed-rate
ARQ (no CSI) schemes."""

from .arq import FixedRates, OnOffProbs, all_state_probs, bc_on_probs, mac_state_probs
from .channel import (
    FadingSample,
    NetworkParams,
    PlacementParams,
    RayleighSampler,
    pathloss_means,
    sample_fading,
    snr_from_db,
)
from .qos import (
    LmgfEstimate,
    MonteCarloBackend,
    QosExponents,
    QuadratureBackend,
    effective_capacity,
    lambda_relay_arrival,
    lmgf_constant,
    lmgf_iid_mc,
    lmgf_onoff,
)
from .rates import ControlParams, ServiceRates, bc_rates, fd_mac_rates, mac_rates_order, mac_rates_timeshared
from .sim import SimConfig, SimResult, bottleneck_report, fit_slope, simulate_queues
from .throughput import (
    FdThroughputCase,
    ThroughputResult,
    stability_check_fixed,
    stability_check_variable,
    throughput_fixed,
    throughput_fullduplex,
    throughput_variable,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
