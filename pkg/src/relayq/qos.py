"""Log moment generating functions, effective capacity, and expectation backends.

For i.i.d. block processes the asymptotic LMGF collapses to a single-block
log-MGF, Lambda(theta) = log E{exp(theta a)}; that identity is the
computational contract of everything here.  Natural logs throughout (rates
themselves are base-2 quantities, produced by :mod:`relayq.rates`).

Two interchangeable backends evaluate fading expectations:

* :class:`QuadratureBackend` - tensor Gauss-Laguerre with order escalation,
  deterministic, two-user Rayleigh only; the golden oracle.
* :class:`MonteCarloBackend` - seeded sampling, any number of users.

Both expose log-moments ``log E{exp(s R)}`` rather than raw moments so that
large positive exponents cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import exp1, roots_laguerre

from .channel import NetworkParams, RayleighSampler
from .rates import ControlParams, bc_rates, fd_mac_rates, mac_rates_timeshared

LN2 = math.log(2.0)


@dataclass(frozen=True)
class QosExponents:
    """Buffer-decay requirements: theta_src[j] at source j, theta_relay at the relay."""

    theta_src: tuple[float, ...]
    theta_relay: float

    def __post_init__(self):
        object.__setattr__(self, "theta_src", tuple(float(t) for t in self.theta_src))
        if any(t <= 0 for t in self.theta_src) or self.theta_relay <= 0:
            raise ValueError("all QoS exponents must be strictly positive")


@dataclass(frozen=True)
class LmgfEstimate:
    """An LMGF value with sampling error; std_error is 0 only for closed forms."""

    value: float
    std_error: float
    n_samples: int


def lmgf_constant(rate: float, theta: float) -> float:
    """LMGF of a constant-rate process: theta * rate."""
    return theta * rate


def lmgf_onoff(rate: float, p_on: float, theta: float) -> float:
    """LMGF of an ON-OFF process delivering `rate` with probability p_on.

    log(e^{theta r} P + 1 - P); exact closed form.
    """
    if not 0.0 <= p_on <= 1.0:
        raise ValueError("p_on must lie in [0, 1]")
    return float(np.log(p_on * np.exp(theta * rate) + 1.0 - p_on))


def lmgf_iid_mc(rate_sampler, theta: float, n: int, seed: int) -> LmgfEstimate:
    """Monte Carlo LMGF of an i.i.d. block process.

    ``rate_sampler(rng, n)`` must return n per-block values.  The estimate is
    log of the sample mean of e^{theta a}, computed max-shifted so large
    theta*a cannot overflow; the standard error comes from the delta method.
    """
    if theta == 0.0:
        raise ValueError("theta must be nonzero (Lambda(0) = 0 identically)")
    if n < 1000:
        raise ValueError("need at least 1000 samples for a usable estimate")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    a = np.asarray(rate_sampler(rng, n), dtype=float)
    x = theta * a
    if not np.all(np.isfinite(x)):
        raise ValueError("rate sampler produced non-finite values")
    shift = x.max()
    y = np.exp(x - shift)
    mean = y.mean()
    value = shift + np.log(mean)
    std_error = y.std(ddof=1) / (mean * math.sqrt(n))
    return LmgfEstimate(value=float(value), std_error=float(std_error), n_samples=n)


def effective_capacity(lmgf_at_minus_theta: float, theta: float) -> float:
    """Maximum constant arrival rate under QoS exponent theta: -Lambda(-theta)/theta."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    return -lmgf_at_minus_theta / theta


def lambda_relay_arrival(theta: float, a_rate: float, theta_tilde: float, lmgf_service) -> float:
    """LMGF of the arrival process at the relay (= departures of a source buffer).

    Piecewise: a*theta up to theta_tilde, then a*theta_tilde +
    Lambda_service(theta - theta_tilde); continuous at the knee.
    ``lmgf_service`` maps u to the service-process LMGF at u.
    """
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    if theta_tilde <= 0:
        raise ValueError("theta_tilde must be positive")
    if theta <= theta_tilde:
        return a_rate * theta
    return a_rate * theta_tilde + lmgf_service(theta - theta_tilde)


# ---------------------------------------------------------------------------
# expectation backends
# ---------------------------------------------------------------------------

class QuadratureError(RuntimeError):
    """Quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error bound {achieved:.3e})")
        self.achieved = achieved


@lru_cache(maxsize=None)
def _laguerre_nodes(n: int):
    return roots_laguerre(n)


def _logsumexp_weighted(logw: np.ndarray, x: np.ndarray) -> float:
    """log sum_i exp(logw_i + x_i), max-shifted."""
    t = logw + x
    shift = t.max()
    return float(shift + np.log(np.exp(t - shift).sum()))


def _mean_log2_capacity(gain: float, mean: float) -> float:
    """E{log2(1 + gain * W)} for W ~ Exp(mean), via the exponential integral."""
    if gain == 0.0:
        return 0.0
    c = 1.0 / (gain * mean)
    # e^c E1(c) computed stably for both tails
    if c < 650.0:
        val = math.exp(c) * exp1(c)
    else:
        val = (1.0 - 1.0 / c + 2.0 / c**2) / c  # asymptotic series
    return val / LN2


class QuadratureBackend:
    """Deterministic expectations over two-user Rayleigh fading.

    The two-dimensional multiple-access moments are taken in the fading-power
    variables with tensor Gauss-Laguerre rules (the e^{-t} weight is exactly
    the exponential density), escalating the order until two successive
    values agree within ``tol``; the broadcast-phase moments reduce to a
    single dimension by conditioning on the other destination's channel and
    go through adaptive Gauss-Kronrod; rate means use the exponential-integral
    closed form wherever one exists.  Results are cached by exact parameter
    tuples so repeated sweep evaluations are free.
    """

    def __init__(self, tol: float = 1e-9, orders: tuple[int, ...] = (32, 64, 96, 128, 192, 256, 320)):
        self.tol = tol
        self.orders = orders
        self._cache: dict = {}

    # -- generic machinery ----------------------------------------------------
    def _ladder(self, evaluate) -> float:
        prev, delta = None, math.inf
        for n in self.orders:
            val = evaluate(n)
            if prev is not None:
                delta = abs(val - prev)
                if delta <= self.tol:
                    return val
            prev = val
        raise QuadratureError("Gauss-Laguerre ladder did not converge", delta)

    def _log_moment_2d(self, log_f, m1: float, m2: float) -> float:
        """log of E{exp(log_f(z1,z2))} via log-sum-exp over tensor nodes."""
        def at_order(n):
            x, w = _laguerre_nodes(n)
            logw = np.log(w)
            logw2d = (logw[:, None] + logw[None, :]).ravel()
            vals = log_f(m1 * x[:, None], m2 * x[None, :]).ravel()
            return _logsumexp_weighted(logw2d, vals)
        return self._ladder(at_order)

    def _quad_1d_expect(self, f, m: float) -> float:
        """Integral of f against the Exp(m) density, adaptive Gauss-Kronrod."""
        val, abserr = integrate.quad(
            lambda w: f(w) * np.exp(-w / m) / m, 0.0, np.inf,
            epsabs=self.tol / 10.0, epsrel=1e-12, limit=300,
        )
        if abserr > self.tol * max(1.0, abs(val)):
            raise QuadratureError("1-D integral did not reach tolerance", abserr)
        return float(val)

    # -- model expectations --------------------------------------------------
    @staticmethod
    def _require_two_users(params: NetworkParams):
        if params.n_sources != 2:
            raise ValueError("QuadratureBackend supports exactly 2 sources; use MonteCarloBackend")

    @staticmethod
    def _effective_snrs(params: NetworkParams, ctrl: ControlParams) -> tuple[float, float]:
        if ctrl.alpha is None:
            return params.snr_sources
        return tuple(a * s for a, s in zip(ctrl.alpha, params.snr_sources))

    def _mac_rate_fn(self, params: NetworkParams, ctrl: ControlParams, j: int):
        def rate(z1, z2):
            z = np.stack(np.broadcast_arrays(z1, z2), axis=-1)
            if ctrl.alpha is not None:
                r = fd_mac_rates(params, z, ctrl.delta, ctrl.alpha)
            else:
                r = mac_rates_timeshared(params, z, ctrl.delta)
            return r[..., j]
        return rate

    def mac_lmgf(self, params: NetworkParams, ctrl: ControlParams, j: int, s: float) -> float:
        """log E{exp(s * R_{S_j,R})} with R the (alpha-backed-off) time-shared rate."""
        self._require_two_users(params)
        key = ("mac_lmgf", params, ctrl.delta, ctrl.alpha, j, s)
        if key not in self._cache:
            if s == 0.0:
                self._cache[key] = 0.0
            else:
                rate = self._mac_rate_fn(params, ctrl, j)
                self._cache[key] = self._log_moment_2d(
                    lambda z1, z2: s * rate(z1, z2), params.mean_z[0], params.mean_z[1]
                )
        return self._cache[key]

    def mac_mean(self, params: NetworkParams, ctrl: ControlParams, j: int) -> float:
        """E{R_{S_j,R}}: closed form for the interference-free order, one
        adaptive integral over the interferer for the other."""
        self._require_two_users(params)
        key = ("mac_mean", params, ctrl.delta, ctrl.alpha, j)
        if key not in self._cache:
            snr = self._effective_snrs(params, ctrl)
            other = 1 - j
            bandwidth = params.bandwidth
            m_own, m_oth = params.mean_z[j], params.mean_z[other]
            # decoding order {1,2} leaves source 2 interference free and
            # vice versa; with the lexicographic convention delta[0] weights
            # order {1,2}
            w_clean = ctrl.delta[1] if j == 0 else ctrl.delta[0]
            mean_clean = bandwidth * _mean_log2_capacity(snr[j], m_own)
            if w_clean == 1.0:
                mean_intf = 0.0
            else:
                mean_intf = self._quad_1d_expect(
                    lambda z: bandwidth
                    * _mean_log2_capacity(snr[j] / (1.0 + snr[other] * z), m_own),
                    m_oth,
                )
            self._cache[key] = w_clean * mean_clean + (1.0 - w_clean) * mean_intf
        return self._cache[key]

    def bc_lmgf(self, params: NetworkParams, ctrl: ControlParams, j: int, s: float) -> float:
        """log E{exp(s * R_{R,D_j})}, reduced to 1-D by conditioning on the other channel.

        Given w_j, the other destination's channel is stronger with
        probability exp(-w_j / mean_other); the rate takes the
        with-interference value on that event and the interference-free value
        otherwise (ties have probability zero under continuous fading).
        """
        self._require_two_users(params)
        key = ("bc_lmgf", params, ctrl.rho, j, s)
        if key not in self._cache:
            if s == 0.0:
                self._cache[key] = 0.0
            else:
                p_own, p_oth = ctrl.rho[j], ctrl.rho[1 - j]
                sr, bandwidth = params.snr_relay, params.bandwidth
                m_oth = params.mean_w[1 - j]

                def f(w):
                    r_int = bandwidth * np.log2(1.0 + p_own * sr * w / (1.0 + p_oth * sr * w))
                    r_free = bandwidth * np.log2(1.0 + p_own * sr * w)
                    q = np.exp(-w / m_oth)
                    return q * np.exp(s * r_int) + (1.0 - q) * np.exp(s * r_free)

                self._cache[key] = float(np.log(self._quad_1d_expect(f, params.mean_w[j])))
        return self._cache[key]

    def bc_mean(self, params: NetworkParams, ctrl: ControlParams, j: int) -> float:
        """E{R_{R,D_j}} in closed form.

        Splitting the with-interference rate as log2(1 + snr_r w) -
        log2(1 + rho_other snr_r w) turns every term into
        E{log2(1 + a W)} for an exponential W, because the conditioning
        weight exp(-w/mean_other) just rescales the exponential.
        """
        self._require_two_users(params)
        key = ("bc_mean", params, ctrl.rho, j)
        if key not in self._cache:
            p_own, p_oth = ctrl.rho[j], ctrl.rho[1 - j]
            sr, bandwidth = params.snr_relay, params.bandwidth
            m_own, m_oth = params.mean_w[j], params.mean_w[1 - j]
            mu = 1.0 / (1.0 / m_own + 1.0 / m_oth)
            scale = mu / m_own  # mass of the exp(-w/m_oth)-weighted part
            val = (
                scale * (_mean_log2_capacity(sr, mu) - _mean_log2_capacity(p_oth * sr, mu)
                         - _mean_log2_capacity(p_own * sr, mu))
                + _mean_log2_capacity(p_own * sr, m_own)
            )
            self._cache[key] = bandwidth * val
        return self._cache[key]


class MonteCarloBackend:
    """Seeded sampling expectations; works for any number of sources.

    One fading batch is drawn per parameter set and reused for every moment,
    so results are deterministic given (seed, n_samples) and smooth across
    nearby control parameters that share the batch.
    """

    def __init__(self, n_samples: int = 1_000_000, seed: int = 0):
        if n_samples < 1000:
            raise ValueError("n_samples too small for stable moments")
        self.n_samples = int(n_samples)
        self.seed = int(seed)
        self._fading: dict = {}
        self._rates: dict = {}

    def _batch(self, params: NetworkParams):
        if params not in self._fading:
            self._fading[params] = RayleighSampler(params, self.seed).sample(self.n_samples)
        return self._fading[params]

    def _mac_rates(self, params: NetworkParams, ctrl: ControlParams, j: int) -> np.ndarray:
        key = ("mac", params, ctrl.delta, ctrl.alpha, j)
        if key not in self._rates:
            z, _ = self._batch(params)
            if ctrl.alpha is not None:
                r = fd_mac_rates(params, z, ctrl.delta, ctrl.alpha)
            else:
                r = mac_rates_timeshared(params, z, ctrl.delta)
            for i in range(params.n_sources):
                self._rates[("mac", params, ctrl.delta, ctrl.alpha, i)] = r[:, i]
        return self._rates[key]

    def _bc_rates(self, params: NetworkParams, ctrl: ControlParams, j: int) -> np.ndarray:
        key = ("bc", params, ctrl.rho, j)
        if key not in self._rates:
            _, w = self._batch(params)
            r = bc_rates(params, w, ctrl.rho)
            for i in range(params.n_sources):
                self._rates[("bc", params, ctrl.rho, i)] = r[:, i]
        return self._rates[key]

    @staticmethod
    def _log_moment(rates: np.ndarray, s: float) -> float:
        if s == 0.0:
            return 0.0
        x = s * rates
        shift = x.max()
        return float(shift + np.log(np.exp(x - shift).mean()))

    def mac_lmgf(self, params, ctrl, j, s):
        return self._log_moment(self._mac_rates(params, ctrl, j), s)

    def bc_lmgf(self, params, ctrl, j, s):
        return self._log_moment(self._bc_rates(params, ctrl, j), s)

    def mac_mean(self, params, ctrl, j):
        return float(self._mac_rates(params, ctrl, j).mean())

    def bc_mean(self, params, ctrl, j):
        return float(self._bc_rates(params, ctrl, j).mean())
