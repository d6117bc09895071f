"""Classic and modified Schalkwijk-Kailath JSCC schemes over the AWGN channel.

Both schemes send the (scaled) receiver's estimation error back over the
channel on every use after the first; they differ only in how the receiver
forms its first estimate: zero-forcing for the classic scheme, MMSE for the
modified one.

State transitions are pure and work elementwise on numpy arrays, so the
same code drives scalar runs, vectorized Monte Carlo, and the symbolic
linear-form propagation in :mod:`skwiretap.leakage`.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import _rng
from .numerics import DomainError, gaussian_capacity, q_function, rate_distortion

__all__ = [
    "ChannelParams",
    "REFERENCE_PARAMS",
    "Variant",
    "SchemeState",
    "CorruptedStateError",
    "MonteCarloReport",
    "PowerProfile",
    "initialize",
    "channel_input",
    "mmse_coefficient",
    "step",
    "run_scheme",
    "alpha_closed_form",
    "exact_excess_probability",
    "excess_probability_bound",
    "sample_final_errors",
    "monte_carlo_excess_probability",
    "monte_carlo_excess_sweep",
    "empirical_power",
]


@dataclass(frozen=True)
class ChannelParams:
    """Source, channel, and eavesdropper variances plus the power budget."""

    sigma_s2: float
    sigma_eta2: float
    sigma_e2: float
    sigma_e2_tilde: float
    P: float

    def __post_init__(self):
        for name in ("sigma_s2", "sigma_eta2", "sigma_e2", "sigma_e2_tilde", "P"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be a finite positive number, got {value!r}")

    @property
    def kappa(self) -> float:
        """Per-step error-variance shrinkage sigma_eta2 / (P + sigma_eta2)."""
        return self.sigma_eta2 / (self.P + self.sigma_eta2)

    @property
    def lam(self) -> float:
        """First-use gain sqrt(P / sigma_s2)."""
        return math.sqrt(self.P / self.sigma_s2)


REFERENCE_PARAMS = ChannelParams(sigma_s2=1.0, sigma_eta2=30.0, sigma_e2=30.0, sigma_e2_tilde=40.0, P=1.0)


class Variant(str, Enum):
    CLASSIC = "classic"
    MODIFIED = "modified"


class CorruptedStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class SchemeState:
    """Receiver state after `step` channel uses.

    `estimate`, `error` and `source` may be floats or equally shaped arrays;
    `alpha` is the (deterministic) variance of the error.
    """

    step: int
    estimate: object
    error: object
    alpha: float
    source: object


def _variant(v) -> Variant:
    return v if isinstance(v, Variant) else Variant(v)


def initialize(variant, params: ChannelParams, s, eta1) -> SchemeState:
    """First channel use: X_1 = sqrt(P/sigma_s2) S, then the receiver's first estimate."""
    variant = _variant(variant)
    x1 = params.lam * s
    y1 = x1 + eta1
    # errors are formed from their exact decomposition, not as estimate - s
    if variant is Variant.CLASSIC:
        estimate = y1 / params.lam
        error = eta1 / params.lam
        alpha = params.sigma_eta2 * params.sigma_s2 / params.P
    else:
        # E[S Y_1] / E[Y_1^2]; note 1 - gain * lam = kappa
        gain = params.lam * params.sigma_s2 / (params.P + params.sigma_eta2)
        estimate = gain * y1
        error = gain * eta1 - params.kappa * s
        alpha = params.sigma_eta2 * params.sigma_s2 / (params.P + params.sigma_eta2)
    return SchemeState(step=1, estimate=estimate, error=error, alpha=alpha, source=s)


def channel_input(state: SchemeState, params: ChannelParams):
    """Next channel input sqrt(P / alpha) * error, computed by the transmitter."""
    if not state.alpha > 0.0:
        raise CorruptedStateError(f"error variance must be positive, got {state.alpha!r}")
    if state.alpha < sys.float_info.min:
        raise CorruptedStateError(f"error variance underflowed to {state.alpha!r} after {state.step} uses")
    return math.sqrt(params.P / state.alpha) * state.error


def mmse_coefficient(params: ChannelParams, alpha_prev: float) -> float:
    return math.sqrt(params.P * alpha_prev) / (params.P + params.sigma_eta2)


def step(state: SchemeState, params: ChannelParams, eta) -> SchemeState:
    """One SK iteration; identical for both variants.

    The error is updated as error - beta * Y rather than recomputed as
    estimate - source; the two agree exactly in real arithmetic, but the
    latter cancels catastrophically once the estimate is close to the source.
    """
    if state.step < 1:
        raise CorruptedStateError(f"step index must be >= 1, got {state.step}")
    x = channel_input(state, params)
    y = x + eta
    beta = mmse_coefficient(params, state.alpha)
    estimate = state.estimate - beta * y
    alpha = state.alpha * (params.sigma_eta2 / (params.P + params.sigma_eta2))
    return SchemeState(
        step=state.step + 1,
        estimate=estimate,
        error=state.error - beta * y,
        alpha=alpha,
        source=state.source,
    )


def run_scheme(variant, params: ChannelParams, s, etas: Sequence) -> SchemeState:
    """Run `len(etas)` channel uses on a realized source and noise sequence."""
    if len(etas) < 1:
        raise DomainError("need at least one channel use")
    state = initialize(variant, params, s, etas[0])
    for eta in etas[1:]:
        state = step(state, params, eta)
    return state


def alpha_closed_form(variant, params: ChannelParams, n: int) -> float:
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    variant = _variant(variant)
    shrink = params.sigma_eta2 / (params.P + params.sigma_eta2)
    if variant is Variant.CLASSIC:
        return params.sigma_eta2 * params.sigma_s2 / params.P * shrink ** (n - 1)
    return params.sigma_s2 * shrink**n


def _check_distortion(params: ChannelParams, d: float) -> None:
    rate_distortion(d, params.sigma_s2)


def exact_excess_probability(variant, params: ChannelParams, N: int, d: float) -> float:
    """P[(S - S_hat_N)^2 >= d] = 2 Q(sqrt(d / alpha_N)); the error is zero-mean Gaussian."""
    _check_distortion(params, d)
    alpha = alpha_closed_form(variant, params, N)
    return 2.0 * q_function(math.sqrt(d / alpha))


def excess_probability_bound(params: ChannelParams, N: int, d: float) -> float:
    """2 Q(exp(-R(d) + N C(P))), exact for the modified scheme."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    r = rate_distortion(d, params.sigma_s2)
    c = gaussian_capacity(params.P, params.sigma_eta2)
    return 2.0 * q_function(math.exp(-r + N * c))


@dataclass(frozen=True)
class MonteCarloReport:
    trials: int
    hits: int
    estimate: float
    ci_halfwidth: float
    seed: int

    @classmethod
    def from_counts(cls, trials: int, hits: int, seed: int) -> "MonteCarloReport":
        p = hits / trials
        return cls(trials=trials, hits=hits, estimate=p, ci_halfwidth=3.0 * math.sqrt(p * (1.0 - p) / trials), seed=seed)


def _check_trials(trials: int) -> None:
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")


def _simulate_block(variant, params: ChannelParams, N: int, rng: np.random.Generator, size: int, on_input=None):
    # draw order per block: S, then eta_1 .. eta_N
    s = rng.standard_normal(size) * math.sqrt(params.sigma_s2)
    sd = math.sqrt(params.sigma_eta2)
    if on_input is not None:
        on_input(0, params.lam * s)
    state = initialize(variant, params, s, rng.standard_normal(size) * sd)
    for i in range(1, N):
        if on_input is not None:
            on_input(i, channel_input(state, params))
        state = step(state, params, rng.standard_normal(size) * sd)
    return state


def sample_final_errors(variant, params: ChannelParams, N: int, trials: int, seed: int, workers: int = 1) -> np.ndarray:
    """Final estimation errors of `trials` independent runs."""
    _check_trials(trials)
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    parts = _rng.map_blocks(lambda rng, size: _simulate_block(variant, params, N, rng, size).error, trials, seed, workers)
    return np.concatenate(parts)


def monte_carlo_excess_sweep(
    variant, params: ChannelParams, N: int, ds: Sequence[float], trials: int, seed: int, workers: int = 1
) -> list[MonteCarloReport]:
    """Excess-distortion estimates for several thresholds from one set of runs."""
    _check_trials(trials)
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    ds = [float(d) for d in ds]
    for d in ds:
        _check_distortion(params, d)
    thresholds = np.asarray(ds)

    def count(rng, size):
        err = _simulate_block(variant, params, N, rng, size).error
        sq = err * err
        return (sq[None, :] >= thresholds[:, None]).sum(axis=1)

    hits = np.sum(_rng.map_blocks(count, trials, seed, workers), axis=0, dtype=np.int64)
    return [MonteCarloReport.from_counts(trials, int(h), seed) for h in hits]


def monte_carlo_excess_probability(
    variant, params: ChannelParams, N: int, d: float, trials: int, seed: int, workers: int = 1
) -> MonteCarloReport:
    return monte_carlo_excess_sweep(variant, params, N, [d], trials, seed, workers)[0]


@dataclass(frozen=True)
class PowerProfile:
    """Per-step sample mean of X_i^2 with its standard error."""

    mean: np.ndarray
    stderr: np.ndarray
    trials: int
    seed: int


def empirical_power(variant, params: ChannelParams, N: int, trials: int, seed: int, workers: int = 1) -> PowerProfile:
    _check_trials(trials)
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")

    def moments(rng, size):
        acc = np.zeros((2, N))

        def record(i, x):
            x2 = x * x
            acc[0, i] = x2.sum()
            acc[1, i] = (x2 * x2).sum()

        _simulate_block(variant, params, N, rng, size, on_input=record)
        return acc

    parts = _rng.map_blocks(moments, trials, seed, workers)
    s1 = np.array([math.fsum(p[0, i] for p in parts) for i in range(N)])
    s2 = np.array([math.fsum(p[1, i] for p in parts) for i in range(N)])
    mean = s1 / trials
    var = np.maximum(s2 / trials - mean**2, 0.0)
    return PowerProfile(mean=mean, stderr=np.sqrt(var / trials), trials=trials, seed=seed)
