"""Eavesdropper leakage of the SK schemes and its analytic upper bound.

Every channel input is a fixed linear combination of the source and the
past main-channel noise samples, so (S, Z^N, Z~^N) is jointly Gaussian and
the leakage is a ratio of determinants.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .numerics import DomainError, gaussian_mutual_information
from .schemes import ChannelParams, Variant, _variant, initialize

__all__ = [
    "LinearForm",
    "LeakageProfile",
    "input_linear_forms",
    "modified_input_closed_form",
    "leakage_covariance",
    "exact_leakage",
    "leakage_profile",
    "f2_bound",
    "n3_search",
    "ntilde2_classic",
]


@dataclass(frozen=True)
class LinearForm:
    """X_i = s_coeff * S + sum_k noise_coeffs[k] * eta_{k+1}."""

    s_coeff: float
    noise_coeffs: tuple

    @property
    def step(self) -> int:
        return len(self.noise_coeffs) + 1

    def variance(self, params: ChannelParams) -> float:
        return params.sigma_s2 * self.s_coeff**2 + params.sigma_eta2 * math.fsum(c * c for c in self.noise_coeffs)


def _form_from_vector(v: np.ndarray, i: int) -> LinearForm:
    return LinearForm(s_coeff=float(v[0]), noise_coeffs=tuple(float(c) for c in v[1:i]))


def _input_matrix(variant, params: ChannelParams, N: int) -> np.ndarray:
    """Row i-1 holds the coefficients of X_i on the basis (S, eta_1, ..., eta_N).

    The scheme is run on the unit vectors of the basis; since every update
    is linear, the resulting "values" are exactly the coefficient vectors.
    After the first use the recursion carries the unit-variance error
    u = error / sqrt(alpha), so X_i = sqrt(P) u and
    u <- (u - g Y_i) / sqrt(kappa) with g = sqrt(P) / (P + sigma_eta2).
    This is the update of :func:`skwiretap.schemes.step` divided by
    sqrt(alpha), and it stays finite when alpha = O(kappa^N) underflows.
    """
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    basis = np.eye(N + 1)
    m = np.zeros((N, N + 1))
    m[0] = params.lam * basis[0]
    state = initialize(variant, params, basis[0], basis[1])
    u = state.error / math.sqrt(state.alpha)
    gain = math.sqrt(params.P) / (params.P + params.sigma_eta2)
    shrink = math.sqrt(params.kappa)
    for i in range(2, N + 1):
        m[i - 1] = math.sqrt(params.P) * u
        if i < N:
            u = (u - gain * (m[i - 1] + basis[i])) / shrink
    return m


def input_linear_forms(variant, params: ChannelParams, N: int) -> list[LinearForm]:
    """Linear forms of X_1 .. X_N."""
    m = _input_matrix(variant, params, N)
    return [_form_from_vector(m[i - 1], i) for i in range(1, N + 1)]


def modified_input_closed_form(params: ChannelParams, n: int) -> LinearForm:
    """Closed-form linear form of X_n for the modified scheme."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    lam, kappa = params.lam, params.kappa
    if n == 1:
        return LinearForm(lam, ())
    noise = [(1.0 - kappa) * kappa ** ((n - 3) / 2)]
    noise += [-(1.0 - kappa) * kappa ** ((n - k - 2) / 2) for k in range(2, n)]
    return LinearForm(-lam * kappa ** ((n - 1) / 2), tuple(noise))


def leakage_covariance(variant, params: ChannelParams, N: int) -> np.ndarray:
    """Covariance of (S, Z_1..Z_N, Z~_1..Z~_N)."""
    m = _input_matrix(variant, params, N)
    # Z~_i additionally sees eta_i itself
    mt = m.copy()
    mt[np.arange(N), np.arange(1, N + 1)] += 1.0
    loads = np.vstack([m, mt])
    d = np.full(N + 1, params.sigma_eta2)
    d[0] = params.sigma_s2
    obs = (loads * d) @ loads.T
    obs = 0.5 * (obs + obs.T)
    obs[np.diag_indices(2 * N)] += np.r_[np.full(N, params.sigma_e2), np.full(N, params.sigma_e2_tilde)]
    joint = np.empty((2 * N + 1, 2 * N + 1))
    joint[0, 0] = params.sigma_s2
    joint[0, 1:] = joint[1:, 0] = params.sigma_s2 * loads[:, 0]
    joint[1:, 1:] = obs
    return joint


def exact_leakage(variant, params: ChannelParams, N: int) -> float:
    """L_N = I(S; Z^N, Z~^N) / N in nats per channel use."""
    return gaussian_mutual_information(leakage_covariance(variant, params, N), 1) / N


def f2_bound(params: ChannelParams, N) -> float:
    """Analytic leakage bound (1/2N) (P+s)(se+ste)/(se ste) (1 - kappa^N)."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    pref = (params.P + params.sigma_eta2) * (params.sigma_e2 + params.sigma_e2_tilde) / (params.sigma_e2 * params.sigma_e2_tilde)
    # 1 - kappa^N = -expm1(N ln kappa), accurate when P << sigma_eta2
    return pref * -math.expm1(N * math.log(params.kappa)) / (2.0 * N)


def _check_delta(delta: float) -> None:
    if not (math.isfinite(delta) and delta > 0.0):
        raise DomainError(f"delta must be positive, got {delta!r}")


def n3_search(params: ChannelParams, delta: float) -> int:
    """Smallest N >= 1 with f2_bound(N) <= delta.

    f2_bound is strictly decreasing in N, so a doubling search followed by
    bisection finds the crossing in O(log N) evaluations.
    """
    _check_delta(delta)
    if f2_bound(params, 1) <= delta:
        return 1
    lo, hi = 1, 2
    while f2_bound(params, hi) > delta:
        lo, hi = hi, 2 * hi
    # invariant: f2_bound(lo) > delta >= f2_bound(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if f2_bound(params, mid) > delta:
            lo = mid
        else:
            hi = mid
    return hi


def ntilde2_classic(params: ChannelParams, delta: float) -> int:
    """Secrecy blocklength ceil((1/2 delta) ln((1 + P/se)(1 + P/ste))), at least 1."""
    _check_delta(delta)
    value = (math.log1p(params.P / params.sigma_e2) + math.log1p(params.P / params.sigma_e2_tilde)) / (2.0 * delta)
    return max(1, math.ceil(value))


@dataclass(frozen=True)
class LeakageProfile:
    """exact[k] and f2[k] refer to blocklength N = k + 1."""

    N_max: int
    exact: list
    f2: list
    variant: Variant


def leakage_profile(variant, params: ChannelParams, N_max: int, workers: int = 1) -> LeakageProfile:
    if N_max < 1:
        raise DomainError(f"N_max must be >= 1, got {N_max}")
    variant = _variant(variant)
    ns = range(1, N_max + 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            exact = list(pool.map(lambda n: exact_leakage(variant, params, n), ns))
    else:
        exact = [exact_leakage(variant, params, n) for n in ns]
    return LeakageProfile(N_max=N_max, exact=exact, f2=[f2_bound(params, n) for n in ns], variant=variant)
