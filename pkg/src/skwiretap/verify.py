"""Numerical checks of the probabilistic ingredients of the converse bound.

The converse rests on the sum T = G^2/2 + sum_i (A K_i^2 + B K_i) of
independent Gaussian functionals, whose moment generating function has a
closed form.  This module evaluates the pointwise quantities, the closed
forms, and Monte Carlo estimates against them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _rng
from .bounds import b_star, t_coefficients, third_moment_bounds
from .numerics import SOURCE_DISPERSION, DomainError, dispersion, gaussian_capacity, q_function, rate_distortion

__all__ = [
    "AuxiliaryGaussians",
    "MgfCheck",
    "MomentSums",
    "MomentEstimate",
    "BerryEsseenGap",
    "CheckResult",
    "MGF_T_GRID",
    "MGF_N_GRID",
    "d_tilted_information",
    "tilted_multiplier",
    "reproduction_variance",
    "information_density",
    "psi",
    "sample_T",
    "draw_auxiliary",
    "mgf_domain_ok",
    "mgf_closed_form",
    "mgf_check",
    "moment_sums",
    "moment_estimate",
    "berry_esseen_gap",
    "mgf_suite",
    "moments_suite",
    "berry_esseen_suite",
]

MGF_T_GRID = (-2.0, -1.0, -0.3, 0.3, 0.7)
MGF_N_GRID = (1, 5, 20, 100)


def d_tilted_information(s, d: float, sigma_s2: float):
    """j_S(s, d) = R(d) - 1/2 + s^2 / (2 sigma_s2) for the Gaussian source."""
    r = rate_distortion(d, sigma_s2)
    out = r - 0.5 + np.square(s) / (2.0 * sigma_s2)
    return float(out) if np.ndim(out) == 0 else out


def tilted_multiplier(d: float) -> float:
    """Slope of the rate-distortion function in the tilting, 1/(2d)."""
    if not d > 0.0:
        raise DomainError(f"d must be positive, got {d!r}")
    return 1.0 / (2.0 * d)


def reproduction_variance(d: float, sigma_s2: float) -> float:
    """Variance sigma_s2 - d of the optimal reproduction law."""
    rate_distortion(d, sigma_s2)
    return sigma_s2 - d


def _check_power(P_prime, sigma_eta2):
    if not (P_prime > 0.0 and sigma_eta2 > 0.0):
        raise DomainError(f"need P' > 0 and sigma_eta2 > 0, got {P_prime!r}, {sigma_eta2!r}")


def information_density(x, y, P_prime: float, sigma_eta2: float):
    """ln f(y|x)/q(y) for the AWGN channel with output reference q = N(0, P' + sigma_eta2)."""
    _check_power(P_prime, sigma_eta2)
    x = np.asarray(x, dtype=float)
    z = np.asarray(y, dtype=float) - x
    out = gaussian_capacity(P_prime, sigma_eta2) + (-(P_prime / sigma_eta2) * z * z + x * x + 2.0 * x * z) / (
        2.0 * (P_prime + sigma_eta2)
    )
    return float(out) if out.ndim == 0 else out


def psi(x, y, P_prime: float, sigma_eta2: float):
    """Noise-dependent part of the information density."""
    _check_power(P_prime, sigma_eta2)
    x = np.asarray(x, dtype=float)
    z = np.asarray(y, dtype=float) - x
    out = (-(P_prime / sigma_eta2) * z * z + 2.0 * x * z) / (2.0 * (P_prime + sigma_eta2))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AuxiliaryGaussians:
    """Standard normal draws G and K_1..K_N'.

    `g` may be a scalar or shape (n,) array, `k` then has shape (N',) or (n, N').
    """

    g: object
    k: object

    def __post_init__(self):
        if np.shape(self.k)[-1:] in ((), (0,)):
            raise DomainError("need at least one K draw")

    @property
    def N_prime(self) -> int:
        return int(np.shape(self.k)[-1])


def sample_T(aux: AuxiliaryGaussians, P_prime: float, sigma_eta2: float):
    """T = G^2/2 + sum_i (A K_i^2 + B K_i)."""
    _check_power(P_prime, sigma_eta2)
    a, b = t_coefficients(P_prime, sigma_eta2)
    k = np.asarray(aux.k, dtype=float)
    g = np.asarray(aux.g, dtype=float)
    out = 0.5 * g * g + a * np.einsum("...i,...i->...", k, k) + b * k.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def draw_auxiliary(rng: np.random.Generator, size: int, N_prime: int) -> AuxiliaryGaussians:
    g = rng.standard_normal(size)
    k = rng.standard_normal((size, N_prime))
    return AuxiliaryGaussians(g, k)


def mgf_domain_ok(t: float, P_prime: float, sigma_eta2: float) -> bool:
    return t < 1.0 and P_prime + sigma_eta2 - P_prime * t > 0.0


def mgf_closed_form(t: float, N_prime: int, P_prime: float, sigma_eta2: float) -> float:
    """E[exp(t T)] in closed form."""
    _check_power(P_prime, sigma_eta2)
    if N_prime < 1:
        raise DomainError(f"N' must be >= 1, got {N_prime}")
    total = P_prime + sigma_eta2
    shifted = total - P_prime * t
    if not shifted > 0.0:
        raise DomainError(f"MGF pole: factor (P' + sigma_eta2 - P' t) must be positive, got {shifted!r}")
    if not t < 1.0:
        raise DomainError(f"MGF pole: factor (1 - t)^(-1/2) needs t < 1, got t = {t!r}")
    log_mgf = (
        0.5 * N_prime * math.log(total / shifted)
        + sigma_eta2 * t * t * N_prime * P_prime / (2.0 * total * shifted)
        - 0.5 * math.log1p(-t)
    )
    return math.exp(log_mgf)


@dataclass(frozen=True)
class MgfCheck:
    """Closed-form MGF against Monte Carlo; `mc_halfwidth` is one standard error."""

    t: float
    N_prime: int
    closed_form: float
    mc_estimate: float
    mc_halfwidth: float
    trials: int

    @property
    def tolerance(self) -> float:
        return max(3.0 * self.mc_halfwidth, 0.01 * self.closed_form)

    @property
    def passed(self) -> bool:
        return abs(self.closed_form - self.mc_estimate) <= self.tolerance


def _block_order_sum(parts, index) -> float:
    return math.fsum(p[index] for p in parts)


def mgf_check(
    ts: Sequence[float], N_prime: int, P_prime: float, sigma_eta2: float, trials: int, seed: int, workers: int = 1
) -> list[MgfCheck]:
    """Monte Carlo E[exp(tT)] for several t from a shared sample of T."""
    if trials < 2:
        raise DomainError(f"trials must be >= 2, got {trials}")
    ts = [float(t) for t in ts]
    closed = [mgf_closed_form(t, N_prime, P_prime, sigma_eta2) for t in ts]
    tv = np.asarray(ts)

    def block(rng, size):
        tt = sample_T(draw_auxiliary(rng, size, N_prime), P_prime, sigma_eta2)
        e = np.exp(tv[:, None] * tt[None, :])
        return np.concatenate([e.sum(axis=1), (e * e).sum(axis=1)])

    parts = _rng.map_blocks(block, trials, seed, workers)
    out = []
    for j, t in enumerate(ts):
        m1 = _block_order_sum(parts, j) / trials
        m2 = _block_order_sum(parts, len(ts) + j) / trials
        var = max(m2 - m1 * m1, 0.0) * trials / (trials - 1)
        out.append(MgfCheck(t, N_prime, closed[j], m1, math.sqrt(var / trials), trials))
    return out


@dataclass(frozen=True)
class MomentSums:
    mean: float
    variance: float
    rho_bound: float


def moment_sums(N_prime: int, P_prime: float, sigma_eta2: float) -> MomentSums:
    """Exact mean and variance of sum_i T*_i and the bound on its summed third absolute moments.

    T*_0 = (G^2 - 1)/2 and T*_i = A (K_i^2 - 1) + B K_i are the centered terms.
    """
    if N_prime < 1:
        raise DomainError(f"N' must be >= 1, got {N_prime}")
    _check_power(P_prime, sigma_eta2)
    rho0, rho1 = third_moment_bounds(P_prime, sigma_eta2)
    return MomentSums(
        mean=0.0,
        variance=SOURCE_DISPERSION + N_prime * dispersion(P_prime, sigma_eta2),
        rho_bound=rho0 + N_prime * rho1,
    )


@dataclass(frozen=True)
class MomentEstimate:
    """Monte Carlo moments of sum_i T*_i and of single centered terms."""

    N_prime: int
    trials: int
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    abs_third_t0: float
    abs_third_t1: float


def moment_estimate(N_prime: int, P_prime: float, sigma_eta2: float, trials: int, seed: int, workers: int = 1) -> MomentEstimate:
    if trials < 2:
        raise DomainError(f"trials must be >= 2, got {trials}")
    a, b = t_coefficients(P_prime, sigma_eta2)

    def block(rng, size):
        aux = draw_auxiliary(rng, size, N_prime)
        t0 = 0.5 * (aux.g * aux.g - 1.0)
        t1 = a * (aux.k[:, 0] ** 2 - 1.0) + b * aux.k[:, 0]
        total = t0 + a * (np.einsum("ij,ij->i", aux.k, aux.k) - N_prime) + b * aux.k.sum(axis=1)
        x2 = total * total
        return [total.sum(), x2.sum(), (x2 * total).sum(), (x2 * x2).sum(), (np.abs(t0) ** 3).sum(), (np.abs(t1) ** 3).sum()]

    parts = _rng.map_blocks(block, trials, seed, workers)
    s = [_block_order_sum(parts, i) / trials for i in range(6)]
    m1, m2, m3, m4 = s[:4]
    var = m2 - m1 * m1
    central4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1**4
    return MomentEstimate(
        N_prime=N_prime,
        trials=trials,
        mean=m1,
        mean_se=math.sqrt(var / trials),
        variance=var * trials / (trials - 1),
        variance_se=math.sqrt(max(central4 - var * var, 0.0) / trials),
        abs_third_t0=s[4],
        abs_third_t1=s[5],
    )


@dataclass(frozen=True)
class BerryEsseenGap:
    threshold: float
    empirical_tail: float
    normal_tail: float
    bound: float
    mc_sigma: float
    trials: int

    @property
    def passed(self) -> bool:
        return abs(self.empirical_tail - self.normal_tail) <= self.bound + 3.0 * self.mc_sigma


def berry_esseen_gap(
    N_prime: int,
    P_prime: float,
    sigma_eta2: float,
    thresholds,
    trials: int,
    seed: int,
    workers: int = 1,
):
    """Empirical tail P[sum T* >= threshold] against the Gaussian tail and the bound B*/sqrt(N'+1).

    `thresholds` may be a scalar (one result) or a sequence (a list, all
    computed from one sample).
    """
    scalar = np.ndim(thresholds) == 0
    th = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    a, b = t_coefficients(P_prime, sigma_eta2)
    sd = math.sqrt(moment_sums(N_prime, P_prime, sigma_eta2).variance)
    bound = b_star(P_prime, sigma_eta2) / math.sqrt(N_prime + 1)

    def block(rng, size):
        aux = draw_auxiliary(rng, size, N_prime)
        total = 0.5 * (aux.g * aux.g - 1.0) + a * (np.einsum("ij,ij->i", aux.k, aux.k) - N_prime) + b * aux.k.sum(axis=1)
        return (total[None, :] >= th[:, None]).sum(axis=1)

    hits = np.sum(_rng.map_blocks(block, trials, seed, workers), axis=0, dtype=np.int64)
    out = []
    for x, h in zip(th, hits):
        p = int(h) / trials
        out.append(
            BerryEsseenGap(
                threshold=float(x),
                empirical_tail=p,
                normal_tail=q_function(x / sd),
                bound=bound,
                mc_sigma=math.sqrt(p * (1.0 - p) / trials),
                trials=trials,
            )
        )
    return out[0] if scalar else out


@dataclass(frozen=True)
class CheckResult:
    """One line of a verification report."""

    name: str
    observed: float
    expected: float
    tolerance: float
    passed: bool


def mgf_suite(P_prime: float, sigma_eta2: float, trials: int, seed: int, workers: int = 1,
              ts=MGF_T_GRID, n_grid=MGF_N_GRID) -> list[CheckResult]:
    out = []
    ts = [t for t in ts if mgf_domain_ok(t, P_prime, sigma_eta2)]
    for n in n_grid:
        # distinct stream per N' so the checks are independent
        for c in mgf_check(ts, n, P_prime, sigma_eta2, trials, _sub_seed(seed, n), workers):
            out.append(CheckResult(f"mgf[t={c.t:g},N'={n}]", c.mc_estimate, c.closed_form, c.tolerance, c.passed))
    return out


def _sub_seed(seed: int, tag: int) -> int:
    return _rng.derive_seed(seed, tag)


def moments_suite(P_prime: float, sigma_eta2: float, trials: int, seed: int, workers: int = 1,
                  n_grid=(1, 50)) -> list[CheckResult]:
    out = []
    rho0, rho1 = third_moment_bounds(P_prime, sigma_eta2)
    for n in n_grid:
        exact = moment_sums(n, P_prime, sigma_eta2)
        est = moment_estimate(n, P_prime, sigma_eta2, trials, _sub_seed(seed, n), workers)
        tol_m = 5.0 * est.mean_se
        tol_v = 5.0 * est.variance_se
        out.append(CheckResult(f"mean[N'={n}]", est.mean, exact.mean, tol_m, abs(est.mean - exact.mean) <= tol_m))
        out.append(CheckResult(f"variance[N'={n}]", est.variance, exact.variance, tol_v, abs(est.variance - exact.variance) <= tol_v))
        out.append(CheckResult(f"abs_third_T0[N'={n}]", est.abs_third_t0, rho0, 0.0, est.abs_third_t0 <= rho0))
        out.append(CheckResult(f"abs_third_T1[N'={n}]", est.abs_third_t1, rho1, 0.0, est.abs_third_t1 <= rho1))
    return out


def berry_esseen_suite(P_prime: float, sigma_eta2: float, trials: int, seed: int, workers: int = 1,
                       n_grid=(10, 50, 200), multiples=(0.0, 1.0, 3.0)) -> list[CheckResult]:
    out = []
    for n in n_grid:
        sd = math.sqrt(moment_sums(n, P_prime, sigma_eta2).variance)
        gaps = berry_esseen_gap(n, P_prime, sigma_eta2, [m * sd for m in multiples], trials, _sub_seed(seed, n), workers)
        for m, g in zip(multiples, gaps):
            tol = g.bound + 3.0 * g.mc_sigma
            out.append(CheckResult(f"berry_esseen[N'={n},x={m:g}sd]", g.empirical_tail, g.normal_tail, tol, g.passed))
    return out
