"""Blocklength and rate bounds for secure JSCC over the AWGN wiretap channel with feedback.

Lower bounds on the secrecy rate come from the two achievable schemes
(classic and modified SK); the upper bound comes from a finite-blocklength
converse.  Rates are symbols per channel use, 1/N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .leakage import n3_search, ntilde2_classic
from .numerics import (
    SOURCE_DISPERSION,
    DomainError,
    dispersion,
    gaussian_capacity,
    q_inverse,
    rate_distortion,
)
from .schemes import ChannelParams

__all__ = [
    "TargetSpec",
    "ConverseContext",
    "BoundReport",
    "UpperMode",
    "ScanOverflowError",
    "VacuousConverseError",
    "lemma1_lower",
    "theorem2_lower",
    "t_coefficients",
    "third_moment_bounds",
    "b_star",
    "reference_power",
    "converse_context",
    "converse_feasible",
    "f1",
    "theorem1_upper",
    "bracket",
]

P_PRIME_FLOOR = 1e-9
DEFAULT_SCAN_LIMIT = 10**7
_SCAN_CHUNK = 1 << 16


class ScanOverflowError(RuntimeError):
    """No crossing found below the scan ceiling."""


class VacuousConverseError(DomainError):
    """The converse parameters are undefined at this blocklength (P' would be nonpositive)."""


@dataclass(frozen=True)
class TargetSpec:
    d: float
    epsilon: float
    delta: float

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if not (math.isfinite(self.delta) and self.delta > 0.0) and self.delta != math.inf:
            raise DomainError(f"delta must be positive, got {self.delta!r}")
        if not self.d > 0.0:
            raise DomainError(f"d must be positive, got {self.d!r}")

    def validate(self, params: ChannelParams) -> "TargetSpec":
        if not self.d < params.sigma_s2:
            raise DomainError(f"d must be below sigma_s2 = {params.sigma_s2}, got {self.d!r}")
        return self


def _ceil_blocklength(x: float) -> int:
    return max(1, math.ceil(x))


def _distortion_numerator(params: ChannelParams, targets: TargetSpec) -> float:
    targets.validate(params)
    return rate_distortion(targets.d, params.sigma_s2) + math.log(q_inverse(targets.epsilon / 2.0))


def lemma1_lower(params: ChannelParams, targets: TargetSpec) -> tuple[int, int]:
    """(Ñ1, Ñ2) for the classic scheme."""
    c = gaussian_capacity(params.P, params.sigma_eta2)
    extra = 0.5 * math.log1p(params.sigma_eta2 / params.P)
    ntilde1 = _ceil_blocklength((_distortion_numerator(params, targets) + extra) / c)
    return ntilde1, _secrecy_blocklength(params, targets, ntilde2_classic)


def _secrecy_blocklength(params, targets, fn) -> int:
    return 1 if targets.delta == math.inf else fn(params, targets.delta)


def theorem2_lower(params: ChannelParams, targets: TargetSpec) -> tuple[int, int]:
    """(N2, N3) for the modified scheme."""
    c = gaussian_capacity(params.P, params.sigma_eta2)
    n2 = _ceil_blocklength(_distortion_numerator(params, targets) / c)
    return n2, _secrecy_blocklength(params, targets, n3_search)


def t_coefficients(P_prime, sigma_eta2):
    """(A, B) with A = P'/(2(P'+s)) and B = -sqrt(P' s)/(P'+s)."""
    P_prime = np.asarray(P_prime, dtype=float)
    total = P_prime + sigma_eta2
    a = P_prime / (2.0 * total)
    b = -np.sqrt(P_prime * sigma_eta2) / total
    if a.ndim == 0:
        return float(a), float(b)
    return a, b


def third_moment_bounds(P_prime, sigma_eta2):
    """(rho0, rho1): bounds on the centered absolute third moments of the source and channel terms."""
    a, b = t_coefficients(P_prime, sigma_eta2)
    rho1 = 224.0 * np.abs(a) ** 3 + 16.0 * np.abs(b) ** 3 * math.sqrt(2.0 / math.pi)
    return 3.5, (float(rho1) if np.ndim(rho1) == 0 else rho1)


def b_star(P_prime, sigma_eta2: float):
    """Berry-Esseen constant 6 max(rho0, rho1) / min(V_d, V(P'))^{3/2}."""
    P_prime = np.asarray(P_prime, dtype=float)
    if np.isnan(P_prime).any() or (P_prime < P_PRIME_FLOOR).any():
        raise DomainError(f"P' must be at least {P_PRIME_FLOOR}")
    rho0, rho1 = third_moment_bounds(P_prime, sigma_eta2)
    v = np.minimum(SOURCE_DISPERSION, dispersion(P_prime, sigma_eta2))
    out = 6.0 * np.maximum(rho0, rho1) / v**1.5
    return float(out) if out.ndim == 0 else out


def reference_power(params: ChannelParams, epsilon: float) -> float:
    """Nominal average power P/(1-epsilon) allowed on the non-excess event."""
    return params.P / (1.0 - epsilon)


@dataclass(frozen=True)
class ConverseContext:
    N_prime: int
    gamma: float
    zeta: float
    P_prime: float
    epsilon_prime: float
    B_star: float


def converse_context(N_prime: int, params: ChannelParams, epsilon: float) -> ConverseContext:
    """Converse parameters at blocklength N'.

    gamma = 1/2 ln N' and zeta = sqrt(N'-1) (2/sqrt(N') + B/sqrt(N'+1)), with B
    evaluated at the nominal power P/(1-epsilon) since the exact P' itself
    depends on zeta.  Then P' = P/(1 - epsilon - zeta/sqrt(N'-1)),
    epsilon' = 1 - zeta/sqrt(N'-1), and B* is re-evaluated at P'.

    Raises
    ------
    VacuousConverseError
        If 1 - epsilon - zeta/sqrt(N'-1) <= 0, so that P' is undefined.
    """
    if N_prime < 2:
        raise DomainError(f"N' must be >= 2, got {N_prime}")
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    gamma = 0.5 * math.log(N_prime)
    b_seed = b_star(reference_power(params, epsilon), params.sigma_eta2)
    backoff = 2.0 / math.sqrt(N_prime) + b_seed / math.sqrt(N_prime + 1)
    zeta = math.sqrt(N_prime - 1) * backoff
    denom = 1.0 - epsilon - backoff
    if denom <= 0.0:
        raise VacuousConverseError(f"P' undefined at N' = {N_prime}: 1 - epsilon - zeta/sqrt(N'-1) = {denom:.6g}")
    P_prime = params.P / denom
    return ConverseContext(
        N_prime=N_prime,
        gamma=gamma,
        zeta=zeta,
        P_prime=P_prime,
        epsilon_prime=1.0 - backoff,
        B_star=b_star(P_prime, params.sigma_eta2),
    )


def _tail_argument(ctx: ConverseContext) -> float:
    return ctx.epsilon_prime + math.exp(-ctx.gamma) + ctx.B_star / math.sqrt(ctx.N_prime + 1)


def converse_feasible(ctx: ConverseContext, params: ChannelParams, targets: TargetSpec) -> bool:
    """True when blocklength N' is not excluded by the converse inequality.

    N' C(P') - R(d) >= sqrt(V_d + N' V(P')) Q^{-1}(eps' + e^{-gamma} + B*/sqrt(N'+1)) - gamma.
    A tail argument >= 1 makes the condition vacuous.
    """
    targets.validate(params)
    arg = _tail_argument(ctx)
    if arg >= 1.0:
        return True
    n = ctx.N_prime
    lhs = n * gaussian_capacity(ctx.P_prime, params.sigma_eta2) - rate_distortion(targets.d, params.sigma_s2)
    spread = math.sqrt(SOURCE_DISPERSION + n * dispersion(ctx.P_prime, params.sigma_eta2))
    return lhs >= spread * q_inverse(arg) - ctx.gamma


def _exact_feasible_chunk(ns: np.ndarray, params: ChannelParams, targets: TargetSpec) -> np.ndarray:
    """Vectorized `converse_feasible` over candidate blocklengths, vacuous cases included."""
    eps = targets.epsilon
    r = rate_distortion(targets.d, params.sigma_s2)
    b_seed = b_star(reference_power(params, eps), params.sigma_eta2)
    nf = ns.astype(float)
    backoff = 2.0 / np.sqrt(nf) + b_seed / np.sqrt(nf + 1.0)
    denom = 1.0 - eps - backoff
    out = np.ones(ns.shape, dtype=bool)
    ok = denom > 0.0
    if not ok.any():
        return out
    n_ok = nf[ok]
    p_prime = params.P / denom[ok]
    bs = b_star(p_prime, params.sigma_eta2)
    arg = (1.0 - backoff[ok]) + 1.0 / np.sqrt(n_ok) + bs / np.sqrt(n_ok + 1.0)
    informative = arg < 1.0
    res = np.ones(n_ok.shape, dtype=bool)
    if informative.any():
        n_i = n_ok[informative]
        pp = p_prime[informative]
        lhs = n_i * gaussian_capacity(pp, params.sigma_eta2) - r
        spread = np.sqrt(SOURCE_DISPERSION + n_i * dispersion(pp, params.sigma_eta2))
        rhs = spread * q_inverse(arg[informative]) - 0.5 * np.log(n_i)
        res[informative] = lhs >= rhs
    out[ok] = res
    return out


def f1(x, params: ChannelParams, epsilon: float, o_coefficient: float = 0.0):
    """F1(x) = x C(P/(1-eps)) + sqrt(V_d + x V(P/(1-eps))) sqrt(ln x) + o_coefficient sqrt(x).

    The last term stands in for an unspecified O(sqrt(x)) remainder; with the
    default of zero the value is an approximation.
    """
    x = np.asarray(x, dtype=float)
    if np.isnan(x).any() or (x < 2.0).any():
        raise DomainError("f1: x must be >= 2")
    p = reference_power(params, epsilon)
    out = (
        x * gaussian_capacity(p, params.sigma_eta2)
        + np.sqrt(SOURCE_DISPERSION + x * dispersion(p, params.sigma_eta2)) * np.sqrt(np.log(x))
        + o_coefficient * np.sqrt(x)
    )
    return float(out) if out.ndim == 0 else out


class UpperMode(str, Enum):
    EXACT = "exact"
    ASYMPTOTIC_F1 = "asymptotic"


def theorem1_upper(
    params: ChannelParams,
    targets: TargetSpec,
    mode=UpperMode.EXACT,
    o_coefficient: float = 0.0,
    scan_limit: int = DEFAULT_SCAN_LIMIT,
) -> int:
    """Converse blocklength N1 >= 2; the upper rate bound is 1/(N1 - 1).

    Exact mode returns the smallest N' >= 2 not excluded by the explicit
    converse inequality.  Asymptotic mode returns the smallest x >= 2 with
    F1(x) >= R(d).
    """
    mode = UpperMode(mode)
    targets.validate(params)
    r = rate_distortion(targets.d, params.sigma_s2)
    start = 2
    while start <= scan_limit:
        stop = min(start + _SCAN_CHUNK, scan_limit + 1)
        ns = np.arange(start, stop, dtype=np.int64)
        if mode is UpperMode.EXACT:
            hit = _exact_feasible_chunk(ns, params, targets)
        else:
            hit = f1(ns, params, targets.epsilon, o_coefficient) >= r
        if hit.any():
            return int(ns[np.argmax(hit)])
        start = stop
    raise ScanOverflowError(
        f"no crossing for N' in [2, {scan_limit}] (mode={mode.value}, d={targets.d}, epsilon={targets.epsilon}, R(d)={r:.6g})"
    )


@dataclass(frozen=True)
class BoundReport:
    d: float
    ntilde1: int
    ntilde2: int
    n2: int
    n3: int
    n1: int
    rate_lower_classic: float
    rate_lower_modified: float
    rate_upper: float
    binding: dict
    mode: UpperMode


def _binding(distortion_n: int, secrecy_n: int) -> str:
    if distortion_n > secrecy_n:
        return "distortion"
    if secrecy_n > distortion_n:
        return "secrecy"
    return "tie"


def bracket(
    params: ChannelParams,
    targets: TargetSpec,
    mode=UpperMode.EXACT,
    o_coefficient: float = 0.0,
    scan_limit: int = DEFAULT_SCAN_LIMIT,
) -> BoundReport:
    """All blocklength bounds and the resulting secrecy-rate bracket at one target."""
    mode = UpperMode(mode)
    ntilde1, ntilde2 = lemma1_lower(params, targets)
    n2, n3 = theorem2_lower(params, targets)
    n1 = theorem1_upper(params, targets, mode, o_coefficient, scan_limit)
    return BoundReport(
        d=targets.d,
        ntilde1=ntilde1,
        ntilde2=ntilde2,
        n2=n2,
        n3=n3,
        n1=n1,
        rate_lower_classic=min(1.0 / ntilde1, 1.0 / ntilde2),
        rate_lower_modified=min(1.0 / n2, 1.0 / n3),
        rate_upper=1.0 / (n1 - 1),
        binding={"classic": _binding(ntilde1, ntilde2), "modified": _binding(n2, n3)},
        mode=mode,
    )
