"""Special functions and Gaussian linear algebra shared by the rest of the package.

All information quantities are in nats.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import linalg
from scipy.special import erfc, ndtri

__all__ = [
    "DomainError",
    "DegenerateDistributionError",
    "SOURCE_DISPERSION",
    "q_function",
    "q_inverse",
    "gaussian_capacity",
    "rate_distortion",
    "dispersion",
    "check_covariance",
    "MutualInformation",
    "gaussian_mutual_information",
]

SOURCE_DISPERSION = 0.5
_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class DegenerateDistributionError(ValueError):
    """A covariance matrix is singular (or not positive definite)."""


def _scalar_or_array(a):
    return float(a) if np.ndim(a) == 0 else a


def q_function(x):
    """Gaussian tail probability Q(x) = P[G > x] for G standard normal.

    Accepts scalars or arrays.
    """
    x = np.asarray(x, dtype=float)
    if np.isnan(x).any():
        raise DomainError("q_function: NaN argument")
    return _scalar_or_array(0.5 * erfc(x / _SQRT2))


def q_inverse(p):
    """Inverse of `q_function` on the open interval (0, 1).

    Starts from the Cephes rational approximation of the normal quantile
    and applies two Newton steps against `q_function`.
    """
    p = np.asarray(p, dtype=float)
    if np.isnan(p).any() or (p <= 0.0).any() or (p >= 1.0).any():
        raise DomainError("q_inverse: argument must lie in (0, 1)")
    x = -ndtri(p)
    for _ in range(2):
        density = _INV_SQRT2PI * np.exp(-0.5 * x * x)
        resid = 0.5 * erfc(x / _SQRT2) - p
        x = np.where(density > 0.0, x + resid / np.where(density > 0.0, density, 1.0), x)
    return _scalar_or_array(x)


def _check_noise(sigma_eta2):
    if not sigma_eta2 > 0.0:
        raise DomainError(f"noise variance must be positive, got {sigma_eta2!r}")


def gaussian_capacity(x, sigma_eta2):
    """C(x) = 1/2 ln(1 + x / sigma_eta2)."""
    _check_noise(sigma_eta2)
    x = np.asarray(x, dtype=float)
    if (x < 0.0).any() or np.isnan(x).any():
        raise DomainError("gaussian_capacity: power must be nonnegative")
    return _scalar_or_array(0.5 * np.log1p(x / sigma_eta2))


def rate_distortion(d, sigma_s2):
    """R(d) = 1/2 ln(sigma_s2 / d) on the open interval 0 < d < sigma_s2."""
    d = np.asarray(d, dtype=float)
    if np.isnan(d).any() or (d <= 0.0).any() or (d >= sigma_s2).any():
        raise DomainError(f"rate_distortion: need 0 < d < {sigma_s2}")
    return _scalar_or_array(0.5 * np.log(sigma_s2 / d))


def dispersion(x, sigma_eta2):
    """Gaussian channel dispersion V(x) = x(x + 2 s) / (2 (x + s)^2), s = sigma_eta2.

    The source dispersion is the constant `SOURCE_DISPERSION`.
    """
    _check_noise(sigma_eta2)
    x = np.asarray(x, dtype=float)
    if (x < 0.0).any() or np.isnan(x).any():
        raise DomainError("dispersion: power must be nonnegative")
    return _scalar_or_array(x * (x + 2.0 * sigma_eta2) / (2.0 * (x + sigma_eta2) ** 2))


def check_covariance(matrix) -> np.ndarray:
    """Validate a covariance matrix and return it as a float array.

    Symmetry is required to 1e-12 relative and eigenvalues must be at
    least -1e-10 * trace.
    """
    m = np.array(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DomainError(f"covariance must be a nonempty square matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise DomainError("covariance has non-finite entries")
    scale = max(np.abs(m).max(), np.finfo(float).tiny)
    if np.abs(m - m.T).max() > 1e-12 * scale:
        raise DomainError("covariance is not symmetric")
    m = 0.5 * (m + m.T)
    trace = np.trace(m)
    if np.linalg.eigvalsh(m).min() < -1e-10 * abs(trace):
        raise DomainError("covariance is not positive semidefinite")
    return m


class MutualInformation(NamedTuple):
    nats: float
    condition: float


def _logdet_pd(m: np.ndarray, what: str) -> float:
    try:
        c = linalg.cholesky(m, lower=True)
    except linalg.LinAlgError as exc:
        raise DegenerateDistributionError(f"{what} is not positive definite") from exc
    diag = np.diag(c)
    if (diag <= 0.0).any():
        raise DegenerateDistributionError(f"{what} is singular")
    return 2.0 * float(np.log(diag).sum())


def gaussian_mutual_information(joint, split: int, *, return_condition: bool = False):
    """Mutual information I(A; B) between the blocks of a jointly Gaussian vector.

    Parameters
    ----------
    joint : array_like, shape (n, n)
        Covariance of (A, B); A is the first `split` coordinates.
    split : int
        Dimension of A, 1 <= split < n.
    return_condition : bool
        Also return the 2-norm condition number of `joint`.

    Returns
    -------
    float or MutualInformation
        I(A; B) in nats, computed as 1/2 [ln det S_A - ln det S_{A|B}] where
        S_{A|B} is the Schur complement, which avoids differencing two large
        log-determinants.
    """
    m = check_covariance(joint)
    n = m.shape[0]
    if not 1 <= split < n:
        raise DomainError(f"split must satisfy 1 <= split < {n}, got {split}")
    sa = m[:split, :split]
    sb = m[split:, split:]
    sba = m[split:, :split]
    try:
        lb = linalg.cholesky(sb, lower=True)
    except linalg.LinAlgError as exc:
        raise DegenerateDistributionError("covariance of B is not positive definite") from exc
    w = linalg.solve_triangular(lb, sba, lower=True)
    schur = sa - w.T @ w
    mi = 0.5 * (_logdet_pd(sa, "covariance of A") - _logdet_pd(schur, "conditional covariance of A given B"))
    mi = max(mi, 0.0)
    if return_condition:
        return MutualInformation(mi, float(np.linalg.cond(m)))
    return mi
