"""Covariance estimation and the concentration toolkit.

Holds the regularised inverse covariance used by the Q-estimators, the
magnitude-reduced estimator, adaptive Freedman bounds and the two PSD
sandwich checks for averages of i.i.d. PSD matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

INVERSE_RESIDUAL_TOL = 1e-8
SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    n: int
    sigma_tilde: np.ndarray
    gamma: float
    sigma_dagger: np.ndarray

    @property
    def d(self) -> int:
        return self.sigma_tilde.shape[0]

    def norm_sq(self, phi: np.ndarray) -> np.ndarray:
        """||phi||^2 in the sigma_dagger metric, batched over leading axes."""
        phi = np.asarray(phi, dtype=float)
        return np.einsum("...i,ij,...j->...", phi, self.sigma_dagger, phi)

    def residual(self) -> float:
        a = self.sigma_tilde + self.gamma * np.eye(self.d)
        return float(np.abs(self.sigma_dagger @ a - np.eye(self.d)).max())


def empirical_covariance(samples) -> np.ndarray:
    """(1/n) sum_k phi_k phi_k^T for an (n, d) array or a list of d-vectors."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("need a nonempty (n, d) array of samples")
    cov = x.T @ x / x.shape[0]
    return 0.5 * (cov + cov.T)


def regularized_inverse(sigma_tilde, gamma: float, n: int = 0) -> CovarianceEstimate:
    """(sigma_tilde + gamma I)^{-1} via Cholesky plus one refinement step."""
    s = np.asarray(sigma_tilde, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("sigma_tilde must be square")
    if not np.all(np.isfinite(s)):
        raise ValueError("sigma_tilde has non-finite entries")
    if np.abs(s - s.T).max(initial=0.0) > SYMMETRY_TOL:
        raise ValueError("sigma_tilde is not symmetric")
    if not gamma > 0 or not math.isfinite(gamma):
        raise ValueError("gamma must be a positive finite number")
    d = s.shape[0]
    a = 0.5 * (s + s.T) + gamma * np.eye(d)
    cf = linalg.cho_factor(a, lower=True, check_finite=False)
    eye = np.eye(d)
    inv = linalg.cho_solve(cf, eye, check_finite=False)
    # one step of iterative refinement: X <- X + A^{-1}(I - A X)
    inv = inv + linalg.cho_solve(cf, eye - a @ inv, check_finite=False)
    inv = 0.5 * (inv + inv.T)
    res = float(np.abs(inv @ a - eye).max())
    if res > INVERSE_RESIDUAL_TOL:
        raise FloatingPointError(f"regularized inverse residual {res:.3g} exceeds {INVERSE_RESIDUAL_TOL}")
    st = s.copy()
    inv.setflags(write=False)
    st.setflags(write=False)
    return CovarianceEstimate(int(n), st, float(gamma), inv)


def covariance_estimate(samples, gamma: float) -> CovarianceEstimate:
    x = np.asarray(samples, dtype=float)
    return regularized_inverse(empirical_covariance(x), gamma, n=x.shape[0])


def neg_part(x):
    """(x)_- = min(x, 0); works on scalars (including Fractions) and arrays."""
    if isinstance(x, np.ndarray):
        return np.minimum(x, 0.0)
    return x if x < 0 else 0 * x


def magnitude_reduce(z, m_hat):
    """Z - (Z)_- + m_hat: keeps the mean when m_hat = E[(Z)_-] and is >= m_hat."""
    return z - neg_part(z) + m_hat


@dataclass(frozen=True)
class FreedmanBound:
    sum_cond_second_moments: float
    sum_squares: float
    delta: float
    bound: float
    original_bound: float


def adaptive_freedman_bound(values, cond_second_moments, delta: float) -> FreedmanBound:
    """Data-dependent bound on |sum X_k| for a martingale difference sequence.

    ``bound`` is 8 sqrt(2) sqrt(V + S) log(C / delta) with V the sum of
    conditional second moments, S the sum of squares and C = 2 sqrt(2) sqrt(V + S);
    it is defined as 0 when V + S = 0.  ``original_bound`` is the earlier form
    3 sqrt(V) log(C'/delta) + 2 max|X| log(C'/delta), C' = 2 max{1, sqrt(V), max|X|}.
    """
    x = np.asarray(values, dtype=float)
    v = np.asarray(cond_second_moments, dtype=float)
    if x.shape != v.shape:
        raise ValueError("values and cond_second_moments must have equal lengths")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if np.any(v < 0):
        raise ValueError("conditional second moments must be nonnegative")
    sv = float(v.sum())
    ss = float(np.dot(x, x))
    tot = sv + ss
    if tot > 0:
        c = 2.0 * math.sqrt(2.0) * math.sqrt(tot)
        bound = 8.0 * math.sqrt(2.0) * math.sqrt(tot) * math.log(c / delta)
    else:
        bound = 0.0
    xmax = float(np.abs(x).max()) if x.size else 0.0
    c2 = 2.0 * max(1.0, math.sqrt(sv), xmax)
    lg = math.log(c2 / delta)
    original = 3.0 * math.sqrt(sv) * lg + 2.0 * xmax * lg
    return FreedmanBound(sv, ss, float(delta), bound, original)


def freedman_bound_batch(values: np.ndarray, cond_second_moments: np.ndarray, delta: float) -> np.ndarray:
    """Vectorised ``adaptive_freedman_bound(...).bound`` over the rows of 2-D inputs."""
    x = np.asarray(values, dtype=float)
    v = np.asarray(cond_second_moments, dtype=float)
    tot = v.sum(axis=-1) + (x * x).sum(axis=-1)
    root = np.sqrt(tot)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = 8.0 * math.sqrt(2.0) * root * np.log(2.0 * math.sqrt(2.0) * root / delta)
    return np.where(tot > 0, b, 0.0)


def psd_min_eig(a: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    return float(linalg.eigvalsh(0.5 * (a + a.T))[0])


def psd_sandwich_check(empirical, population, n: int, c: float, delta: float):
    """(upper, lower) flags for the two semidefinite sandwiches.

    upper: population <= 2 * empirical + 3c (d/n) log(d/delta) I
    lower: empirical <= (3/2) population + 3c (d/(2n)) log(d/delta) I
    Each flag is True when the minimum eigenvalue of (rhs - lhs) is >= -1e-9.
    """
    e = np.asarray(empirical, dtype=float)
    p = np.asarray(population, dtype=float)
    if e.shape != p.shape or e.ndim != 2 or e.shape[0] != e.shape[1]:
        raise ValueError("empirical and population must be square matrices of equal size")
    d = e.shape[0]
    eye = np.eye(d)
    lg = math.log(d / delta)
    upper = psd_min_eig(2.0 * e + 3.0 * c * (d / n) * lg * eye - p) >= -PSD_TOL
    lower = psd_min_eig(1.5 * p + 3.0 * c * (d / (2.0 * n)) * lg * eye - e) >= -PSD_TOL
    return bool(upper), bool(lower)
