"""Gaussian measures, the covariance-comparison operator, and divergences.

Two Gaussians N(m2, C2), N(m1, C1) on the same finite-dimensional space are
compared through R(C2 || C1) = C1^{-1/2} C2 C1^{-1/2} - I (symmetric square
roots).  All divergences are evaluated eigenvalue-wise in the eigenbasis of R:

    KL(nu2 || nu1)      = 1/2 ||C1^{-1/2} dm||^2 + sum_i f_kl(lam_i),
    D_ren_rho(nu2||nu1) = 1/2 sum_i q_i^2 / (1 + (1-rho) lam_i)
                          + sum_i [(rho-1) log(1+lam_i) + log(1+(1-rho) lam_i)]
                            / (2 rho (1-rho)),

with f_kl(x) = (x - log(1+x))/2, dm = m2 - m1, and q the coordinates of
C1^{-1/2} dm in the eigenbasis.  Amari-alpha and the Hellinger distance are
monotone transforms of the Renyi divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DegeneracyError,
    DomainError,
    InputValidationError,
    SingularityError,
)

#: Eigenvalues of R at or below -1 + SINGULARITY_TOL mean the pair is singular.
SINGULARITY_TOL = 1e-12

#: Relative eigenvalue floor below which a covariance counts as degenerate.
SPD_TOL = 1e-12

_FAMILIES = ("kl_forward", "kl_reverse", "renyi", "amari", "hellinger")


def f_kl(x):
    """Per-eigenvalue reverse-KL covariance loss, (x - log(1+x))/2."""
    x = np.asarray(x, dtype=float)
    return 0.5 * (x - np.log1p(x))


@dataclass(frozen=True)
class GaussianMeasure:
    """Gaussian N(mean, L L^T) given through a (not necessarily symmetric) factor L."""

    mean: np.ndarray
    cov_factor: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        fac = np.asarray(self.cov_factor, dtype=float)
        if mean.ndim != 1:
            raise InputValidationError("mean must be a vector")
        if fac.ndim != 2 or fac.shape[0] != mean.shape[0]:
            raise InputValidationError(
                f"cov_factor shape {fac.shape} incompatible with mean of length {mean.shape[0]}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(fac))):
            raise InputValidationError("mean/cov_factor contain non-finite entries")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov_factor", fac)

    @classmethod
    def from_covariance(cls, mean, cov) -> "GaussianMeasure":
        """Build from a dense SPD covariance via its Cholesky factor."""
        cov = np.asarray(cov, dtype=float)
        try:
            factor = np.linalg.cholesky(0.5 * (cov + cov.T))
        except np.linalg.LinAlgError as exc:
            raise DegeneracyError("covariance is not positive definite") from exc
        return cls(mean=np.asarray(mean, dtype=float), cov_factor=factor)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def cov(self) -> np.ndarray:
        return self.cov_factor @ self.cov_factor.T


@dataclass(frozen=True)
class FeldmanHajekOperator:
    """Eigendecomposition of R(C2 || C1); eigenvalues ascending, all > -1."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def as_matrix(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T


@dataclass(frozen=True)
class DivergenceSpec:
    """Divergence family selector; ``order`` is required in (0,1) for renyi/amari."""

    family: str
    order: float | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise InputValidationError(
                f"unknown divergence family {self.family!r}; expected one of {_FAMILIES}")
        if self.family in ("renyi", "amari"):
            if self.order is None or not 0.0 < self.order < 1.0:
                raise InputValidationError(
                    f"{self.family} requires an order in (0, 1), got {self.order!r}")
        elif self.order is not None:
            raise InputValidationError(f"{self.family} does not take an order")

    def label(self) -> str:
        if self.order is None:
            return self.family
        return f"{self.family}-{self.order:.17g}"


def _spd_eigh(cov, name: str = "covariance"):
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise InputValidationError(f"{name} must be square")
    evals, evecs = scipy.linalg.eigh(0.5 * (cov + cov.T))
    if evals[-1] <= 0.0 or evals[0] <= SPD_TOL * evals[-1]:
        raise DegeneracyError(f"{name} is not numerically positive definite")
    return evals, evecs


def _inv_sqrt(cov, name: str = "covariance") -> np.ndarray:
    evals, evecs = _spd_eigh(cov, name)
    return (evecs / np.sqrt(evals)) @ evecs.T


def fh_operator(c2, c1) -> FeldmanHajekOperator:
    """R(C2 || C1) = C1^{-1/2} C2 C1^{-1/2} - I, as an eigendecomposition."""
    c2 = np.asarray(c2, dtype=float)
    c1 = np.asarray(c1, dtype=float)
    if c2.shape != c1.shape:
        raise InputValidationError("covariances must have equal shape")
    w = _inv_sqrt(c1, "c1")
    a = w @ (0.5 * (c2 + c2.T)) @ w
    evals, evecs = scipy.linalg.eigh(0.5 * (a + a.T))
    lam = evals - 1.0
    if np.any(lam <= -1.0 + SINGULARITY_TOL):
        raise SingularityError(
            "R eigenvalue at or below -1: the measures are mutually singular")
    return FeldmanHajekOperator(eigenvalues=lam, eigenvectors=evecs)


def logdet2(r: FeldmanHajekOperator) -> float:
    """log of the Hilbert-Carleman determinant det2(I + R) = det(I+R) e^{-tr R}."""
    lam = np.asarray(r.eigenvalues, dtype=float)
    if np.any(lam <= -1.0 + SINGULARITY_TOL):
        raise SingularityError("eigenvalue at or below -1")
    return float(np.sum(np.log1p(lam) - lam))


def renyi_eigenvalue_term(lam, rho: float):
    """Covariance part of D_ren_rho, eigenvalue-wise: defined for 1+(1-rho)lam > 0."""
    lam = np.asarray(lam, dtype=float)
    shifted = 1.0 + (1.0 - rho) * lam
    if np.any(shifted <= 0.0):
        raise DomainError(f"rho I + (1-rho)(I+R) not positive for rho={rho}")
    return ((rho - 1.0) * np.log1p(lam) + np.log(shifted)) / (2.0 * rho * (1.0 - rho))


def _kl(nu2: GaussianMeasure, nu1: GaussianMeasure) -> float:
    r = fh_operator(nu2.cov, nu1.cov)
    u = _inv_sqrt(nu1.cov, "c1") @ (nu2.mean - nu1.mean)
    return float(0.5 * np.dot(u, u) + np.sum(f_kl(r.eigenvalues)))


def _renyi(nu2: GaussianMeasure, nu1: GaussianMeasure, rho: float) -> float:
    r = fh_operator(nu2.cov, nu1.cov)
    u = _inv_sqrt(nu1.cov, "c1") @ (nu2.mean - nu1.mean)
    q = r.eigenvectors.T @ u
    shifted = 1.0 + (1.0 - rho) * r.eigenvalues
    if np.any(shifted <= 0.0):
        raise DomainError(f"rho I + (1-rho)(I+R) not positive for rho={rho}")
    mean_term = 0.5 * float(np.sum(q * q / shifted))
    return mean_term + float(np.sum(renyi_eigenvalue_term(r.eigenvalues, rho)))


def amari_from_renyi(renyi_value: float, alpha: float) -> float:
    """Amari alpha-divergence as a transform of the alpha-Renyi divergence."""
    c = alpha * (1.0 - alpha)
    return -math.expm1(-c * renyi_value) / c


def hellinger_from_renyi(renyi_half_value: float) -> float:
    """Hellinger distance from the order-1/2 Renyi divergence."""
    # roundoff can push a zero divergence a few ulp negative
    return math.sqrt(max(2.0 * -math.expm1(-renyi_half_value), 0.0))


def divergence(nu2: GaussianMeasure, nu1: GaussianMeasure, spec: DivergenceSpec) -> float:
    """Divergence between Gaussians; kl_reverse(nu2, nu1) is KL(nu1 || nu2)."""
    if nu2.dim != nu1.dim:
        raise InputValidationError("measures must share dimension")
    if spec.family == "kl_forward":
        return _kl(nu2, nu1)
    if spec.family == "kl_reverse":
        return _kl(nu1, nu2)
    if spec.family == "renyi":
        return _renyi(nu2, nu1, spec.order)
    if spec.family == "amari":
        return amari_from_renyi(_renyi(nu2, nu1, spec.order), spec.order)
    # hellinger
    return hellinger_from_renyi(_renyi(nu2, nu1, 0.5))


def mean_shift_loss(m, m_pos, cov) -> float:
    """Squared covariance-weighted mean shift (m - m_pos)^T C^{-1} (m - m_pos).

    For same-covariance pairs this equals twice the KL divergence (either
    direction) and twice the Renyi divergence of any order.
    """
    m = np.asarray(m, dtype=float)
    m_pos = np.asarray(m_pos, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if m.shape != m_pos.shape:
        raise InputValidationError("mean vectors must have equal length")
    delta = m - m_pos
    try:
        cho = scipy.linalg.cho_factor(0.5 * (cov + cov.T))
    except scipy.linalg.LinAlgError as exc:
        raise DegeneracyError("covariance is not positive definite") from exc
    return float(delta @ scipy.linalg.cho_solve(cho, delta))
