"""Linear Gaussian inverse problems in prior Karhunen-Loeve coordinates.

The prior covariance is diagonal here, so its (inverse) square roots are exact
diagonal scalings.  The update spectrum comes from the SVD

    C_pr^{1/2} G^T C_obs^{-1/2} = sum_i sqrt(d_i) w_i phi_i^T,
    d_i = -lambda_i / (1 + lambda_i),

from which everything else follows: lambda_i in (-1, 0], the non-self-adjoint
square roots S_pos, S_y of the posterior and data covariances, and the
posterior/prior variance ratios 1 + lambda_i.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegeneracyError, InputValidationError
from .linalg import DEFAULT_RANK_TOL, _fix_svd_signs

#: Default cap on the truncation dimension for dense spectral work.
DEFAULT_MAX_DIM = 4096

#: Environment variable overriding the cap.
MAX_DIM_ENV = "LOWRANK_BAYES_MAX_DIM"


def _max_dim() -> int:
    raw = os.environ.get(MAX_DIM_ENV)
    if raw is None:
        return DEFAULT_MAX_DIM
    try:
        return int(raw)
    except ValueError as exc:
        raise InputValidationError(f"{MAX_DIM_ENV} must be an integer, got {raw!r}") from exc


@dataclass(frozen=True)
class SpectralPrior:
    """Centered Gaussian prior with diagonal covariance diag(variances)."""

    variances: np.ndarray
    basis_labels: dict | None = None

    def __post_init__(self):
        var = np.asarray(self.variances, dtype=float)
        if var.ndim != 1 or var.size == 0:
            raise InputValidationError("variances must be a nonempty vector")
        if not np.all(np.isfinite(var)) or np.any(var <= 0.0):
            raise InputValidationError("prior variances must be finite and positive")
        object.__setattr__(self, "variances", var)

    @property
    def dim(self) -> int:
        return self.variances.shape[0]

    @property
    def std(self) -> np.ndarray:
        """Diagonal of C_pr^{1/2}."""
        return np.sqrt(self.variances)


@dataclass(frozen=True)
class InverseProblem:
    """Observation model Y = G X + zeta, zeta ~ N(0, noise_cov), X ~ prior."""

    g: np.ndarray
    noise_cov: np.ndarray
    prior: SpectralPrior

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        cov = np.asarray(self.noise_cov, dtype=float)
        if g.ndim != 2:
            raise InputValidationError("g must be a matrix")
        if not np.all(np.isfinite(g)):
            raise InputValidationError("g contains non-finite entries")
        n = g.shape[0]
        if cov.shape != (n, n):
            raise InputValidationError(
                f"noise_cov shape {cov.shape} incompatible with {n} observations")
        if g.shape[1] != self.prior.dim:
            raise InputValidationError(
                f"g has {g.shape[1]} columns but the prior has dimension {self.prior.dim}")
        try:
            np.linalg.cholesky(0.5 * (cov + cov.T))
        except np.linalg.LinAlgError as exc:
            raise DegeneracyError("noise covariance is not positive definite") from exc
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "noise_cov", cov)

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @property
    def m(self) -> int:
        return self.g.shape[1]

    def prior_cov(self) -> np.ndarray:
        return np.diag(self.prior.variances)


@dataclass(frozen=True)
class PosteriorSpectrum:
    """Spectral data of the prior-to-posterior update.

    ``lambdas`` has length m, is nondecreasing in (-1, 0] with exactly ``rank_h``
    nonzero entries.  ``w`` (m x m) and ``phi`` (n x n) are the completed left and
    right singular bases of C_pr^{1/2} G^T C_obs^{-1/2}; ``v`` (m x m) is the
    posterior-side basis sqrt(1+lambda_i) C_pos^{-1/2} C_pr^{1/2} w_i.  ``s_pos``
    and ``s_y`` factor the posterior and data covariances, C = S S^T.
    """

    lambdas: np.ndarray
    w: np.ndarray
    phi: np.ndarray
    v: np.ndarray
    s_pos: np.ndarray
    s_y: np.ndarray
    rank_h: int
    prior_std: np.ndarray

    @property
    def m(self) -> int:
        return self.w.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def hessian_eigenvalues(self) -> np.ndarray:
        """Eigenvalues d_i = -lambda_i/(1+lambda_i) of C_pr^{1/2} H C_pr^{1/2}."""
        lam = self.lambdas
        return -lam / (1.0 + lam)

    def whiten_posterior(self, x: np.ndarray) -> np.ndarray:
        """Apply S_pos^{-1} = W diag((1+lambda)^{-1/2}) W^T C_pr^{-1/2}."""
        y = np.asarray(x, dtype=float)
        scaled = (y.T / self.prior_std).T
        coeff = self.w.T @ scaled
        coeff = (coeff.T / np.sqrt(1.0 + self.lambdas)).T
        return self.w @ coeff


@dataclass(frozen=True)
class Posterior:
    """Exact Gaussian posterior N(mean, covariance) for one data realization."""

    mean: np.ndarray
    covariance: np.ndarray
    data: np.ndarray

    def measure(self):
        from .measures import GaussianMeasure

        return GaussianMeasure.from_covariance(self.mean, self.covariance)


def hessian(p: InverseProblem) -> np.ndarray:
    """Negative log-likelihood Hessian H = G^T C_obs^{-1} G (symmetrized)."""
    cho = scipy.linalg.cho_factor(0.5 * (p.noise_cov + p.noise_cov.T))
    h = p.g.T @ scipy.linalg.cho_solve(cho, p.g)
    return 0.5 * (h + h.T)


def data_covariance(p: InverseProblem) -> np.ndarray:
    """Marginal data covariance C_y = G C_pr G^T + C_obs."""
    gc = p.g * p.prior.variances
    cy = gc @ p.g.T + p.noise_cov
    return 0.5 * (cy + cy.T)


def _gain(p: InverseProblem) -> np.ndarray:
    """Posterior-mean operator C_pr G^T C_y^{-1} (equals C_pos G^T C_obs^{-1})."""
    cy = data_covariance(p)
    try:
        cho = scipy.linalg.cho_factor(cy)
    except scipy.linalg.LinAlgError as exc:
        raise DegeneracyError("data covariance is numerically singular") from exc
    cg = (p.g * p.prior.variances).T
    return scipy.linalg.cho_solve(cho, cg.T).T


def posterior_covariance(p: InverseProblem) -> np.ndarray:
    """C_pos = C_pr - C_pr G^T C_y^{-1} G C_pr, independent of the data."""
    k = _gain(p)
    cov = np.diag(p.prior.variances) - k @ (p.g * p.prior.variances)
    return 0.5 * (cov + cov.T)


def posterior(p: InverseProblem, y) -> Posterior:
    """Exact posterior for data y; verifies C_pos^{-1} = C_pr^{-1} + H internally."""
    y = np.asarray(y, dtype=float)
    if y.shape != (p.n,):
        raise InputValidationError(f"data must have length {p.n}")
    if not np.all(np.isfinite(y)):
        raise InputValidationError("data contains non-finite entries")
    k = _gain(p)
    mean = k @ y
    cov = np.diag(p.prior.variances) - k @ (p.g * p.prior.variances)
    cov = 0.5 * (cov + cov.T)
    ident = (cov / p.prior.variances[:, None] + hessian(p) @ cov)
    err = np.abs(ident - np.eye(p.m)).max()
    if err > 1e-8 * max(1.0, np.abs(ident).max()):
        raise DegeneracyError(
            f"posterior precision identity violated (residual {err:.3e})")
    return Posterior(mean=mean, covariance=cov, data=y)


def _obs_sqrt_pair(noise_cov: np.ndarray):
    evals, evecs = scipy.linalg.eigh(0.5 * (noise_cov + noise_cov.T))
    if evals[0] <= 0.0:
        raise DegeneracyError("noise covariance is not positive definite")
    half = (evecs * np.sqrt(evals)) @ evecs.T
    inv_half = (evecs / np.sqrt(evals)) @ evecs.T
    return half, inv_half


def spectrum(p: InverseProblem, rank_tol: float = DEFAULT_RANK_TOL) -> PosteriorSpectrum:
    """Spectral decomposition of the prior-to-posterior update.

    Dense SVD of C_pr^{1/2} G^T C_obs^{-1/2}; the truncation dimension is capped
    (override with the LOWRANK_BAYES_MAX_DIM environment variable).
    """
    cap = _max_dim()
    if p.m > cap:
        raise InputValidationError(
            f"truncation dimension {p.m} exceeds the cap {cap}; "
            f"set {MAX_DIM_ENV} to raise it")
    c = p.prior.std
    obs_half, obs_inv_half = _obs_sqrt_pair(p.noise_cov)
    j = c[:, None] * (p.g.T @ obs_inv_half)
    u, s, vt = np.linalg.svd(j, full_matrices=True)
    u, s, v = _fix_svd_signs(u, s, vt)

    # numerical rank at rank_tol relative to the largest *squared* singular value
    k = s.shape[0]
    rank_h = int(np.count_nonzero(s * s > rank_tol * s[0] * s[0])) if k and s[0] > 0.0 else 0
    d = np.zeros(p.m)
    d[:rank_h] = s[:rank_h] ** 2
    lam = np.maximum(-d / (1.0 + d), -1.0 + 1e-14)

    scale_w = np.sqrt(1.0 + lam)
    s_pos = (c[:, None] * u * scale_w) @ u.T

    lam_y = np.zeros(p.n)
    lam_y[: min(rank_h, p.n)] = lam[: min(rank_h, p.n)]
    s_y = obs_half @ (v / np.sqrt(1.0 + lam_y)) @ v.T

    c_pos = s_pos @ s_pos.T
    evals, evecs = scipy.linalg.eigh(0.5 * (c_pos + c_pos.T))
    if evals[0] <= 0.0:
        raise DegeneracyError("posterior covariance lost positivity")
    c_pos_inv_half = (evecs / np.sqrt(evals)) @ evecs.T
    v_basis = c_pos_inv_half @ (c[:, None] * u) * scale_w

    return PosteriorSpectrum(
        lambdas=lam,
        w=u,
        phi=v,
        v=v_basis,
        s_pos=s_pos,
        s_y=s_y,
        rank_h=rank_h,
        prior_std=c.copy(),
    )


def variance_reduction(spec: PosteriorSpectrum, p: InverseProblem, i: int) -> float:
    """Posterior/prior variance ratio of <X, C_pr^{-1/2} w_i> (1-based i).

    Computed directly as a quadratic-form ratio from C_pos and C_pr; equals
    1 + lambda_i.
    """
    if not 1 <= i <= spec.m:
        raise InputValidationError(f"index must be in 1..{spec.m}")
    z = spec.w[:, i - 1] / spec.prior_std
    c_pos = posterior_covariance(p)
    num = float(z @ c_pos @ z)
    den = float(z @ (p.prior.variances * z))
    return num / den


def problem_to_json(p: InverseProblem, meta: dict | None = None) -> str:
    """Serialize to the canonical interchange JSON (row-major arrays)."""
    doc = {
        "prior_variances": p.prior.variances.tolist(),
        "g": p.g.tolist(),
        "noise_cov": p.noise_cov.tolist(),
        "meta": meta if meta is not None else (p.prior.basis_labels or {}),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def problem_from_json(text: str) -> InverseProblem:
    """Parse the canonical interchange JSON."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputValidationError(f"invalid problem JSON: {exc}") from exc
    for key in ("prior_variances", "g", "noise_cov"):
        if key not in doc:
            raise InputValidationError(f"problem JSON missing key {key!r}")
    prior = SpectralPrior(
        variances=np.asarray(doc["prior_variances"], dtype=float),
        basis_labels=doc.get("meta") or None,
    )
    return InverseProblem(
        g=np.asarray(doc["g"], dtype=float),
        noise_cov=np.asarray(doc["noise_cov"], dtype=float),
        prior=prior,
    )
