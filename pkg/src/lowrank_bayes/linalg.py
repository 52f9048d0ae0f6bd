"""Dense linear-algebra kernel.

SVD with a deterministic sign convention, Moore-Penrose pseudoinverse,
rank-r truncation, and the generalized reduced-rank approximation

    min ||M - T N S||_F  over  rank(N) <= r,

solved by N_hat = T^+ (P_ranT M P_kerS_perp)_r S^+, which also satisfies the
minimality condition N = P_kerT_perp N P_ranS.  Everything here is a pure
function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputValidationError

#: Relative cutoff below which singular values are treated as exactly zero.
DEFAULT_RANK_TOL = 1e-12


def _as_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise InputValidationError(f"{name} must be 2-dimensional, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise InputValidationError(f"{name} contains non-finite entries")
    return a


def _first_significant(col: np.ndarray) -> int:
    scale = np.abs(col).max()
    if scale == 0.0:
        return 0
    return int(np.flatnonzero(np.abs(col) > 1e-12 * scale)[0])


def _fix_svd_signs(u: np.ndarray, s: np.ndarray, vt: np.ndarray):
    """Flip signs so the first nonzero entry of each right vector is positive.

    Paired (u_i, v_i) columns flip together, preserving U S V^T.  Null-space
    columns (beyond the number of singular values) have no partner and are
    normalized independently.
    """
    k = s.shape[0]
    v = vt.T.copy()
    u = u.copy()
    for j in range(v.shape[1]):
        col = v[:, j]
        if col[_first_significant(col)] < 0:
            v[:, j] = -col
            if j < k:
                u[:, j] = -u[:, j]
    for j in range(k, u.shape[1]):
        col = u[:, j]
        if col[_first_significant(col)] < 0:
            u[:, j] = -col
    return u, s, v


@dataclass(frozen=True)
class Svd:
    """Full singular value decomposition M = U diag(s) V^T.

    ``left_vectors`` is p x p, ``right_vectors`` is q x q, and
    ``singular_values`` has length min(p, q), sorted nonincreasing.
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        k = self.singular_values.shape[0]
        u = self.left_vectors[:, :k]
        v = self.right_vectors[:, :k]
        return (u * self.singular_values) @ v.T

    def rank(self, rank_tol: float = DEFAULT_RANK_TOL) -> int:
        s = self.singular_values
        if s.size == 0 or s[0] <= 0.0:
            return 0
        return int(np.count_nonzero(s > rank_tol * s[0]))


def svd(m) -> Svd:
    """Full SVD with the deterministic sign convention of :func:`_fix_svd_signs`."""
    a = _as_matrix(m)
    u, s, vt = np.linalg.svd(a, full_matrices=True)
    u, s, v = _fix_svd_signs(u, s, vt)
    return Svd(left_vectors=u, singular_values=s, right_vectors=v)


def pinv(m, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Moore-Penrose inverse, zeroing singular values below rank_tol * sigma_max."""
    a = _as_matrix(m)
    if rank_tol <= 0:
        raise InputValidationError("rank_tol must be positive")
    return np.linalg.pinv(a, rcond=rank_tol)


def truncated_svd(m, r: int) -> np.ndarray:
    """Best rank-r Frobenius approximation; ties broken by keeping the first r."""
    if r < 0:
        raise InputValidationError("rank must be nonnegative")
    dec = svd(m)
    k = min(r, dec.singular_values.shape[0])
    if k == 0:
        return np.zeros((dec.left_vectors.shape[0], dec.right_vectors.shape[0]))
    u = dec.left_vectors[:, :k]
    v = dec.right_vectors[:, :k]
    return (u * dec.singular_values[:k]) @ v.T


def _range_basis(dec: Svd, rank_tol: float) -> np.ndarray:
    """Orthonormal basis of the column space, at the numerical rank."""
    return dec.left_vectors[:, : dec.rank(rank_tol)]


def _row_basis(dec: Svd, rank_tol: float) -> np.ndarray:
    """Orthonormal basis of the row space (= kernel complement)."""
    return dec.right_vectors[:, : dec.rank(rank_tol)]


@dataclass(frozen=True)
class ReducedRankSolution:
    """Minimizer of ||M - T N S||_F over rank(N) <= r, in minimal form."""

    n_hat: np.ndarray
    achieved_loss: float
    unique: bool
    tail_singular_values: np.ndarray


def generalized_reduced_rank(m, t, s, r: int,
                             rank_tol: float = DEFAULT_RANK_TOL) -> ReducedRankSolution:
    """Solve min ||M - T N S||_F over rank(N) <= r.

    Returns N_hat = T^+ (P_ranT M P_kerS_perp)_r S^+ together with the achieved
    loss ||M - T N_hat S||_F, the tail singular values of the projected core
    P_ranT M P_kerS_perp, and a uniqueness flag (sigma_{r+1} = 0 or
    sigma_r > sigma_{r+1}, at rank_tol resolution).
    """
    m_ = _as_matrix(m, "M")
    t_ = _as_matrix(t, "T")
    s_ = _as_matrix(s, "S")
    if r < 0:
        raise InputValidationError("rank must be nonnegative")
    p, q = m_.shape
    if t_.shape[0] != p:
        raise InputValidationError(
            f"T has {t_.shape[0]} rows but M has {p}")
    if s_.shape[1] != q:
        raise InputValidationError(
            f"S has {s_.shape[1]} columns but M has {q}")

    dec_t = svd(t_)
    dec_s = svd(s_)
    ran_t = _range_basis(dec_t, rank_tol)
    row_s = _row_basis(dec_s, rank_tol)

    core = ran_t @ (ran_t.T @ m_ @ row_s) @ row_s.T
    dec_c = svd(core)
    sig = dec_c.singular_values
    k = min(r, sig.shape[0])
    core_r = (dec_c.left_vectors[:, :k] * sig[:k]) @ dec_c.right_vectors[:, :k].T

    n_hat = pinv(t_, rank_tol) @ core_r @ pinv(s_, rank_tol)
    achieved = float(np.linalg.norm(m_ - t_ @ n_hat @ s_, ord="fro"))

    smax = sig[0] if sig.size else 0.0
    if r >= sig.shape[0] or sig[r] <= rank_tol * smax:
        unique = True
    elif r == 0:
        # the zero operator is the only rank-0 candidate
        unique = True
    else:
        unique = bool(sig[r - 1] - sig[r] > rank_tol * smax)

    return ReducedRankSolution(
        n_hat=n_hat,
        achieved_loss=achieved,
        unique=unique,
        tail_singular_values=sig[r:].copy(),
    )
