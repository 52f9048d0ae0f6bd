"""Generators for the two worked inverse problems, in prior KL coordinates.

Both use the Dirichlet sine basis e_k(x) = sqrt(2) sin(k pi x) on (0, 1) and
identity observation noise.

* Deconvolution: the unknown is convolved against a kernel diagonal in the
  sine basis (eigenvalues b_k) and observed as weighted interval averages
  int_{t_i}^{t_i+1} (T x)(s) gamma(s) ds, so G[i, k] = b_k a_{k,i} with
  a_{k,i} = <e_k, 1_{[t_i, t_i+1]} gamma>.  Prior std devs c_k.

* Heat: the unknown initial state diffuses under u_t = u_xx and is observed
  pointwise, G[i, k] = exp(-t_i a_k) e_k(x_i) with a_k = k^2 pi^2; prior
  variances a_k^{-s}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate

from .bayes import InverseProblem, SpectralPrior
from .errors import InputValidationError, QuadratureError
from .rng import CounterRng

_NAMED_WEIGHTS = {
    "constant": lambda s: np.ones_like(s),
    "gaussian_bump": lambda s: np.exp(-8.0 * (s - 0.5) ** 2),
}


def _sine_poly_integral(k: int, power: int, a: float, b: float) -> float:
    """Closed-form int_a^b s^power sin(k pi s) ds via the parts recurrence."""
    q = k * math.pi
    # sin_int[p] = int s^p sin(q s), cos_int[p] = int s^p cos(q s)
    sin_int = (math.cos(q * a) - math.cos(q * b)) / q
    cos_int = (math.sin(q * b) - math.sin(q * a)) / q
    for p in range(1, power + 1):
        sin_p = (a ** p * math.cos(q * a) - b ** p * math.cos(q * b)) / q + (p / q) * cos_int
        cos_p = (b ** p * math.sin(q * b) - a ** p * math.sin(q * a)) / q - (p / q) * sin_int
        sin_int, cos_int = sin_p, cos_p
    return sin_int


def _interval_coefficients(m: int, breakpoints: np.ndarray, weight_fn) -> np.ndarray:
    """a[k, i] = int_{t_i}^{t_{i+1}} sqrt(2) sin((k+1) pi s) weight(s) ds."""
    n = breakpoints.shape[0] - 1
    out = np.empty((m, n))
    if isinstance(weight_fn, str):
        if weight_fn == "constant":
            for k in range(m):
                out[k] = [math.sqrt(2.0) * _sine_poly_integral(k + 1, 0, breakpoints[i], breakpoints[i + 1])
                          for i in range(n)]
            return out
        try:
            fn = _NAMED_WEIGHTS[weight_fn]
        except KeyError as exc:
            raise InputValidationError(
                f"unknown weight function {weight_fn!r}; known: {sorted(_NAMED_WEIGHTS)}") from exc
        for k in range(m):
            q = (k + 1) * math.pi
            for i in range(n):
                val, err = scipy.integrate.quad(
                    lambda s: math.sqrt(2.0) * math.sin(q * s) * fn(s),
                    breakpoints[i], breakpoints[i + 1],
                    epsabs=1e-13, epsrel=1e-13, limit=400)
                if err > 1e-12:
                    raise QuadratureError(
                        f"quadrature error {err:.2e} above 1e-12 for mode {k + 1}, interval {i}")
                out[k, i] = val
        return out
    coeffs = np.asarray(weight_fn, dtype=float)
    if coeffs.ndim != 1 or coeffs.size == 0:
        raise InputValidationError("polynomial weight must be a nonempty coefficient vector")
    for k in range(m):
        for i in range(n):
            out[k, i] = math.sqrt(2.0) * sum(
                coeffs[p] * _sine_poly_integral(k + 1, p, breakpoints[i], breakpoints[i + 1])
                for p in range(coeffs.size))
    return out


@dataclass(frozen=True)
class DeconvolutionConfig:
    """Weighted-average deconvolution; None fields take the package defaults
    (b_k = k^-2, c_k = k^-1.1, 16 equal observation intervals, constant weight)."""

    m: int = 64
    n: int = 16
    kernel_eigs: np.ndarray | None = None
    prior_coeffs: np.ndarray | None = None
    breakpoints: np.ndarray | None = None
    weight_fn: str | tuple[float, ...] = "constant"

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DeconvolutionConfig":
        kwargs = {}
        for key in ("m", "n", "kernel_eigs", "prior_coeffs", "breakpoints", "weight_fn"):
            if key in doc:
                kwargs[key] = doc[key]
        for key in ("kernel_eigs", "prior_coeffs", "breakpoints"):
            if kwargs.get(key) is not None:
                kwargs[key] = np.asarray(kwargs[key], dtype=float)
        if isinstance(kwargs.get("weight_fn"), list):
            kwargs["weight_fn"] = tuple(kwargs["weight_fn"])
        return cls(**kwargs)


def build_deconvolution(cfg: DeconvolutionConfig) -> InverseProblem:
    """Assemble the deconvolution problem; G[i, k] = b_k a_{k,i}, C_obs = I."""
    if cfg.m <= 0 or cfg.n <= 0:
        raise InputValidationError("m and n must be positive")
    idx = np.arange(1, cfg.m + 1, dtype=float)
    b = np.asarray(cfg.kernel_eigs, dtype=float) if cfg.kernel_eigs is not None else idx ** -2.0
    c = np.asarray(cfg.prior_coeffs, dtype=float) if cfg.prior_coeffs is not None else idx ** -1.1
    if b.shape != (cfg.m,) or np.any(b < 0.0):
        raise InputValidationError("kernel_eigs must be m nonnegative reals")
    if c.shape != (cfg.m,) or np.any(c <= 0.0):
        raise InputValidationError("prior_coeffs must be m positive reals")
    if cfg.breakpoints is not None:
        t = np.asarray(cfg.breakpoints, dtype=float)
    else:
        t = np.linspace(0.0, 1.0, cfg.n + 1)
    if t.shape != (cfg.n + 1,) or np.any(np.diff(t) <= 0.0) or t[0] < 0.0 or t[-1] > 1.0:
        raise InputValidationError("breakpoints must be n+1 strictly increasing points in [0, 1]")

    a = _interval_coefficients(cfg.m, t, cfg.weight_fn)
    g = (b[:, None] * a).T
    prior = SpectralPrior(
        variances=c ** 2,
        basis_labels={"basis": "dirichlet_sine", "problem": "deconvolution"},
    )
    return InverseProblem(g=g, noise_cov=np.eye(cfg.n), prior=prior)


def default_heat_observations(n: int = 20, horizon: float = 0.1,
                              seed: int = 0) -> tuple[tuple[float, float], ...]:
    """Quasi-uniform space points (jittered strata) with seeded observation times."""
    rng = CounterRng(seed, stream=3)
    u = rng.uniform(0, n)
    v = rng.uniform(n, n)
    xs = (np.arange(n) + 0.2 + 0.6 * u) / n
    ts = horizon * (0.05 + 0.95 * v)
    return tuple((float(x), float(t)) for x, t in zip(xs, ts))


@dataclass(frozen=True)
class HeatConfig:
    """Initial-condition inference for the 1-D heat equation with Dirichlet ends."""

    m: int = 256
    observation_points: tuple[tuple[float, float], ...] | None = None
    s: float = 1.0
    horizon: float = 0.1

    @classmethod
    def from_json_dict(cls, doc: dict) -> "HeatConfig":
        kwargs = {}
        for key in ("m", "observation_points", "s", "horizon"):
            if key in doc:
                kwargs[key] = doc[key]
        if "T" in doc and "horizon" not in doc:
            kwargs["horizon"] = doc["T"]
        if kwargs.get("observation_points") is not None:
            kwargs["observation_points"] = tuple(
                (float(x), float(t)) for x, t in kwargs["observation_points"])
        return cls(**kwargs)


def build_heat(cfg: HeatConfig) -> InverseProblem:
    """Assemble the heat problem; G[i, k] = exp(-t_i a_k) e_k(x_i), C_obs = I."""
    if cfg.m <= 0:
        raise InputValidationError("m must be positive")
    if not cfg.s > 0.5:
        raise InputValidationError("smoothness exponent s must exceed 1/2")
    if cfg.horizon <= 0.0:
        raise InputValidationError("horizon must be positive")
    points = cfg.observation_points
    if points is None:
        points = default_heat_observations(horizon=cfg.horizon)
    xs = np.asarray([pt[0] for pt in points], dtype=float)
    ts = np.asarray([pt[1] for pt in points], dtype=float)
    if xs.size == 0:
        raise InputValidationError("at least one observation point is required")
    if np.any(xs <= 0.0) or np.any(xs >= 1.0):
        raise InputValidationError("observation locations must lie strictly inside (0, 1)")
    if np.any(ts <= 0.0) or np.any(ts > cfg.horizon):
        raise InputValidationError("observation times must lie in (0, horizon]")

    k = np.arange(1, cfg.m + 1, dtype=float)
    a_k = (k * math.pi) ** 2
    g = np.exp(-np.outer(ts, a_k)) * (math.sqrt(2.0) * np.sin(np.outer(xs, k * math.pi)))
    variances = a_k ** -cfg.s

    # Truncation adequacy: the omitted preconditioned-Hessian trace
    # sum_{k>m} sum_i exp(-2 t_i a_k) a_k^{-s} must be negligible.  Bound the
    # k-tail by its value at m+1 times the geometric decay in exp(-2 t_i pi^2
    # (2k+1)) steps, summed via the integral bound.
    t_min = ts.min()
    a_next = ((cfg.m + 1) * math.pi) ** 2
    per_obs_head = math.exp(-2.0 * t_min * a_next) * a_next ** -cfg.s
    ratio = math.exp(-2.0 * t_min * (math.pi ** 2) * (2 * cfg.m + 3))
    tail_bound = xs.size * per_obs_head / max(1.0 - ratio, 1e-300)
    computed_trace = float(np.sum((g * g) * variances))
    if not tail_bound <= 1e-6 * max(computed_trace, 1e-300):
        raise InputValidationError(
            f"truncation m={cfg.m} too coarse: preconditioned-trace tail bound "
            f"{tail_bound:.3e} vs computed trace {computed_trace:.3e}")

    prior = SpectralPrior(
        variances=variances,
        basis_labels={"basis": "dirichlet_sine", "problem": "heat"},
    )
    return InverseProblem(g=g, noise_cov=np.eye(xs.size), prior=prior)


def sample_data(p: InverseProblem, x_true=None, seed: int = 0) -> np.ndarray:
    """Draw y = G x + noise; x is the given truth or a prior draw.  Reproducible:
    the prior draw uses counters [0, m) on stream 1, the noise [0, n) on stream 2."""
    if x_true is None:
        x = p.prior.std * CounterRng(seed, stream=1).normal(0, p.m)
    else:
        x = np.asarray(x_true, dtype=float)
        if x.shape != (p.m,):
            raise InputValidationError(f"x_true must have length {p.m}")
    z = CounterRng(seed, stream=2).normal(0, p.n)
    noise = np.linalg.cholesky(0.5 * (p.noise_cov + p.noise_cov.T)) @ z
    return p.g @ x + noise
