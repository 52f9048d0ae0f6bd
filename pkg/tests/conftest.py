import numpy as np
import pytest

import lowrank_bayes as lb


def make_spd(rng, n, spread=1.0):
    """Random SPD matrix with eigenvalues in roughly [0.5, 0.5 + 2*spread]."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    evals = 0.5 + 2.0 * spread * rng.random(n)
    return (q * evals) @ q.T


def make_problem(rng, n, m, decay=1.2):
    """Small random inverse problem with decaying prior variances."""
    variances = np.arange(1, m + 1, dtype=float) ** -decay
    g = rng.standard_normal((n, m))
    noise = make_spd(rng, n)
    return lb.InverseProblem(g=g, noise_cov=noise, prior=lb.SpectralPrior(variances))


def assert_scale_close(a, b, rtol, scale):
    """|a - b| <= rtol * max(|a|, |b|, scale); scale anchors near-zero tails."""
    tol = rtol * max(abs(a), abs(b), abs(scale))
    assert abs(a - b) <= tol, f"{a!r} vs {b!r} (tol {tol:.3e})"


@pytest.fixture(scope="session")
def heat_problem():
    return lb.build_heat(lb.HeatConfig())


@pytest.fixture(scope="session")
def heat_spectrum(heat_problem):
    return lb.spectrum(heat_problem)


@pytest.fixture(scope="session")
def deconv_problem():
    return lb.build_deconvolution(lb.DeconvolutionConfig())


@pytest.fixture(scope="session")
def deconv_spectrum(deconv_problem):
    return lb.spectrum(deconv_problem)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def scalar_problem():
    """The analytic unit case c^2 = 1, G = 1, C_obs = 1."""
    return lb.InverseProblem(
        g=np.array([[1.0]]), noise_cov=np.eye(1), prior=lb.SpectralPrior(np.array([1.0])))


def diag_problem(d_values):
    """Problem whose preconditioned-Hessian eigenvalues are exactly d_values."""
    d = np.asarray(d_values, dtype=float)
    m = d.shape[0]
    return lb.InverseProblem(
        g=np.diag(np.sqrt(d)), noise_cov=np.eye(m),
        prior=lb.SpectralPrior(np.ones(m)))


def problem_from_lambdas(lambdas):
    """Problem realizing the prescribed update eigenvalues lambda_i in (-1, 0]."""
    lam = np.asarray(lambdas, dtype=float)
    return diag_problem(-lam / (1.0 + lam))
