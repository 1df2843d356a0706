"""Variational pieces shared by the Tucker and CP robust factorizations.

Both models explain ``y = x + s + e`` with an element-wise ARD sparse term
``s_ijk ~ N(0, 1/gamma_ijk)``, ``gamma_ijk ~ Gamma(a_gamma, b_gamma)`` and
homoscedastic noise ``e_ijk ~ N(0, 1/tau)``, ``tau ~ Gamma(a_tau, b_tau)``.
They differ only in the structure of ``x``; the updates and ELBO terms for
``s``, ``gamma`` and ``tau`` live here.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln

from .errors import ConfigurationError, NumericalError

LOG_2PI = float(np.log(2 * np.pi))


@dataclass(frozen=True)
class Priors:
    """Gamma shape/rate pairs for the noise, sparse and column precisions."""

    a_tau: float = 1e-6
    b_tau: float = 1e-6
    a_gamma: float = 1e-6
    b_gamma: float = 1e-6
    a_lambda: float = 1e-6
    b_lambda: float = 1e-6

    def validate(self):
        for name, value in vars(self).items():
            if not (np.isfinite(value) and value > 0):
                raise ConfigurationError(f"prior {name} must be strictly positive, got {value}")
        return self


def gamma_mean(a, b):
    return a / b


def gamma_log_mean(a, b):
    return digamma(a) - np.log(b)


def gamma_entropy(a, b):
    return a - np.log(b) + gammaln(a) + (1 - a) * digamma(a)


def gamma_prior_term(a0, b0, a, b):
    """E_q[log Gamma(v; a0, b0)] for q = Gamma(a, b)."""
    return a0 * np.log(b0) - gammaln(a0) + (a0 - 1) * gamma_log_mean(a, b) - b0 * gamma_mean(a, b)


def gaussian_entropy_logdet(logdet, dim):
    return 0.5 * (dim * (1 + LOG_2PI) + logdet)


def spd_inverse(precision, what="covariance"):
    """Inverse and log-determinant of the covariance for an SPD precision matrix.

    A failed Cholesky factorization is retried once with ``1e-10 * trace/dim``
    added to the diagonal; a second failure raises :class:`NumericalError`.
    """
    p = 0.5 * (precision + precision.T)
    if not np.all(np.isfinite(p)):
        raise NumericalError(f"non-finite precision matrix while updating {what}")
    try:
        chol = np.linalg.cholesky(p)
    except np.linalg.LinAlgError:
        bump = 1e-10 * np.trace(p) / p.shape[0]
        try:
            chol = np.linalg.cholesky(p + bump * np.eye(p.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"{what} lost positive definiteness after regularization") from exc
    inv_chol = np.linalg.solve(chol, np.eye(p.shape[0]))
    cov = inv_chol.T @ inv_chol
    logdet_cov = -2.0 * float(np.sum(np.log(np.diag(chol))))
    return 0.5 * (cov + cov.T), logdet_cov


def update_sparse(y, x_mean, e_tau, e_gamma):
    """Optimal Gaussian q(s_ijk) given the current x and precisions."""
    s_var = 1.0 / (e_tau + e_gamma)
    s_mean = e_tau * s_var * (y - x_mean)
    return s_mean, s_var


def update_gamma(priors, s_mean, s_var):
    a = np.full(s_mean.shape, priors.a_gamma + 0.5)
    b = priors.b_gamma + 0.5 * (s_mean**2 + s_var)
    return a, b


def expected_sq_residual(y, x_mean, x_var_total, s_mean, s_var):
    """E||y - x - s||^2 with ``x_var_total = E||x||^2 - ||E x||^2``."""
    r = y - x_mean - s_mean
    return float(np.sum(r * r)) + x_var_total + float(np.sum(s_var))


def update_tau(priors, n_entries, sq_residual):
    return priors.a_tau + 0.5 * n_entries, priors.b_tau + 0.5 * sq_residual


def sparse_noise_elbo(priors, sq_residual, n_entries, s_mean, s_var, gamma_a, gamma_b, tau_a, tau_b):
    """ELBO contributions of the likelihood, q(s), q(gamma) and q(tau)."""
    e_tau = gamma_mean(tau_a, tau_b)
    e_log_tau = gamma_log_mean(tau_a, tau_b)
    e_gamma = gamma_mean(gamma_a, gamma_b)
    e_log_gamma = gamma_log_mean(gamma_a, gamma_b)

    likelihood = 0.5 * n_entries * (e_log_tau - LOG_2PI) - 0.5 * e_tau * sq_residual
    prior_s = np.sum(0.5 * (e_log_gamma - LOG_2PI) - 0.5 * e_gamma * (s_mean**2 + s_var))
    prior_gamma = np.sum(gamma_prior_term(priors.a_gamma, priors.b_gamma, gamma_a, gamma_b))
    prior_tau = gamma_prior_term(priors.a_tau, priors.b_tau, tau_a, tau_b)
    entropy_s = np.sum(0.5 * (1 + LOG_2PI + np.log(s_var)))
    entropy_gamma = np.sum(gamma_entropy(gamma_a, gamma_b))
    entropy_tau = gamma_entropy(tau_a, tau_b)
    return float(likelihood + prior_s + prior_gamma + prior_tau + entropy_s + entropy_gamma + entropy_tau)


def data_scale(y):
    """Standard deviation of ``y``, falling back to its RMS, then to 1."""
    sd = float(np.std(y))
    if sd > 0:
        return sd
    rms = float(np.sqrt(np.mean(y * y)))
    return rms if rms > 0 else 1.0


# largest starting noise precision, relative to 1 / mean(y**2)
NOISE_FLOOR_CAP = 1e12


def noise_floor_precision(y):
    """Initial noise precision from the weakest singular direction of the unfoldings.

    For an I x J unfolding, white noise of variance v gives singular values
    near ``sqrt(v * max(I, J))``, so ``s_min**2 / max(I, J)`` bounds the
    noise variance from above whenever the signal leaves one direction free.
    The smallest such bound over the three modes is used.
    """
    from .tensor import unfold

    best = np.inf
    for mode in (1, 2, 3):
        mat = unfold(y, mode)
        if min(mat.shape) < 2:
            continue
        s = np.linalg.svd(mat, compute_uv=False)
        best = min(best, float(s[-1] ** 2) / max(mat.shape))
    if not np.isfinite(best):
        best = float(np.mean(y * y))
    floor = max(float(np.mean(y * y)), np.finfo(float).tiny) / NOISE_FLOOR_CAP
    return 1.0 / max(best, floor)
