"""Bayesian robust CP factorization, the CP counterpart of :mod:`ehgtensor.vb`.

The low-rank part is a sum of ``R`` rank-one terms,
``x = sum_r u1_r o u2_r o u3_r``, whose columns share one ARD precision
``lambda_r`` across all three factor matrices (Zhao et al.'s BRTF).  The
sparse and noise parts, the mean-field updates for them, the outer loop and
the pruning rule are the same as for the Tucker engine.
"""

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import robust
from .errors import ArgumentError
from .robust import Priors, gamma_log_mean, gamma_mean
from .tensor import as_tensor3, cp_reconstruct, hosvd_factors
from .vb import RunOptions, _keep_mask, _zero_result, finish, initial_tau, iterate

log = logging.getLogger(__name__)

DEFAULT_CP_RANK_CAP = 16


@dataclass
class CpState:
    factor_mean: list
    factor_cov: list
    s_mean: np.ndarray
    s_var: np.ndarray
    gamma_a: np.ndarray
    gamma_b: np.ndarray
    lambda_a: np.ndarray
    lambda_b: np.ndarray
    tau_a: float
    tau_b: float
    elbo_trace: list = field(default_factory=list)
    prune_events: list = field(default_factory=list)
    rank_trace: list = field(default_factory=list)

    @property
    def rank(self):
        return self.factor_mean[0].shape[1]

    @property
    def ranks(self):
        return (self.rank,) * 3

    def x_mean(self):
        return cp_reconstruct(*self.factor_mean)

    def copy(self):
        return replace(
            self,
            factor_mean=[m.copy() for m in self.factor_mean],
            factor_cov=[c.copy() for c in self.factor_cov],
            s_mean=self.s_mean.copy(),
            s_var=self.s_var.copy(),
            gamma_a=self.gamma_a.copy(),
            gamma_b=self.gamma_b.copy(),
            lambda_a=self.lambda_a.copy(),
            lambda_b=self.lambda_b.copy(),
            elbo_trace=list(self.elbo_trace),
            prune_events=list(self.prune_events),
            rank_trace=list(self.rank_trace),
        )


def resolve_cp_rank(opts, dims):
    if opts.init_rank is None:
        return min(DEFAULT_CP_RANK_CAP, int(np.prod(dims)))
    rank = opts.init_rank
    if not np.isscalar(rank):
        rank = max(rank)
    rank = int(rank)
    if rank < 1:
        raise ArgumentError(f"CP rank must be >= 1, got {rank}")
    return rank


def _gram(state, n):
    m = state.factor_mean[n]
    return m.T @ m + m.shape[0] * state.factor_cov[n]


def expected_x_sq_norm(state):
    grams = [_gram(state, n) for n in range(3)]
    means = [m.T @ m for m in state.factor_mean]
    return float(np.sum(grams[0] * grams[1] * grams[2])), float(np.sum(means[0] * means[1] * means[2]))


_PROJ = {0: "ijk,jr,kr->ir", 1: "ijk,ir,kr->jr", 2: "ijk,ir,jr->kr"}


def _update_factor(state, target, n, e_tau):
    others = [k for k in range(3) if k != n]
    h = _gram(state, others[0]) * _gram(state, others[1])
    lam = gamma_mean(state.lambda_a, state.lambda_b)
    cov, _ = robust.spd_inverse(e_tau * h + np.diag(lam), f"CP factor {n + 1}")
    proj = np.einsum(_PROJ[n], target, state.factor_mean[others[0]], state.factor_mean[others[1]], optimize=True)
    state.factor_mean[n] = e_tau * proj @ cov
    state.factor_cov[n] = cov


def _sq_residual(state, y, x_mean=None):
    if x_mean is None:
        x_mean = state.x_mean()
    e_sq, mean_sq = expected_x_sq_norm(state)
    return robust.expected_sq_residual(y, x_mean, max(e_sq - mean_sq, 0.0), state.s_mean, state.s_var)


def initialize(y, priors=None, opts=None):
    """Leading singular vectors of each unfolding, padded with seeded noise.

    Columns beyond a mode's size are pure jitter; every factor entry gets
    Gaussian jitter of ``opts.jitter * std(y)``.
    """
    y = as_tensor3(y, "y")
    priors = (priors or Priors()).validate()
    opts = (opts or RunOptions()).validate()
    dims = y.shape
    rank = resolve_cp_rank(opts, dims)
    rng = np.random.default_rng(opts.seed)
    jitter = opts.jitter * robust.data_scale(y)
    zero = not np.any(y)
    means = []
    if zero:
        bases = [np.zeros((d, rank)) for d in dims]
    else:
        lead = hosvd_factors(y, [min(rank, d) for d in dims])
        # scale so that each rank-one term has roughly the magnitude of y
        unit = robust.data_scale(y) ** (1.0 / 3.0)
        bases = []
        for u, d in zip(lead, dims):
            b = np.zeros((d, rank))
            b[:, : u.shape[1]] = u * np.sqrt(d) * unit
            bases.append(b)
    for b in bases:
        means.append(b + jitter * rng.standard_normal(b.shape))
    tau_a, tau_b = initial_tau(y, priors, opts)
    return CpState(
        factor_mean=means,
        factor_cov=[1e-3 * np.eye(rank) for _ in dims],
        s_mean=np.zeros(dims),
        s_var=np.ones(dims),
        gamma_a=np.full(dims, priors.a_gamma),
        gamma_b=np.full(dims, priors.b_gamma),
        lambda_a=np.full(rank, priors.a_lambda),
        lambda_b=np.full(rank, priors.b_lambda),
        tau_a=tau_a,
        tau_b=tau_b,
        rank_trace=[(rank,) * 3],
    )


def vb_sweep(state, y, priors=None):
    """U1, U2, U3, S, gamma, lambda, tau."""
    priors = priors or Priors()
    y = np.asarray(y, dtype=np.float64)
    if state.s_mean.shape != y.shape:
        raise ArgumentError(f"state built for {state.s_mean.shape}, data has {y.shape}")
    st = state.copy()
    e_tau = gamma_mean(st.tau_a, st.tau_b)
    target = y - st.s_mean
    for n in range(3):
        _update_factor(st, target, n, e_tau)
    x_mean = st.x_mean()
    st.s_mean, st.s_var = robust.update_sparse(y, x_mean, e_tau, gamma_mean(st.gamma_a, st.gamma_b))
    st.gamma_a, st.gamma_b = robust.update_gamma(priors, st.s_mean, st.s_var)
    rows = sum(m.shape[0] for m in st.factor_mean)
    st.lambda_a = np.full(st.rank, priors.a_lambda + 0.5 * rows)
    st.lambda_b = priors.b_lambda + 0.5 * sum(np.diag(_gram(st, n)) for n in range(3))
    st.tau_a, st.tau_b = robust.update_tau(priors, y.size, _sq_residual(st, y, x_mean))
    return st


def elbo(state, y, priors=None):
    priors = priors or Priors()
    y = np.asarray(y, dtype=np.float64)
    total = robust.sparse_noise_elbo(
        priors, _sq_residual(state, y), y.size, state.s_mean, state.s_var,
        state.gamma_a, state.gamma_b, state.tau_a, state.tau_b,
    )
    e_lam = gamma_mean(state.lambda_a, state.lambda_b)
    e_log_lam = gamma_log_mean(state.lambda_a, state.lambda_b)
    for n in range(3):
        rows = state.factor_mean[n].shape[0]
        total += float(np.sum(0.5 * rows * (e_log_lam - robust.LOG_2PI) - 0.5 * e_lam * np.diag(_gram(state, n))))
        _, logdet = np.linalg.slogdet(state.factor_cov[n])
        total += rows * robust.gaussian_entropy_logdet(logdet, state.rank)
    total += float(np.sum(robust.gamma_prior_term(priors.a_lambda, priors.b_lambda, state.lambda_a, state.lambda_b)))
    total += float(np.sum(robust.gamma_entropy(state.lambda_a, state.lambda_b)))
    return total


def prune_ranks(state, threshold, energy_tol=0.0):
    """Drop CP components whose shared precision exceeds ``threshold * min``,
    or whose squared norm falls below ``energy_tol / E[tau]``."""
    if not threshold > 0:
        raise ArgumentError(f"threshold must be > 0, got {threshold}")
    lam = gamma_mean(state.lambda_a, state.lambda_b)
    norms = [np.sum(m * m, axis=0) for m in state.factor_mean]
    energy = norms[0] * norms[1] * norms[2]
    floor = energy_tol / gamma_mean(state.tau_a, state.tau_b)
    total = float(np.sum(state.x_mean() ** 2))
    mask = _keep_mask(lam, energy, floor, threshold, "the CP factors", total)
    st = state.copy()
    if mask.all():
        return st
    idx = np.flatnonzero(mask)
    st.factor_mean = [m[:, idx] for m in st.factor_mean]
    st.factor_cov = [c[np.ix_(idx, idx)] for c in st.factor_cov]
    st.lambda_a = st.lambda_a[idx]
    st.lambda_b = st.lambda_b[idx]
    return st


def run(y, priors=None, opts=None, callback=None):
    """Sparse + CP + noise decomposition; same contract as :func:`ehgtensor.vb.run`.

    ``opts.init_rank`` is the initial number of CP components (an int, or a
    triple whose maximum is used).
    """
    started = time.perf_counter()
    y = as_tensor3(y, "y")
    if y.shape[2] < 2:
        raise ArgumentError(f"need at least two time samples, got shape {y.shape}")
    priors = (priors or Priors()).validate()
    opts = (opts or RunOptions()).validate()
    rank = resolve_cp_rank(opts, y.shape)
    if not np.any(y):
        state = vb_sweep(initialize(y, priors, opts), y, priors)
        return _zero_result(y, (rank,) * 3, state, started, method="brtf-cp")
    scale = float(np.sqrt(np.mean(y * y))) if opts.standardize else 1.0
    z = y / scale
    state = initialize(z, priors, opts)
    state, iteration, converged = iterate(z, state, priors, opts, vb_sweep, elbo, prune_ranks, callback)
    return finish(y, scale, state, iteration, converged, started, method="brtf-cp")
