"""Variational Bayes decomposition of a measurement tensor into sparse,
low-rank Tucker and Gaussian-noise parts.

Generative model::

    y = x + s + e
    x = G x1 U1 x2 U2 x3 U3
    U_n[i, :] ~ N(0, diag(lambda_n)^-1)
    G[r, s, t] ~ N(0, 1 / (lambda_1[r] lambda_2[s] lambda_3[t]))
    s_ijk ~ N(0, 1 / gamma_ijk),  e_ijk ~ N(0, 1 / tau)
    lambda_n[r], gamma_ijk, tau ~ Gamma(a, b)

The column precisions ``lambda_n`` are shared between a factor matrix and
the matching core slices, so automatic relevance determination shrinks both
together and a column whose precision blows up can be pruned.

The mean-field posterior is
``q(U1) q(U2) q(U3) q(G) q(S) q(gamma) q(lambda_1) q(lambda_2) q(lambda_3) q(tau)``.
Because every entry is observed and the noise is homoscedastic, the rows of
``q(U_n)`` share one covariance matrix; ``q(G)`` is a full Gaussian over the
Fortran-order vectorized core.  Each update below is the exact maximizer of
the ELBO over its factor, so the ELBO never decreases between pruning steps.
"""

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import robust
from .errors import ArgumentError, ConfigurationError, NumericalError
from .robust import Priors, gamma_log_mean, gamma_mean
from .tensor import as_tensor3, hosvd_factors, mode_product, tucker_reconstruct, unfold

log = logging.getLogger(__name__)

DEFAULT_RANK_CAP = (4, 4, 32)


@dataclass(frozen=True)
class RunOptions:
    max_iters: int = 500
    tol: float = 1e-5
    # None: full mode sizes capped at DEFAULT_RANK_CAP
    init_rank: tuple[int, int, int] | None = None
    prune_threshold: float = 1e4
    # also drop a column whose own term in E[X] has squared norm below
    # prune_energy / E[tau], i.e. less than the noise on that many entries
    prune_energy: float = 1.0
    seed: int = 0
    jitter: float = 1e-2
    # standardize y by its RMS before inference and rescale the results
    standardize: bool = True
    # "prior": q(tau) starts at the prior; "noise-floor": at the unfolding noise bound;
    # "auto": noise floor, or the prior when the data show no measurable noise
    tau_init: str = "auto"

    def resolve_rank(self, dims):
        if self.init_rank is None:
            capped = [min(d, c) for d, c in zip(dims, DEFAULT_RANK_CAP)]
            # a Tucker rank never exceeds the product of the other two
            return tuple(
                min(capped[n], capped[(n + 1) % 3] * capped[(n + 2) % 3]) for n in range(3)
            )
        rank = tuple(int(r) for r in self.init_rank)
        if len(rank) != 3:
            raise ArgumentError(f"init_rank needs three entries, got {self.init_rank}")
        for n, (r, d) in enumerate(zip(rank, dims)):
            if not 1 <= r <= d:
                raise ArgumentError(f"init_rank[{n}]={r} must lie in [1, {d}]")
        return rank

    def validate(self):
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ConfigurationError("tol must be > 0")
        if not self.prune_threshold > 0:
            raise ConfigurationError("prune_threshold must be > 0")
        if not (np.isfinite(self.prune_energy) and self.prune_energy >= 0):
            raise ConfigurationError("prune_energy must be finite and >= 0")
        if self.jitter < 0:
            raise ConfigurationError("jitter must be >= 0")
        if self.tau_init not in ("auto", "prior", "noise-floor"):
            raise ConfigurationError(f"tau_init must be 'auto', 'prior' or 'noise-floor', got {self.tau_init!r}")
        return self


@dataclass
class PosteriorState:
    """All variational factors.

    ``factor_cov[n]`` is the covariance shared by every row of ``U_n``;
    ``core_cov`` is over ``core_mean.flatten(order="F")``.  Gamma posteriors
    are stored as (shape, rate) arrays.
    """

    factor_mean: list
    factor_cov: list
    core_mean: np.ndarray
    core_cov: np.ndarray
    s_mean: np.ndarray
    s_var: np.ndarray
    gamma_a: np.ndarray
    gamma_b: np.ndarray
    lambda_a: list
    lambda_b: list
    tau_a: float
    tau_b: float
    elbo_trace: list = field(default_factory=list)
    # indices k such that elbo_trace[k] -> elbo_trace[k+1] spans a pruning step
    prune_events: list = field(default_factory=list)
    rank_trace: list = field(default_factory=list)

    @property
    def ranks(self):
        return tuple(self.core_mean.shape)

    @property
    def factor_row_cov(self):
        """Per-row covariances, one (R_n x R_n) block per row of U_n."""
        return [np.broadcast_to(c, (m.shape[0],) + c.shape) for m, c in zip(self.factor_mean, self.factor_cov)]

    def x_mean(self):
        return tucker_reconstruct(self.core_mean, *self.factor_mean)

    def copy(self):
        return replace(
            self,
            factor_mean=[m.copy() for m in self.factor_mean],
            factor_cov=[c.copy() for c in self.factor_cov],
            core_mean=self.core_mean.copy(),
            core_cov=self.core_cov.copy(),
            s_mean=self.s_mean.copy(),
            s_var=self.s_var.copy(),
            gamma_a=self.gamma_a.copy(),
            gamma_b=self.gamma_b.copy(),
            lambda_a=[a.copy() for a in self.lambda_a],
            lambda_b=[b.copy() for b in self.lambda_b],
            elbo_trace=list(self.elbo_trace),
            prune_events=list(self.prune_events),
            rank_trace=list(self.rank_trace),
        )


@dataclass(frozen=True)
class DecompositionResult:
    s: np.ndarray
    x: np.ndarray
    e: np.ndarray
    multilinear_rank: tuple
    noise_precision: float
    elbo_trace: list
    iterations: int
    converged: bool
    prune_events: list = field(default_factory=list)
    rank_trace: list = field(default_factory=list)
    wall_time_s: float = 0.0
    state: PosteriorState | None = field(default=None, repr=False, compare=False)
    method: str = "vb-tucker"

    def diagnostics(self):
        return {
            "method": self.method,
            "multilinear_rank": list(self.multilinear_rank),
            "noise_precision": self.noise_precision,
            "iterations": self.iterations,
            "converged": self.converged,
            "elbo_trace": list(self.elbo_trace),
            "prune_events": list(self.prune_events),
            "rank_trace": [list(r) for r in self.rank_trace],
            "wall_time_s": self.wall_time_s,
        }


# -- expectations -----------------------------------------------------------


def _factor_gram(state, n):
    m = state.factor_mean[n]
    return m.T @ m + m.shape[0] * state.factor_cov[n]


def _core_cov6(state):
    r = state.ranks
    return state.core_cov.reshape(r + r, order="F")


def _core_second_moment_diag(state):
    """E[g_rst^2] as an (R1, R2, R3) array."""
    var = np.diag(state.core_cov).reshape(state.ranks, order="F")
    return state.core_mean**2 + var


def _kron_grams(grams):
    a1, a2, a3 = grams
    return np.kron(a3, np.kron(a2, a1))


def expected_x_sq_norm(state):
    """E||X||^2 and ||E X||^2."""
    grams = [_factor_gram(state, n) for n in range(3)]
    mu = state.core_mean
    quad = mu
    mean_quad = mu
    for n in range(3):
        quad = mode_product(quad, grams[n], n + 1)
        m = state.factor_mean[n]
        mean_quad = mode_product(mean_quad, m.T @ m, n + 1)
    cov6 = _core_cov6(state)
    trace_term = np.einsum("abcdef,ad,be,cf->", cov6, *grams, optimize=True)
    e_sq = float(np.sum(mu * quad) + trace_term)
    mean_sq = float(np.sum(mu * mean_quad))
    return e_sq, mean_sq


# -- updates ----------------------------------------------------------------


def _update_factor(state, target, n, e_tau):
    others = [k for k in range(3) if k != n]
    grams = [_factor_gram(state, k) for k in range(3)]
    g_n = unfold(state.core_mean, n + 1)
    a_lo, a_hi = grams[others[0]], grams[others[1]]
    w = np.kron(a_hi, a_lo)
    cov6 = _core_cov6(state)
    # sum over the two other modes of W-weighted core covariance
    letters_row = "abc"
    letters_col = "def"
    sub = letters_row + letters_col
    o1, o2 = others
    spec = f"{sub},{letters_row[o1]}{letters_col[o1]},{letters_row[o2]}{letters_col[o2]}->{letters_row[n]}{letters_col[n]}"
    cov_term = np.einsum(spec, cov6, a_lo, a_hi, optimize=True)
    lam = gamma_mean(state.lambda_a[n], state.lambda_b[n])
    precision = e_tau * (g_n @ w @ g_n.T + cov_term) + np.diag(lam)
    cov, _ = robust.spd_inverse(precision, f"factor {n + 1}")
    proj = target
    for k in others:
        proj = mode_product(proj, state.factor_mean[k].T, k + 1)
    mean = e_tau * unfold(proj, n + 1) @ g_n.T @ cov
    state.factor_mean[n] = mean
    state.factor_cov[n] = cov


def _core_prior_precision(state):
    l1, l2, l3 = (gamma_mean(a, b) for a, b in zip(state.lambda_a, state.lambda_b))
    return np.einsum("r,s,t->rst", l1, l2, l3)


def _update_core(state, target, e_tau):
    grams = [_factor_gram(state, n) for n in range(3)]
    prior = _core_prior_precision(state).flatten(order="F")
    precision = e_tau * _kron_grams(grams)
    precision[np.diag_indices_from(precision)] += prior
    cov, _ = robust.spd_inverse(precision, "core")
    proj = target
    for n in range(3):
        proj = mode_product(proj, state.factor_mean[n].T, n + 1)
    mean = e_tau * cov @ proj.flatten(order="F")
    state.core_mean = mean.reshape(state.ranks, order="F")
    state.core_cov = cov


def _update_lambda(state, priors, n):
    others = [k for k in range(3) if k != n]
    gram = _factor_gram(state, n)
    g2 = np.moveaxis(_core_second_moment_diag(state), n, 0)
    lam_o1 = gamma_mean(state.lambda_a[others[0]], state.lambda_b[others[0]])
    lam_o2 = gamma_mean(state.lambda_a[others[1]], state.lambda_b[others[1]])
    core_term = np.einsum("rst,s,t->r", g2, lam_o1, lam_o2)
    rows = state.factor_mean[n].shape[0]
    other_size = state.ranks[others[0]] * state.ranks[others[1]]
    r = state.ranks[n]
    state.lambda_a[n] = np.full(r, priors.a_lambda + 0.5 * (rows + other_size))
    state.lambda_b[n] = priors.b_lambda + 0.5 * (np.diag(gram) + core_term)


def _sq_residual(state, y, x_mean=None):
    if x_mean is None:
        x_mean = state.x_mean()
    e_sq, mean_sq = expected_x_sq_norm(state)
    return robust.expected_sq_residual(y, x_mean, max(e_sq - mean_sq, 0.0), state.s_mean, state.s_var)


# -- public API ---------------------------------------------------------------


def initial_tau(y, priors, opts):
    """Starting q(tau): the prior itself, or a posterior centred on the noise floor."""
    if opts.tau_init == "prior" or not np.any(y):
        return priors.a_tau, priors.b_tau
    precision = robust.noise_floor_precision(y)
    if opts.tau_init == "auto" and precision >= robust.NOISE_FLOOR_CAP / np.mean(y * y):
        # exactly low-rank unfoldings: a start at machine precision would freeze the updates
        return priors.a_tau, priors.b_tau
    a = priors.a_tau + 0.5 * y.size
    return a, a / precision


def initialize(y, priors=None, opts=None):
    """Initial posterior from a truncated HOSVD of ``y`` plus seeded jitter.

    Factor means are the leading singular vectors scaled by ``sqrt(I_n)`` so
    their entries are O(1) (the core absorbs the inverse scale), then
    perturbed by Gaussian jitter of standard deviation
    ``opts.jitter * std(y)``.  An all-zero ``y`` yields pure jitter.
    """
    y = as_tensor3(y, "y")
    priors = (priors or Priors()).validate()
    opts = (opts or RunOptions()).validate()
    dims = y.shape
    ranks = opts.resolve_rank(dims)
    rng = np.random.default_rng(opts.seed)
    jitter = opts.jitter * robust.data_scale(y)
    zero = not np.any(y)

    if zero:
        bases = [np.zeros((d, r)) for d, r in zip(dims, ranks)]
        core = np.zeros(ranks)
    else:
        bases = [u * np.sqrt(d) for u, d in zip(hosvd_factors(y, ranks), dims)]
        core = y
        for n in range(3):
            core = mode_product(core, bases[n].T / dims[n], n + 1)
    means = [b + jitter * rng.standard_normal(b.shape) for b in bases]

    n_core = int(np.prod(ranks))
    tau_a, tau_b = initial_tau(y, priors, opts)
    return PosteriorState(
        factor_mean=means,
        factor_cov=[1e-3 * np.eye(r) for r in ranks],
        core_mean=core,
        core_cov=1e-3 * np.eye(n_core),
        s_mean=np.zeros(dims),
        s_var=np.ones(dims),
        gamma_a=np.full(dims, priors.a_gamma),
        gamma_b=np.full(dims, priors.b_gamma),
        lambda_a=[np.full(r, priors.a_lambda) for r in ranks],
        lambda_b=[np.full(r, priors.b_lambda) for r in ranks],
        tau_a=tau_a,
        tau_b=tau_b,
        rank_trace=[ranks],
    )


def vb_sweep(state, y, priors=None):
    """One cycle of mean-field updates: U1, U2, U3, G, S, gamma, lambda, tau."""
    priors = priors or Priors()
    y = np.asarray(y, dtype=np.float64)
    if state.s_mean.shape != y.shape:
        raise ArgumentError(f"state built for {state.s_mean.shape}, data has {y.shape}")
    st = state.copy()
    e_tau = gamma_mean(st.tau_a, st.tau_b)
    target = y - st.s_mean
    for n in range(3):
        _update_factor(st, target, n, e_tau)
    _update_core(st, target, e_tau)

    x_mean = st.x_mean()
    st.s_mean, st.s_var = robust.update_sparse(y, x_mean, e_tau, gamma_mean(st.gamma_a, st.gamma_b))
    st.gamma_a, st.gamma_b = robust.update_gamma(priors, st.s_mean, st.s_var)
    for n in range(3):
        _update_lambda(st, priors, n)
    st.tau_a, st.tau_b = robust.update_tau(priors, y.size, _sq_residual(st, y, x_mean))
    return st


def elbo(state, y, priors=None):
    """Evidence lower bound of the current variational posterior."""
    priors = priors or Priors()
    y = np.asarray(y, dtype=np.float64)
    total = robust.sparse_noise_elbo(
        priors,
        _sq_residual(state, y),
        y.size,
        state.s_mean,
        state.s_var,
        state.gamma_a,
        state.gamma_b,
        state.tau_a,
        state.tau_b,
    )
    e_lam = [gamma_mean(a, b) for a, b in zip(state.lambda_a, state.lambda_b)]
    e_log_lam = [gamma_log_mean(a, b) for a, b in zip(state.lambda_a, state.lambda_b)]
    for n in range(3):
        rows = state.factor_mean[n].shape[0]
        gram = _factor_gram(state, n)
        total += float(np.sum(0.5 * rows * (e_log_lam[n] - robust.LOG_2PI) - 0.5 * e_lam[n] * np.diag(gram)))
        _, logdet = np.linalg.slogdet(state.factor_cov[n])
        total += rows * robust.gaussian_entropy_logdet(logdet, state.ranks[n])
        total += float(np.sum(robust.gamma_prior_term(priors.a_lambda, priors.b_lambda, state.lambda_a[n], state.lambda_b[n])))
        total += float(np.sum(robust.gamma_entropy(state.lambda_a[n], state.lambda_b[n])))
    log_prec = np.add.outer(np.add.outer(e_log_lam[0], e_log_lam[1]), e_log_lam[2])
    core_prec = np.einsum("r,s,t->rst", *e_lam)
    total += float(np.sum(0.5 * (log_prec - robust.LOG_2PI) - 0.5 * core_prec * _core_second_moment_diag(state)))
    _, logdet = np.linalg.slogdet(state.core_cov)
    total += robust.gaussian_entropy_logdet(logdet, state.core_cov.shape[0])
    if not np.isfinite(total):
        raise NumericalError("ELBO evaluated to a non-finite value")
    return total


def column_energy(state, n):
    """Squared norm of each column's own term in E[X] along mode ``n`` (0-based)."""
    means = [m.T @ m for m in state.factor_mean]
    others = [k for k in range(3) if k != n]
    core = np.moveaxis(state.core_mean, n, 0)
    inner = np.einsum("rab,ac,bd,rcd->r", core, means[others[0]], means[others[1]], core, optimize=True)
    return np.diag(means[n]) * inner


# a column whose own term in E[X] is below this fraction of ||E[X]|| is dead
NEGLIGIBLE = 1e-6


def _keep_mask(lam, energy, floor, threshold, what, total=0.0):
    ratio = lam / np.min(lam)
    mask = ~(ratio > threshold)
    if total > 0 and np.isfinite(threshold):
        # dead columns sit at a neutral ARD fixed point and never cross the ratio
        mask &= ~(energy < NEGLIGIBLE**2 * total)
    if floor > 0:
        # a weak ARD signal suffices once the column is also below the noise floor
        mask &= ~((ratio > np.sqrt(threshold)) & (energy < floor))
    if not mask.any():
        log.warning("pruning would remove every column of %s; keeping one", what)
        mask[int(np.argmin(lam))] = True
    return mask


def prune_ranks(state, threshold, energy_tol=0.0):
    """Drop factor columns whose ARD precision exceeds ``threshold * min``.

    With ``energy_tol > 0`` a column is also dropped when its precision
    ratio exceeds ``sqrt(threshold)`` and its own term in E[X] has squared
    norm below ``energy_tol / E[tau]``: the whole column carries less signal
    than the noise on ``energy_tol`` entries.  Columns whose own term is
    below ``NEGLIGIBLE`` times the norm of E[X] are dropped regardless of
    their precision (unless the threshold is infinite).  Returns a new
    state; the input is left untouched.  If every column of a mode would go,
    the one with the smallest precision is kept and a warning is logged.
    """
    if not threshold > 0:
        raise ArgumentError(f"threshold must be > 0, got {threshold}")
    st = state.copy()
    floor = energy_tol / gamma_mean(st.tau_a, st.tau_b)
    total = float(np.sum(st.x_mean() ** 2))
    keep = []
    for n in range(3):
        lam = gamma_mean(st.lambda_a[n], st.lambda_b[n])
        energy = column_energy(st, n)
        keep.append(np.flatnonzero(_keep_mask(lam, energy, floor, threshold, f"mode {n + 1}", total)))
    if all(len(k) == r for k, r in zip(keep, st.ranks)):
        return st

    old_ranks = st.ranks
    for n in range(3):
        idx = keep[n]
        st.factor_mean[n] = st.factor_mean[n][:, idx]
        st.factor_cov[n] = st.factor_cov[n][np.ix_(idx, idx)]
        st.lambda_a[n] = st.lambda_a[n][idx]
        st.lambda_b[n] = st.lambda_b[n][idx]
    st.core_mean = st.core_mean[np.ix_(*keep)]
    flat = np.arange(int(np.prod(old_ranks))).reshape(old_ranks, order="F")[np.ix_(*keep)].flatten(order="F")
    st.core_cov = st.core_cov[np.ix_(flat, flat)]
    return st


def _relative_change(new, old):
    denom = np.linalg.norm(old)
    diff = np.linalg.norm(new - old)
    if denom == 0:
        return 0.0 if diff == 0 else np.inf
    return diff / denom


def iterate(z, state, priors, opts, sweep, bound, prune, callback=None):
    """Shared outer loop: sweep, ELBO, prune, convergence on ``(E[S], E[X])``.

    The change is measured on the stacked pair rather than on the sum: the
    sum can sit still while mass moves between the sparse and low-rank parts.

    Used by both the Tucker and the CP engines; ``sweep``, ``bound`` and
    ``prune`` are the model-specific update, ELBO and pruning functions.
    Returns ``(state, iterations, converged)``.
    """
    previous = np.stack([state.x_mean(), state.s_mean])
    converged = False
    iteration = 0
    for iteration in range(1, opts.max_iters + 1):
        try:
            state = sweep(state, z, priors)
            state.elbo_trace.append(bound(state, z, priors))
        except NumericalError as exc:
            raise NumericalError(str(exc), iteration=iteration) from exc
        before = state.ranks
        state = prune(state, opts.prune_threshold, opts.prune_energy)
        if state.ranks != before:
            state.prune_events.append(len(state.elbo_trace) - 1)
        state.rank_trace.append(state.ranks)
        if callback is not None:
            callback(iteration, state)
        current = np.stack([state.x_mean(), state.s_mean])
        if _relative_change(current, previous) < opts.tol:
            converged = True
            break
        previous = current
    return state, iteration, converged


def run(y, priors=None, opts=None, callback=None):
    """Decompose ``y`` into sparse ``s``, Tucker ``x`` and residual ``e``.

    ``callback(iteration, state)`` is called after every sweep, if given.
    """
    started = time.perf_counter()
    y = as_tensor3(y, "y")
    if y.shape[2] < 2:
        raise ArgumentError(f"need at least two time samples, got shape {y.shape}")
    priors = (priors or Priors()).validate()
    opts = (opts or RunOptions()).validate()
    ranks = opts.resolve_rank(y.shape)

    if not np.any(y):
        state = vb_sweep(initialize(y, priors, opts), y, priors)
        return _zero_result(y, ranks, state, started)

    scale = float(np.sqrt(np.mean(y * y))) if opts.standardize else 1.0
    z = y / scale
    state = initialize(z, priors, opts)
    state, iteration, converged = iterate(z, state, priors, opts, vb_sweep, elbo, prune_ranks, callback)
    return finish(y, scale, state, iteration, converged, started)


def _zero_result(y, ranks, state, started, method="vb-tucker"):
    zeros = np.zeros_like(y)
    return DecompositionResult(
        s=zeros, x=zeros.copy(), e=zeros.copy(), multilinear_rank=ranks,
        noise_precision=float(gamma_mean(state.tau_a, state.tau_b)),
        elbo_trace=[], iterations=1, converged=True, rank_trace=[ranks],
        wall_time_s=time.perf_counter() - started, state=state, method=method,
    )


def finish(y, scale, state, iteration, converged, started, method="vb-tucker"):
    x = state.x_mean() * scale
    s = state.s_mean * scale
    # by definition; y - s - x - e is exactly zero in float64
    e = y - s - x
    return DecompositionResult(
        s=s,
        x=x,
        e=e,
        multilinear_rank=state.ranks,
        noise_precision=float(gamma_mean(state.tau_a, state.tau_b)) / scale**2,
        elbo_trace=list(state.elbo_trace),
        iterations=iteration,
        converged=converged,
        prune_events=list(state.prune_events),
        rank_trace=list(state.rank_trace),
        wall_time_s=time.perf_counter() - started,
        state=state,
        method=method,
    )
