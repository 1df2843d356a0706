"""Comparison decomposers.

Each method returns a :class:`BaselineOutput` holding a (localized,
distributed) pair.  Apart from bipolar differencing, ``localized`` is always
computed as ``y - distributed`` so that ``y - distributed - localized`` is
exactly zero.

:func:`run_method` dispatches by name, including the two Bayesian engines,
and :func:`grid_search` picks hyperparameters by ground-truth correlation.
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
import pywt

from . import brtf, vb
from .errors import ArgumentError
from .robust import Priors
from .tensor import as_tensor3, cp_reconstruct, fold, hosvd_factors, khatri_rao, mode_product, unfold

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BaselineOutput:
    localized: np.ndarray
    distributed: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _split(y, distributed, **diag):
    return BaselineOutput(localized=y - distributed, distributed=distributed, diagnostics=diag)


def bipolar(y):
    """Row differences as localized activity; the raw tensor as distributed.

    ``localized[i] = y[i + 1] - y[i]``, so it has one row fewer than ``y``.
    """
    y = as_tensor3(y, "y")
    if y.shape[0] < 2:
        raise ArgumentError(f"bipolar needs at least two electrode rows, got {y.shape[0]}")
    return BaselineOutput(localized=np.diff(y, axis=0), distributed=y.copy(), diagnostics={"rows": y.shape[0] - 1})


def _time_matrix(y):
    # electrodes x time
    return unfold(y, 3).T


def _from_time_matrix(a, dims):
    return fold(a.T, 3, dims)


def pca_lowrank(y, k):
    """Top-``k`` principal components of the electrodes x time matrix.

    The data are not centred: the electrode means are part of what the
    low-rank approximation explains.
    """
    y = as_tensor3(y, "y")
    a = _time_matrix(y)
    if not 1 <= int(k) <= min(a.shape):
        raise ArgumentError(f"k={k} must lie in [1, {min(a.shape)}]")
    k = int(k)
    u, sv, vt = np.linalg.svd(a, full_matrices=False)
    low = (u[:, :k] * sv[:k]) @ vt[:k]
    return _split(y, _from_time_matrix(low, y.shape), k=k, discarded_energy=float(np.sum(sv[k:] ** 2)))


def hosvd(y, ranks):
    """Truncated higher-order SVD reconstruction as distributed activity."""
    y = as_tensor3(y, "y")
    ranks = tuple(int(r) for r in ranks)
    factors = hosvd_factors(y, ranks)
    core = y
    for n, u in enumerate(factors):
        core = mode_product(core, u.T, n + 1)
    x = core
    for n, u in enumerate(factors):
        x = mode_product(x, u, n + 1)
    return _split(y, x, ranks=list(ranks))


def cp_als(y, rank, max_iters=500, tol=1e-8, seed=0):
    """Rank-``rank`` CP fit by alternating least squares from a seeded start.

    The normal equations are solved with a ``1e-10 * trace / R`` ridge only
    when they are numerically singular; ``diagnostics["ridge_used"]`` says
    whether that happened.  Stops when the fit improves by less than ``tol``.
    """
    y = as_tensor3(y, "y")
    rank = int(rank)
    if rank < 1:
        raise ArgumentError(f"CP rank must be >= 1, got {rank}")
    rng = np.random.default_rng(seed)
    factors = [rng.standard_normal((d, rank)) for d in y.shape]
    unfoldings = [unfold(y, n + 1) for n in range(3)]
    norm_y = float(np.linalg.norm(y))
    fits = []
    ridge_used = False
    converged = False
    for _ in range(int(max_iters)):
        for n in range(3):
            o1, o2 = [k for k in range(3) if k != n]
            kr = khatri_rao(factors[o2], factors[o1])
            gram = (factors[o1].T @ factors[o1]) * (factors[o2].T @ factors[o2])
            rhs = unfoldings[n] @ kr
            if np.linalg.cond(gram) > 1e12:
                ridge_used = True
                gram = gram + 1e-10 * max(np.trace(gram) / rank, 1e-300) * np.eye(rank)
            factors[n] = np.linalg.solve(gram, rhs.T).T
        resid = np.linalg.norm(y - cp_reconstruct(*factors))
        fits.append(1.0 - resid / norm_y if norm_y > 0 else 1.0)
        if len(fits) > 1 and abs(fits[-1] - fits[-2]) < tol:
            converged = True
            break
    x = cp_reconstruct(*factors)
    return _split(y, x, rank=rank, fit_trace=fits, iterations=len(fits), converged=converged, ridge_used=ridge_used)


def soft_threshold(a, t):
    return np.sign(a) * np.maximum(np.abs(a) - t, 0.0)


def rpca(y, lam=None, tol=1e-7, max_iters=1000, mu=None, rho=1.5):
    """Principal component pursuit on the electrodes x time matrix (inexact ALM).

    ``distributed`` is the low-rank part; ``localized = y - distributed``
    equals the sparse part up to the final constraint residual, which is
    below ``tol * ||y||`` when ``converged`` is true.
    """
    y = as_tensor3(y, "y")
    m = _time_matrix(y)
    lam = 1.0 / np.sqrt(max(m.shape)) if lam is None else float(lam)
    if not lam > 0:
        raise ArgumentError(f"lambda must be > 0, got {lam}")
    norm_m = np.linalg.norm(m)
    if norm_m == 0:
        return _split(y, np.zeros_like(y), lam=lam, iterations=0, converged=True, sparse=np.zeros_like(y))
    spectral = np.linalg.norm(m, 2)
    dual = m / max(spectral, np.max(np.abs(m)) / lam)
    mu = 1.25 / spectral if mu is None else float(mu)
    mu_max = mu * 1e7
    low = np.zeros_like(m)
    sparse = np.zeros_like(m)
    converged = False
    it = 0
    for it in range(1, int(max_iters) + 1):
        u, sv, vt = np.linalg.svd(m - sparse + dual / mu, full_matrices=False)
        sv = np.maximum(sv - 1.0 / mu, 0.0)
        keep = sv > 0
        low = (u[:, keep] * sv[keep]) @ vt[keep]
        sparse = soft_threshold(m - low + dual / mu, lam / mu)
        resid = m - low - sparse
        dual = dual + mu * resid
        mu = min(mu * rho, mu_max)
        if np.linalg.norm(resid) < tol * norm_m:
            converged = True
            break
    if not converged:
        log.warning("rpca stopped at max_iters=%d without converging", max_iters)
    return _split(
        y,
        _from_time_matrix(low, y.shape),
        lam=lam,
        iterations=it,
        converged=converged,
        rank=int(np.linalg.matrix_rank(low)) if low.size else 0,
        sparse=_from_time_matrix(sparse, y.shape),
    )


def wavelet_denoise(y, levels=5, wavelet="db2", threshold=None):
    """Universal soft-threshold wavelet shrinkage of each electrode series.

    The denoised series is the localized activity.  ``threshold=None`` uses
    ``sigma * sqrt(2 ln T)`` with ``sigma = median(|d1|) / 0.6745`` from the
    finest detail band; ``threshold=0`` bypasses shrinkage and returns the
    input unchanged.
    """
    y = as_tensor3(y, "y")
    t = y.shape[2]
    levels = int(levels)
    if levels < 1 or t < 2**levels:
        raise ArgumentError(f"{levels} levels need at least {2**levels} samples, got {t}")
    if threshold == 0:
        return BaselineOutput(localized=y.copy(), distributed=y - y, diagnostics={"threshold": 0.0})
    coeffs = pywt.wavedec(y, wavelet, mode="periodization", level=levels, axis=2)
    if threshold is None:
        sigma = np.median(np.abs(coeffs[-1]), axis=2, keepdims=True) / 0.6745
        thr = sigma * np.sqrt(2.0 * np.log(t))
    else:
        thr = float(threshold)
    shrunk = [coeffs[0]] + [soft_threshold(c, thr) for c in coeffs[1:]]
    den = pywt.waverec(shrunk, wavelet, mode="periodization", axis=2)[:, :, :t]
    out = BaselineOutput(
        localized=den, distributed=y - den,
        diagnostics={"levels": levels, "wavelet": wavelet, "threshold": np.ravel(thr).tolist()},
    )
    return out


def _bayes(engine, y, seed, init_rank=None, priors=None, **opts):
    """``priors`` is a mapping of Priors fields; a_gamma etc. may also be passed directly."""
    prior_kw = dict(priors or {})
    for key in list(opts):
        if key in Priors.__dataclass_fields__:
            prior_kw[key] = opts.pop(key)
    priors = Priors(**prior_kw)
    if init_rank is not None and not np.isscalar(init_rank):
        init_rank = tuple(int(r) for r in init_rank)
    res = engine.run(y, priors=priors, opts=vb.RunOptions(init_rank=init_rank, seed=seed, **opts))
    return BaselineOutput(localized=res.s, distributed=res.x, diagnostics=res.diagnostics())


def brtf_cp(y, opts=None, priors=None):
    """CP-structured counterpart of the Tucker engine (see :mod:`ehgtensor.brtf`)."""
    res = brtf.run(y, priors=priors, opts=opts)
    return BaselineOutput(localized=res.s, distributed=res.x, diagnostics=res.diagnostics())


# name -> callable(y, seed, **params)
METHODS = {
    "bipolar": lambda y, seed=0: bipolar(y),
    "pca": lambda y, seed=0, k=2: pca_lowrank(y, k),
    "hosvd": lambda y, seed=0, ranks=(2, 2, 2): hosvd(y, ranks),
    "cp-als": lambda y, seed=0, rank=3, **kw: cp_als(y, rank, seed=seed, **kw),
    "rpca": lambda y, seed=0, **kw: rpca(y, **kw),
    "wavelet": lambda y, seed=0, **kw: wavelet_denoise(y, **kw),
    "brtf-cp": lambda y, seed=0, **kw: _bayes(brtf, y, seed, **kw),
    "vb-tucker": lambda y, seed=0, **kw: _bayes(vb, y, seed, **kw),
}

# methods whose output depends on the seed
STOCHASTIC = frozenset({"cp-als", "brtf-cp", "vb-tucker"})

# hyperparameter grids searched on simulated data
GRIDS = {
    "bipolar": {},
    "pca": {"k": [1, 2, 3, 4]},
    "hosvd": {"ranks": [(2, 2, 2), (2, 2, 3), (3, 3, 3), (4, 4, 4)]},
    "cp-als": {"rank": [2, 3, 4, 6]},
    "rpca": {"lam": [0.005, 0.0129, 0.02, 0.03, 0.05, 0.1]},
    "wavelet": {"levels": [3, 5, 7]},
    "brtf-cp": {"init_rank": [2, 4, 8, 16]},
    "vb-tucker": {"init_rank": [(2, 2, 3), (4, 4, 8), (4, 4, 16), (4, 4, 32)]},
}


def run_method(name, y, seed=0, **params):
    if name not in METHODS:
        raise ArgumentError(f"unknown method {name!r}; choose from {sorted(METHODS)}")
    return METHODS[name](y, seed=seed, **params)


def localized_truth(name, s_true):
    """Ground truth matched to a method's localized output (row differences for bipolar)."""
    return np.diff(s_true, axis=0) if name == "bipolar" else s_true


def grid_search(name, y, s_true, grid=None, seed=0):
    """Exhaustive search of ``grid`` scored by flattened localized correlation.

    Returns ``(best_params, scores)`` with ``scores`` a list of
    ``(params, correlation)`` in grid order; ties keep the first entry.
    """
    from .evaluation import tensor_correlation

    grid = GRIDS.get(name, {}) if grid is None else grid
    keys = sorted(grid)
    truth = localized_truth(name, s_true)
    scores = []
    best, best_score = {}, -np.inf
    for values in itertools.product(*(grid[k] for k in keys)):
        params = dict(zip(keys, values))
        out = run_method(name, y, seed=seed, **params)
        score = tensor_correlation(out.localized, truth)
        scores.append((params, score))
        if score > best_score:
            best, best_score = params, score
    return best, scores
