import numpy as np
import pytest

from ehgtensor import baselines as bl
from ehgtensor.errors import ArgumentError
from ehgtensor.tensor import cp_reconstruct, tucker_reconstruct, unfold


def rpca_instance(seed=0, dims=(10, 10, 200), fraction=0.01):
    rng = np.random.default_rng(seed)
    mn = dims[0] * dims[1]
    low = rng.standard_normal((mn, 2)) @ rng.standard_normal((2, dims[2]))
    sparse = np.zeros_like(low)
    idx = rng.choice(low.size, int(fraction * low.size), replace=False)
    sparse.flat[idx] = rng.choice([-1.0, 1.0], idx.size) * 5.0
    return bl._from_time_matrix(low, dims), bl._from_time_matrix(sparse, dims)


# -- bipolar --------------------------------------------------------------------------------


def test_bipolar_common_mode_rejected(rng):
    y = np.broadcast_to(rng.standard_normal((1, 3, 20)), (4, 3, 20))
    out = bl.bipolar(y)
    assert out.localized.shape == (3, 3, 20) and not np.any(out.localized)
    assert np.array_equal(out.distributed, y)


def test_bipolar_row_index():
    y = np.broadcast_to(np.arange(4.0)[:, None, None], (4, 2, 5))
    assert np.all(bl.bipolar(y).localized == 1.0)


def test_bipolar_needs_two_rows():
    with pytest.raises(ArgumentError):
        bl.bipolar(np.zeros((1, 4, 10)))


# -- pca ------------------------------------------------------------------------------------


def test_pca_full_rank_leaves_nothing(rng):
    y = rng.standard_normal((2, 3, 40))
    out = bl.pca_lowrank(y, 6)
    assert np.linalg.norm(out.localized) < 1e-9 * np.linalg.norm(y)


def test_pca_rank_one_exact(rng):
    y = np.einsum("ij,k->ijk", rng.standard_normal((3, 3)), rng.standard_normal(30))
    out = bl.pca_lowrank(y, 1)
    assert np.max(np.abs(out.distributed - y)) < 1e-10


def test_pca_error_is_discarded_energy(rng):
    y = rng.standard_normal((4, 4, 50))
    sv = np.linalg.svd(unfold(y, 3), compute_uv=False)
    out = bl.pca_lowrank(y, 3)
    assert np.sum(out.localized**2) == pytest.approx(np.sum(sv[3:] ** 2), rel=1e-10)


@pytest.mark.parametrize("k", [0, 17])
def test_pca_k_range(k):
    with pytest.raises(ArgumentError):
        bl.pca_lowrank(np.zeros((4, 4, 50)), k)


# -- hosvd ----------------------------------------------------------------------------------


def test_hosvd_full_rank(rng):
    y = rng.standard_normal((3, 4, 5))
    assert np.linalg.norm(bl.hosvd(y, (3, 4, 5)).localized) < 1e-9 * np.linalg.norm(y)


def test_hosvd_exact_low_rank(rng):
    y = tucker_reconstruct(rng.standard_normal((2, 2, 2)), *[rng.standard_normal((d, 2)) for d in (5, 6, 7)])
    assert np.linalg.norm(bl.hosvd(y, (2, 2, 2)).localized) < 1e-9 * np.linalg.norm(y)


@pytest.mark.parametrize("ranks", [(1, 1, 1), (2, 3, 2), (3, 3, 4)])
def test_hosvd_quasi_optimality_bound(ranks, rng):
    y = rng.standard_normal((4, 5, 6))
    resid = np.sum(bl.hosvd(y, ranks).localized ** 2)
    bound = sum(np.sum(np.linalg.svd(unfold(y, n + 1), compute_uv=False)[r:] ** 2) for n, r in enumerate(ranks))
    assert resid <= bound * (1 + 1e-12)


def test_hosvd_rank_violation():
    with pytest.raises(ArgumentError):
        bl.hosvd(np.zeros((2, 3, 4)), (3, 1, 1))


# -- cp-als ---------------------------------------------------------------------------------


def test_cp_als_rank_one(rng):
    y = cp_reconstruct(*[rng.standard_normal((d, 1)) for d in (3, 4, 5)])
    out = bl.cp_als(y, 1, seed=0)
    assert out.diagnostics["fit_trace"][-1] > 1 - 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_cp_als_fit_non_decreasing(seed):
    y = np.random.default_rng(seed).standard_normal((4, 5, 6))
    fits = bl.cp_als(y, 3, max_iters=100, tol=0.0, seed=seed).diagnostics["fit_trace"]
    assert all(b >= a - 1e-10 for a, b in zip(fits, fits[1:]))


def test_cp_als_ridge_reported():
    y = np.zeros((3, 3, 3))
    y[0, 0, 0] = 1.0
    out = bl.cp_als(y, 4, max_iters=20, seed=0)
    assert out.diagnostics["ridge_used"] is True
    assert np.all(np.isfinite(out.distributed))


def test_cp_als_rank_check():
    with pytest.raises(ArgumentError):
        bl.cp_als(np.zeros((2, 2, 2)), 0)


def test_cp_als_deterministic(rng):
    y = rng.standard_normal((3, 4, 5))
    a, b = bl.cp_als(y, 2, seed=4), bl.cp_als(y, 2, seed=4)
    assert np.array_equal(a.distributed, b.distributed)


# -- rpca -----------------------------------------------------------------------------------


def test_soft_threshold_zero_is_identity(rng):
    a = rng.standard_normal(20)
    assert np.array_equal(bl.soft_threshold(a, 0.0), a)
    assert np.array_equal(bl.soft_threshold(np.array([-3.0, 0.5, 2.0]), 1.0), np.array([-2.0, 0.0, 1.0]))


def test_rpca_exact_recovery():
    low, sparse = rpca_instance()
    out = bl.rpca(low + sparse)
    assert out.diagnostics["converged"]
    assert np.linalg.norm(out.distributed - low) <= 1e-5 * np.linalg.norm(low)
    assert np.linalg.norm(out.diagnostics["sparse"] - sparse) <= 1e-5 * np.linalg.norm(sparse)
    assert np.linalg.norm(out.localized - sparse) <= 1e-5 * np.linalg.norm(sparse)


def test_rpca_no_sparse_part():
    low, _ = rpca_instance()
    out = bl.rpca(low)
    assert np.linalg.norm(out.localized) < 1e-6 * np.linalg.norm(low)


def test_rpca_nonconvergence_flagged():
    low, sparse = rpca_instance()
    out = bl.rpca(low + sparse, max_iters=2)
    assert out.diagnostics["converged"] is False
    assert out.diagnostics["iterations"] == 2


def test_rpca_lambda_positive():
    with pytest.raises(ArgumentError):
        bl.rpca(np.ones((2, 2, 5)), lam=0.0)


# -- wavelet --------------------------------------------------------------------------------


def test_wavelet_smooth_signal_kept():
    t = np.arange(1024) / 10.0
    series = np.sin(2 * np.pi * 0.05 * t) + 0.5 * np.cos(2 * np.pi * 0.02 * t)
    y = np.broadcast_to(series, (2, 2, t.size)).copy()
    out = bl.wavelet_denoise(y)
    assert np.sum((out.localized - y) ** 2) <= 0.02 * np.sum(y**2)


def test_wavelet_noise_suppressed():
    ratios = []
    for seed in range(20):
        y = np.random.default_rng(seed).standard_normal((4, 4, 1024))
        ratios.append(np.sum(bl.wavelet_denoise(y).localized ** 2) / np.sum(y**2))
    assert max(ratios) < 0.15


def test_wavelet_threshold_zero_bypasses(rng):
    y = rng.standard_normal((2, 2, 64))
    assert np.array_equal(bl.wavelet_denoise(y, threshold=0).localized, y)


def test_wavelet_levels_too_deep():
    with pytest.raises(ArgumentError):
        bl.wavelet_denoise(np.zeros((1, 1, 16)), levels=5)


# -- shared contracts -------------------------------------------------------------------------


@pytest.mark.parametrize(
    "name, params",
    [("pca", {"k": 2}), ("hosvd", {"ranks": (2, 2, 2)}), ("cp-als", {"rank": 2}), ("rpca", {}), ("wavelet", {}),
     ("brtf-cp", {"init_rank": 2, "max_iters": 20}), ("vb-tucker", {"init_rank": (2, 2, 2), "max_iters": 20})],
)
def test_localized_plus_distributed_is_y(name, params, rng):
    y = rng.standard_normal((4, 4, 64))
    a = bl.run_method(name, y, seed=1, **params)
    b = bl.run_method(name, y, seed=1, **params)
    assert a.localized.shape == y.shape
    if name in ("brtf-cp", "vb-tucker"):
        # the Bayesian engines also return a noise residual
        assert np.array_equal(y - a.localized - a.distributed, y - b.localized - b.distributed)
    else:
        np.testing.assert_allclose(a.localized + a.distributed, y, rtol=0, atol=1e-12 * np.max(np.abs(y)))
    assert np.array_equal(a.localized, b.localized)


def test_unknown_method():
    with pytest.raises(ArgumentError):
        bl.run_method("emd", np.zeros((2, 2, 4)))


def test_bayes_wrapper_accepts_prior_mapping(rng):
    y = rng.standard_normal((3, 3, 20))
    a = bl.run_method("vb-tucker", y, init_rank=(2, 2, 2), max_iters=5, priors={"a_gamma": 1e-3})
    b = bl.run_method("vb-tucker", y, init_rank=(2, 2, 2), max_iters=5, a_gamma=1e-3)
    assert np.array_equal(a.localized, b.localized)


def test_grid_search_picks_best(default_sim):
    best, scores = bl.grid_search("pca", default_sim.y, default_sim.s_true, {"k": [1, 2, 3]})
    assert [p["k"] for p, _ in scores] == [1, 2, 3]
    assert best["k"] == max(scores, key=lambda ps: ps[1])[0]["k"]


def test_localized_truth_for_bipolar(default_sim):
    assert bl.localized_truth("bipolar", default_sim.s_true).shape == (3, 4, 6000)
