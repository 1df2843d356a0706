import numpy as np
import pytest

from ehgtensor import brtf, vb
from ehgtensor.errors import ArgumentError
from ehgtensor.evaluation import tensor_correlation
from ehgtensor.tensor import cp_reconstruct


def cp_instance(seed, dims=(6, 6, 80), rank=2, noise=0.01):
    rng = np.random.default_rng(seed)
    x = cp_reconstruct(*[rng.standard_normal((d, rank)) for d in dims])
    s = np.zeros(dims)
    idx = rng.choice(x.size, 20, replace=False)
    s.flat[idx] = rng.choice([-1.0, 1.0], 20) * 8 * np.std(x)
    return x + s + noise * np.std(x) * rng.standard_normal(dims), x, s


def monotone_between_prunes(trace, events, rel=1e-8):
    skip = set(events)
    return all(k in skip or trace[k + 1] >= trace[k] - rel * abs(trace[k]) for k in range(len(trace) - 1))


def test_rank_resolution():
    assert brtf.resolve_cp_rank(vb.RunOptions(), (4, 4, 6000)) == 16
    assert brtf.resolve_cp_rank(vb.RunOptions(init_rank=(2, 5, 3)), (4, 4, 10)) == 5
    with pytest.raises(ArgumentError):
        brtf.resolve_cp_rank(vb.RunOptions(init_rank=0), (4, 4, 10))


def test_initialize_deterministic(rng):
    y = rng.standard_normal((4, 4, 30))
    a = brtf.initialize(y, opts=vb.RunOptions(init_rank=3, seed=1))
    b = brtf.initialize(y, opts=vb.RunOptions(init_rank=3, seed=1))
    assert all(np.array_equal(u, v) for u, v in zip(a.factor_mean, b.factor_mean))
    assert a.ranks == (3, 3, 3)


@pytest.mark.parametrize("seed", range(4))
def test_elbo_monotone(seed):
    y, _, _ = cp_instance(seed, dims=(4, 4, 60), noise=0.1)
    r = brtf.run(y, opts=vb.RunOptions(init_rank=4, seed=seed, max_iters=200))
    assert monotone_between_prunes(r.elbo_trace, r.prune_events)


def test_run_contract_and_determinism():
    y, _, _ = cp_instance(0)
    a = brtf.run(y, opts=vb.RunOptions(init_rank=3, seed=2, max_iters=50))
    b = brtf.run(y, opts=vb.RunOptions(init_rank=3, seed=2, max_iters=50))
    assert np.array_equal(a.e, y - a.s - a.x)
    assert np.array_equal(a.s, b.s) and np.array_equal(a.x, b.x)
    assert len(set(a.multilinear_rank)) == 1
    assert a.method == "brtf-cp" and a.diagnostics()["method"] == "brtf-cp"


def test_cp_structure_recovered_by_both_engines():
    vb_r, cp_r = [], []
    for seed in range(4):
        y, x, _ = cp_instance(seed)
        vb_r.append(tensor_correlation(vb.run(y, opts=vb.RunOptions(init_rank=(2, 2, 2))).x, x))
        cp_r.append(tensor_correlation(brtf.run(y, opts=vb.RunOptions(init_rank=2)).x, x))
    assert np.mean(vb_r) > 0.97 and np.mean(cp_r) > 0.95


@pytest.mark.xfail(strict=True, reason="spike leakage into X differs between the engines by ~4e-3 on this instance")
def test_cp_ground_truth_matches_tucker_engine():
    y, x, _ = cp_instance(0)
    a = vb.run(y, opts=vb.RunOptions(init_rank=(2, 2, 2)))
    b = brtf.run(y, opts=vb.RunOptions(init_rank=2))
    assert abs(tensor_correlation(a.x, x) - tensor_correlation(b.x, x)) <= 1e-3


def test_prune_drops_components(rng):
    y = rng.standard_normal((4, 4, 20))
    st = brtf.initialize(y, opts=vb.RunOptions(init_rank=4))
    st.lambda_a = np.ones(4)
    st.lambda_b = 1.0 / np.array([1.0, 1e6, 2.0, 1e5])
    out = brtf.prune_ranks(st, 1e4)
    assert out.rank == 2
    assert np.array_equal(out.factor_mean[0], st.factor_mean[0][:, [0, 2]])
    assert brtf.prune_ranks(st, np.inf).rank == 4


def test_zero_tensor():
    r = brtf.run(np.zeros((2, 2, 5)))
    assert not np.any(r.x) and not np.any(r.s)
