import math

import numpy as np
import pytest

from ehgtensor import evaluation as ev
from ehgtensor.errors import ArgumentError, UndefinedCorrelationError, ValidationError
from ehgtensor.evaluation import AnnotationSet, Interval


def ann(contraction=(5.0, 10.0), dummy=(0.0, 4.0)):
    return AnnotationSet((Interval("contraction", *contraction), Interval("dummy", *dummy)))


# -- pearson and tensor correlation ---------------------------------------------------------


def test_pearson_self_and_negation(rng):
    x = rng.standard_normal(50)
    assert ev.pearson(x, x) == pytest.approx(1.0, abs=1e-15)
    assert ev.pearson(x, -x) == pytest.approx(-1.0, abs=1e-15)


def test_pearson_direct_formula():
    a, b = [1, 2, 3, 4], [1, 2, 3, 5]
    # mean-centred sums by hand: a -> (-1.5, -.5, .5, 1.5), b -> (-1.75, -.75, .25, 2.25)
    num = 1.5 * 1.75 + 0.5 * 0.75 + 0.5 * 0.25 + 1.5 * 2.25
    den = math.sqrt(5.0) * math.sqrt(1.75**2 + 0.75**2 + 0.25**2 + 2.25**2)
    assert ev.pearson(a, b) == pytest.approx(num / den, abs=1e-12)


def test_pearson_constant_series():
    with pytest.raises(UndefinedCorrelationError):
        ev.pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def test_pearson_length_checks():
    with pytest.raises(ArgumentError):
        ev.pearson([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(ArgumentError):
        ev.pearson([1.0], [2.0])


@pytest.mark.parametrize("mode", ["flattened", "per-electrode-mean"])
def test_tensor_correlation_identity_and_offset(mode, rng):
    t = rng.standard_normal((3, 3, 40))
    assert ev.tensor_correlation(t, t, mode) == pytest.approx(1.0, abs=1e-12)
    assert ev.tensor_correlation(t + 7.0, t, mode) == pytest.approx(1.0, abs=1e-12)
    assert ev.tensor_correlation(2.5 * t - 3.0, t, mode) == pytest.approx(1.0, abs=1e-12)


def test_tensor_correlation_null_distribution():
    hits = 0
    for seed in range(100):
        r = np.random.default_rng(seed)
        hits += abs(ev.tensor_correlation(r.standard_normal((4, 4, 1000)), r.standard_normal((4, 4, 1000)))) < 0.05
    assert hits >= 95


def test_per_electrode_skips_constant(rng):
    t = rng.standard_normal((2, 2, 30))
    est = t.copy()
    est[0, 0] = 1.0
    assert ev.tensor_correlation(est, t, "per-electrode-mean") == pytest.approx(1.0)
    with pytest.raises(UndefinedCorrelationError):
        ev.tensor_correlation(np.ones((2, 2, 5)), t[:, :, :5], "per-electrode-mean")


def test_tensor_correlation_errors(rng):
    with pytest.raises(ArgumentError):
        ev.tensor_correlation(np.zeros((2, 2, 5)), np.zeros((2, 2, 6)))
    with pytest.raises(ArgumentError):
        ev.tensor_correlation(rng.standard_normal((2, 2, 5)), rng.standard_normal((2, 2, 5)), "median")


# -- SNR --------------------------------------------------------------------------------------


def test_snr_equal_power_is_zero_db():
    x = np.ones((2, 2, 101))
    rep = ev.snr_db(x, 10.0, ann())
    assert np.allclose(rep.per_electrode_db, 0.0) and rep.mean_db == pytest.approx(0.0)
    assert rep.n_intervals == {"contraction": 1, "dummy": 1}


def test_snr_ten_times_power():
    x = np.ones((2, 2, 101))
    x[:, :, 50:] = math.sqrt(10.0)
    assert ev.snr_db(x, 10.0, ann()).mean_db == pytest.approx(10.0, abs=1e-12)


@pytest.mark.parametrize("c", [-3.0, 1e-4, 17.0])
def test_snr_scale_invariant(c, rng):
    x = rng.standard_normal((3, 2, 101))
    assert ev.snr_db(c * x, 10.0, ann()).mean_db == pytest.approx(ev.snr_db(x, 10.0, ann()).mean_db, abs=1e-12)


def test_snr_missing_kind():
    with pytest.raises(ArgumentError):
        ev.snr_db(np.ones((1, 1, 50)), 10.0, AnnotationSet((Interval("contraction", 0.0, 1.0),)))
    with pytest.raises(ArgumentError):
        ev.snr_db(np.ones((1, 1, 50)), 10.0, AnnotationSet())


def test_snr_interval_out_of_bounds():
    with pytest.raises(ArgumentError):
        ev.snr_db(np.ones((1, 1, 50)), 10.0, ann(contraction=(3.0, 20.0)))


def test_snr_zero_dummy_power(caplog):
    x = np.ones((1, 2, 101))
    x[:, :, :45] = 0.0
    rep = ev.snr_db(x, 10.0, ann())
    assert np.all(np.isinf(rep.per_electrode_db))
    assert "zero dummy" in caplog.text


@pytest.mark.parametrize("seed", range(5))
def test_t_interval_brackets_mean(seed):
    v = np.random.default_rng(seed).standard_normal(12)
    mean, (lo, hi) = ev.t_interval(v)
    assert lo <= mean <= hi and mean == pytest.approx(v.mean())


def test_aggregate_snr(rng):
    reps = [ev.snr_db(rng.standard_normal((2, 2, 101)), 10.0, ann()) for _ in range(4)]
    agg = ev.aggregate_snr(reps)
    assert agg["n_recordings"] == 4 and agg["ci95_db"][0] <= agg["mean_db"] <= agg["ci95_db"][1]


# -- scalogram --------------------------------------------------------------------------------


def test_scalogram_single_tone_ridge():
    fs = 10.0
    t = np.arange(3000) / fs
    freqs, mag = ev.scalogram(np.sin(2 * np.pi * 0.6 * t), fs)
    target = int(np.argmin(np.abs(np.log(freqs / 0.6))))
    ridge = np.argmax(mag, axis=0)[300:2700]
    assert np.all(np.abs(ridge - target) <= 1)
    assert np.median(mag[target, 300:2700]) == pytest.approx(1.0, abs=0.05)


def test_scalogram_zero_input():
    _, mag = ev.scalogram(np.zeros(500), 10.0)
    assert mag.shape == (64, 500) and not np.any(mag)


def test_scalogram_two_tones():
    fs = 10.0
    t = np.arange(3000) / fs
    freqs, mag = ev.scalogram(np.sin(2 * np.pi * 0.2 * t) + np.sin(2 * np.pi * 1.2 * t), fs)
    central = mag[:, 300:2700]
    for f in (0.2, 1.2):
        b = int(np.argmin(np.abs(np.log(freqs / f))))
        window = slice(max(b - 1, 0), b + 2)
        # the band around each tone is a local maximum over frequency at every central sample
        local = central[window].max(axis=0)
        between = central[int(np.argmin(np.abs(np.log(freqs / 0.5))))]
        assert np.all(local > 2 * between)


def test_scalogram_quadratic_energy(rng):
    x = rng.standard_normal(400)
    e1 = np.sum(ev.scalogram(x, 10.0)[1] ** 2)
    e3 = np.sum(ev.scalogram(3.0 * x, 10.0)[1] ** 2)
    assert e3 == pytest.approx(9.0 * e1, rel=1e-10)


@pytest.mark.parametrize("band", [(0.0, 1.0), (2.0, 1.0), (0.1, 6.0)])
def test_scalogram_band_checks(band):
    with pytest.raises(ArgumentError):
        ev.scalogram(np.ones(100), 10.0, *band)


# -- annotations ------------------------------------------------------------------------------


def test_annotation_overlap_names_both():
    with pytest.raises(ValidationError, match="0.*1|1.*0"):
        AnnotationSet((Interval("contraction", 0.0, 5.0), Interval("contraction", 4.0, 8.0)))


def test_annotation_overlap_across_kinds_allowed():
    assert len(AnnotationSet((Interval("contraction", 0.0, 5.0), Interval("dummy", 4.0, 8.0)))) == 2


@pytest.mark.parametrize("iv", [Interval("contraction", 5.0, 5.0), Interval("tremor", 0.0, 1.0)])
def test_annotation_validation(iv):
    with pytest.raises(ValidationError):
        AnnotationSet((iv,))


def test_annotation_round_trip():
    a = ann()
    assert AnnotationSet.from_dict(a.to_dict()) == a
    assert len(AnnotationSet.from_dict({"intervals": []})) == 0


def test_simulation_annotations(default_sim):
    a = ev.simulation_annotations(default_sim.config)
    assert {iv.kind for iv in a.intervals} == {"contraction", "dummy"}


# -- compare_methods --------------------------------------------------------------------------


def test_compare_empty_methods(default_sim):
    rep = ev.compare_methods(default_sim.y, truth=default_sim, methods=[])
    assert rep["rows"] == []
    assert ev.format_table(rep).count("\n") == 1


def test_compare_needs_scoring_mode(default_sim):
    with pytest.raises(ArgumentError):
        ev.compare_methods(default_sim.y, methods=["pca"])
    with pytest.raises(ArgumentError):
        ev.compare_methods(default_sim.y, ann=ann(), methods=["pca"])


def test_compare_deterministic_rows(default_sim):
    kw = dict(truth=default_sim, methods=["pca", "bipolar"], params={"pca": {"k": 2}}, n_runs=3)
    a, b = ev.compare_methods(default_sim.y, **kw), ev.compare_methods(default_sim.y, **kw)
    assert ev.report_json(a) == ev.report_json(b)
    assert [r["runs"] for r in a["rows"]] == [1, 1]


def test_compare_records_failures(default_sim):
    fs = default_sim.config.sample_rate_hz
    rep = ev.compare_methods(
        default_sim.y, truth=default_sim, ann=ev.simulation_annotations(default_sim.config), fs=fs,
        methods=["hosvd", "pca"], params={"hosvd": {"ranks": (9, 9, 9)}, "pca": {"k": 2}},
    )
    bad, good = rep["rows"]
    assert bad["error"] and "ArgumentError" in bad["error"]
    assert good["error"] is None and good["snr_mean_db"] is not None
    assert "error:" in ev.format_table(rep)


def test_compare_stochastic_seeds(default_sim):
    rep = ev.compare_methods(default_sim.y, truth=default_sim, methods=["cp-als"], params={"cp-als": {"rank": 2}},
                             n_runs=2, seed0=5)
    assert rep["rows"][0]["seeds"] == [5, 6]
