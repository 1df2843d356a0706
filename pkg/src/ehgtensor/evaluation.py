"""Scoring: correlation with ground truth, contraction/dummy SNR, scalograms,
and a driver that runs a list of methods and tabulates both."""

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .errors import ArgumentError, UndefinedCorrelationError, ValidationError
from .tensor import as_tensor3

log = logging.getLogger(__name__)

KINDS = ("contraction", "dummy")


@dataclass(frozen=True)
class Interval:
    kind: str
    start_s: float
    end_s: float


@dataclass(frozen=True)
class AnnotationSet:
    intervals: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(self.intervals))
        validate_intervals(self.intervals)

    def of_kind(self, kind):
        return [iv for iv in self.intervals if iv.kind == kind]

    def __len__(self):
        return len(self.intervals)

    def to_dict(self):
        return {"intervals": [asdict(iv) for iv in self.intervals]}

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or not isinstance(d.get("intervals"), list):
            raise ValidationError("annotation document needs an 'intervals' list")
        out = []
        for i, item in enumerate(d["intervals"]):
            try:
                out.append(Interval(str(item["kind"]), float(item["start_s"]), float(item["end_s"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"interval {i}: needs kind, start_s and end_s ({exc})") from exc
        return cls(tuple(out))


def validate_intervals(intervals):
    for i, iv in enumerate(intervals):
        if iv.kind not in KINDS:
            raise ValidationError(f"interval {i}: unknown kind {iv.kind!r} (expected one of {KINDS})")
        if not (math.isfinite(iv.start_s) and math.isfinite(iv.end_s)) or not iv.start_s < iv.end_s:
            raise ValidationError(f"interval {i}: start_s={iv.start_s} must be < end_s={iv.end_s}")
    for kind in KINDS:
        same = sorted((iv.start_s, iv.end_s, i) for i, iv in enumerate(intervals) if iv.kind == kind)
        for (s0, e0, i0), (s1, e1, i1) in zip(same, same[1:]):
            if s1 < e0:
                raise ValidationError(
                    f"{kind} intervals {i0} [{s0}, {e0}] and {i1} [{s1}, {e1}] overlap"
                )


# -- correlation --------------------------------------------------------------


def pearson(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ArgumentError(f"series lengths differ: {a.size} vs {b.size}")
    if a.size < 2:
        raise ArgumentError("need at least two samples")
    da = a - a.mean()
    db = b - b.mean()
    na = np.sqrt(np.dot(da, da))
    nb = np.sqrt(np.dot(db, db))
    if na == 0 or nb == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant series")
    return float(np.clip(np.dot(da, db) / (na * nb), -1.0, 1.0))


def tensor_correlation(est, truth, mode="flattened"):
    """Flattened correlation, or the mean of per-electrode correlations.

    In ``per-electrode-mean`` mode, electrodes where either series is
    constant are skipped; if all are, the correlation is undefined.
    """
    est = as_tensor3(est, "estimate")
    truth = as_tensor3(truth, "truth")
    if est.shape != truth.shape:
        raise ArgumentError(f"shape mismatch: {est.shape} vs {truth.shape}")
    if mode == "flattened":
        return pearson(est, truth)
    if mode != "per-electrode-mean":
        raise ArgumentError(f"unknown correlation mode {mode!r}")
    values = []
    for i in range(est.shape[0]):
        for j in range(est.shape[1]):
            try:
                values.append(pearson(est[i, j], truth[i, j]))
            except UndefinedCorrelationError:
                continue
    if not values:
        raise UndefinedCorrelationError("every electrode series is constant")
    return float(np.mean(values))


# -- SNR ------------------------------------------------------------------------


@dataclass(frozen=True)
class SnrReport:
    per_electrode_db: np.ndarray
    mean_db: float
    ci95_db: tuple
    n_intervals: dict

    def to_dict(self):
        return {
            "per_electrode_db": self.per_electrode_db.tolist(),
            "mean_db": self.mean_db,
            "ci95_db": list(self.ci95_db),
            "n_intervals": dict(self.n_intervals),
        }


def t_interval(values, level=0.95):
    """Two-sided Student-t confidence interval for the mean."""
    v = np.asarray(values, dtype=np.float64).ravel()
    mean = float(np.mean(v))
    if v.size < 2 or not np.all(np.isfinite(v)):
        return mean, (mean, mean)
    half = float(stats.t.ppf(0.5 + level / 2, v.size - 1) * stats.sem(v))
    return mean, (mean - half, mean + half)


def _interval_mask(t_len, fs, intervals):
    mask = np.zeros(t_len, dtype=bool)
    duration = t_len / fs
    for iv in intervals:
        if iv.start_s < 0 or iv.end_s > duration + 1e-9:
            raise ArgumentError(f"{iv.kind} interval [{iv.start_s}, {iv.end_s}] s lies outside the {duration} s recording")
        lo = int(math.ceil(iv.start_s * fs - 1e-9))
        hi = int(math.floor(iv.end_s * fs + 1e-9))
        mask[lo : min(hi, t_len - 1) + 1] = True
    return mask


def snr_db(x, fs, ann):
    """Per-electrode ``10 log10(P_contraction / P_dummy)`` with a t-interval over electrodes.

    An interval covers samples ``k`` with ``start_s <= k / fs <= end_s``.  An
    electrode whose dummy power is zero gets ``+inf`` and a warning.
    """
    x = as_tensor3(x, "x")
    counts = {kind: len(ann.of_kind(kind)) for kind in KINDS}
    for kind in KINDS:
        if counts[kind] == 0:
            raise ArgumentError(f"annotation set has no {kind} interval")
    masks = {kind: _interval_mask(x.shape[2], fs, ann.of_kind(kind)) for kind in KINDS}
    for kind in KINDS:
        if not masks[kind].any():
            raise ArgumentError(f"{kind} intervals contain no samples at fs={fs}")
    p_con = np.mean(x[:, :, masks["contraction"]] ** 2, axis=2)
    p_dum = np.mean(x[:, :, masks["dummy"]] ** 2, axis=2)
    with np.errstate(divide="ignore"):
        ratio = np.where(p_dum > 0, p_con / np.where(p_dum > 0, p_dum, 1.0), np.inf)
        per = 10.0 * np.log10(ratio)
    if np.any(p_dum == 0):
        log.warning("zero dummy-interval power on %d electrode(s); SNR reported as +inf", int(np.sum(p_dum == 0)))
    mean, ci = t_interval(per)
    return SnrReport(per_electrode_db=per, mean_db=mean, ci95_db=ci, n_intervals=counts)


def aggregate_snr(reports):
    """Mean of per-recording means with a t-interval over recordings."""
    mean, ci = t_interval([r.mean_db for r in reports])
    return {"mean_db": mean, "ci95_db": list(ci), "n_recordings": len(reports)}


# -- scalogram ------------------------------------------------------------------

MORLET_W0 = 6.0


def scalogram(series, fs, f_min_hz=0.05, f_max_hz=4.0, n_freqs=64, w0=MORLET_W0):
    """Magnitude of an analytic Morlet transform on log-spaced frequencies.

    Computed in the frequency domain with zero padding to at least twice the
    series length.  The wavelet is scaled so that a unit-amplitude sine at
    one of the analysis frequencies has magnitude close to 1 on that row.
    Returns ``(freqs_hz, magnitudes)`` with magnitudes of shape
    ``(n_freqs, len(series))``.
    """
    x = np.asarray(series, dtype=np.float64).ravel()
    if x.size < 2 or not np.all(np.isfinite(x)):
        raise ArgumentError("series needs at least two finite samples")
    if not 0 < f_min_hz < f_max_hz <= fs / 2:
        raise ArgumentError(f"need 0 < f_min ({f_min_hz}) < f_max ({f_max_hz}) <= fs/2 ({fs / 2})")
    if int(n_freqs) < 1:
        raise ArgumentError("n_freqs must be >= 1")
    freqs = np.geomspace(f_min_hz, f_max_hz, int(n_freqs))
    n = x.size
    n_fft = 1 << int(np.ceil(np.log2(2 * n)))
    spectrum = np.fft.fft(x, n_fft)
    omega = 2 * np.pi * np.fft.fftfreq(n_fft, d=1.0 / fs)
    out = np.empty((freqs.size, n))
    for i, f in enumerate(freqs):
        scale = w0 / (2 * np.pi * f)
        window = np.where(omega > 0, 2.0 * np.exp(-0.5 * (scale * omega - w0) ** 2), 0.0)
        out[i] = np.abs(np.fft.ifft(spectrum * window)[:n])
    return freqs, out


# -- method comparison ----------------------------------------------------------------


def simulation_annotations(config):
    """Contraction = burst window; dummy = everything before the burst onset."""
    start, end = config.burst_window_s
    ints = [Interval("contraction", start, end)]
    if start > 0:
        ints.append(Interval("dummy", 0.0, start))
    return AnnotationSet(tuple(ints))


@dataclass
class MethodRow:
    method: str
    params: dict
    runs: int
    localized_r: float | None = None
    localized_r_per_electrode: float | None = None
    distributed_r: float | None = None
    distributed_r_per_electrode: float | None = None
    snr_mean_db: float | None = None
    snr_ci95_db: list | None = None
    seeds: list = field(default_factory=list)
    error: str | None = None


def compare_methods(y, truth=None, ann=None, methods=(), n_runs=100, fs=None, params=None, seed0=0):
    """Run each method and score it against ``truth`` and/or ``ann``.

    Stochastic methods are run with seeds ``seed0 .. seed0 + n_runs - 1``
    and their scores averaged; deterministic ones run once.  A failing
    method is recorded on its row and the comparison continues.
    """
    from .baselines import STOCHASTIC, localized_truth, run_method

    if truth is None and ann is None:
        raise ArgumentError("need ground truth or annotations to score methods")
    if ann is not None and fs is None:
        raise ArgumentError("SNR scoring needs the sampling rate fs")
    y = as_tensor3(y, "y")
    params = params or {}
    rows = []
    for name in methods:
        p = dict(params.get(name, {}))
        seeds = list(range(seed0, seed0 + n_runs)) if name in STOCHASTIC else [seed0]
        row = MethodRow(method=name, params=p, runs=len(seeds), seeds=seeds)
        try:
            acc = {"lf": [], "le": [], "df": [], "de": [], "snr": []}
            for seed in seeds:
                out = run_method(name, y, seed=seed, **p)
                if truth is not None:
                    s_ref = localized_truth(name, truth.s_true)
                    acc["lf"].append(tensor_correlation(out.localized, s_ref))
                    acc["le"].append(tensor_correlation(out.localized, s_ref, "per-electrode-mean"))
                    acc["df"].append(tensor_correlation(out.distributed, truth.x_true))
                    acc["de"].append(tensor_correlation(out.distributed, truth.x_true, "per-electrode-mean"))
                if ann is not None:
                    acc["snr"].append(snr_db(out.localized, fs, ann).mean_db)
            if truth is not None:
                row.localized_r = float(np.mean(acc["lf"]))
                row.localized_r_per_electrode = float(np.mean(acc["le"]))
                row.distributed_r = float(np.mean(acc["df"]))
                row.distributed_r_per_electrode = float(np.mean(acc["de"]))
            if ann is not None:
                mean, ci = t_interval(acc["snr"])
                row.snr_mean_db = mean
                row.snr_ci95_db = list(ci)
        except Exception as exc:  # recorded per row; the comparison goes on
            log.error("method %s failed: %s", name, exc)
            row.error = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return {"rows": [asdict(r) for r in rows], "n_runs": n_runs, "seed0": seed0}


def _fmt(v, width=10):
    if v is None:
        return "-".rjust(width)
    return f"{v:{width}.4f}"


def format_table(report):
    """Aligned plain-text rendering of a :func:`compare_methods` report."""
    head = f"{'method':<10} {'runs':>5} {'loc_r':>10} {'loc_r_el':>10} {'dist_r':>10} {'dist_r_el':>10} {'snr_db':>10}"
    lines = [head, "-" * len(head)]
    for r in report["rows"]:
        if r["error"]:
            lines.append(f"{r['method']:<10} {r['runs']:>5} error: {r['error']}")
            continue
        lines.append(
            f"{r['method']:<10} {r['runs']:>5} {_fmt(r['localized_r'])} {_fmt(r['localized_r_per_electrode'])} "
            f"{_fmt(r['distributed_r'])} {_fmt(r['distributed_r_per_electrode'])} {_fmt(r['snr_mean_db'])}"
        )
    return "\n".join(lines)


def report_json(report):
    # repr-based float formatting round-trips every float64
    return json.dumps(report, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")
