"""Synthetic multi-electrode EHG recordings with known components.

Every electrode of a rectangular grid records the sum of

* a travelling burst (two sines under a Gaussian envelope) delayed row by row,
  which is the *localized* ground truth,
* a slow wave common to all electrodes, active while the burst crosses the
  grid, a respiration tone whose amplitude falls linearly along the main
  diagonal, and a small cardiac tone; together the *distributed* ground truth,
* white Gaussian noise scaled to a target SNR.

Noise is drawn from ``numpy.random.default_rng(seed)`` (PCG64) with
``standard_normal(m * n * t)`` reshaped in mode-1-fastest order, so a seed
reproduces the same tensor on any platform running the same NumPy
bit generator.
"""

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class BurstParams:
    fwl_freq_hz: float = 0.2
    fwl_amp_mv: float = 0.2
    fwh_freq_hz: float = 0.6
    fwh_amp_mv: float = 0.3
    duration_s: float = 80.0
    peak_amp_mv: float = 0.5
    # None means duration_s / 6, i.e. the envelope is ~1.1 % of its peak at the edges
    envelope_sigma_s: float | None = None
    propagation_speed_m_per_s: float = 0.04
    # None centers the burst (including its propagation delay) in the recording
    onset_s: float | None = None

    @property
    def sigma_s(self):
        return self.duration_s / 6.0 if self.envelope_sigma_s is None else self.envelope_sigma_s


@dataclass(frozen=True)
class ToneParams:
    freq_hz: float
    amp_mv: float
    active_interval_s: tuple[float, float] | None = None


@dataclass(frozen=True)
class GradientToneParams:
    freq_hz: float = 0.3
    amp_max_mv: float = 3.0
    amp_min_mv: float = 1.5


@dataclass(frozen=True)
class SimConfig:
    grid: tuple[int, int] = (4, 4)
    electrode_spacing_m: float = 0.0175
    sample_rate_hz: float = 10.0
    duration_s: float = 600.0
    burst: BurstParams = field(default_factory=BurstParams)
    # active_interval_s=None: active while the burst crosses the grid
    slow_wave: ToneParams = field(default_factory=lambda: ToneParams(0.02, 7.0))
    respiration: GradientToneParams = field(default_factory=GradientToneParams)
    cardiac: ToneParams = field(default_factory=lambda: ToneParams(1.2, 0.03))
    target_snr_db: float = 15.0
    # power the noise is calibrated against: "localized" (burst) or "total" (burst + distributed)
    snr_reference: str = "localized"
    seed: int = 0

    @property
    def n_samples(self):
        return int(round(self.duration_s * self.sample_rate_hz))

    @property
    def row_delay_s(self):
        return self.electrode_spacing_m / self.burst.propagation_speed_m_per_s

    @property
    def max_delay_s(self):
        return (self.grid[0] - 1) * self.row_delay_s

    @property
    def burst_onset_s(self):
        if self.burst.onset_s is not None:
            return self.burst.onset_s
        return 0.5 * (self.duration_s - self.burst.duration_s - self.max_delay_s)

    @property
    def burst_window_s(self):
        """Interval during which some row of the grid records the burst."""
        start = self.burst_onset_s
        return start, start + self.burst.duration_s + self.max_delay_s

    def validate(self):
        b = self.burst
        if self.grid[0] < 1 or self.grid[1] < 1:
            raise ConfigurationError(f"grid must be positive, got {self.grid}")
        if self.sample_rate_hz <= 0 or self.duration_s <= 0:
            raise ConfigurationError("sample_rate_hz and duration_s must be positive")
        if b.duration_s <= 0 or b.peak_amp_mv <= 0 or b.sigma_s <= 0:
            raise ConfigurationError("burst duration, peak amplitude and envelope width must be positive")
        if b.propagation_speed_m_per_s <= 0 or self.electrode_spacing_m < 0:
            raise ConfigurationError("propagation speed must be positive and spacing non-negative")
        nyquist = self.sample_rate_hz / 2
        freqs = {
            "burst.fwl_freq_hz": b.fwl_freq_hz,
            "burst.fwh_freq_hz": b.fwh_freq_hz,
            "slow_wave.freq_hz": self.slow_wave.freq_hz,
            "respiration.freq_hz": self.respiration.freq_hz,
            "cardiac.freq_hz": self.cardiac.freq_hz,
        }
        for name, f in freqs.items():
            if not 0 <= f < nyquist:
                raise ConfigurationError(f"{name}={f} must lie in [0, {nyquist}) Hz")
        for name, amp in (("slow_wave", self.slow_wave.amp_mv), ("cardiac", self.cardiac.amp_mv)):
            if amp < 0:
                raise ConfigurationError(f"{name}.amp_mv must be non-negative")
        if self.snr_reference not in ("localized", "total"):
            raise ConfigurationError(f"snr_reference must be 'localized' or 'total', got {self.snr_reference!r}")
        r = self.respiration
        if not r.amp_max_mv >= r.amp_min_mv >= 0:
            raise ConfigurationError("respiration needs amp_max_mv >= amp_min_mv >= 0")
        if self.duration_s < b.duration_s + self.max_delay_s:
            raise ConfigurationError(
                f"duration_s={self.duration_s} shorter than burst plus propagation "
                f"({b.duration_s + self.max_delay_s:.4f} s)"
            )
        start, end = self.burst_window_s
        if start < 0 or end > self.duration_s + 1e-9:
            raise ConfigurationError(f"burst window [{start}, {end}] s falls outside the recording")
        return self

    def to_dict(self):
        d = asdict(self)
        d["resolved"] = {
            "n_samples": self.n_samples,
            "row_delay_s": self.row_delay_s,
            "burst_onset_s": self.burst_onset_s,
            "burst_window_s": list(self.burst_window_s),
            "envelope_sigma_s": self.burst.sigma_s,
        }
        return d

    @classmethod
    def from_dict(cls, d):
        d = {k: v for k, v in d.items() if k != "resolved"}
        kw = dict(d)
        if "grid" in kw:
            kw["grid"] = tuple(kw["grid"])
        if "burst" in kw:
            kw["burst"] = BurstParams(**kw["burst"])
        for key in ("slow_wave", "cardiac"):
            if key in kw:
                tone = dict(kw[key])
                if tone.get("active_interval_s") is not None:
                    tone["active_interval_s"] = tuple(tone["active_interval_s"])
                kw[key] = ToneParams(**tone)
        if "respiration" in kw:
            kw["respiration"] = GradientToneParams(**kw["respiration"])
        return cls(**kw)

    def with_seed(self, seed):
        return replace(self, seed=seed)


@dataclass(frozen=True)
class GroundTruthBundle:
    y: np.ndarray
    s_true: np.ndarray
    x_true: np.ndarray
    e_true: np.ndarray
    config: SimConfig


def _burst_shape(params, t):
    """Unscaled burst at times ``t`` measured from the burst start."""
    envelope = np.exp(-0.5 * ((t - params.duration_s / 2) / params.sigma_s) ** 2)
    carrier = params.fwl_amp_mv * np.sin(2 * np.pi * params.fwl_freq_hz * t) + params.fwh_amp_mv * np.sin(
        2 * np.pi * params.fwh_freq_hz * t
    )
    return envelope * carrier


def _burst_scale(params, sample_rate_hz):
    t = np.arange(int(round(params.duration_s * sample_rate_hz))) / sample_rate_hz
    peak = np.max(np.abs(_burst_shape(params, t)), initial=0.0)
    return params.peak_amp_mv / peak if peak > 0 else 0.0


def burst_waveform(params, sample_rate_hz):
    """Sampled burst of ``round(duration_s * fs)`` points, peak magnitude ``peak_amp_mv``."""
    t = np.arange(int(round(params.duration_s * sample_rate_hz))) / sample_rate_hz
    return _burst_scale(params, sample_rate_hz) * _burst_shape(params, t)


def respiration_amplitudes(params, grid):
    """Per-electrode respiration amplitude, linear in ``row + col``."""
    rows, cols = grid
    i, j = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    span = (rows - 1) + (cols - 1)
    frac = (i + j) / span if span > 0 else np.zeros_like(i, dtype=float)
    return params.amp_max_mv - (params.amp_max_mv - params.amp_min_mv) * frac


def _tone(params, t, default_interval):
    interval = params.active_interval_s if params.active_interval_s is not None else default_interval
    if interval is None:
        return params.amp_mv * np.sin(2 * np.pi * params.freq_hz * t)
    start, end = interval
    active = (t >= start) & (t <= end)
    # phase measured from the start of the active window
    return np.where(active, params.amp_mv * np.sin(2 * np.pi * params.freq_hz * (t - start)), 0.0)


def localized_component(config):
    rows, cols = config.grid
    t = np.arange(config.n_samples) / config.sample_rate_hz
    scale = _burst_scale(config.burst, config.sample_rate_hz)
    s = np.zeros((rows, cols, config.n_samples))
    for r in range(rows):
        local = t - config.burst_onset_s - r * config.row_delay_s
        inside = (local >= 0) & (local <= config.burst.duration_s)
        series = np.where(inside, scale * _burst_shape(config.burst, local), 0.0)
        s[r, :, :] = series
    return s


def distributed_component(config):
    rows, cols = config.grid
    t = np.arange(config.n_samples) / config.sample_rate_hz
    common = _tone(config.slow_wave, t, config.burst_window_s) + _tone(config.cardiac, t, None)
    resp = np.sin(2 * np.pi * config.respiration.freq_hz * t)
    amps = respiration_amplitudes(config.respiration, config.grid)
    return common[None, None, :] + amps[:, :, None] * resp[None, None, :]


def _quantize_common(parts):
    """Round all parts to one binary grid on which every partial sum is exact.

    With a common quantum ``2**k`` and all magnitudes below ``2**(k+51)``,
    ``y = s + x + e`` and ``y - s - x - e == 0`` both hold bit-exactly.
    """
    bound = sum(float(np.max(np.abs(p), initial=0.0)) for p in parts)
    if bound == 0:
        return parts
    quantum = 2.0 ** (int(np.ceil(np.log2(bound))) + 1 - 51)
    return tuple(np.round(p / quantum) * quantum for p in parts)


def simulate(config=None):
    """Simulate a measurement tensor and its ground-truth components."""
    config = (config or SimConfig()).validate()
    s = localized_component(config)
    x = distributed_component(config)
    clean = s + x
    reference = s if config.snr_reference == "localized" else clean
    p_signal = float(np.mean(reference**2))
    sigma = np.sqrt(p_signal / 10 ** (config.target_snr_db / 10))
    rng = np.random.default_rng(config.seed)
    e = sigma * rng.standard_normal(clean.size).reshape(clean.shape, order="F")
    s, x, e = _quantize_common((s, x, e))
    y = s + x + e
    return GroundTruthBundle(y=y, s_true=s, x_true=x, e_true=e, config=config)
