"""Preprocessing of recorded EHG tensors along the time mode.

The pipeline used for real recordings is: drop the first minute, apply a
zero-phase Butterworth bandpass (0.05-4 Hz) per electrode, then subsample
to 10 Hz.
"""

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ArgumentError, ConfigurationError
from .tensor import as_tensor3


@dataclass(frozen=True)
class FilterSpec:
    f_lo_hz: float = 0.05
    f_hi_hz: float = 4.0
    order: int = 4
    bidirectional: bool = True
    kind: str = "butterworth-bandpass"

    def validate(self, fs):
        if self.kind != "butterworth-bandpass":
            raise ConfigurationError(f"unsupported filter kind {self.kind!r}")
        if self.order < 1:
            raise ConfigurationError(f"filter order must be >= 1, got {self.order}")
        if not 0 < self.f_lo_hz < self.f_hi_hz < fs / 2:
            raise ConfigurationError(
                f"need 0 < f_lo ({self.f_lo_hz}) < f_hi ({self.f_hi_hz}) < fs/2 ({fs / 2})"
            )
        return self


def trim_head(x, fs, seconds):
    """Drop the first ``round(seconds * fs)`` samples."""
    x = as_tensor3(x)
    if seconds < 0:
        raise ArgumentError(f"seconds must be non-negative, got {seconds}")
    n = int(round(seconds * fs))
    if n >= x.shape[2]:
        raise ArgumentError(f"cannot trim {n} samples from a recording of {x.shape[2]}")
    return x[:, :, n:].copy()


def design_sos(fs, spec):
    """Second-order sections of the single-pass Butterworth bandpass."""
    spec.validate(fs)
    sos = signal.butter(spec.order, [spec.f_lo_hz, spec.f_hi_hz], btype="bandpass", fs=fs, output="sos")
    poles = np.concatenate([np.roots(s[3:]) for s in sos])
    if not np.all(np.isfinite(sos)) or np.max(np.abs(poles)) >= 1:
        raise ConfigurationError("bandpass design is unstable at these cutoffs")
    return sos


def impulse_length(sos, tol=1e-3):
    """Samples until the slowest pole decays below ``tol``."""
    poles = np.concatenate([np.roots(s[3:]) for s in sos])
    r = float(np.max(np.abs(poles)))
    if r <= 0:
        return 1
    return int(np.ceil(np.log(tol) / np.log(r)))


def bandpass(x, fs, spec=None):
    """Zero-phase (forward-backward) Butterworth bandpass along time.

    Each electrode series is reflect-padded by three impulse-response
    lengths (capped by the series length) before filtering.
    """
    spec = spec or FilterSpec()
    x = as_tensor3(x)
    sos = design_sos(fs, spec)
    t = x.shape[2]
    if not spec.bidirectional:
        return signal.sosfilt(sos, x, axis=2)
    padlen = min(3 * impulse_length(sos), t - 1)
    return signal.sosfiltfilt(sos, x, axis=2, padtype="even", padlen=padlen)


def magnitude_response(fs, spec, freqs_hz):
    """Analytic gain of the effective (two-pass when bidirectional) filter."""
    sos = design_sos(fs, spec)
    _, h = signal.sosfreqz(sos, worN=np.asarray(freqs_hz, dtype=float), fs=fs)
    gain = np.abs(h)
    return gain**2 if spec.bidirectional else gain


def decimate(x, factor, fs=None, f_hi_hz=None, force=False):
    """Keep every ``factor``-th sample.  Returns ``(tensor, new_fs)``.

    When both ``fs`` and the upper passband edge ``f_hi_hz`` are given, the
    call refuses to alias content unless ``force`` is set.
    """
    x = as_tensor3(x)
    if int(factor) != factor or factor < 1:
        raise ArgumentError(f"decimation factor must be a positive integer, got {factor}")
    factor = int(factor)
    if fs is not None and f_hi_hz is not None and not force and f_hi_hz >= fs / (2 * factor):
        raise ArgumentError(
            f"passband edge {f_hi_hz} Hz aliases after decimating fs={fs} by {factor}; "
            "pass force=True to override"
        )
    t_new = x.shape[2] // factor
    out = x[:, :, : t_new * factor : factor].copy()
    return out, (fs / factor if fs is not None else None)


def preprocess(x, fs, trim_seconds=60.0, spec=None, target_fs=10.0, force=False):
    """Trim, bandpass and decimate; returns ``(tensor, new_fs)``."""
    spec = spec or FilterSpec()
    x = trim_head(x, fs, trim_seconds)
    x = bandpass(x, fs, spec)
    factor = fs / target_fs if target_fs else 1
    if abs(factor - round(factor)) > 1e-9:
        raise ArgumentError(f"fs={fs} is not an integer multiple of target_fs={target_fs}")
    return decimate(x, int(round(factor)), fs=fs, f_hi_hz=spec.f_hi_hz, force=force)
