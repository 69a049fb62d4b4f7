"""Single-sided amplitude spectra and sideband extraction.

Normalization: a sinusoid ``a*cos(2 pi f t + phi)`` sampled over an integer
number of periods gives a bin of height ``a`` at ``f``. DC and Nyquist bins
carry the plain mean-coefficient. With this convention the series mean
square equals ``dc**2 + nyq**2 + sum(a_i**2)/2`` (see :func:`spectrum_power`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bloch_sim import TimeSeries
from .floquet import ResonanceComb

NOISE_FLOOR_FACTOR = 5.0
ROUNDOFF_FLOOR = 1e-9  # relative to the largest bin; guards noiseless spectra


@dataclass(frozen=True)
class Spectrum:
    df: float
    amplitudes: np.ndarray
    n_samples: int

    @property
    def frequencies(self) -> np.ndarray:
        return self.df * np.arange(len(self.amplitudes))

    def bin_of(self, frequency) -> int:
        return int(round(frequency / self.df))

    def to_csv(self) -> str:
        lines = ["frequency_hz,amplitude"]
        for f, a in zip(self.frequencies, self.amplitudes):
            lines.append(f"{f:.12g},{a:.12g}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({"df": float(f"{self.df:.12g}"),
                           "frequency_hz": [float(f"{f:.12g}") for f in self.frequencies],
                           "amplitude": [float(f"{a:.12g}") for a in self.amplitudes]})


def amplitude_spectrum_from_samples(t, x) -> Spectrum:
    """Amplitude spectrum of samples ``x`` taken at times ``t`` (uniform)."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if len(x) < 2 or len(t) != len(x):
        raise ValueError("need at least two samples with matching times")
    steps = np.diff(t)
    dt = steps.mean()
    if np.max(np.abs(steps - dt)) > 1e-9 * abs(dt):
        raise ValueError("non-uniform sampling")
    return _spectrum(x, dt)


def _spectrum(x, dt) -> Spectrum:
    n = len(x)
    coef = np.fft.rfft(x) / n
    amp = np.abs(coef)
    amp[1:] *= 2.0
    if n % 2 == 0:
        amp[-1] *= 0.5  # Nyquist bin is not doubled
    return Spectrum(df=1.0 / (n * dt), amplitudes=amp, n_samples=n)


def amplitude_spectrum(series: TimeSeries, channel, skip=0.0, n_samples=None) -> Spectrum:
    """Rectangular-window amplitude spectrum of one channel.

    ``skip`` drops the leading transient; ``n_samples`` trims the window
    (callers choose it so the tones of interest fit an integer number of periods).
    """
    x = series[channel]
    start = max(int(round((skip - series.t0) / series.dt)), 0)
    x = x[start:]
    if n_samples is not None:
        x = x[:n_samples]
    if len(x) < 2:
        raise ValueError("need at least two samples")
    return _spectrum(x, series.dt)


def spectrum_power(spec: Spectrum) -> float:
    """Mean square implied by the spectrum (Parseval with this normalization)."""
    a = spec.amplitudes
    if spec.n_samples % 2 == 0:
        return float(a[0] ** 2 + a[-1] ** 2 + 0.5 * np.sum(a[1:-1] ** 2))
    return float(a[0] ** 2 + 0.5 * np.sum(a[1:] ** 2))


def integer_period_samples(dt, frequencies, max_samples, tol=1e-3):
    """Largest sample count <= max_samples whose window fits all ``frequencies``
    to within ``tol`` of an integer number of periods; None if there is none."""
    frequencies = np.asarray(frequencies, dtype=float)
    for n in range(max_samples, 1, -1):
        cycles = frequencies * n * dt
        if np.all(np.abs(cycles - np.round(cycles)) <= tol):
            return n
    return None


@dataclass(frozen=True)
class SidebandPeak:
    k: int
    nu_hz: float
    amplitude: float
    present: bool

    def as_record(self, eta=None):
        rec = {"k": self.k, "nu_hz": float(f"{self.nu_hz:.12g}"),
               "amplitude": float(f"{self.amplitude:.12g}"), "present": self.present}
        if eta is not None:
            rec["eta"] = float(f"{eta:.12g}")
        return rec


def noise_floor(spec: Spectrum, factor=NOISE_FLOOR_FACTOR) -> float:
    """``factor`` x median bin, but never below round-off of the largest bin."""
    amps = spec.amplitudes
    if len(amps) == 0:
        return 0.0
    return max(factor * float(np.median(amps)), ROUNDOFF_FLOOR * float(np.max(amps)))


def sideband_peaks(spec: Spectrum, comb: ResonanceComb, tol, floor=None):
    """Largest bin within +-tol of each comb line.

    Lines whose best bin does not exceed ``floor`` (default:
    :func:`noise_floor`) are reported with ``present=False``.
    """
    if tol < spec.df:
        raise ValueError(f"tol={tol:g} Hz is below the bin width {spec.df:g} Hz")
    if comb.nu_ac < 2 * tol:
        raise ValueError("search windows of neighbouring comb lines overlap")
    if floor is None:
        floor = noise_floor(spec)
    freqs = spec.frequencies
    peaks = []
    for k, f in comb.lines:
        sel = np.nonzero(np.abs(freqs - f) <= tol)[0]
        if len(sel) == 0:
            peaks.append(SidebandPeak(k, f, 0.0, False))
            continue
        i = sel[np.argmax(spec.amplitudes[sel])]
        amp = float(spec.amplitudes[i])
        peaks.append(SidebandPeak(k, float(freqs[i]), amp, amp > floor))
    return peaks


def measure_amplification(signal: Spectrum, reference: Spectrum, comb: ResonanceComb, tol,
                          test_frequency=None, floor=None):
    """Per-line amplification: sideband amplitude over the reference test-tone amplitude.

    The reference tone is the largest reference bin (or the bin at
    ``test_frequency``). Returns ``[(k, eta), ...]`` with ``None`` for absent lines.
    """
    if test_frequency is None:
        ref_bin = int(np.argmax(reference.amplitudes))
    else:
        ref_bin = reference.bin_of(test_frequency)
        if not 0 <= ref_bin < len(reference.amplitudes):
            raise ValueError("test frequency outside the reference spectrum")
    ref_amp = float(reference.amplitudes[ref_bin])
    ref_floor = noise_floor(reference)
    if not ref_amp > max(ref_floor, 0.0):
        raise ValueError("reference test tone is below the noise floor")
    out = []
    for peak in sideband_peaks(signal, comb, tol, floor):
        out.append((peak.k, peak.amplitude / ref_amp if peak.present else None))
    return out
