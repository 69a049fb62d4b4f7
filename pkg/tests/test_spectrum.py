import json

import numpy as np
import pytest

from floquet_amp.bloch_sim import SimConfig, TimeSeries, add_effective_field, simulate
from floquet_amp.domain import DriveConfig, SpinParams, TestField
from floquet_amp.floquet import ResonanceComb, resonance_comb
from floquet_amp.specfun import bessel_j
from floquet_amp.spectrum import (
    Spectrum,
    amplitude_spectrum,
    amplitude_spectrum_from_samples,
    integer_period_samples,
    measure_amplification,
    noise_floor,
    sideband_peaks,
    spectrum_power,
)

DRIVE = DriveConfig.from_frequencies(10.039, 3.12, 1.5)


def _tone_series(freqs_amps, n=4000, dt=1e-3):
    t = dt * np.arange(n)
    x = sum(a * np.cos(2 * np.pi * f * t + 0.3 * i) for i, (f, a) in enumerate(freqs_amps))
    return TimeSeries(0.0, dt, {"x": x})


def test_unit_cosine_normalization():
    spec = amplitude_spectrum(_tone_series([(5.0, 1.0)]), "x")
    assert spec.df == pytest.approx(0.25)
    i = spec.bin_of(5.0)
    assert spec.amplitudes[i] == pytest.approx(1.0, abs=1e-12)
    others = np.delete(spec.amplitudes, i)
    assert np.max(others) < 1e-12


def test_zero_series():
    spec = amplitude_spectrum(TimeSeries(0.0, 1e-3, {"x": np.zeros(100)}), "x")
    assert np.all(spec.amplitudes == 0)


def test_non_uniform_sampling_rejected():
    t = np.array([0.0, 0.1, 0.25, 0.3])
    with pytest.raises(ValueError, match="non-uniform"):
        amplitude_spectrum_from_samples(t, np.ones(4))


@pytest.mark.parametrize("n", [1000, 1001, 4096])
def test_parseval(n):
    rng = np.random.default_rng(n)
    x = rng.standard_normal(n) * 2 + 0.5
    spec = amplitude_spectrum(TimeSeries(0.0, 1e-3, {"x": x}), "x")
    assert spectrum_power(spec) == pytest.approx(np.mean(x * x), rel=1e-9)


def test_window_doubling_leaves_peaks_unchanged():
    tones = [(5.0, 0.7), (8.25, 0.2)]
    short = amplitude_spectrum(_tone_series(tones, n=4000), "x")
    long = amplitude_spectrum(_tone_series(tones, n=8000), "x")
    for f, _ in tones:
        assert abs(short.amplitudes[short.bin_of(f)] - long.amplitudes[long.bin_of(f)]) < 1e-9


def test_integer_period_samples():
    n = integer_period_samples(1e-3, [1.5, 4.0], 10000)
    assert n == 10000
    assert integer_period_samples(1e-3, [1.5, 3.75], 9999) == 8000
    # 1.5 Hz needs multiples of 2000 samples, 3.7 Hz then multiples of 10000
    assert integer_period_samples(1e-3, [1.5, 3.7], 9999) is None


def test_skip_and_trim():
    series = _tone_series([(5.0, 1.0)], n=5000)
    spec = amplitude_spectrum(series, "x", skip=1.0, n_samples=2000)
    assert spec.n_samples == 2000
    assert spec.amplitudes[spec.bin_of(5.0)] == pytest.approx(1.0, abs=1e-12)


# -- peaks --------------------------------------------------------------------------

COMB = ResonanceComb(10.0, 1.5, tuple((k, 10.0 + 1.5 * k) for k in range(-2, 3)))


def test_synthetic_peaks_recovered():
    amps = {-2: 0.1, -1: 0.4, 0: 1.0, 1: 0.25, 2: 0.05}
    spec = amplitude_spectrum(_tone_series([(10.0 + 1.5 * k, a) for k, a in amps.items()], n=8000), "x")
    peaks = sideband_peaks(spec, COMB, tol=0.3)
    for p in peaks:
        assert p.present
        assert p.nu_hz == pytest.approx(10.0 + 1.5 * p.k)
        assert p.amplitude == pytest.approx(amps[p.k], abs=1e-12)


def test_empty_band_flagged_absent():
    spec = amplitude_spectrum(_tone_series([(10.0, 1.0)], n=8000), "x")
    peaks = {p.k: p for p in sideband_peaks(spec, COMB, tol=0.3)}
    assert peaks[0].present
    assert not peaks[1].present and not peaks[-2].present


def test_peak_errors():
    spec = amplitude_spectrum(_tone_series([(10.0, 1.0)]), "x")
    with pytest.raises(ValueError, match="bin width"):
        sideband_peaks(spec, COMB, tol=0.1)
    with pytest.raises(ValueError, match="overlap"):
        sideband_peaks(spec, COMB, tol=0.8)


def test_measure_amplification_identity_and_scaling():
    ref = amplitude_spectrum(_tone_series([(10.0, 2.0)], n=8000), "x")
    out = dict(measure_amplification(ref, ref, COMB, 0.3, test_frequency=10.0))
    assert out[0] == pytest.approx(1.0)
    assert out[1] is None
    sig = amplitude_spectrum(_tone_series([(10.0, 2.0), (11.5, 0.5)], n=8000), "x")
    base = dict(measure_amplification(sig, ref, COMB, 0.3))
    c = 3.7
    scaled = dict(measure_amplification(Spectrum(sig.df, c * sig.amplitudes, sig.n_samples),
                                        Spectrum(ref.df, c * ref.amplitudes, ref.n_samples), COMB, 0.3))
    assert scaled[1] == pytest.approx(base[1], rel=1e-14)
    assert base[1] == pytest.approx(0.25)


def test_reference_below_floor():
    ref = amplitude_spectrum(TimeSeries(0.0, 1e-3, {"x": np.zeros(4000)}), "x")
    with pytest.raises(ValueError, match="noise floor"):
        measure_amplification(ref, ref, COMB, 0.3)


def test_noise_floor_default():
    spec = Spectrum(1.0, np.array([1.0, 2.0, 3.0]), 5)
    assert noise_floor(spec) == 10.0


def test_serialization():
    spec = Spectrum(0.5, np.array([0.0, 1.0 / 3.0]), 3)
    assert spec.to_csv() == "frequency_hz,amplitude\n0,0\n0.5,0.333333333333\n"
    data = json.loads(spec.to_json())
    assert data["frequency_hz"] == [0.0, 0.5]
    rec = sideband_peaks(Spectrum(0.5, np.array([0.0, 0.0, 1.0, 0.0, 0.0]), 9),
                         ResonanceComb(1.0, 5.0, ((0, 1.0),)), 0.5)[0].as_record(2.5)
    assert set(rec) == {"k", "nu_hz", "amplitude", "present", "eta"}


# -- end-to-end pipeline (desk scale: T2 = 2 s) -----------------------------------------

@pytest.fixture(scope="module")
def pipeline():
    params = SpinParams(t1n=2.0, t2n=2.0)
    test = TestField(b_y=0.01, nu=DRIVE.nu0 + DRIVE.nu_ac)
    # 26 s window: 1.5 Hz and every line nu0 + k*1.5 sit within 0.02 cycles of a bin
    sim = SimConfig(dt=5e-4, duration=36.0, transient_skip=10.0)
    series = add_effective_field(simulate(params, DRIVE, test, sim), params, test)
    spec = amplitude_spectrum(series, "by_eff", skip=10.0)
    start = int(round(10.0 / series.dt))
    t = series.t[start:]
    ref = amplitude_spectrum_from_samples(t, test.b_y * np.cos(2 * np.pi * test.nu * t))
    return spec, ref, test


def test_pipeline_seven_lines_present(pipeline):
    spec, _, _ = pipeline
    peaks = sideband_peaks(spec, resonance_comb(DRIVE, (-3, 3)), tol=2 * spec.df)
    assert [p.k for p in peaks if p.present] == list(range(-3, 4))
    for p in peaks:
        assert abs(p.nu_hz - (DRIVE.nu0 + p.k * DRIVE.nu_ac)) <= spec.df


def test_pipeline_ratios_match_theory(pipeline):
    spec, ref, test = pipeline
    eta = dict(measure_amplification(spec, ref, resonance_comb(DRIVE, (-3, 3)), 2 * spec.df, test.nu))
    u = DRIVE.u
    for k in range(-3, 4):
        l = k - 1
        want = abs(bessel_j(k, u) / bessel_j(1, u))
        assert eta[k] / eta[1] == pytest.approx(want, rel=0.03), k


@pytest.mark.xfail(strict=True, reason="the measured ratios differ from the Bessel theory by 7-12%; "
                   "a noiseless model reproduces the theory, not the measurement")
def test_pipeline_ratios_match_measured_values(pipeline):
    spec, ref, test = pipeline
    eta = dict(measure_amplification(spec, ref, resonance_comb(DRIVE, (-3, 3)), 2 * spec.df, test.nu))
    measured = [1, 0.916, 1.480, 0.987]
    for l, m in zip((-1, 0, 1, 2), measured):
        assert eta[1 + l] / eta[0] == pytest.approx(m, rel=0.05)
