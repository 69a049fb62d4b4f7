"""Floquet spin amplification: analytic response, Bloch oracle and Fano fitting."""

__version__ = "0.1.0"

from .bloch_sim import (
    SimConfig,
    SimulationError,
    TimeSeries,
    add_effective_field,
    readout_theta,
    simulate,
    steady_amplitude,
    steady_amplitudes,
)
from .domain import DriveConfig, OpticsParams, SpinParams, TestField, ValidationReport, validate
from .fano import (
    FanoFitResult,
    FanoParams,
    eta_squared_profile,
    fano_parameter,
    fano_profile,
    fano_width,
    fit_multiline,
    initial_guess,
    multiline_response_squared,
)
from .floquet import (
    FloquetState,
    ResonanceComb,
    floquet_energy,
    floquet_state_coefficients,
    resonance_comb,
    transition_amplitude,
    transition_convolution,
)
from .specfun import bessel_j, jacobi_anger_coeffs
from .spectrum import (
    Spectrum,
    SidebandPeak,
    amplitude_spectrum,
    amplitude_spectrum_from_samples,
    measure_amplification,
    sideband_peaks,
)
from .steady_state import (
    AmplificationProfile,
    amplification_on_resonance,
    amplification_profile,
    amplification_spectrum,
    baseline_gain,
    best_modulation_index,
    calibrate_baseline,
    coeff_a,
    coeff_b,
    fwhm,
    measure_fwhm,
    multi_resonance_profile,
    power_sum_rule,
    total_response_with_direct_term,
    transverse_polarization,
)
