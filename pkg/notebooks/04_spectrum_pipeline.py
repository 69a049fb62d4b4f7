# %% [markdown]
# # From time series to sideband amplification
#
# Simulate the spins, convert P_y to the effective field seen by the alkali,
# take its amplitude spectrum and divide each comb line by the test-field
# amplitude.

# %%
import numpy as np

from floquet_amp import (
    DriveConfig,
    SimConfig,
    SpinParams,
    TestField,
    add_effective_field,
    amplitude_spectrum,
    amplitude_spectrum_from_samples,
    measure_amplification,
    resonance_comb,
    simulate,
)
from floquet_amp.steady_state import amplification_on_resonance

drive = DriveConfig.from_frequencies(10.039, 3.12, 1.5)
params = SpinParams(t1n=2.0, t2n=2.0)
test = TestField(b_y=0.01, nu=drive.nu0 + drive.nu_ac)
sim = SimConfig(dt=5e-4, duration=36.0, transient_skip=10.0)
series = add_effective_field(simulate(params, drive, test, sim), params, test)

# %%
spec = amplitude_spectrum(series, "by_eff", skip=10.0)
t = series.t[int(round(10.0 / series.dt)):]
ref = amplitude_spectrum_from_samples(t, test.b_y * np.cos(2 * np.pi * test.nu * t))
comb = resonance_comb(drive, (-3, 3))
for k, eta in measure_amplification(spec, ref, comb, 2 * spec.df, test.nu):
    theory = abs(amplification_on_resonance(1, k - 1, drive.u, params))
    print(f"line k = {k:+d}  eta = {eta:7.3f}  on-resonance theory = {theory:7.3f}")
