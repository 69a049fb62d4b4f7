# %% [markdown]
# # Gain versus modulation index, and de-amplification
#
# The first-sideband gain eta_{1,0}(u) ~ J_1(u)^2 peaks near u = 1.84. With
# the drive faster than the Larmor frequency, a test field at |nu0 - nu_ac|
# sees the nuclear response interfere with the alkali's direct response.

# %%
import numpy as np

from floquet_amp import DriveConfig, SpinParams, calibrate_baseline
from floquet_amp.steady_state import best_modulation_index, total_response_with_direct_term

params = calibrate_baseline(SpinParams(), 110.0)
u_best, eta_best = best_modulation_index(1, 0, params=params)
print(f"best u = {u_best:.4f}, |eta_10| = {eta_best:.2f}")

# %% [markdown]
# Total response at 2.971 Hz with nu_ac = 13 Hz. The curve dips near u = 3.5,
# where the nuclear term opposes the unit direct term.

# %%
drive = DriveConfig.from_frequencies(10.039, 3.5, 13.0)
u = np.linspace(3.0, 4.0, 101)
eta = np.array([total_response_with_direct_term(x, 2.971, params, drive) for x in u])
i = int(np.argmin(eta))
print(f"minimum total response {eta[i]:.4f} at u = {u[i]:.3f}")
for x, e in zip(u[::10], eta[::10]):
    print(f"u = {x:4.2f}  eta = {e:.4f}")
