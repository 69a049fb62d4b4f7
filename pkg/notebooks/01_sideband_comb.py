# %% [markdown]
# # Floquet sideband comb
#
# A static field B0 with a parallel oscillating field B_ac cos(2 pi nu_ac t)
# dresses the nuclear spins. The resonances form a comb at nu0 + k nu_ac
# whose weights are Bessel functions of the modulation index u = gamma B_ac / nu_ac.

# %%
import numpy as np

from floquet_amp import DriveConfig, SpinParams, bessel_j, resonance_comb
from floquet_amp.steady_state import amplification_on_resonance, power_sum_rule

drive = DriveConfig.from_frequencies(10.039, 3.12, 1.5)
print(f"nu0 = {drive.nu0:.3f} Hz, u = {drive.u:.3f}, nu_ac = {drive.nu_ac} Hz")
for k, nu in resonance_comb(drive, (-3, 3)).lines:
    print(f"k = {k:+d}   {nu:7.3f} Hz")

# %% [markdown]
# The on-resonance gain for a test field at line k, read at line k + l, is
# eta00(0) J_{k+l}(u) J_k(u). With l = 0 the ratios between lines are J_k^2.

# %%
params = SpinParams()
eta_k0 = np.array([amplification_on_resonance(k, 0, drive.u, params) for k in range(4)])
print("eta_k0 / eta_00:", np.round(eta_k0 / eta_k0[0], 3))
print("J_k^2 / J_0^2  :", np.round([bessel_j(k, 3.12) ** 2 / bessel_j(0, 3.12) ** 2 for k in range(4)], 3))

# %% [markdown]
# Output power is conserved across the sidebands: summing eta_{1,l}^2 over l
# gives eta00(0) times eta_{1,0}.

# %%
for u in (0.5, 1.84, 3.12):
    lhs, rhs = power_sum_rule(1, u, params, l_max=50)
    print(f"u = {u:4.2f}  sum = {lhs:.6f}  eta00 * eta10 = {rhs:.6f}")
