# %% [markdown]
# # Fano line fit
#
# Each comb line seen through the alkali is a Fano profile with q = -eta_k0
# and width 1/(pi T2). Fit all seven lines and a shared T2 by
# Levenberg-Marquardt, first on noiseless data and then with 1% noise.

# %%
import numpy as np

from floquet_amp import DriveConfig, fano_width, fit_multiline, multiline_response_squared, resonance_comb

eta = np.array([-12.47, -21.86, -9.574, -8.532, -7.219, -18.71, -8.121])
nu_k = 5.539 + 1.5 * np.arange(7)
t2n = 34.05
gamma = fano_width(t2n)
offsets = np.arange(-3 * gamma, 3 * gamma + 5e-4, 1e-3)
nu = np.concatenate([c + offsets for c in nu_k])
clean = multiline_response_squared(nu, eta, nu_k, t2n)
comb = resonance_comb(DriveConfig.from_frequencies(10.039, 3.12, 1.5), (-3, 3))

# %%
res = fit_multiline((nu, clean), comb=comb)
print(f"converged: {res.converged} after {len(res.cost_history) - 1} steps, T2 = {res.t2n:.4f} s")
print("eta_k0:", np.round(res.eta_k0, 4))

# %%
rng = np.random.default_rng(1)
noisy = fit_multiline((nu, clean * (1 + 0.01 * rng.standard_normal(len(nu)))), comb=comb)
print("noisy fit, relative error of eta_k0:", np.round(noisy.eta_k0 / eta - 1, 4))
print(f"T2 = {noisy.t2n:.3f} s")
