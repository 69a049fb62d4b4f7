# %% [markdown]
# # Time-domain oracle
#
# Integrate the nuclear Bloch equations with fixed-step RK4 and compare the
# steady-state amplitude of P_y at each sideband with the analytic solution.
# T1 = T2 = 2 s keeps the run short.

# %%
from floquet_amp import DriveConfig
from floquet_amp.verify import oracle_setup, oracle_sidebands, rk4_error_ratio

drive = DriveConfig.from_frequencies(10.039, 3.12, 1.5)
params, test, sim = oracle_setup(drive)
print(f"dt = {sim.dt:.2e} s, duration = {sim.duration:g} s, test at {test.nu:.3f} Hz")

# %%
for l, f, analytic, simulated in oracle_sidebands(params, drive, test, sim):
    print(f"l = {l:+d}  {f:7.3f} Hz  analytic {analytic:.4e}  RK4 {simulated:.4e}  "
          f"rel. diff {abs(simulated - analytic) / analytic:.1e}")

# %% [markdown]
# Halving the step should cut the error by 2^4 = 16.

# %%
print(f"error ratio e(h)/e(h/2) = {rk4_error_ratio():.2f}")
