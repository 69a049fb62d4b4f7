"""Built-in invariant suite.

Each check returns a :class:`CheckResult` with the measured deviation and the
tolerance it is held to. :func:`run_checks` runs them all; the JSON report
layout (see :func:`report_dict`) is stable across runs and versions of the
suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .bloch_sim import SimConfig, max_frequency, simulate, steady_amplitudes
from .domain import DriveConfig, SpinParams, TestField
from .floquet import floquet_state_coefficients, transition_convolution
from .specfun import bessel_j, bessel_j_miller, default_kmax
from .spectrum import _spectrum, spectrum_power
from .steady_state import (
    fwhm,
    measure_fwhm,
    polarization_phasors,
    power_sum_rule,
    quadratures_at,
    total_response_with_direct_term,
    transverse_polarization,
)

REPORT_SCHEMA = "floquet-amp/verify/1"
U_GRID = (0.0, 0.5, 1.0, 1.84, 3.12, 3.5, 5.0, 8.0, 12.5)


@dataclass(frozen=True)
class CheckResult:
    name: str
    deviation: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<24} deviation={self.deviation:.3e}  tolerance={self.tolerance:.1e}  {self.detail}"

    def as_dict(self):
        return {"name": self.name, "deviation": float(f"{self.deviation:.6g}"),
                "tolerance": self.tolerance, "passed": self.passed, "detail": self.detail}


def _result(name, dev, tol, detail=""):
    dev = float(dev)
    return CheckResult(name, dev, float(tol), bool(math.isfinite(dev) and dev <= tol), detail)


# -- special functions -------------------------------------------------------

def check_bessel_completeness(tol=1e-9):
    dev = 0.0
    for u in U_GRID:
        k_max = default_kmax(u)
        total = sum(bessel_j(k, u) ** 2 for k in range(-k_max, k_max + 1))
        dev = max(dev, abs(total - 1.0))
    return _result("bessel_completeness", dev, tol, "sum_k J_k(u)^2 = 1")


def check_bessel_recurrence(tol=1e-9):
    dev = 0.0
    for x in U_GRID[1:]:
        for k in range(-15, 16):
            lhs = bessel_j(k - 1, x) + bessel_j(k + 1, x)
            dev = max(dev, abs(lhs - 2.0 * k / x * bessel_j(k, x)))
    return _result("bessel_recurrence", dev, tol, "J_{k-1} + J_{k+1} = (2k/x) J_k")


def check_bessel_parity(tol=1e-9):
    dev = 0.0
    for x in U_GRID:
        for k in range(0, 16):
            sign = -1.0 if k % 2 else 1.0
            dev = max(dev, abs(bessel_j(-k, x) - sign * bessel_j(k, x)))
            dev = max(dev, abs(bessel_j(k, -x) - sign * bessel_j(k, x)))
    return _result("bessel_parity", dev, tol, "J_{-k}(x) = J_k(-x) = (-1)^k J_k(x)")


def check_bessel_oracle(tol=1e-12):
    dev = 0.0
    for x in U_GRID:
        ref = bessel_j_miller(30, x)
        for k in range(31):
            dev = max(dev, abs(bessel_j(k, x) - ref[k]))
    return _result("bessel_oracle", dev, tol, "production route vs backward recurrence")


def check_transition_convolution(tol=1e-8):
    dev = 0.0
    for u in (0.5, 1.84, 3.12, 6.0):
        for k in range(-3, 4):
            for l in range(-3, 4):
                dev = max(dev, abs(transition_convolution(k, l, u) - bessel_j(k + l, u)))
    return _result("transition_convolution", dev, tol, "photon-state sum = J_{k+l}(u)")


def check_floquet_normalization(drive: DriveConfig, tol=1e-10):
    dev = 0.0
    for u in (drive.u, *U_GRID):
        d = drive.with_u(u)
        for eps in (1, -1):
            for n in (-2, 0, 3):
                dev = max(dev, abs(floquet_state_coefficients(eps, n, d).norm_squared() - 1.0))
    return _result("floquet_normalization", dev, tol, "<eps,n|eps,n> = 1")


# -- steady state --------------------------------------------------------------

def check_sum_rule(params: SpinParams, tol=1e-6):
    dev = 0.0
    for u in (0.5, 1.84, 3.12):
        lhs, rhs = power_sum_rule(1, u, params, l_max=50)
        dev = max(dev, abs(lhs - rhs) / abs(rhs))
    return _result("power_sum_rule", dev, tol, "sum_l eta_{1,l}^2 = eta00(0) eta10(u)")


def check_fwhm(params: SpinParams, drive: DriveConfig, tol=0.01, corrupt_t2n=None):
    """Measured width of an isolated line (u = 0) against sqrt(3)/(pi t2n).

    With the drive on, the slow tails of neighbouring lines lift a weak
    line's wings and widen it by a few percent, so the identity is checked
    on the undriven single resonance.

    ``corrupt_t2n`` (negative-control hook) scales t2n in the measured
    profile only, so the check must fail for any factor far from 1.
    """
    measured_params = params if corrupt_t2n is None else params.replace(t2n=params.t2n * corrupt_t2n)
    width = measure_fwhm(measured_params, drive, k=0, u=0.0)
    expect = fwhm(params)
    return _result("fwhm", abs(width - expect) / expect, tol,
                   f"measured {width * 1e3:.4f} mHz, expected {expect * 1e3:.4f} mHz")


def check_linearity(params: SpinParams, drive: DriveConfig, test: TestField, tol=1e-12):
    t = np.linspace(0.0, 3.0, 301)
    px1, py1 = transverse_polarization(t, params, drive, test, counter_rotating=True)
    scale = 2.0
    px2, py2 = transverse_polarization(t, params, drive, test.replace(b_y=test.b_y * scale),
                                       counter_rotating=True)
    ref = max(np.max(np.abs(px1)), np.max(np.abs(py1)))
    dev = max(np.max(np.abs(px2 - scale * px1)), np.max(np.abs(py2 - scale * py1))) / ref
    return _result("linearity_b_y", dev, tol, "P(2 b_y) = 2 P(b_y)")


# -- numerics ------------------------------------------------------------------

def check_parseval(tol=1e-9, seed=12345):
    rng = np.random.default_rng(seed)
    dev = 0.0
    for n in (1024, 1001):
        x = rng.standard_normal(n) + 0.3
        dev = max(dev, abs(spectrum_power(_spectrum(x, 1e-3)) - np.mean(x * x)) / np.mean(x * x))
    return _result("parseval", dev, tol, "spectrum power = mean square")


def rk4_error_ratio(params: SpinParams | None = None, drive: DriveConfig | None = None,
                    duration=2.0):
    """Error ratio e(h)/e(h/2) of the integrator, reference at h/8.

    Uses a strongly tilting test field so the trajectory is far from trivial.
    """
    params = SpinParams(t1n=2.0, t2n=2.0) if params is None else params
    drive = DriveConfig() if drive is None else drive
    test = TestField(b_y=50.0, nu=drive.nu0 + drive.nu_ac)
    h = 0.9 / (100.0 * max_frequency(params, drive, test, SimConfig()))
    runs = {}
    for div in (1, 2, 8):
        sim = SimConfig(dt=h / div, duration=duration, transient_skip=0.0, record_every=div)
        runs[div] = simulate(params, drive, test, sim)
    n = min(len(r) for r in runs.values())

    def err(div):
        return max(np.max(np.abs(runs[div][c][:n] - runs[8][c][:n])) for c in ("pxn", "pyn", "pzn"))

    return err(1) / err(2)


def check_rk4_order(tol=0.3):
    ratio = rk4_error_ratio()
    order = math.log2(ratio)
    return _result("rk4_order", abs(order - 4.0), tol, f"error ratio {ratio:.2f}, order {order:.3f}")


# -- oracle --------------------------------------------------------------------

def oracle_sidebands(params: SpinParams, drive: DriveConfig, test: TestField, sim: SimConfig,
                     l_range=(-3, 3), fit_l=(-8, 8)):
    """Simulated vs analytic amplitude of Py at the sidebands nu + l*nu_ac.

    Returns ``[(l, frequency, analytic, simulated), ...]`` for the lines in
    ``l_range`` that lie at positive frequency. All tones in ``fit_l`` are
    fitted jointly to keep them from leaking into each other.
    """
    series = simulate(params, drive, test, sim)
    phasors = polarization_phasors(params, drive, test, counter_rotating=True)
    wanted = [(l, test.nu + l * drive.nu_ac) for l in range(l_range[0], l_range[1] + 1)]
    wanted = [(l, f) for l, f in wanted if f > 0]
    fit_freqs = [f for _, f in wanted]
    for l in range(fit_l[0], fit_l[1] + 1):
        f = abs(test.nu + l * drive.nu_ac)
        if f > 1e-6 and all(abs(f - g) > 1e-9 for g in fit_freqs):
            fit_freqs.append(f)
    fitted = steady_amplitudes(series, "pyn", fit_freqs, sim.skip_for(params))
    out = []
    for i, (l, f) in enumerate(wanted):
        _, _, py_c, py_s = quadratures_at(phasors, f)
        out.append((l, f, math.hypot(py_c, py_s), fitted[i][0]))
    return out


def oracle_setup(drive: DriveConfig, t2n=2.0):
    """Reduced-duration oracle configuration: T1 = T2 = ``t2n``, 18 T2 of data."""
    params = SpinParams(t1n=t2n, t2n=t2n)
    test = TestField(b_y=0.01, nu=drive.nu0 + drive.nu_ac)
    sim = SimConfig(dt=5e-4, duration=18 * t2n, transient_skip=5 * t2n)
    f_max = max_frequency(params, drive, test, sim)
    if sim.dt > 1.0 / (100.0 * f_max):
        sim = SimConfig(dt=0.9 / (100.0 * f_max), duration=18 * t2n, transient_skip=5 * t2n)
    return params, test, sim


def check_oracle(drive: DriveConfig, tol=0.01):
    params, test, sim = oracle_setup(drive)
    rows = oracle_sidebands(params, drive, test, sim)
    dev = max(abs(sim_a - ana) / ana for _, _, ana, sim_a in rows)
    return _result("oracle_equivalence", dev, tol, f"{len(rows)} sidebands, T2 = {params.t2n:g} s")


def check_direct_term_floor(params: SpinParams, drive: DriveConfig, tol=1e-12):
    """Without nuclear gain the total response is exactly the unit direct term."""
    eta = total_response_with_direct_term(drive.u, np.linspace(1.0, 20.0, 50),
                                          params.replace(p0n=0.0), drive)
    return _result("direct_term_floor", float(np.max(np.abs(eta - 1.0))), tol, "eta = 1 at p0n = 0")


def run_checks(params: SpinParams | None = None, drive: DriveConfig | None = None,
               test: TestField | None = None, corrupt_t2n=None, include_slow=True):
    params = SpinParams() if params is None else params
    drive = DriveConfig() if drive is None else drive
    test = TestField() if test is None else test
    results = [
        check_bessel_completeness(),
        check_bessel_recurrence(),
        check_bessel_parity(),
        check_bessel_oracle(),
        check_transition_convolution(),
        check_floquet_normalization(drive),
        check_sum_rule(params),
        check_fwhm(params, drive, corrupt_t2n=corrupt_t2n),
        check_linearity(params, drive, test),
        check_direct_term_floor(params, drive),
        check_parseval(),
    ]
    if include_slow:
        results.append(check_rk4_order())
        results.append(check_oracle(drive))
    return results


def report_dict(results) -> dict:
    return {"schema": REPORT_SCHEMA, "passed": all(r.passed for r in results),
            "checks": [r.as_dict() for r in results]}


def report_json(results) -> str:
    return json.dumps(report_dict(results), indent=2, sort_keys=True) + "\n"
