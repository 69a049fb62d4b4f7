"""Closed-form steady-state response of the driven nuclear spins.

The nuclear transverse polarization under a weak test field
``b_y cos(2 pi nu t)`` is a comb of tones at ``nu + l*nu_ac``::

    P+(t) = b_y * sum_l exp(2j*pi*(nu + l*nu_ac)*t) * sum_k (A_kl + 1j*B_kl)

with the in-phase/quadrature coefficients

    A_kl = g * J_{k+l}(u) J_k(u) / (1 + x_k**2)
    B_kl = g * J_{k+l}(u) J_k(u) * x_k / (1 + x_k**2)
    g    = 2*pi*gamma_n * p0n * t2n / 2
    x_k  = 2*pi*(nu0 - nu + k*nu_ac) * t2n

Multiplying by ``lam * m_n`` converts polarization per nT of test field into
effective field per unit test field, i.e. an amplification factor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .domain import DriveConfig, SpinParams, TestField
from .specfun import bessel_j, default_kmax, jacobi_anger_coeffs

TWO_PI = 2.0 * math.pi


def _out(value):
    value = np.asarray(value)
    return float(value) if value.ndim == 0 else value


def baseline_gain(params: SpinParams) -> float:
    """Signed undriven on-resonance gain eta_{0,0}(0).

    Equal to ``lam * m_n * p0n * (2 pi gamma_n) * t2n / 2``; this is the only
    place the 2*pi of the cyclic gyromagnetic ratio enters the gain.
    """
    return 0.5 * params.lam * params.m_n * params.p0n * TWO_PI * params.gamma_n * params.t2n


def calibrate_baseline(params: SpinParams, target) -> SpinParams:
    """Return ``params`` with ``m_n`` chosen so that |eta_{0,0}(0)| == |target|.

    The sign of the gain follows ``p0n``; ``p0n`` must be nonzero.
    """
    unit = 0.5 * params.lam * abs(params.p0n) * TWO_PI * params.gamma_n * params.t2n
    if unit == 0:
        raise ValueError("cannot calibrate with zero polarization or coupling")
    return params.replace(m_n=abs(target) / unit)


def _coefficient_scale(params: SpinParams) -> float:
    return 0.5 * TWO_PI * params.gamma_n * params.p0n * params.t2n


def _detuning(k, nu, params, drive):
    return TWO_PI * (drive.nu0 - nu + k * drive.nu_ac) * params.t2n


def coeff_a(k, l, u, nu, params: SpinParams, drive: DriveConfig):
    """In-phase coefficient A_{k,l}(u, nu), polarization per nT of test field."""
    x = _detuning(k, np.asarray(nu, dtype=float), params, drive)
    peak = _coefficient_scale(params) * bessel_j(k + l, u) * bessel_j(k, u)
    return _out(peak / (1.0 + x * x))


def coeff_b(k, l, u, nu, params: SpinParams, drive: DriveConfig):
    """Quadrature coefficient B_{k,l}(u, nu); odd in the detuning."""
    x = _detuning(k, np.asarray(nu, dtype=float), params, drive)
    peak = _coefficient_scale(params) * bessel_j(k + l, u) * bessel_j(k, u)
    return _out(peak * x / (1.0 + x * x))


def sideband_sums(l, u, nu, params: SpinParams, drive: DriveConfig, k_max=None):
    """(sum_k A_{k,l}, sum_k B_{k,l}) evaluated on ``nu`` (scalar or array)."""
    if k_max is None:
        k_max = default_kmax(u)
    nu = np.asarray(nu, dtype=float)
    jk = jacobi_anger_coeffs(u, k_max + abs(l))
    mid = k_max + abs(l)
    ks = np.arange(-k_max, k_max + 1)
    weights = jk[mid + ks + l] * jk[mid + ks]
    x = TWO_PI * (drive.nu0 - nu[..., None] + ks * drive.nu_ac) * params.t2n
    lor = 1.0 / (1.0 + x * x)
    scale = _coefficient_scale(params)
    sum_a = scale * np.sum(weights * lor, axis=-1)
    sum_b = scale * np.sum(weights * x * lor, axis=-1)
    return _out(sum_a), _out(sum_b)


@dataclass(frozen=True)
class Phasor:
    """One tone of P+(t) = sum c * exp(2j*pi*f*t); ``f`` may be negative."""

    l: int
    frequency: float
    c: complex
    branch: str  # "co" or "counter"


def polarization_phasors(params: SpinParams, drive: DriveConfig, test: TestField,
                         l_max=None, k_max=None, counter_rotating=False):
    """Tones of the steady-state transverse polarization.

    The co-rotating branch is the rotating-wave result. With
    ``counter_rotating=True`` the response to the other circular component
    of the linear test field is added; it is the same expression evaluated at
    ``-nu`` and produces tones at ``-nu + l*nu_ac``.
    """
    u = drive.u
    if k_max is None:
        k_max = default_kmax(u)
    if l_max is None:
        l_max = default_kmax(u)
    out = []
    branches = [("co", test.nu)]
    if counter_rotating:
        branches.append(("counter", -test.nu))
    for branch, nu in branches:
        for l in range(-l_max, l_max + 1):
            sa, sb = sideband_sums(l, u, nu, params, drive, k_max)
            out.append(Phasor(l, nu + l * drive.nu_ac, test.b_y * complex(sa, sb), branch))
    return out


def quadratures_at(phasors, frequency, rtol=1e-9):
    """Real-signal quadratures of (Px, Py) at a positive ``frequency``.

    Returns ``(px_cos, px_sin, py_cos, py_sin)`` such that
    ``Px ~ px_cos*cos(2 pi f t) + px_sin*sin(2 pi f t)`` and similarly for Py.
    Tones at +f and -f both contribute.
    """
    px_c = px_s = py_c = py_s = 0.0
    tol = rtol * max(abs(frequency), 1.0)
    for p in phasors:
        if abs(p.frequency - frequency) <= tol:
            px_c += p.c.real
            px_s -= p.c.imag
            py_c += p.c.imag
            py_s += p.c.real
        elif abs(p.frequency + frequency) <= tol:
            px_c += p.c.real
            px_s += p.c.imag
            py_c += p.c.imag
            py_s -= p.c.real
    return px_c, px_s, py_c, py_s


def transverse_polarization(t, params: SpinParams, drive: DriveConfig, test: TestField,
                            l_max=None, k_max=None, counter_rotating=False):
    """Steady-state (Px, Py) of the nuclear spins at times ``t``."""
    t = np.asarray(t, dtype=float)
    p_plus = np.zeros(t.shape, dtype=complex)
    for p in polarization_phasors(params, drive, test, l_max, k_max, counter_rotating):
        if p.c != 0:
            p_plus += p.c * np.exp(2j * math.pi * p.frequency * t)
    return _out(p_plus.real), _out(p_plus.imag)


def effective_field(px, py, params: SpinParams):
    """Field seen by the alkali atoms, lam * m_n * P (nT per unit polarization)."""
    scale = params.lam * params.m_n
    return _out(scale * np.asarray(px)), _out(scale * np.asarray(py))


def amplification_on_resonance(k, l, u, params: SpinParams, drive: DriveConfig | None = None):
    """Signed eta_{k,l}(u) = eta_{0,0}(0) * J_{k+l}(u) * J_k(u)."""
    return baseline_gain(params) * bessel_j(k + l, u) * bessel_j(k, u)


def amplification_spectrum(u, nu, params: SpinParams, drive: DriveConfig, l=0, k_max=None):
    """|B_eff,y / B_y| of the output tone at ``nu + l*nu_ac`` for a test field at ``nu``."""
    sa, sb = sideband_sums(l, u, nu, params, drive, k_max)
    scale = params.lam * params.m_n
    return _out(scale * np.hypot(sa, sb))


def total_response_with_direct_term(u, nu, params: SpinParams, drive: DriveConfig,
                                    k_max=None, counter_rotating=True):
    """Observed response at the test frequency, alkali direct response included.

    The alkali's own response is a flat in-phase term of unit size, added to
    the quadrature sum of the nuclear contribution::

        eta = sqrt((sum_k A_k0)**2 + (sum_k B_k0 + 1)**2)     (scaled by lam*m_n)

    With ``counter_rotating`` (default) the counter-rotating half of the test
    field is included, so a line at negative frequency nu0 + k*nu_ac < 0
    is seen by a test field at ``|nu0 + k*nu_ac|``. Set it to False for the
    pure rotating-wave expression.
    """
    scale = params.lam * params.m_n
    sa, sb = sideband_sums(0, u, nu, params, drive, k_max)
    quad = np.asarray(sa, dtype=float)
    inphase = np.asarray(sb, dtype=float)
    if counter_rotating:
        ca, cb = sideband_sums(0, u, -np.asarray(nu, dtype=float), params, drive, k_max)
        quad = quad - ca
        inphase = inphase + cb
    return _out(np.hypot(scale * quad, scale * inphase + 1.0))


def multi_resonance_profile(u, nu, params: SpinParams, drive: DriveConfig, k_max=None):
    """Magnitude profile sum_k J_k(u)^2 |eta00(0)| / sqrt(1 + x_k^2)."""
    if k_max is None:
        k_max = default_kmax(u)
    nu = np.asarray(nu, dtype=float)
    jk = jacobi_anger_coeffs(u, k_max)
    ks = np.arange(-k_max, k_max + 1)
    x = TWO_PI * (drive.nu0 - nu[..., None] + ks * drive.nu_ac) * params.t2n
    prof = abs(baseline_gain(params)) * np.sum(jk * jk / np.sqrt(1.0 + x * x), axis=-1)
    return _out(prof)


@dataclass(frozen=True)
class AmplificationProfile:
    nu_grid: np.ndarray
    eta: np.ndarray
    includes_direct_term: bool

    def to_csv(self) -> str:
        """Columns ``nu_hz,eta``; 12 significant digits, magnitudes."""
        lines = ["nu_hz,eta"]
        lines += [f"{f:.12g},{abs(e):.12g}" for f, e in zip(self.nu_grid, self.eta)]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({"includes_direct_term": self.includes_direct_term,
                           "nu_hz": [float(f"{f:.12g}") for f in self.nu_grid],
                           "eta": [float(f"{abs(e):.12g}") for e in self.eta]})


def amplification_profile(nu_grid, params: SpinParams, drive: DriveConfig, u=None,
                          include_direct=False, l=0, k_max=None) -> AmplificationProfile:
    """Tabulate the response magnitude over an increasing frequency grid."""
    nu_grid = np.asarray(nu_grid, dtype=float)
    if nu_grid.ndim != 1 or np.any(np.diff(nu_grid) <= 0):
        raise ValueError("nu_grid must be one-dimensional and strictly increasing")
    if u is None:
        u = drive.u
    if include_direct:
        eta = total_response_with_direct_term(u, nu_grid, params, drive, k_max)
    else:
        eta = amplification_spectrum(u, nu_grid, params, drive, l=l, k_max=k_max)
    return AmplificationProfile(nu_grid, np.atleast_1d(eta), include_direct)


def fwhm(params: SpinParams) -> float:
    """Full width at half maximum of one amplitude resonance, sqrt(3)/(pi*t2n)."""
    if params.t2n <= 0:
        raise ValueError("t2n must be positive")
    return math.sqrt(3.0) / (math.pi * params.t2n)


def measure_fwhm(params: SpinParams, drive: DriveConfig, k=0, u=None):
    """Width of line ``k`` of :func:`multi_resonance_profile` from its half-maximum crossings."""
    if u is None:
        u = drive.u
    centre = drive.nu0 + k * drive.nu_ac
    # search bracket: well inside the gap to neighbouring lines
    span = min(0.45 * drive.nu_ac, 50 * fwhm(params))

    def prof(nu):
        return multi_resonance_profile(u, nu, params, drive)

    peak = prof(centre)
    half = 0.5 * peak
    lo = optimize.brentq(lambda v: prof(v) - half, centre - span, centre, xtol=1e-15, rtol=1e-15)
    hi = optimize.brentq(lambda v: prof(v) - half, centre, centre + span, xtol=1e-15, rtol=1e-15)
    return hi - lo


def power_sum_rule(k, u, params: SpinParams, drive: DriveConfig | None = None, l_max=None):
    """(sum_{|l|<=l_max} eta_{k,l}(u)^2,  eta_{0,0}(0) * eta_{k,0}(u))."""
    if l_max is None:
        l_max = default_kmax(u) + abs(k)
    lhs = 0.0
    for l in range(-l_max, l_max + 1):
        lhs += amplification_on_resonance(k, l, u, params) ** 2
    rhs = baseline_gain(params) * amplification_on_resonance(k, 0, u, params)
    return lhs, rhs


def best_modulation_index(k=1, l=0, u_grid=None, params: SpinParams | None = None):
    """Grid search for the u maximizing |eta_{k,l}(u)|; returns (u, |eta|)."""
    if params is None:
        params = SpinParams()
    if u_grid is None:
        u_grid = np.linspace(0.0, 8.0, 80001)
    u_grid = np.asarray(u_grid, dtype=float)
    eta = np.abs(baseline_gain(params) * special.jv(k + l, u_grid) * special.jv(k, u_grid))
    i = int(np.argmax(eta))
    return float(u_grid[i]), float(eta[i])
