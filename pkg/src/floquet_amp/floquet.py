"""Floquet quasi-energies, dressed-state coefficients and the resonance comb."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .domain import DriveConfig
from .specfun import bessel_j, default_kmax


@dataclass(frozen=True)
class FloquetState:
    """Dressed state |epsilon>_n expanded on the photon-number basis.

    ``coeffs`` maps the photon index n' to the amplitude J_{n-n'}(epsilon*u/2).
    """

    epsilon: int
    n: int
    coeffs: dict

    def norm_squared(self) -> float:
        return float(sum(c * c for c in self.coeffs.values()))


@dataclass(frozen=True)
class ResonanceComb:
    nu0: float
    nu_ac: float
    lines: tuple  # ((k, frequency_hz), ...)

    @property
    def ks(self):
        return [k for k, _ in self.lines]

    @property
    def frequencies(self):
        return np.array([f for _, f in self.lines])

    def frequency(self, k) -> float:
        return self.nu0 + k * self.nu_ac


def floquet_energy(epsilon, n, drive: DriveConfig) -> float:
    """Quasi-energy E_{eps,n}/(2 pi) in Hz."""
    if epsilon not in (1, -1):
        raise ValueError("epsilon must be +1 or -1")
    return epsilon * drive.nu0 / 2.0 + n * drive.nu_ac


def floquet_state_coefficients(epsilon, n, drive: DriveConfig, k_max=None) -> FloquetState:
    if epsilon not in (1, -1):
        raise ValueError("epsilon must be +1 or -1")
    u = drive.u
    if k_max is None:
        k_max = default_kmax(u)
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    arg = epsilon * u / 2.0
    coeffs = {}
    for offset in range(-k_max, k_max + 1):
        coeffs[n - offset] = bessel_j(offset, arg)
    return FloquetState(epsilon=epsilon, n=n, coeffs=coeffs)


def transition_amplitude(k, l, u) -> float:
    """Closed form of the l-photon-assisted amplitude between Floquet states: J_{k+l}(u)."""
    return bessel_j(k + l, u)


def transition_convolution(k, l, u, n_max=None) -> float:
    """Truncated sum over photon states that reduces to J_{k+l}(u).

    Evaluates  sum_{m'-n'=l} J_{n-n'}(u/2) J_{m-m'}(-u/2)  with n = 0,
    m = -k and n' restricted to |n'| <= n_max.
    """
    if n_max is None:
        n_max = default_kmax(u) + abs(k) + abs(l)
    n, m = 0, -k
    total = 0.0
    for n_p in range(-n_max, n_max + 1):
        m_p = n_p + l
        total += bessel_j(n - n_p, u / 2.0) * bessel_j(m - m_p, -u / 2.0)
    return total


def resonance_comb(drive: DriveConfig, k_range=(-3, 3)) -> ResonanceComb:
    """Lines nu0 + k*nu_ac for k in the inclusive ``k_range``.

    Lines at zero or negative frequency are dropped with a warning. A linear
    test field still couples to them through its counter-rotating component;
    see ``steady_state.total_response_with_direct_term``.
    """
    k_lo, k_hi = int(k_range[0]), int(k_range[1])
    if k_hi < k_lo:
        raise ValueError("empty k_range")
    lines = []
    dropped = []
    for k in range(k_lo, k_hi + 1):
        f = drive.nu0 + k * drive.nu_ac
        if f <= 0:
            dropped.append((k, f))
            continue
        lines.append((k, f))
    if dropped:
        desc = ", ".join(f"k={k} ({f:.6g} Hz)" for k, f in dropped)
        warnings.warn(f"comb lines at non-positive frequency dropped: {desc}; "
                      f"they appear folded at |nu| in a real signal", stacklevel=2)
    return ResonanceComb(nu0=drive.nu0, nu_ac=drive.nu_ac, lines=tuple(lines))
