"""Physical parameter containers for the driven noble-gas / alkali system.

Unit convention used everywhere in the package:

* frequencies are cyclic, in Hz;
* gyromagnetic ratios are cyclic, in Hz/nT (so the Larmor frequency is
  ``gamma * B`` with no 2*pi);
* fields are in nT, times in seconds.

Every formula that needs an angular rate writes its ``2*pi`` explicitly.

The containers are frozen dataclasses and do not raise on bad values; use
:func:`validate` to obtain a report of violated constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

GAMMA_XE129 = 0.01178  # Hz/nT
GAMMA_ELECTRON = 28.0  # Hz/nT
SMALL_SIGNAL_WARN = 0.1


@dataclass(frozen=True)
class SpinParams:
    """Constants of the two-species spin system.

    ``m_n`` and ``m_e`` are the magnetizations at unity polarization,
    expressed as the field they produce (nT). Only the product
    ``lam * m_n * p0n * gamma_n * t2n`` is observable in the nuclear
    amplification; see :func:`floquet_amp.steady_state.calibrate_baseline`.
    """

    gamma_n: float = GAMMA_XE129
    gamma_e: float = GAMMA_ELECTRON
    t1n: float = 34.0
    t2n: float = 34.0
    t1e: float = 1e-3
    t2e: float = 1e-3
    p0n: float = -0.3
    p0e: float = 0.5
    m_n: float = 0.06441469955179306  # gives |eta_00(0)| = 110 with the other defaults
    m_e: float = 4.4e-4
    kappa0: float = 540.0
    q_slowing: float = 6.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def lam(self) -> float:
        """Effective-field coupling, 8*pi*kappa0/3."""
        return 8.0 * math.pi * self.kappa0 / 3.0

    def replace(self, **changes) -> "SpinParams":
        return _replace(self, changes)


@dataclass(frozen=True)
class DriveConfig:
    """Bias field plus longitudinal periodic drive.

    ``gamma_n`` is carried here so that the derived Larmor frequency and
    modulation index do not depend on a separate parameter object.
    """

    b0: float = 10.039 / GAMMA_XE129  # ~852.2 nT, nu0 = 10.039 Hz
    b_ac: float = 3.12 * 1.5 / GAMMA_XE129  # u = 3.12
    nu_ac: float = 1.5
    gamma_n: float = GAMMA_XE129

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def nu0(self) -> float:
        return self.gamma_n * self.b0

    @property
    def u(self) -> float:
        return self.gamma_n * self.b_ac / self.nu_ac

    @classmethod
    def from_frequencies(cls, nu0, u, nu_ac, gamma_n=GAMMA_XE129) -> "DriveConfig":
        """Build a drive from the Larmor frequency and modulation index."""
        return cls(b0=nu0 / gamma_n, b_ac=u * nu_ac / gamma_n, nu_ac=nu_ac, gamma_n=gamma_n)

    def with_u(self, u) -> "DriveConfig":
        return _replace(self, {"b_ac": u * self.nu_ac / self.gamma_n})

    def replace(self, **changes) -> "DriveConfig":
        return _replace(self, changes)


@dataclass(frozen=True)
class TestField:
    """Transverse field ``b_y * cos(2*pi*nu*t)`` along y."""

    __test__ = False  # keep pytest from collecting this class

    b_y: float = 1e-3
    nu: float = 11.539

    def __post_init__(self):
        object.__setattr__(self, "b_y", float(self.b_y))
        object.__setattr__(self, "nu", float(self.nu))

    def small_signal_parameter(self, params: SpinParams) -> float:
        """2*pi*gamma_n*b_y*t1n; the linear-response formulas need this << 1."""
        return 2.0 * math.pi * params.gamma_n * self.b_y * params.t1n

    def replace(self, **changes) -> "TestField":
        return _replace(self, changes)


@dataclass(frozen=True)
class OpticsParams:
    """Probe-beam parameters for the optical-rotation readout (CGS units)."""

    path_length: float = 0.8
    r_e: float = 2.8e-13
    c: float = 2.99792458e10
    oscillator_f: float = 2.0 / 3.0
    density: float = 1.0e13
    nu_pr: float = 384.230484e12 + 110e9
    nu_d2: float = 384.230484e12
    gamma_opt: float = 5.0e9

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            object.__setattr__(self, name, float(getattr(self, name)))

    def dispersion(self) -> float:
        """Dispersive line factor D(nu_pr) in 1/Hz."""
        det = self.nu_pr - self.nu_d2
        return det / (det * det + (0.5 * self.gamma_opt) ** 2)

    def replace(self, **changes) -> "OpticsParams":
        return _replace(self, changes)


def _replace(obj, changes):
    import dataclasses

    return dataclasses.replace(obj, **changes)


@dataclass(frozen=True)
class Violation:
    field: str
    message: str
    severity: str = "error"  # or "warning"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    def add(self, field_name, message, severity="error"):
        self.violations.append(Violation(field_name, message, severity))

    @property
    def errors(self):
        return [v for v in self.violations if v.severity == "error"]

    @property
    def warnings(self):
        return [v for v in self.violations if v.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self):
        # truthy when something was reported
        return bool(self.violations)

    def __len__(self):
        return len(self.violations)

    def __str__(self):
        if not self.violations:
            return "all constraints hold"
        return "\n".join(f"[{v.severity}] {v.field}: {v.message}" for v in self.violations)


def _finite(report, name, value):
    if not math.isfinite(value):
        report.add(name, "must be finite")
        return False
    return True


def validate(params: SpinParams, drive: DriveConfig, test: TestField | None = None,
             optics: OpticsParams | None = None) -> ValidationReport:
    """Check every documented invariant; never raises."""
    report = ValidationReport()

    for name in params.__dataclass_fields__:
        _finite(report, f"spin.{name}", getattr(params, name))
    for name in ("t1n", "t2n", "t1e", "t2e"):
        value = getattr(params, name)
        if math.isfinite(value) and value <= 0:
            report.add(f"spin.{name}", "relaxation time must be positive")
    for name in ("p0n", "p0e"):
        if abs(getattr(params, name)) > 1:
            report.add(f"spin.{name}", "polarization must lie in [-1, 1]")
    if params.kappa0 <= 0:
        report.add("spin.kappa0", "Fermi-contact enhancement must be positive")
    if params.q_slowing < 1:
        report.add("spin.q_slowing", "slowing-down factor must be >= 1")

    for name in drive.__dataclass_fields__:
        _finite(report, f"drive.{name}", getattr(drive, name))
    if drive.nu_ac <= 0:
        report.add("drive.nu_ac", "drive frequency must be positive")
    elif drive.u < 0:
        report.add("drive.b_ac", "modulation index must be non-negative")
    if drive.gamma_n != params.gamma_n:
        report.add("drive.gamma_n", "differs from spin.gamma_n", "warning")

    if test is not None:
        _finite(report, "test.b_y", test.b_y)
        _finite(report, "test.nu", test.nu)
        if test.b_y < 0:
            report.add("test.b_y", "amplitude must be non-negative")
        if test.nu < 0:
            report.add("test.nu", "frequency must be non-negative")
        if params.t1n > 0 and test.small_signal_parameter(params) > SMALL_SIGNAL_WARN:
            report.add("test.b_y",
                       f"small-signal parameter {test.small_signal_parameter(params):.3g} "
                       f"exceeds {SMALL_SIGNAL_WARN}; linear response may be inaccurate",
                       "warning")

    if optics is not None:
        for name in optics.__dataclass_fields__:
            _finite(report, f"optics.{name}", getattr(optics, name))
        if optics.gamma_opt <= 0:
            report.add("optics.gamma_opt", "optical linewidth must be positive")

    return report
