"""Time-domain Bloch-equation integrator used as a brute-force oracle.

The field seen by both species is::

    B(t) = b_y cos(2 pi nu t) y + [b0 + b_ac cos(2 pi nu_ac t)] z

and the polarizations obey (cyclic gyromagnetic ratios, hence the 2 pi)::

    dPn/dt = 2 pi gamma_n (B [+ lam m_e Pe]) x Pn + relaxation to p0n z
    dPe/dt = 2 pi gamma_e / Q (B + lam m_n Pn) x Pe + relaxation / Q

``mode`` selects ``"xe_only"`` (nucleus alone), ``"coupled"`` (electron
driven by the nuclear effective field, no back-action) or ``"full"``
(back-action kept). Integration is classical fixed-step RK4.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .domain import DriveConfig, OpticsParams, SpinParams, TestField

TWO_PI = 2.0 * math.pi
MODES = ("xe_only", "coupled", "full")
FRAMES = ("lab", "rotating")
STEPS_PER_PERIOD = 100

_MAGIC = b"FQTS"
_VERSION = 1


class SimulationError(RuntimeError):
    """Invalid step size or a diverging trajectory."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class SimConfig:
    dt: float = 5e-4
    duration: float = 40.0
    transient_skip: float | None = None  # None -> 5 * max(t1n, t2n)
    mode: str = "xe_only"
    frame: str = "lab"
    record_every: int = 1

    def skip_for(self, params: SpinParams) -> float:
        if self.transient_skip is not None:
            return float(self.transient_skip)
        return 5.0 * max(params.t1n, params.t2n)


def max_frequency(params: SpinParams, drive: DriveConfig, test: TestField, sim: SimConfig) -> float:
    """Largest rate (Hz) the integrator has to resolve."""
    sweep = params.gamma_n * abs(drive.b_ac)
    if sim.frame == "lab":
        f = max(test.nu, drive.nu_ac, abs(drive.nu0) + sweep)
    else:
        f = max(abs(drive.nu0 - test.nu) + sweep, drive.nu_ac)
    if sim.mode != "xe_only":
        b_abs = abs(drive.b0) + abs(drive.b_ac)
        f = max(f, params.gamma_e * b_abs / params.q_slowing)
    return f


def check_sim_config(params: SpinParams, drive: DriveConfig, test: TestField, sim: SimConfig):
    """Raise :class:`SimulationError` if ``sim`` is unusable."""
    if sim.mode not in MODES:
        raise SimulationError(f"unknown mode {sim.mode!r}")
    if sim.frame not in FRAMES:
        raise SimulationError(f"unknown frame {sim.frame!r}")
    if sim.frame == "rotating" and sim.mode != "xe_only":
        raise SimulationError("rotating frame is only available in xe_only mode")
    if not sim.dt > 0:
        raise SimulationError("dt must be positive")
    skip = sim.skip_for(params)
    if not sim.duration > skip >= 0:
        raise SimulationError("need duration > transient_skip >= 0")
    if sim.record_every < 1:
        raise SimulationError("record_every must be >= 1")
    f_max = max_frequency(params, drive, test, sim)
    if f_max > 0 and sim.dt > 1.0 / (STEPS_PER_PERIOD * f_max) * (1 + 1e-12):
        raise SimulationError(
            f"dt={sim.dt:g} s too large: need dt <= 1/({STEPS_PER_PERIOD}*{f_max:.6g} Hz)"
            f" = {1.0 / (STEPS_PER_PERIOD * f_max):.6g} s")


@dataclass(frozen=True)
class TimeSeries:
    t0: float
    dt: float
    channels: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.channels.values()}
        if len(lengths) > 1:
            raise ValueError("all channels must have equal length")
        object.__setattr__(self, "channels",
                           {k: np.asarray(v, dtype=float) for k, v in self.channels.items()})

    def __len__(self):
        for v in self.channels.values():
            return len(v)
        return 0

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def duration(self) -> float:
        return self.dt * len(self)

    def __getitem__(self, name):
        return self.channels[name]

    def with_channels(self, **new) -> "TimeSeries":
        merged = dict(self.channels)
        merged.update(new)
        return TimeSeries(self.t0, self.dt, merged)

    def to_csv(self) -> str:
        names = list(self.channels)
        buf = io.StringIO()
        buf.write(",".join(["t"] + names) + "\n")
        cols = [self.t] + [self.channels[n] for n in names]
        for row in zip(*cols):
            buf.write(",".join(f"{v:.12g}" for v in row) + "\n")
        return buf.getvalue()

    def to_bytes(self) -> bytes:
        """Binary record: header then channel-major little-endian float64 data.

        Header layout: 4-byte magic ``FQTS``, uint16 version, float64 dt,
        float64 t0, uint16 channel count, uint64 sample count, then per
        channel a uint16 byte length and the UTF-8 name.
        """
        names = list(self.channels)
        parts = [_MAGIC, struct.pack("<HddHQ", _VERSION, self.dt, self.t0, len(names), len(self))]
        for name in names:
            raw = name.encode("utf-8")
            parts.append(struct.pack("<H", len(raw)) + raw)
        for name in names:
            parts.append(self.channels[name].astype("<f8").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "TimeSeries":
        if data[:4] != _MAGIC:
            raise ValueError("not a time-series record (bad magic)")
        version, dt, t0, n_ch, n = struct.unpack_from("<HddHQ", data, 4)
        if version != _VERSION:
            raise ValueError(f"unsupported record version {version}")
        pos = 4 + struct.calcsize("<HddHQ")
        names = []
        for _ in range(n_ch):
            (size,) = struct.unpack_from("<H", data, pos)
            pos += 2
            names.append(data[pos:pos + size].decode("utf-8"))
            pos += size
        channels = {}
        for name in names:
            channels[name] = np.frombuffer(data, dtype="<f8", count=n, offset=pos).astype(float)
            pos += 8 * n
        return cls(t0, dt, channels)


def _field_tables(drive, test, sim, n_steps):
    # fields sampled on the half-step grid t = j*dt/2, j = 0..2*n_steps
    th = 0.5 * sim.dt * np.arange(2 * n_steps + 1)
    bz = drive.b0 + drive.b_ac * np.cos(TWO_PI * drive.nu_ac * th)
    if sim.frame == "lab":
        by = test.b_y * np.cos(TWO_PI * test.nu * th)
    else:
        bz = bz - test.nu / drive.gamma_n
        by = np.full_like(th, 0.5 * test.b_y)
    return by.tolist(), bz.tolist()


def _run_xe_only(params, test, drive, sim, n_steps):
    w = TWO_PI * params.gamma_n
    r2 = 1.0 / params.t2n
    r1 = 1.0 / params.t1n
    p0 = params.p0n
    by_t, bz_t = _field_tables(drive, test, sim, n_steps)

    def f(by, bz, x, y, z):
        return (w * (by * z - bz * y) - x * r2,
                w * (bz * x) - y * r2,
                -w * (by * x) + (p0 - z) * r1)

    h = sim.dt
    stride = sim.record_every
    n_out = n_steps // stride + 1
    out = np.empty((3, n_out))
    x, y, z = 0.0, 0.0, p0
    out[:, 0] = (x, y, z)
    for i in range(n_steps):
        j = 2 * i
        b1y, b1z = by_t[j], bz_t[j]
        b2y, b2z = by_t[j + 1], bz_t[j + 1]
        b3y, b3z = by_t[j + 2], bz_t[j + 2]
        k1 = f(b1y, b1z, x, y, z)
        k2 = f(b2y, b2z, x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], z + 0.5 * h * k1[2])
        k3 = f(b2y, b2z, x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], z + 0.5 * h * k2[2])
        k4 = f(b3y, b3z, x + h * k3[0], y + h * k3[1], z + h * k3[2])
        x += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        y += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        z += h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        if (i + 1) % stride == 0:
            if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
                raise SimulationError(f"non-finite state at step {i + 1}", step=i + 1)
            out[:, (i + 1) // stride] = (x, y, z)
    return {"pxn": out[0], "pyn": out[1], "pzn": out[2]}


def _run_coupled(params, test, drive, sim, n_steps, back_action):
    wn = TWO_PI * params.gamma_n
    we = TWO_PI * params.gamma_e / params.q_slowing
    rn2, rn1 = 1.0 / params.t2n, 1.0 / params.t1n
    re2 = 1.0 / (params.t2e * params.q_slowing)
    re1 = 1.0 / (params.t1e * params.q_slowing)
    p0n, p0e = params.p0n, params.p0e
    ln = params.lam * params.m_n
    le = params.lam * params.m_e if back_action else 0.0
    by_t, bz_t = _field_tables(drive, test, sim, n_steps)

    def f(by, bz, s):
        xn, yn, zn, xe, ye, ze = s
        # nucleus: field B (+ lam m_e Pe)
        fx, fy, fz = le * xe, by + le * ye, bz + le * ze
        dn = (wn * (fy * zn - fz * yn) - xn * rn2,
              wn * (fz * xn - fx * zn) - yn * rn2,
              wn * (fx * yn - fy * xn) + (p0n - zn) * rn1)
        # electron: field B + lam m_n Pn
        gx, gy, gz = ln * xn, by + ln * yn, bz + ln * zn
        de = (we * (gy * ze - gz * ye) - xe * re2,
              we * (gz * xe - gx * ze) - ye * re2,
              we * (gx * ye - gy * xe) + (p0e - ze) * re1)
        return dn + de

    h = sim.dt
    stride = sim.record_every
    n_out = n_steps // stride + 1
    out = np.empty((6, n_out))
    s = (0.0, 0.0, p0n, 0.0, 0.0, p0e)
    out[:, 0] = s
    for i in range(n_steps):
        j = 2 * i
        k1 = f(by_t[j], bz_t[j], s)
        k2 = f(by_t[j + 1], bz_t[j + 1], tuple(a + 0.5 * h * b for a, b in zip(s, k1)))
        k3 = f(by_t[j + 1], bz_t[j + 1], tuple(a + 0.5 * h * b for a, b in zip(s, k2)))
        k4 = f(by_t[j + 2], bz_t[j + 2], tuple(a + h * b for a, b in zip(s, k3)))
        s = tuple(a + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
                  for a, b1, b2, b3, b4 in zip(s, k1, k2, k3, k4))
        if (i + 1) % stride == 0:
            if not all(math.isfinite(v) for v in s):
                raise SimulationError(f"non-finite state at step {i + 1}", step=i + 1)
            out[:, (i + 1) // stride] = s
    names = ("pxn", "pyn", "pzn", "pxe", "pye", "pze")
    return dict(zip(names, out))


def simulate(params: SpinParams, drive: DriveConfig, test: TestField, sim: SimConfig) -> TimeSeries:
    """Integrate from Pn = (0, 0, p0n) [and Pe = (0, 0, p0e)] for ``sim.duration``.

    Channels are always lab-frame polarization components. A rotating-frame
    run (frame rotating at the test frequency, rotating-wave field b_y/2) is
    rotated back to the lab frame sample by sample.
    """
    check_sim_config(params, drive, test, sim)
    n_steps = int(round(sim.duration / sim.dt))
    if sim.mode == "xe_only":
        channels = _run_xe_only(params, test, drive, sim, n_steps)
    else:
        channels = _run_coupled(params, test, drive, sim, n_steps, back_action=sim.mode == "full")
    dt_out = sim.dt * sim.record_every
    if sim.frame == "rotating":
        t = dt_out * np.arange(len(channels["pxn"]))
        rot = np.exp(2j * math.pi * test.nu * t) * (channels["pxn"] + 1j * channels["pyn"])
        channels["pxn"], channels["pyn"] = rot.real, rot.imag
    return TimeSeries(0.0, dt_out, channels)


def add_effective_field(series: TimeSeries, params: SpinParams, test: TestField | None = None) -> TimeSeries:
    """Append ``bx_eff``/``by_eff`` (nT); with ``test`` also ``by_total`` = by_eff + test field."""
    scale = params.lam * params.m_n
    new = {"bx_eff": scale * series["pxn"], "by_eff": scale * series["pyn"]}
    if test is not None:
        new["by_total"] = new["by_eff"] + test.b_y * np.cos(TWO_PI * test.nu * series.t)
    return series.with_channels(**new)


def readout_theta(series: TimeSeries, optics: OpticsParams) -> TimeSeries:
    """Optical rotation l r_e c f n Pxe D(nu_pr) / 4 as a ``theta`` channel (rad)."""
    if "pxe" not in series.channels:
        raise KeyError("readout_theta needs a 'pxe' channel (run in coupled or full mode)")
    scale = (optics.path_length * optics.r_e * optics.c * optics.oscillator_f
             * optics.density * optics.dispersion() / 4.0)
    return series.with_channels(theta=scale * series["pxe"])


def steady_amplitudes(series: TimeSeries, channel, frequencies, skip):
    """Joint least-squares fit of tones at ``frequencies`` after ``skip`` seconds.

    The window is trimmed to an integer number of periods of the first
    frequency. Returns a list of (amplitude, phase) with the channel modelled
    as ``sum A cos(2 pi f t + phase)`` plus a constant, ``t`` absolute.
    """
    frequencies = [float(f) for f in frequencies]
    f0 = frequencies[0]
    x = series[channel]
    t = series.t
    start = int(math.ceil((skip - series.t0) / series.dt - 1e-9))
    start = max(start, 0)
    window = (len(x) - start) * series.dt
    periods = math.floor(window * f0 + 1e-9)
    if periods < 5:
        raise ValueError(f"window of {window:.6g} s holds fewer than 5 periods of {f0:g} Hz")
    n_use = int(round(periods / f0 / series.dt))
    n_use = min(n_use, len(x) - start)
    tw = t[start:start + n_use]
    xw = x[start:start + n_use]
    cols = [np.ones_like(tw)]
    for f in frequencies:
        cols.append(np.cos(TWO_PI * f * tw))
        cols.append(np.sin(TWO_PI * f * tw))
    design = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(design, xw, rcond=None)
    out = []
    for i in range(len(frequencies)):
        a, b = coef[1 + 2 * i], coef[2 + 2 * i]
        out.append((float(math.hypot(a, b)), float(math.atan2(-b, a))))
    return out


def steady_amplitude(series: TimeSeries, channel, frequency, skip, others=()):
    """(amplitude, phase) of the tone at ``frequency``; ``others`` are fitted jointly."""
    return steady_amplitudes(series, channel, [frequency, *others], skip)[0]
