"""Command-line front end: ``floquet-amp <command> [options]``.

Commands: ``validate``, ``profile``, ``simulate``, ``sweep``, ``fit``, ``verify``.
Every command reads an optional TOML config (``--config``), applies
``--set section.key=value`` overrides, validates, and writes its outputs plus
a ``manifest.json`` into one run directory. The run directory is ``--out`` if
given, else ``$FLOQUETAMP_OUTPUT_ROOT/<command>-<digest>`` (root defaults to
``./runs``), where the digest covers the resolved config and the command
options, so a rerun lands in the same place with byte-identical data files.

Exit codes: 0 success, 1 input error, 2 no convergence, 3 failed check.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .bloch_sim import SimulationError, add_effective_field, readout_theta, simulate
from .domain import validate
from .fano import fit_multiline, initial_guess
from .floquet import ResonanceComb, resonance_comb
from .spectrum import (
    amplitude_spectrum,
    amplitude_spectrum_from_samples,
    integer_period_samples,
    measure_amplification,
    sideband_peaks,
)
from .steady_state import (
    amplification_on_resonance,
    amplification_profile,
    fwhm,
    total_response_with_direct_term,
)
from .specfun import bessel_j

OUTPUT_ROOT_ENV = "FLOQUETAMP_OUTPUT_ROOT"
EXIT_OK, EXIT_INPUT, EXIT_NOCONV, EXIT_CHECK = 0, 1, 2, 3
SWEEP_AXES = ("u", "nu", "nu_ac")


class InputError(Exception):
    """Bad user input; reported on stderr with exit code 1."""


# -- run directory and manifest ----------------------------------------------

class Run:
    def __init__(self, command, cfg, options, out=None):
        self.command = command
        self.cfg = cfg
        self.options = options
        self.started = _now()
        self.outputs = []
        if out is None:
            root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
            digest = hashlib.sha256(
                (cfgmod.dumps(cfg) + json.dumps(options, sort_keys=True)).encode()).hexdigest()[:12]
            out = root / f"{command}-{digest}"
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name, text):
        path = self.dir / name
        if isinstance(text, bytes):
            path.write_bytes(text)
        else:
            path.write_text(text, encoding="utf-8")
        self.outputs.append(name)
        return path

    def finish(self, status="ok"):
        manifest = {
            "command": self.command,
            "options": self.options,
            "config": self.cfg.to_dict(),
            "code_version": __version__,
            "started": self.started,
            "finished": _now(),
            "status": status,
            "outputs": list(self.outputs),
        }
        (self.dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                                encoding="utf-8")
        return manifest


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _g(x) -> str:
    return f"{x:.12g}"


# -- config handling ------------------------------------------------------------

def load_config(args) -> cfgmod.ExperimentConfig:
    cfg = cfgmod.load(args.config) if args.config else cfgmod.ExperimentConfig()
    if args.set:
        cfg = cfgmod.apply_overrides(cfg, args.set)
    return cfg


def check_config(cfg, require_test=True):
    report = validate(cfg.spin_params(), cfg.drive, cfg.test if require_test else None, cfg.optics)
    for v in report.warnings:
        print(f"warning: {v.field}: {v.message}", file=sys.stderr)
    if not report.ok:
        raise InputError("invalid config:\n" + "\n".join(f"  {v.field}: {v.message}" for v in report.errors))
    return report


# -- profile ---------------------------------------------------------------------

def profile_grid(cfg, step=None):
    """Union of per-line grids: comb line +- span linewidths in steps of ``step``.

    Lines with negligible Bessel weight (e.g. every k != 0 at u = 0) are skipped.
    """
    params = cfg.spin_params()
    width = fwhm(params)
    step = cfg.profile.step_hz if step is None else step
    if step is None:
        step = width / 20.0
    if not step > 0:
        raise InputError("profile.step_hz: must be positive")
    n_half = int(math.ceil(cfg.profile.span_linewidths * width / step))
    u = cfg.drive.u
    pieces = []
    for k in range(cfg.profile.k_min, cfg.profile.k_max + 1):
        centre = cfg.drive.nu0 + k * cfg.drive.nu_ac
        if bessel_j(k, u) ** 2 < 1e-12:
            continue
        grid = centre + step * np.arange(-n_half, n_half + 1)
        pieces.append(grid[grid > 0])
    if not pieces:
        raise InputError("profile: no resonance line with appreciable weight in k range")
    return np.unique(np.concatenate(pieces))


def cmd_profile(args, cfg):
    check_config(cfg, require_test=False)
    params = cfg.spin_params()
    grid = profile_grid(cfg, args.step)
    run = Run("profile", cfg, {"step": args.step}, args.out)
    bare = amplification_profile(grid, params, cfg.drive, include_direct=False)
    direct = amplification_profile(grid, params, cfg.drive, include_direct=True)
    run.write("profile.csv", bare.to_csv())
    run.write("profile.json", bare.to_json())
    run.write("profile_direct.csv", direct.to_csv())
    run.write("profile_direct.json", direct.to_json())
    run.finish()
    print(f"profile: {len(grid)} points -> {run.dir}")
    return EXIT_OK


# -- simulate --------------------------------------------------------------------

def sideband_comb(cfg):
    """Output lines nu + l*nu_ac labelled by the comb order they correspond to."""
    drive, test = cfg.drive, cfg.test
    k_test = int(round((test.nu - drive.nu0) / drive.nu_ac))
    origin = test.nu - k_test * drive.nu_ac
    lines = tuple((k, origin + k * drive.nu_ac)
                  for k in range(cfg.profile.k_min, cfg.profile.k_max + 1)
                  if origin + k * drive.nu_ac > 0)
    return ResonanceComb(origin, drive.nu_ac, lines), k_test


def cmd_simulate(args, cfg):
    check_config(cfg)
    params = cfg.spin_params()
    sim = cfg.sim
    skip = sim.skip_for(params)
    if skip >= sim.duration:
        raise InputError(f"sim.duration: {sim.duration:g} s does not exceed the transient skip {skip:g} s")
    if sim.mode != "xe_only":
        print("warning: coupled/full modes resolve the electron Larmor frequency and are slow; "
              "xe_only is the default comparison path", file=sys.stderr)
    try:
        series = simulate(params, cfg.drive, cfg.test, sim)
    except SimulationError as exc:
        raise InputError(f"sim: {exc}") from None
    series = add_effective_field(series, params, cfg.test)
    if "pxe" in series.channels:
        series = readout_theta(series, cfg.optics)

    comb, k_test = sideband_comb(cfg)
    start = int(round(skip / series.dt))
    avail = len(series) - start
    tones = [f for _, f in comb.lines] + ([cfg.test.nu] if cfg.test.nu > 0 else [])
    # 0.02 cycles of misfit costs < 1e-3 of peak height; exact fits rarely exist
    n_use = integer_period_samples(series.dt, tones, avail, tol=0.02) or avail
    spec = amplitude_spectrum(series, "by_eff", skip=skip, n_samples=n_use)
    tol = min(2.0 * spec.df, 0.45 * comb.nu_ac)
    if tol < spec.df:
        raise InputError("sim.duration: analysis window too short to separate the sidebands")

    peaks = []
    if cfg.test.b_y > 0 and cfg.test.nu > 0:
        t_win = series.t[start:start + n_use]
        reference = amplitude_spectrum_from_samples(t_win, cfg.test.b_y * np.cos(2 * math.pi * cfg.test.nu * t_win))
        etas = dict(measure_amplification(spec, reference, comb, tol, cfg.test.nu))
        for peak in sideband_peaks(spec, comb, tol):
            if peak.present and etas.get(peak.k) is not None:
                rec = peak.as_record(etas[peak.k])
                rec["l"] = peak.k - k_test
                peaks.append(rec)

    run = Run("simulate", cfg, {}, args.out)
    run.write("timeseries.csv", series.to_csv())
    run.write("timeseries.bin", series.to_bytes())
    run.write("spectrum.csv", spec.to_csv())
    run.write("spectrum.json", spec.to_json())
    run.write("sidebands.json", _json(peaks))
    run.finish()
    print(f"simulate: {len(peaks)} sideband(s) above the noise floor -> {run.dir}")
    for rec in peaks:
        print(f"  k={rec['k']:+d}  l={rec['l']:+d}  nu={rec['nu_hz']:.6g} Hz  eta={rec['eta']:.6g}")
    return EXIT_OK


# -- sweep -----------------------------------------------------------------------

def _sweep_point(task):
    axis, value, params, drive, test, pairs = task
    if axis == "u":
        drive = drive.with_u(value)
        nu = test.nu
        etas = [abs(amplification_on_resonance(k, l, value, params)) for k, l in pairs]
    elif axis == "nu_ac":
        # the physical drive amplitude is held, so u follows gamma*b_ac/nu_ac
        drive = drive.replace(nu_ac=value)
        nu = test.nu
        etas = [abs(amplification_on_resonance(k, l, drive.u, params)) for k, l in pairs]
    else:
        nu = value
        etas = []
        for k, l in pairs:
            x = 2 * math.pi * (drive.nu0 - nu + k * drive.nu_ac) * params.t2n
            etas.append(abs(amplification_on_resonance(k, l, drive.u, params)) / math.sqrt(1 + x * x))
    total = total_response_with_direct_term(drive.u, nu, params, drive)
    return [value, *etas, total]


def parse_pairs(text):
    pairs = []
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        try:
            k, l = (int(v) for v in item.split(","))
        except ValueError:
            raise InputError(f"--pairs: cannot parse {item!r}; expected 'k,l;k,l'") from None
        pairs.append((k, l))
    if not pairs:
        raise InputError("--pairs: no (k,l) pair given")
    return tuple(pairs)


def cmd_sweep(args, cfg):
    check_config(cfg)
    s = cfg.sweep
    axis = args.axis or s.axis
    start = s.start if args.start is None else args.start
    stop = s.stop if args.stop is None else args.stop
    steps = s.steps if args.steps is None else args.steps
    pairs = parse_pairs(args.pairs) if args.pairs else tuple(s.pairs)
    if axis not in SWEEP_AXES:
        raise InputError(f"sweep.axis: {axis!r} is not one of {', '.join(SWEEP_AXES)}")
    if steps < 1:
        raise InputError("sweep.steps: must be at least 1")
    if axis in ("nu", "nu_ac") and min(start, stop) <= 0:
        raise InputError(f"sweep.start: {axis} must stay positive")
    values = [start] if steps == 1 else list(np.linspace(start, stop, steps))
    params = cfg.spin_params()
    tasks = [(axis, float(v), params, cfg.drive, cfg.test, pairs) for v in values]
    jobs = args.jobs or os.cpu_count() or 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            rows = list(pool.map(_sweep_point, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        rows = [_sweep_point(t) for t in tasks]

    col = {"u": "u", "nu": "nu_hz", "nu_ac": "nu_ac_hz"}[axis]
    header = [col] + [f"eta_k{k}_l{l}" for k, l in pairs] + ["total_response"]
    lines = [",".join(header)] + [",".join(_g(v) for v in row) for row in rows]
    options = {"axis": axis, "start": start, "stop": stop, "steps": steps, "pairs": [list(p) for p in pairs]}
    run = Run("sweep", cfg, options, args.out)
    run.write("sweep.csv", "\n".join(lines) + "\n")
    run.finish()
    i_min = int(np.argmin([r[-1] for r in rows]))
    print(f"sweep: {len(rows)} rows over {axis}; minimum total response {rows[i_min][-1]:.4g} "
          f"at {col}={rows[i_min][0]:.6g} -> {run.dir}")
    return EXIT_OK


# -- fit ---------------------------------------------------------------------------

def read_xy_csv(path):
    """Two numeric columns; an optional header line; blank lines ignored."""
    nu, y = [], []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                if len(row) != 2:
                    raise ValueError
                a, b = float(row[0]), float(row[1])
                if not (math.isfinite(a) and math.isfinite(b)):
                    raise ValueError
            except ValueError:
                if lineno == 1 and not nu:
                    continue  # header
                raise InputError(f"{path}:{lineno}: expected two numeric columns, got {','.join(row)!r}") from None
            nu.append(a)
            y.append(b)
    if len(nu) < 4:
        raise InputError(f"{path}: too few data rows ({len(nu)})")
    return np.array(nu), np.array(y)


def cmd_fit(args, cfg):
    check_config(cfg, require_test=False)
    nu, y = read_xy_csv(args.data_file)
    squared = args.squared or cfg.fit.squared_input
    power = y if squared else y * y
    order = np.argsort(nu, kind="stable")
    nu, power = nu[order], power[order]

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        full = resonance_comb(cfg.drive, (cfg.fit.k_min, cfg.fit.k_max))
    half = 0.45 * cfg.drive.nu_ac
    lines = tuple((k, f) for k, f in full.lines if np.count_nonzero(np.abs(nu - f) <= half) >= 3)
    if not lines:
        raise InputError(f"{args.data_file}: no comb line of the configured drive lies within the data")
    comb = ResonanceComb(full.nu0, full.nu_ac, lines)
    try:
        init = initial_guess((nu, power), comb)
    except ValueError as exc:
        raise InputError(f"{args.data_file}: {exc}") from None
    result = fit_multiline((nu, power), init=init, fit_offset=args.offset or cfg.fit.fit_offset,
                           max_iter=cfg.fit.max_iter)

    curve = result.curve(nu)
    rows = ["nu_hz,response_squared,response"]
    rows += [f"{_g(f)},{_g(c)},{_g(math.sqrt(max(c, 0.0)))}" for f, c in zip(nu, curve)]
    run = Run("fit", cfg, {"data_file": Path(args.data_file).name, "squared": bool(squared),
                           "data_sha256": hashlib.sha256(Path(args.data_file).read_bytes()).hexdigest()},
              args.out)
    run.write("fit.json", result.to_json() + "\n")
    run.write("fit_curve.csv", "\n".join(rows) + "\n")
    run.finish("ok" if result.converged else "not converged")
    print(f"fit: {len(lines)} lines, t2n = {result.t2n:.6g} s, rms = {result.residual_rms:.3g}, "
          f"converged = {result.converged} -> {run.dir}")
    for k, e, f in zip(result.ks, result.eta_k0, result.nu_k):
        print(f"  k={k:+d}  nu_k={f:.6f} Hz  eta_k0={e:.5g}")
    if not result.converged:
        print(f"error: fit did not converge ({result.message})", file=sys.stderr)
        return EXIT_NOCONV
    return EXIT_OK


# -- verify / validate -------------------------------------------------------------

def cmd_verify(args, cfg):
    from .verify import report_json, run_checks

    check_config(cfg)
    results = run_checks(cfg.spin_params(), cfg.drive, cfg.test,
                         corrupt_t2n=args.corrupt_t2n, include_slow=not args.fast)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    run = Run("verify", cfg, {"fast": args.fast, "corrupt_t2n": args.corrupt_t2n}, args.out)
    run.write("verify.json", report_json(results))
    run.finish("ok" if ok else "check failed")
    print(f"verify: {sum(r.passed for r in results)}/{len(results)} checks passed -> {run.dir}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_validate(args, cfg):
    report = validate(cfg.spin_params(), cfg.drive, cfg.test, cfg.optics)
    print(report)
    if args.dump:
        sys.stdout.write(cfgmod.dumps(cfg))
    return EXIT_OK if report.ok else EXIT_INPUT


# -- argument parsing ----------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="TOML experiment config")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override a config value (repeatable; beats the file)")
    common.add_argument("--out", "-o", help="run directory (default: under $%s)" % OUTPUT_ROOT_ENV)

    parser = argparse.ArgumentParser(prog="floquet-amp", description="Floquet spin amplification toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a config and print the report")
    p.add_argument("--dump", action="store_true", help="print the resolved config as TOML")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("profile", parents=[common], help="amplification vs test frequency")
    p.add_argument("--step", type=float, help="grid step in Hz (default: linewidth/20)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("simulate", parents=[common], help="Bloch simulation, spectrum and sideband table")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="amplification along u, nu or nu_ac")
    p.add_argument("--axis", choices=SWEEP_AXES)
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--pairs", help="(k,l) pairs as 'k,l;k,l', e.g. '1,0;1,-1;1,1'")
    p.add_argument("--jobs", "-j", type=int, help="worker processes (default: CPU count)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", parents=[common], help="multi-line Fano fit of a measured response")
    p.add_argument("data_file", help="CSV with columns nu_hz,response")
    p.add_argument("--squared", action="store_true", help="the response column is already squared")
    p.add_argument("--offset", action="store_true", help="fit an additive offset")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    p.add_argument("--fast", action="store_true", help="skip the integrator checks")
    p.add_argument("--corrupt-t2n", type=float, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        return args.func(args, cfg)
    except (InputError, cfgmod.ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
