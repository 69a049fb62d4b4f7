"""Fano line shapes and the multi-line power-response fit.

Near line k the squared response of the alkali readout is a Fano profile::

    eta^2(nu) = ((x - eta_k0)^2 + 1) / (1 + x^2),   x = 2 pi (nu - nu_k) t2n

with asymmetry parameter q = -eta_k0 and width Gamma = 1/(pi t2n). Several
lines are combined coherently (the nuclear contributions add as fields before
squaring, the alkali's unit direct response is added once)::

    f(nu) = (sum_k a_k)^2 + (sum_k b_k + 1)^2 [+ c]
    a_k = eta_k0 / (1 + y_k^2),  b_k = eta_k0 y_k / (1 + y_k^2),  y_k = 2 pi (nu_k - nu) t2n

The fit is Levenberg-Marquardt with an analytic Jacobian.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class FanoParams:
    q: float
    e_r: float
    gamma: float
    sigma_a: float = 1.0
    sigma_b: float = 0.0


def fano_profile(e, p: FanoParams):
    """sigma_a (q + eps)^2 / (1 + eps^2) + sigma_b, eps = (E - E_r) / (Gamma/2)."""
    if p.gamma <= 0:
        raise ValueError("gamma must be positive")
    eps = (np.asarray(e, dtype=float) - p.e_r) / (0.5 * p.gamma)
    val = p.sigma_a * (p.q + eps) ** 2 / (1.0 + eps * eps) + p.sigma_b
    return float(val) if np.ndim(val) == 0 else val


def fano_parameter(eta_k0) -> float:
    return -eta_k0


def fano_width(t2n) -> float:
    """Gamma = 1/(pi t2n)."""
    return 1.0 / (math.pi * t2n)


def eta_squared_profile(nu, eta_k0, nu_k, t2n):
    if t2n <= 0:
        raise ValueError("t2n must be positive")
    x = TWO_PI * (np.asarray(nu, dtype=float) - nu_k) * t2n
    val = ((x - eta_k0) ** 2 + 1.0) / (1.0 + x * x)
    return float(val) if np.ndim(val) == 0 else val


def multiline_response_squared(nu, eta_k0, nu_k, t2n, offset=0.0):
    """Coherent multi-line squared response f(nu) (see module docstring)."""
    nu = np.asarray(nu, dtype=float)
    eta_k0 = np.asarray(eta_k0, dtype=float)
    nu_k = np.asarray(nu_k, dtype=float)
    y = TWO_PI * (nu_k - nu[..., None]) * t2n
    lor = 1.0 / (1.0 + y * y)
    sa = np.sum(eta_k0 * lor, axis=-1)
    sb = np.sum(eta_k0 * y * lor, axis=-1) + 1.0
    return sa * sa + sb * sb + offset


def _model_and_jacobian(nu, params, n_lines, fit_offset):
    eta = params[:n_lines]
    nuk = params[n_lines:2 * n_lines]
    t2n = params[2 * n_lines]
    offset = params[2 * n_lines + 1] if fit_offset else 0.0
    y = TWO_PI * (nuk - nu[:, None]) * t2n
    lor = 1.0 / (1.0 + y * y)
    a = eta * lor
    b = eta * y * lor
    sa = a.sum(axis=1)
    sb = b.sum(axis=1) + 1.0
    f = sa * sa + sb * sb + offset

    da_dy = -2.0 * eta * y * lor * lor
    db_dy = eta * (1.0 - y * y) * lor * lor
    df_dy = 2.0 * (sa[:, None] * da_dy + sb[:, None] * db_dy)
    jac = np.empty((len(nu), len(params)))
    jac[:, :n_lines] = 2.0 * (sa[:, None] * lor + sb[:, None] * y * lor)
    jac[:, n_lines:2 * n_lines] = df_dy * (TWO_PI * t2n)
    jac[:, 2 * n_lines] = np.sum(df_dy * y, axis=1) / t2n
    if fit_offset:
        jac[:, 2 * n_lines + 1] = 1.0
    return f, jac


@dataclass
class FanoFitResult:
    ks: tuple
    eta_k0: np.ndarray
    nu_k: np.ndarray
    t2n: float
    offset: float = 0.0
    residual_rms: float = float("nan")
    converged: bool = False
    iterations: int = 0
    rank_deficient: bool = False
    message: str = ""
    cost_history: list = field(default_factory=list)

    def curve(self, nu):
        return multiline_response_squared(nu, self.eta_k0, self.nu_k, self.t2n, self.offset)

    def as_dict(self):
        lines = [{"k": int(k), "eta_k0": float(f"{e:.12g}"), "nu_k": float(f"{n:.12g}"),
                  "q": float(f"{-e:.12g}")}
                 for k, e, n in zip(self.ks, self.eta_k0, self.nu_k)]
        return {"lines": lines, "t2n": float(f"{self.t2n:.12g}"),
                "offset": float(f"{self.offset:.12g}"),
                "residual_rms": float(f"{self.residual_rms:.12g}"),
                "converged": bool(self.converged), "iterations": int(self.iterations),
                "rank_deficient": bool(self.rank_deficient), "message": self.message}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def _as_xy(data):
    if isinstance(data, tuple) and len(data) == 2:
        nu, y = data
    else:
        arr = np.asarray(data, dtype=float)
        nu, y = arr[:, 0], arr[:, 1]
    return np.asarray(nu, dtype=float), np.asarray(y, dtype=float)


def initial_guess(data, comb, k_range=None) -> FanoFitResult:
    """Data-driven starting point for :func:`fit_multiline`.

    Line centres come from the comb; |eta_k0| from the peak height,
    sqrt(peak - 1) of the squared response; the sign from the side of the
    antiresonance dip (dip below the peak -> negative); t2n from the median
    half-maximum width, inverted through Gamma = 1/(pi t2n).
    """
    nu, y = _as_xy(data)
    lines = [(k, f) for k, f in comb.lines
             if k_range is None or k_range[0] <= k <= k_range[1]]
    half_win = 0.45 * comb.nu_ac
    etas, widths = [], []
    for k, f in lines:
        sel = np.nonzero(np.abs(nu - f) <= half_win)[0]
        if len(sel) < 3:
            raise ValueError(f"no data around line k={k} ({f:g} Hz)")
        ys = y[sel]
        i_pk = int(np.argmax(ys))
        i_dip = int(np.argmin(ys))
        peak = ys[i_pk]
        mag = math.sqrt(max(peak - 1.0, 1e-6))
        sign = -1.0 if nu[sel][i_dip] < nu[sel][i_pk] else 1.0
        etas.append(sign * mag)
        # contiguous region above half of the excess height
        half = 1.0 + 0.5 * (peak - 1.0)
        above = ys >= half
        lo = hi = i_pk
        while lo > 0 and above[lo - 1]:
            lo -= 1
        while hi < len(ys) - 1 and above[hi + 1]:
            hi += 1
        nus = nu[sel]
        width = nus[hi] - nus[lo]
        step = np.median(np.diff(nus)) if len(nus) > 1 else 0.0
        widths.append(max(width, step))
    t2n = 1.0 / (math.pi * float(np.median(widths)))
    return FanoFitResult(ks=tuple(k for k, _ in lines), eta_k0=np.array(etas),
                         nu_k=np.array([f for _, f in lines]), t2n=t2n)


def fit_multiline(data, k_range=None, init: FanoFitResult | None = None, comb=None,
                  weights=None, fit_offset=False, max_iter=500, xtol=1e-8, gtol=1e-8,
                  mu0=1e-3) -> FanoFitResult:
    """Least-squares fit of {eta_k0, nu_k} per line plus a shared t2n.

    ``data`` is ``(nu, response_squared)`` or an (N, 2) array. Give either
    ``init`` or a ``comb`` to build one with :func:`initial_guess`.
    ``converged`` requires both a relative step below ``xtol`` and a scaled
    gradient (largest cosine between residual and Jacobian columns) below
    ``gtol``; otherwise the best parameters found are returned.
    """
    nu, y = _as_xy(data)
    if init is None:
        if comb is None:
            raise ValueError("fit_multiline needs an initial guess or a comb")
        init = initial_guess((nu, y), comb, k_range)
    n_lines = len(init.ks)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    p = np.concatenate([init.eta_k0, init.nu_k, [init.t2n]])
    if fit_offset:
        p = np.append(p, init.offset)

    def evaluate(par):
        f, jac = _model_and_jacobian(nu, par, n_lines, fit_offset)
        r = w * (f - y)
        return r, w[:, None] * jac

    r, jac = evaluate(p)
    cost = 0.5 * float(r @ r)
    # residuals this small relative to the data are round-off: an exact fit
    exact_norm = 1e-12 * float(np.linalg.norm(w * y))
    history = [cost]
    mu = mu0
    converged = False
    message = "maximum iterations reached"
    it = 0
    for it in range(1, max_iter + 1):
        g = jac.T @ r
        jtj = jac.T @ jac
        col_norm = np.sqrt(np.diag(jtj))
        r_norm = math.sqrt(2.0 * cost)
        if r_norm <= exact_norm:
            converged, message = True, "exact fit"
            break
        scaled_grad = float(np.max(np.abs(g) / np.where(col_norm > 0, col_norm, 1.0))) / r_norm
        accepted = False
        while mu < 1e20:
            a = jtj + mu * np.diag(np.where(np.diag(jtj) > 0, np.diag(jtj), 1.0))
            try:
                step = np.linalg.solve(a, -g)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            p_new = p + step
            if p_new[2 * n_lines] <= 0:
                mu *= 10.0
                continue
            r_new, jac_new = evaluate(p_new)
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            mu *= 10.0
        if not accepted:
            converged = scaled_grad < gtol
            message = "no downhill step" + ("; gradient criterion met" if converged else "")
            break
        rel_step = float(np.max(np.abs(step) / (np.abs(p) + 1e-12)))
        p, r, jac, cost = p_new, r_new, jac_new, cost_new
        history.append(cost)
        mu = max(mu / 10.0, 1e-15)
        g = jac.T @ r
        col_norm = np.sqrt(np.sum(jac * jac, axis=0))
        r_norm = math.sqrt(2.0 * cost)
        scaled_grad = 0.0 if r_norm == 0 else float(
            np.max(np.abs(g) / np.where(col_norm > 0, col_norm, 1.0))) / r_norm
        if rel_step < xtol and scaled_grad < gtol:
            converged, message = True, "converged"
            break

    rank = np.linalg.matrix_rank(jac)
    rank_deficient = rank < len(p)
    if rank_deficient:
        warnings.warn(f"fit Jacobian is rank deficient ({rank} < {len(p)})", stacklevel=2)
    resid = _model_and_jacobian(nu, p, n_lines, fit_offset)[0] - y
    return FanoFitResult(
        ks=tuple(init.ks), eta_k0=p[:n_lines].copy(), nu_k=p[n_lines:2 * n_lines].copy(),
        t2n=float(p[2 * n_lines]), offset=float(p[2 * n_lines + 1]) if fit_offset else 0.0,
        residual_rms=float(np.sqrt(np.mean(resid * resid))), converged=converged,
        iterations=it, rank_deficient=bool(rank_deficient), message=message,
        cost_history=history)
