"""Weak kinetic residual, defect pairings in the limit eps -> 0, and eps-extrapolation.

Pairings whose limit is wanted are computed along a decreasing eps sequence
and extrapolated with :func:`fit_rate`. Coarse x-bins (default width 0.03,
one bin centred at x = 0) carry the second-moment gaps of the Bohmian and
Wigner measures; the bin width is the resolution at which a limit measure is
called mono-kinetic.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import minimize_scalar

from .bohmian import bohmian_measure, pair
from .core import Bump, Grid, Potential, TestFunction, WaveFunction, quadrature
from .errors import ConvergenceError, SupportError
from .hydrodynamics import DEFAULT_NODE_ETA, bohm_force, extract_fields, kinetic_densities
from .schrodinger import Timeline
from .wigner import WignerField, wigner_moments, wigner_p_moments, wigner_second_moment

__all__ = [
    "EpsSequence",
    "FitResult",
    "DefectReport",
    "default_eps_sequence",
    "fit_rate",
    "extrapolate",
    "vlasov_weak_residual",
    "defect_A",
    "temperature_tensor",
    "coarse_gap_pairing",
    "defect_pairings",
    "second_moment_gap",
    "teq_check",
    "time_localized",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1
DEFAULT_BIN_WIDTH = 0.03
DEFAULT_P_CUT = 1e3


def default_eps_sequence() -> np.ndarray:
    return np.geomspace(1e-1, 1e-3, 7)


class FitResult(NamedTuple):
    """Outcome of ``f(eps) = limit + amplitude * eps**exponent``.

    ``exponent`` is nan when the sequence has already settled to round-off;
    ``residual`` is the RMS misfit of the log-log regression.
    """

    limit: float
    exponent: float
    residual: float
    converged: bool
    amplitude: float
    reason: str = ""


def _loglog(eps, dev):
    A = np.vstack([np.ones_like(eps), np.log(eps)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(dev), rcond=None)
    res = np.log(dev) - A @ coef
    return coef[1], math.exp(coef[0]), float(np.sqrt(np.mean(res**2)))


def fit_rate(points, mode: str = "affine", atol: float = 1e-12, rtol: float = 1e-9,
             max_residual: float = 0.15) -> FitResult:
    """Fit ``f(eps) = c + a eps**q`` to ``(eps, value)`` pairs.

    ``mode="affine"`` searches the limit ``c`` on the side of the last value
    away from which the sequence moves, taking for each candidate the
    least-squares line through ``log|f - c|`` against ``log eps`` and keeping
    the candidate with the smallest misfit. ``mode="power"`` fixes ``c = 0``
    and needs ``q > 0``; ``mode="growth"`` also fixes ``c = 0`` but accepts any
    sign of ``q``, for quantities expected to blow up like ``eps**q`` with ``q < 0``.

    A sequence whose last two increments are below ``atol + rtol * max|f|`` is
    reported as converged to its last value, as is one whose increments keep
    shrinking and end below ``1e-6`` of its total spread (faster than any
    power of eps, such as a Gaussian tail). A non-monotone sequence counts
    as converged only if its increments shrink by a factor of ten from head to
    tail; otherwise, and whenever ``q <= 0`` or the misfit exceeds
    ``max_residual``, the result is flagged.
    """
    pts = sorted(((float(e), float(v)) for e, v in points), key=lambda t: -t[0])
    eps = np.array([p[0] for p in pts])
    f = np.array([p[1] for p in pts])
    if eps.size < 3 or not np.all(np.isfinite(f)):
        return FitResult(float("nan"), float("nan"), float("inf"), False, float("nan"), "too few or non-finite points")
    if mode in ("power", "growth"):
        dev = np.abs(f)
        if np.any(dev == 0):
            return FitResult(0.0, float("nan"), 0.0, True, 0.0, "exact zeros")
        q, a, res = _loglog(eps, dev)
        ok = (q > 0 or mode == "growth") and res <= max_residual
        return FitResult(0.0, float(q), res, bool(ok), a, "" if ok else f"{mode} fit rejected")
    if mode != "affine":
        raise ValueError("mode must be 'affine', 'power' or 'growth'")

    scale = float(np.max(np.abs(f)))
    tol = atol + rtol * scale
    d = np.diff(f)
    if np.max(np.abs(d[-2:])) <= tol:
        return FitResult(float(f[-1]), float("nan"), 0.0, True, 0.0, "settled")
    ad = np.abs(d)
    if ad.size >= 3 and np.all(np.diff(ad[-3:]) < 0) and ad[-1] <= 1e-6 * abs(f[0] - f[-1]):
        return FitResult(float(f[-1]), float("nan"), 0.0, True, 0.0, "superalgebraic")
    sig = np.sign(d[np.abs(d) > tol])
    if not (np.all(sig == sig[0])):
        head = np.mean(np.log(np.abs(d[:2]) + tol))
        tail = np.mean(np.log(np.abs(d[-2:]) + tol))
        if tail < head - math.log(10.0):
            dev = np.abs(f[:-1] - f[-1]) + tol
            q, a, res = _loglog(eps[:-1], dev)
            return FitResult(float(f[-1]), float(q), res, True, a, "oscillatory, shrinking")
        return FitResult(float(f[-1]), float("nan"), float("inf"), False, float("nan"), "non-monotone tail")

    direction = sig[0]  # +1: values increase as eps decreases
    spread = abs(f[0] - f[-1])
    last = f[-1]

    def misfit(log_delta):
        # scale-free: a distant c flattens log|f - c| and must not win by that alone
        c = last + direction * math.exp(log_delta)
        dev = np.log(np.abs(f - c))
        return _loglog(eps, np.abs(f - c))[2] / (np.std(dev) + 1e-300)

    lo, hi = math.log(spread * 1e-8 + tol), math.log(spread * 1e4 + tol)
    grid = np.linspace(lo, hi, 121)
    vals = np.array([misfit(g) for g in grid])
    j = int(np.argmin(vals))
    a_, b_ = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
    opt = minimize_scalar(misfit, bounds=(a_, b_), method="bounded", options={"xatol": 1e-10})
    best = opt.x if opt.fun < vals[j] else grid[j]
    c = last + direction * math.exp(best)
    q, a, res = _loglog(eps, np.abs(f - c))
    ok = q > 0 and res <= max_residual
    return FitResult(float(c), float(q), float(res), bool(ok), float(a), "" if ok else "affine fit rejected")


@dataclass
class EpsSequence:
    """Strictly decreasing eps values with one scalar per value."""

    eps: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float)
        if self.eps.size < 4:
            raise ValueError("an eps sequence needs at least four points")
        if np.any(np.diff(self.eps) >= 0):
            raise ValueError("epsilon list must be decreasing")
        if self.values is not None:
            self.values = np.asarray(self.values, dtype=float)
            if self.values.shape != self.eps.shape:
                raise ValueError("values must match eps")

    def with_values(self, values) -> "EpsSequence":
        return EpsSequence(self.eps, values)

    def points(self):
        return list(zip(self.eps.tolist(), self.values.tolist()))

    def fit(self, **kw) -> FitResult:
        if self.values is None:
            raise ValueError("sequence has no values")
        return fit_rate(self.points(), **kw)


def extrapolate(seq: EpsSequence, strict: bool = False, **kw):
    """``(limit, rate)`` of a sequence; ``strict`` raises on a flagged fit."""
    res = seq.fit(**kw)
    if strict and not res.converged:
        raise ConvergenceError(res.reason)
    return res.limit, res.exponent


def vlasov_weak_residual(timeline: Timeline, V: Potential, chi: TestFunction, sigma: Bump | None = None,
                         node_eta: float = DEFAULT_NODE_ETA, p_window: tuple | None = None) -> float:
    """Weak residual of the kinetic equation for the Bohmian measure on a line.

    Evaluates ``int_0^T <beta(t), sigma(p) (d_t chi + p d_x chi) - chi (V + V_B)' sigma'(p)> dt
    + <beta(0), chi(0) sigma>`` with Simpson's rule over the stored frames.
    ``chi.time`` must vanish at the final frame; ``sigma`` defaults to ``chi.momentum``.
    """
    if len(timeline) < 3:
        raise ValueError("weak residual needs at least three frames")
    g = timeline.grid
    g._require_line()
    sig = chi.momentum if sigma is None else sigma
    if chi.is_zero or sig.scale == 0:
        return 0.0
    x = g.x
    T = timeline.times[-1]
    if abs(float(chi.time(T))) > 0 or (chi.time.compact and chi.time.support()[1] > T + 1e-12):
        raise SupportError("time factor must vanish at the final frame")
    chi.check_support(x_window=(g.x_min[0], g.x_max[0]), p_window=p_window)
    gx, dgx = chi.space(x), chi.space.derivative(x)
    dV = V.gradient(x)
    dx = g.dx
    integrand = np.empty(len(timeline))
    boundary = 0.0
    for k, (t, psi) in enumerate(timeline):
        f = extract_fields(psi, node_eta)
        keep = ~f.node_mask
        u = f.u[0]
        force = dV + bohm_force(psi, node_eta)[0]
        th, dth = float(chi.time(t)), float(chi.time.derivative(t))
        s, ds = sig(u), sig.derivative(u)
        dens = f.rho * (s * (dth * gx + u * th * dgx) - th * gx * force * ds)
        integrand[k] = np.sum(dens[keep]) * dx
        if k == 0:
            boundary = th * np.sum((f.rho * gx * s)[keep]) * dx
    return float(abs(simpson(integrand, x=timeline.times) + boundary))


def defect_A(psi: WaveFunction, node_eta: float = DEFAULT_NODE_ETA) -> np.ndarray:
    """Field ``eps**2 (d|psi|/dx)**2`` (the quantum part of the kinetic density) on a line."""
    return kinetic_densities(psi, node_eta)[1]


def temperature_tensor(w: WignerField, m0_floor: float = 1e-6) -> np.ndarray:
    """Pointwise ``int (p - u)**2 w dp / rho`` with ``u = m1/m0``; nan where ``m0`` is below the floor."""
    m0, m1 = wigner_moments(w)
    m2 = wigner_second_moment(w)
    ok = m0 > m0_floor * np.max(np.abs(m0))
    out = np.full(m0.shape, np.nan)
    out[ok] = (m2[ok] - m1[ok] ** 2 / m0[ok]) / m0[ok]
    return out


def _bin_index(grid: Grid, width: float):
    dx = grid.dx
    k = max(1, int(round(width / dx)))
    if k % 2 == 0:
        k += 1
    i = np.rint(grid.x / dx).astype(int)
    b = np.floor((i + (k - 1) / 2) / k).astype(int)
    return b - b.min(), k


def coarse_gap_pairing(grid: Grid, m0, m1, m2, bumps: Sequence[Bump], width: float = DEFAULT_BIN_WIDTH) -> np.ndarray:
    """``sum_b (M2_b - M1_b**2/M0_b) g(x_b)`` over coarse bins, one value per bump.

    ``m0, m1, m2`` are moment densities on the grid nodes; bins are unions of an
    odd number of cells, one of them centred at x = 0.
    """
    b, k = _bin_index(grid, width)
    nb = int(b.max()) + 1
    dx = grid.dx
    M0 = np.bincount(b, m0 * dx, nb)
    M1 = np.bincount(b, m1 * dx, nb)
    M2 = np.bincount(b, m2 * dx, nb)
    xc = np.bincount(b, grid.x, nb) / np.bincount(b, None, nb)
    top = np.max(np.abs(M0))
    ok = np.abs(M0) > 1e-14 * top
    gap = np.where(ok, M2 - np.divide(M1**2, M0, out=np.zeros_like(M1), where=ok), 0.0)
    return np.array([np.sum(gap * bump(xc)) for bump in bumps])


def defect_pairings(psi: WaveFunction, bumps: Sequence[Bump], width: float = DEFAULT_BIN_WIDTH,
                    p_cut: float = DEFAULT_P_CUT, node_eta: float = DEFAULT_NODE_ETA) -> dict:
    """All eps-level pairings entering the defect identity, one array per quantity.

    Keys: ``A`` (quantum kinetic density), ``K`` (``J**2/rho``), ``beta_m2``
    (Bohmian second moment cut off at ``|p| ~ p_cut``), ``B`` (coarse-bin gap of
    the Bohmian measure), ``rhoT`` (coarse-bin gap of the Wigner function).
    """
    g = psi.grid
    cur, quant, _, _ = kinetic_densities(psi, node_eta)
    fields = extract_fields(psi, node_eta)
    beta = bohmian_measure(fields)
    cut = Bump(0.0, p_cut, (0.0, 0.0, 1.0))
    u = fields.u[0]
    keep = ~fields.node_mask
    rho_b = np.where(keep, fields.rho, 0.0)
    w0, w1, w2 = wigner_p_moments(psi)
    out = {
        "A": np.array([quadrature(quant * bp(g.x), g) for bp in bumps]),
        "K": np.array([quadrature(cur * bp(g.x), g) for bp in bumps]),
        "beta_m2": np.array([pair(beta, lambda x, p, bp=bp: bp(x) * cut(p)) for bp in bumps]),
        "B": coarse_gap_pairing(g, rho_b, rho_b * u, rho_b * u * u, bumps, width),
        "rhoT": coarse_gap_pairing(g, w0, w1, w2, bumps, width),
    }
    return out


def time_localized(timeline: Timeline, fn: Callable[[WaveFunction], dict], time_bump: Bump) -> dict:
    """Average of per-frame pairings weighted by a time bump (Simpson weights over frames)."""
    t = timeline.times
    theta = time_bump(t)
    if np.all(theta == 0):
        raise SupportError("time bump misses every frame")
    idx = np.flatnonzero(theta)
    lo, hi = max(idx[0] - 1, 0), min(idx[-1] + 1, len(t) - 1)
    sel = np.arange(lo, hi + 1)
    wts = theta[sel]
    # zero-weight end frames only anchor the quadrature; skip the expensive pairing there
    first = fn(timeline.frame(int(idx[0])))
    vals = [first if k == idx[0] else
            (fn(timeline.frame(k)) if wts[j] != 0 else {key: np.zeros_like(np.asarray(v)) for key, v in first.items()})
            for j, k in enumerate(sel)]
    norm = simpson(wts, x=t[sel]) if sel.size > 2 else np.sum(wts)
    out = {}
    for key in vals[0]:
        arr = np.array([v[key] for v in vals])
        out[key] = (simpson(arr * wts[:, None], x=t[sel], axis=0) if sel.size > 2 else arr.T @ wts) / norm
    return out


@dataclass
class DefectReport:
    """Defect pairings per bump along an eps sequence, with fitted limits."""

    scenario: str
    eps: list
    bumps: list
    pairings: dict
    limits: dict
    rates: dict
    flags: dict
    residual: list
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {"schema_version": SCHEMA_VERSION, "kind": "defect_report", **asdict(self)}
        return json.dumps(doc, indent=2, sort_keys=True, default=_json_default)

    @classmethod
    def from_json(cls, text: str) -> "DefectReport":
        doc = json.loads(text)
        doc.pop("schema_version", None)
        doc.pop("kind", None)
        return cls(**doc)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def _bump_record(b: Bump) -> dict:
    return {"center": b.center, "radius": b.radius, "coeffs": list(b.coeffs), "scale": b.scale}


def _collect(family, eps_list, bumps, width, p_cut, node_eta, time_bump):
    per_eps = []
    for e in eps_list:
        obj = family(float(e))
        fn = lambda psi: defect_pairings(psi, bumps, width, p_cut, node_eta)
        if isinstance(obj, Timeline):
            if time_bump is None:
                per_eps.append(fn(obj.frame(len(obj) - 1)))
            else:
                per_eps.append(time_localized(obj, fn, time_bump))
        else:
            per_eps.append(fn(obj))
    return {key: np.array([d[key] for d in per_eps]) for key in per_eps[0]}


def second_moment_gap(family: Callable[[float], object], eps_list, bumps: Sequence[Bump],
                      width: float = DEFAULT_BIN_WIDTH, p_cut: float = DEFAULT_P_CUT,
                      node_eta: float = DEFAULT_NODE_ETA, time_bump: Bump | None = None, raw=None):
    """Limits of the ``C`` and ``B`` pairings per bump.

    ``C = lim <J**2/rho, g> - lim <beta, g p**2>`` and ``B = lim`` of the
    coarse-bin gap of the Bohmian measure. Returns ``(C, B, fits)`` where
    ``fits`` maps each raw quantity to its per-bump FitResult list.
    """
    seq = EpsSequence(eps_list)
    raw = _collect(family, seq.eps, bumps, width, p_cut, node_eta, time_bump) if raw is None else raw
    fits = {key: [fit_rate(zip(seq.eps, raw[key][:, j])) for j in range(len(bumps))] for key in ("K", "beta_m2", "B")}
    C = np.array([fits["K"][j].limit - fits["beta_m2"][j].limit for j in range(len(bumps))])
    B = np.array([fits["B"][j].limit for j in range(len(bumps))])
    return C, B, fits


def teq_check(scenario: str, family: Callable[[float], object], eps_list, bumps: Sequence[Bump],
              width: float = DEFAULT_BIN_WIDTH, p_cut: float = DEFAULT_P_CUT,
              node_eta: float = DEFAULT_NODE_ETA, time_bump: Bump | None = None) -> DefectReport:
    """Extrapolated ``rhoT``, ``A``, ``B``, ``C`` per bump and the residual ``|rhoT - A - B - C|`` (lines only).

    ``family(eps)`` returns a WaveFunction or a Timeline; for a timeline the
    pairings are averaged against ``time_bump`` or taken at the last frame.
    """
    t0 = time.perf_counter()
    seq = EpsSequence(eps_list)
    raw = _collect(family, seq.eps, bumps, width, p_cut, node_eta, time_bump)
    C, B, fits = second_moment_gap(family, seq.eps, bumps, width, p_cut, node_eta, time_bump, raw=raw)
    for key in ("A", "rhoT"):
        fits[key] = [fit_rate(zip(seq.eps, raw[key][:, j])) for j in range(len(bumps))]
    limits = {
        "rhoT": [f.limit for f in fits["rhoT"]],
        "A": [f.limit for f in fits["A"]],
        "B": B.tolist(),
        "C": C.tolist(),
    }
    resid = [abs(limits["rhoT"][j] - limits["A"][j] - limits["B"][j] - limits["C"][j]) for j in range(len(bumps))]
    return DefectReport(
        scenario=scenario,
        eps=seq.eps.tolist(),
        bumps=[_bump_record(b) for b in bumps],
        pairings={k: v.tolist() for k, v in raw.items()},
        limits=limits,
        rates={k: [f.exponent for f in v] for k, v in fits.items()},
        flags={k: [not f.converged for f in v] for k, v in fits.items()},
        residual=resid,
        meta={"bin_width": width, "p_cut": p_cut, "node_eta": node_eta, "seconds": time.perf_counter() - t0},
    )
