"""Bohmian trajectories and the empirical Bohmian phase-space measure (lines only).

Fields between grid nodes are taken from the trigonometric interpolant of
``psi``: each frame is Fourier-refined by ``REFINE``, where ``rho``, ``J`` and the
Bohm force are exact, and a periodic cubic spline fills the gaps between
the refined nodes. Time interpolation is cubic Lagrange over four frames.
"""
from __future__ import annotations

import csv
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline

from .core import Grid, Potential, TestFunction, WaveFunction, fourier_upsample
from .errors import DegenerateStateError
from .hydrodynamics import DEFAULT_NODE_ETA, HydroFields, bohm_force
from .schrodinger import Timeline

__all__ = [
    "EmpiricalPhaseMeasure",
    "TrajectoryEnsemble",
    "Moments",
    "EquivarianceResult",
    "circle_wasserstein",
    "grid_seeds",
    "integrate_kinematic",
    "integrate_dynamic",
    "equivariance_check",
    "bohmian_measure",
    "pair",
    "moments",
    "write_trajectories_csv",
]

REFINE = 4
MAX_EXCLUDED_FRACTION = 1e-3


@dataclass(frozen=True)
class EmpiricalPhaseMeasure:
    """Weighted atoms ``(x_j, p_j, w_j)`` on phase space.

    ``signed`` marks measures built from quasi-probabilities (Wigner data),
    whose weights may be negative. ``cell`` is the x-spacing of the atoms when
    they sit on a uniform grid; it sets the default moment bins.
    """

    x: np.ndarray
    p: np.ndarray
    w: np.ndarray
    cell: float | None = None
    signed: bool = False
    masked_mass: float = 0.0

    def __post_init__(self):
        x, p, w = (np.asarray(a, dtype=float).ravel() for a in (self.x, self.p, self.w))
        if not (x.shape == p.shape == w.shape):
            raise ValueError("atom arrays must have equal length")
        if not self.signed and np.any(w < 0):
            raise ValueError("negative weight in an unsigned measure")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "w", w)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.w))

    def __len__(self):
        return self.w.size


def pair(mu: EmpiricalPhaseMeasure, phi) -> float:
    """``sum_j w_j phi(x_j, p_j)``; ``phi`` is a TestFunction (time factor ignored) or a callable."""
    if isinstance(phi, TestFunction):
        vals = phi.space(mu.x) * phi.momentum(mu.p)
    else:
        vals = phi(mu.x, mu.p)
    return float(np.dot(mu.w, vals))


def bohmian_measure(fields: HydroFields) -> EmpiricalPhaseMeasure:
    """Atoms ``(x_i, u(x_i), rho(x_i) dx)`` over unmasked nodes of a line."""
    g = fields.grid
    g._require_line()
    keep = ~fields.node_mask
    dx = g.dx
    return EmpiricalPhaseMeasure(g.x[keep], fields.u[0][keep], fields.rho[keep] * dx, cell=dx,
                                 masked_mass=float(np.sum(fields.rho[~keep]) * dx))


class Moments(NamedTuple):
    """Per-bin moment densities; ``valid`` is False on empty bins."""

    centers: np.ndarray
    m0: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    cs_gap: np.ndarray
    valid: np.ndarray


def moments(mu: EmpiricalPhaseMeasure, edges=None) -> Moments:
    """Bin atoms in ``x`` and return ``m0, m1, m2`` and ``m2 - m1**2/m0`` per unit length.

    Default bins are one cell per atom spacing, centred on the atoms. The gap
    is computed in centred form ``sum w (p - pbar)**2`` so that it is exactly
    non-negative for non-negative weights.
    """
    if edges is None:
        if mu.cell is None:
            raise ValueError("edges required for atoms without a cell size")
        h = mu.cell
        base = float(np.min(mu.x))
        m = int(np.rint((np.max(mu.x) - base) / h))
        edges = base - 0.5 * h + h * np.arange(m + 2)
    edges = np.asarray(edges, dtype=float)
    width = np.diff(edges)
    idx = np.searchsorted(edges, mu.x, side="right") - 1
    inside = (idx >= 0) & (idx < width.size)
    idx, p, w = idx[inside], mu.p[inside], mu.w[inside]
    nb = width.size
    s0 = np.bincount(idx, w, nb)
    s1 = np.bincount(idx, w * p, nb)
    s2 = np.bincount(idx, w * p * p, nb)
    valid = np.bincount(idx, None, nb) > 0
    pbar = np.zeros(nb)
    nz = valid & (s0 != 0)
    pbar[nz] = s1[nz] / s0[nz]
    gap = np.bincount(idx, w * (p - pbar[idx]) ** 2, nb)
    gap[~nz] = 0.0
    centers = 0.5 * (edges[1:] + edges[:-1])
    return Moments(centers, s0 / width, s1 / width, s2 / width, gap / width, valid)


def grid_seeds(psi0: WaveFunction, count: int | None = None, node_eta: float = DEFAULT_NODE_ETA):
    """Deterministic quadrature seeds: uniform nodes weighted by ``rho_0 * spacing``.

    ``count`` must be ``n * 2**k``; refined seeds take ``rho_0`` from the
    trigonometric interpolant. Nodes below ``node_eta * max(rho_0)`` are left out.
    Returns ``(x, w, excluded_mass)``.
    """
    g = psi0.grid
    g._require_line()
    n = g.n[0]
    count = n if count is None else int(count)
    factor = count // n
    if factor < 1 or factor * n != count or factor & (factor - 1):
        raise ValueError("seed count must be the grid size times a power of two")
    vals = fourier_upsample(psi0.values, factor) if factor > 1 else psi0.values
    rho = np.abs(vals) ** 2
    h = g.lengths[0] / count
    x = g.x_min[0] + h * np.arange(count)
    keep = rho >= node_eta * rho.max()
    return x[keep], rho[keep] * h, float(np.sum(rho[~keep]) * h)


@dataclass
class TrajectoryEnsemble:
    """Bohmian paths ``X[k, i]``, ``P[k, i]`` at the stored times.

    Positions are unwrapped (they may leave the box for periodic states).
    ``flags[i]`` is True for atoms that entered a masked node region; their
    paths are frozen from that time on and they are excluded from statistics.
    """

    seeds: np.ndarray
    weights: np.ndarray
    times: np.ndarray
    X: np.ndarray
    P: np.ndarray
    flags: np.ndarray
    epsilon: float
    seed_excluded_mass: float = 0.0
    method: str = "kinematic"
    meta: dict = field(default_factory=dict)

    @property
    def active(self) -> np.ndarray:
        return ~self.flags

    @property
    def n_flagged(self) -> int:
        return int(np.sum(self.flags))

    @property
    def excluded_fraction(self) -> float:
        total = np.sum(self.weights) + self.seed_excluded_mass
        return float((np.sum(self.weights[self.flags]) + self.seed_excluded_mass) / total)

    @property
    def run_flagged(self) -> bool:
        return self.excluded_fraction > MAX_EXCLUDED_FRACTION

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a stored time")
        return k

    def phase_measure(self, k: int, wrap: Grid | None = None) -> EmpiricalPhaseMeasure:
        """Push-forward of the seed measure to frame ``k`` (active atoms only)."""
        a = self.active
        x = self.X[k, a]
        if wrap is not None:
            x = wrap.wrap(x)
        return EmpiricalPhaseMeasure(x, self.P[k, a], self.weights[a])


class _FrameFields:
    """Lazily built splines of per-frame fields on the refined grid."""

    def __init__(self, timeline: Timeline, kind: str, V: Potential | None, node_eta: float, cache: int = 6):
        self.tl = timeline
        self.kind = kind
        self.V = V
        self.node_eta = node_eta
        self.cache: OrderedDict[int, tuple] = OrderedDict()
        self.size = cache
        g = timeline.grid
        self.fine = Grid(g.x_min, g.x_max, g.n[0] * REFINE)
        self.L = g.lengths[0]
        self.x0 = g.x_min[0]
        xf = np.append(self.fine.x, g.x_max[0])
        self.xs = xf

    def _build(self, k: int):
        v = fourier_upsample(self.tl.values[k], REFINE)
        fine = self.fine
        rho = np.abs(v) ** 2
        floor = self.node_eta * rho.max()
        if self.kind == "velocity":
            dv = np.fft.ifft(np.fft.fft(v) * 1j * fine.k)
            J = self.tl.epsilon * np.imag(np.conj(v) * dv)
            data = np.stack([rho, J], axis=-1)
        else:
            F = -bohm_force(WaveFunction(fine, v, self.tl.epsilon), self.node_eta)[0]
            if self.V is not None:
                F = F - self.V.gradient(fine.x)
            data = np.stack([rho, F], axis=-1)
        data = np.concatenate([data, data[:1]], axis=0)
        return CubicSpline(self.xs, data, bc_type="periodic", axis=0), floor

    def spline(self, k: int):
        if k in self.cache:
            self.cache.move_to_end(k)
            return self.cache[k]
        s = self._build(k)
        self.cache[k] = s
        if len(self.cache) > self.size:
            self.cache.popitem(last=False)
        return s

    def at_frame(self, k: int, x: np.ndarray):
        sp, floor = self.spline(k)
        xw = self.x0 + np.mod(x - self.x0, self.L)
        out = sp(xw)
        return out[..., 0], out[..., 1], floor

    def at_mid(self, k: int, x: np.ndarray):
        """Fields at ``(t_k + t_{k+1})/2`` by cubic Lagrange over frames k-1..k+2."""
        nf = len(self.tl)
        lo = min(max(k - 1, 0), nf - 4)
        ks = range(lo, lo + 4)
        s = (k + 0.5) - lo
        nodes = np.arange(4.0)
        wts = [np.prod([(s - nodes[m]) / (nodes[j] - nodes[m]) for m in range(4) if m != j]) for j in range(4)]
        a = b = 0.0
        floor = 0.0
        for wj, kj in zip(wts, ks):
            r, f, fl = self.at_frame(kj, x)
            a = a + wj * r
            b = b + wj * f
            floor = floor + wj * fl
        return a, b, floor


def _velocity(rho, J, floor):
    bad = rho < floor
    u = np.divide(J, rho, out=np.zeros_like(J), where=~bad)
    return u, bad


def _resolve_seeds(timeline, seeds, weights, node_eta):
    psi0 = timeline.frame(0)
    if seeds is None or np.isscalar(seeds):
        x, w, excl = grid_seeds(psi0, None if seeds is None else int(seeds), node_eta)
        return x, w, excl
    x = np.asarray(seeds, dtype=float).ravel()
    if weights is None:
        raise ValueError("explicit seeds need explicit weights")
    return x, np.asarray(weights, dtype=float).ravel(), 0.0


def integrate_kinematic(timeline: Timeline, seeds=None, node_eta: float = DEFAULT_NODE_ETA,
                        weights=None) -> TrajectoryEnsemble:
    """RK4 for ``dX/dt = u(t, X)`` with one step per stored frame.

    ``seeds`` is None (grid nodes), an integer seed count (refined nodes), or
    an explicit array together with ``weights``. ``P`` is recorded as
    ``u(t, X(t))``.
    """
    if len(timeline) < 4:
        raise ValueError("kinematic integration needs at least four frames")
    timeline.grid._require_line()
    x, w, excl = _resolve_seeds(timeline, seeds, weights, node_eta)
    ff = _FrameFields(timeline, "velocity", None, node_eta)
    h = timeline.frame_dt
    nf = len(timeline)
    X = np.empty((nf, x.size))
    P = np.empty((nf, x.size))
    flags = np.zeros(x.size, dtype=bool)
    X[0] = x
    u0, bad0 = _velocity(*ff.at_frame(0, x))
    P[0] = u0
    flags |= bad0
    cur = x.copy()
    for k in range(nf - 1):
        a = ~flags
        xa = cur[a]
        k1, b1 = _velocity(*ff.at_frame(k, xa))
        k2, b2 = _velocity(*ff.at_mid(k, xa + 0.5 * h * k1))
        k3, b3 = _velocity(*ff.at_mid(k, xa + 0.5 * h * k2))
        k4, b4 = _velocity(*ff.at_frame(k + 1, xa + h * k3))
        xa = xa + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        u, b5 = _velocity(*ff.at_frame(k + 1, xa))
        cur[a] = xa
        newly = b1 | b2 | b3 | b4 | b5
        idx = np.flatnonzero(a)
        flags[idx[newly]] = True
        X[k + 1] = cur
        P[k + 1] = P[k]
        P[k + 1, idx] = u
    return TrajectoryEnsemble(x, w, timeline.times.copy(), X, P, flags, timeline.epsilon, excl, "kinematic")


def integrate_dynamic(timeline: Timeline, V: Potential, seeds=None, node_eta: float = DEFAULT_NODE_ETA,
                      weights=None) -> TrajectoryEnsemble:
    """Velocity Verlet for ``dX = P dt, dP = -(V' + V_B')(t, X) dt`` with ``P(0) = u_0(X(0))``."""
    if len(timeline) < 2:
        raise ValueError("dynamic integration needs at least two frames")
    timeline.grid._require_line()
    x, w, excl = _resolve_seeds(timeline, seeds, weights, node_eta)
    vel = _FrameFields(timeline, "velocity", None, node_eta, cache=2)
    frc = _FrameFields(timeline, "force", V, node_eta, cache=3)
    h = timeline.frame_dt
    nf = len(timeline)
    X = np.empty((nf, x.size))
    P = np.empty((nf, x.size))
    flags = np.zeros(x.size, dtype=bool)
    u0, bad0 = _velocity(*vel.at_frame(0, x))
    flags |= bad0
    X[0], P[0] = x, u0
    cx, cp = x.copy(), u0.copy()
    rho, F, floor = frc.at_frame(0, cx)
    force = F
    for k in range(nf - 1):
        ph = cp + 0.5 * h * force
        cx = cx + h * ph
        rho, F, floor = frc.at_frame(k + 1, cx)
        bad = rho < floor
        force = np.where(bad, 0.0, F)
        cp = ph + 0.5 * h * force
        flags |= bad
        X[k + 1] = np.where(flags, X[k], cx)
        P[k + 1] = np.where(flags, P[k], cp)
    return TrajectoryEnsemble(x, w, timeline.times.copy(), X, P, flags, timeline.epsilon, excl, "dynamic")


def circle_wasserstein(xa, wa, xb, wb, x_min: float, length: float) -> float:
    """1-Wasserstein distance of two weighted point sets on the circle ``[x_min, x_min + length)``.

    With ``D`` the difference of the cumulative distributions, the distance is
    ``min_c int |D - c|``, attained at a length-weighted median of ``D``. For
    measures that vanish near the cut this equals the distance on the line.
    """
    x = np.concatenate([np.asarray(xa, dtype=float), np.asarray(xb, dtype=float)])
    x = x_min + np.mod(x - x_min, length)
    w = np.concatenate([np.asarray(wa, dtype=float) / np.sum(wa), -np.asarray(wb, dtype=float) / np.sum(wb)])
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    D = np.cumsum(w)
    gaps = np.append(np.diff(x), x[0] + length - x[-1])
    srt = np.argsort(D, kind="stable")
    cum = np.cumsum(gaps[srt])
    c = D[srt][np.searchsorted(cum, 0.5 * cum[-1])]
    return float(np.sum(gaps * np.abs(D - c)))


class EquivarianceResult(NamedTuple):
    w1: float
    hist_l1: float


def equivariance_check(ensemble: TrajectoryEnsemble, timeline: Timeline, t: float) -> EquivarianceResult:
    """Distances between the pushed-forward seed measure and ``rho(t)`` on a line.

    ``w1`` is the 1-Wasserstein distance on the periodic box between the
    atoms and the grid atoms ``rho(t, x_j) dx`` (both normalized to unit mass);
    ``hist_l1`` is the L1 distance between the nearest-node histogram of the
    atoms and ``rho(t) dx``, also per unit mass.
    """
    g = timeline.grid
    g._require_line()
    k = timeline.index_of(t)
    ke = ensemble.index_of(t)
    a = ensemble.active
    xs = g.wrap(ensemble.X[ke, a])
    ws = ensemble.weights[a]
    rho = np.abs(timeline.values[k]) ** 2
    if rho.sum() <= 0 or ws.sum() <= 0:
        raise DegenerateStateError("empty measure in equivariance check")
    w1 = circle_wasserstein(xs, ws, g.x, rho, g.x_min[0], g.lengths[0])
    j = np.rint((xs - g.x_min[0]) / g.dx).astype(int) % g.n[0]
    hist = np.bincount(j, ws, g.n[0])
    l1 = np.sum(np.abs(hist / hist.sum() - rho / rho.sum()))
    return EquivarianceResult(float(w1), float(l1))


def write_trajectories_csv(path, ens: TrajectoryEnsemble) -> None:
    """CSV with columns ``t, i, X, P, w, flag``."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "i", "X", "P", "w", "flag"])
        for k, t in enumerate(ens.times):
            for i in range(ens.seeds.size):
                wr.writerow([repr(float(t)), i, repr(float(ens.X[k, i])), repr(float(ens.P[k, i])),
                             repr(float(ens.weights[i])), int(ens.flags[i])])
