"""Semiclassical Gaussian-type wave packets along a classical trajectory (lines only).

The packet is ``eps**(-1/4) v(t, (x - X)/sqrt(eps)) exp(i (P (x - X) + S)/eps)``
with ``(X, P, S)`` the classical path and action and ``v`` solving the
eps-free envelope equation ``i v_t = -v_yy/2 + Q(t) y**2 v / 2``,
``Q = V''(X(t))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from .bohmian import bohmian_measure, integrate_kinematic, pair
from .core import Grid, Potential, TestFunction, WaveFunction, fourier_upsample
from .errors import DomainEscapeError, InstabilityError, SupportError
from .hydrodynamics import DEFAULT_NODE_ETA, extract_fields
from .schrodinger import Timeline
from .wigner import wigner_pair

__all__ = [
    "ClassicalTrajectory",
    "Envelope",
    "RescaledEnsemble",
    "YoungHistogram",
    "gaussian_profile",
    "classical_flow",
    "envelope_solve",
    "initial_packet",
    "assemble_packet",
    "packet_error",
    "packet_limit_pairing",
    "rescaled_trajectories",
    "bad_set_measure",
    "good_set_probability",
    "young_histogram",
]

Y_BOX = (-12.0, 12.0)
Y_POINTS = 1024
_REFINE = 4


def gaussian_profile(y):
    """``pi**(-1/4) exp(-y**2/2)``, unit L2 norm."""
    return np.pi**-0.25 * np.exp(-np.asarray(y, dtype=float) ** 2 / 2)


@dataclass(frozen=True)
class ClassicalTrajectory:
    t: np.ndarray
    X: np.ndarray
    P: np.ndarray
    S: np.ndarray

    def energy(self, V: Potential) -> np.ndarray:
        return 0.5 * self.P**2 + V.value(self.X)

    def at(self, t: float):
        k = int(np.argmin(np.abs(self.t - t)))
        if abs(self.t[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not on the trajectory grid")
        return self.X[k], self.P[k], self.S[k]


def classical_flow(V: Potential, x0: float, p0: float, T: float, dt: float,
                   box: tuple | None = None) -> ClassicalTrajectory:
    """Velocity-Verlet path of ``X' = P, P' = -V'(X)``; action by cumulative Simpson."""
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError("T must be a positive multiple of dt")
    X = np.empty(n + 1)
    P = np.empty(n + 1)
    X[0], P[0] = x0, p0
    f = -V.gradient(np.array(x0))
    for k in range(n):
        ph = P[k] + 0.5 * dt * f
        X[k + 1] = X[k] + dt * ph
        f = -V.gradient(np.array(X[k + 1]))
        P[k + 1] = ph + 0.5 * dt * f
    t = dt * np.arange(n + 1)
    if box is not None and (np.any(X < box[0]) or np.any(X > box[1])):
        raise DomainEscapeError("classical path leaves the box")
    lag = 0.5 * P**2 - V.value(X)
    S = cumulative_simpson(lag, x=t, initial=0.0)
    return ClassicalTrajectory(t, X, P, S)


@dataclass(frozen=True)
class Envelope:
    """Envelope frames ``values[k]`` on a fixed y-grid at ``times[k]``."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    a: np.ndarray

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.values) ** 2, axis=1) * self.grid.dx)

    def y_moment(self) -> np.ndarray:
        """``|| |y| v(t) ||`` per frame."""
        y = self.grid.x
        return np.sqrt(np.sum((y * np.abs(self.values)) ** 2, axis=1) * self.grid.dx)

    def gradient_norm(self) -> np.ndarray:
        dv = np.fft.ifft(np.fft.fft(self.values, axis=1) * 1j * self.grid.k, axis=1)
        return np.sqrt(np.sum(np.abs(dv) ** 2, axis=1) * self.grid.dx)


def envelope_solve(a, traj: ClassicalTrajectory, V: Potential, store_every: int = 1,
                   y_box: tuple = Y_BOX, n: int = Y_POINTS) -> Envelope:
    """Strang splitting for the envelope equation with ``Q`` frozen at the midpoint of each step.

    ``a`` is a callable profile or an array on the y-grid. One step per
    trajectory interval; frames are kept every ``store_every`` steps.
    """
    grid = Grid(y_box[0], y_box[1], n)
    y = grid.x
    a0 = np.asarray(a(y) if callable(a) else a, dtype=complex)
    if a0.shape != y.shape:
        raise ValueError("profile does not match the y-grid")
    edge = np.max(np.abs(a0[~grid.central_mask(0.8)])) if n > 4 else 0.0
    if edge > 1e-8 * np.max(np.abs(a0)):
        raise SupportError("profile does not decay inside the y-box")
    t = traj.t
    dt = float(t[1] - t[0])
    half = np.exp(-0.25j * dt * grid.k**2)
    full = half**2
    Xm = 0.5 * (traj.X[:-1] + traj.X[1:])
    Q = V.hessian(Xm)
    nsteps = t.size - 1
    nf = nsteps // store_every + 1
    frames = np.empty((nf, n), dtype=complex)
    times = np.empty(nf)
    v = a0.copy()
    frames[0], times[0] = v, t[0]
    step = 0
    for f in range(1, nf):
        vh = np.fft.fft(v) * half
        for j in range(store_every):
            v = np.fft.ifft(vh) * np.exp(-0.5j * dt * Q[step] * y**2)
            step += 1
            vh = np.fft.fft(v) * (half if j == store_every - 1 else full)
        v = np.fft.ifft(vh)
        if not np.all(np.isfinite(v)):
            raise InstabilityError("envelope blew up")
        frames[f], times[f] = v, t[step]
    return Envelope(grid, times, frames, a0)


def initial_packet(grid: Grid, epsilon: float, x0: float, p0: float, a=gaussian_profile) -> WaveFunction:
    """``eps**(-1/4) a((x - x0)/sqrt(eps)) exp(i p0 (x - x0)/eps)``."""
    x = grid.x
    y = (x - x0) / np.sqrt(epsilon)
    return WaveFunction(grid, epsilon**-0.25 * a(y) * np.exp(1j * p0 * (x - x0) / epsilon), epsilon)


def assemble_packet(env: Envelope, traj: ClassicalTrajectory, epsilon: float, grid: Grid,
                    times=None) -> Timeline:
    """Sample the packet on ``grid`` at the envelope frame times (or a subset ``times``)."""
    grid._require_line()
    x = grid.x
    sq = np.sqrt(epsilon)
    ks = range(len(env.times)) if times is None else [int(np.argmin(np.abs(env.times - t))) for t in times]
    yg = env.grid
    yf = yg.x_min[0] + (yg.lengths[0] / (yg.n[0] * _REFINE)) * np.arange(yg.n[0] * _REFINE + 1)
    out = []
    tt = []
    for k in ks:
        t = env.times[k]
        X, P, S = traj.at(t)
        y = (x - X) / sq
        inside = (y >= yg.x_min[0]) & (y < yg.x_max[0])
        live = np.abs(env.values[k]) > 1e-8 * np.max(np.abs(env.values[k]))
        xs = X + sq * yg.x[live]
        if xs.min() < grid.x_min[0] or xs.max() >= grid.x_max[0]:
            raise SupportError("packet support leaves the x-box")
        vf = fourier_upsample(env.values[k], _REFINE)
        vf = np.append(vf, vf[0])
        spl = CubicSpline(yf, np.stack([vf.real, vf.imag], axis=-1), bc_type="periodic", axis=0)
        vals = np.zeros(x.size, dtype=complex)
        vy = spl(y[inside])
        vals[inside] = vy[:, 0] + 1j * vy[:, 1]
        phase = np.exp(1j * (P * (x - X) + S) / epsilon)
        out.append(epsilon**-0.25 * vals * phase)
        tt.append(t)
    return Timeline(grid, epsilon, np.array(tt), np.array(out))


def packet_error(timeline_exact: Timeline, packet: Timeline) -> np.ndarray:
    """L2 distance per frame; both timelines must share grid and times."""
    if timeline_exact.grid != packet.grid or not np.allclose(timeline_exact.times, packet.times, atol=1e-12):
        raise ValueError("timelines do not match")
    diff = np.abs(timeline_exact.values - packet.values) ** 2
    return np.sqrt(np.sum(diff, axis=1) * timeline_exact.grid.dx)


class PairingGap(NamedTuple):
    times: np.ndarray
    bohmian: np.ndarray
    wigner: np.ndarray
    bohmian_value: np.ndarray
    wigner_value: np.ndarray
    limit_value: np.ndarray


def packet_limit_pairing(timeline_exact: Timeline, traj: ClassicalTrajectory, phi: TestFunction,
                         times=None, mass: float = 1.0, p_window: tuple | None = None,
                         node_eta: float = DEFAULT_NODE_ETA) -> PairingGap:
    """Gaps ``|<beta, phi> - mass phi(X, P)|`` and the same for the Wigner function, per frame."""
    times = timeline_exact.times if times is None else np.atleast_1d(times)
    b, w, bv, wv, lv = [], [], [], [], []
    for t in times:
        psi = timeline_exact.frame(timeline_exact.index_of(t))
        X, P, _ = traj.at(t)
        lim = mass * float(phi.space(np.array(X)) * phi.momentum(np.array(P)))
        pb = pair(bohmian_measure(extract_fields(psi, node_eta)), phi)
        pw = wigner_pair(psi, phi, p_window)
        b.append(abs(pb - lim))
        w.append(abs(pw - lim))
        bv.append(pb)
        wv.append(pw)
        lv.append(lim)
    return PairingGap(np.asarray(times, dtype=float), np.array(b), np.array(w), np.array(bv), np.array(wv), np.array(lv))


@dataclass(frozen=True)
class RescaledEnsemble:
    """Trajectories from ``x0 + sqrt(eps) y`` recorded as ``Y[k, j]``, ``Z[k, j]``."""

    y: np.ndarray
    weights: np.ndarray
    times: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    flags: np.ndarray
    epsilon: float
    x0: float

    @property
    def dy(self) -> float:
        return float(self.y[1] - self.y[0])


def rescaled_trajectories(timeline_exact: Timeline, x0: float, p0: float, y_seeds, epsilon: float | None = None,
                          a=gaussian_profile, node_eta: float = DEFAULT_NODE_ETA) -> RescaledEnsemble:
    """Bohmian paths started at ``x0 + sqrt(eps) y`` with weights ``|a(y)|**2 dy``.

    ``y_seeds`` must be uniformly spaced. ``p0`` is kept for the call
    signature; the initial momenta are ``u_0`` at the seeds.
    """
    eps = timeline_exact.epsilon if epsilon is None else epsilon
    y = np.asarray(y_seeds, dtype=float)
    dy = float(y[1] - y[0])
    if not np.allclose(np.diff(y), dy, rtol=1e-9, atol=1e-12):
        raise ValueError("y seeds must be uniformly spaced")
    w = np.abs(a(y)) ** 2 * dy
    ens = integrate_kinematic(timeline_exact, x0 + np.sqrt(eps) * y, node_eta, weights=w)
    return RescaledEnsemble(y, w, ens.times, ens.X, ens.P, ens.flags, eps, x0)


def bad_set_measure(ens: RescaledEnsemble, traj: ClassicalTrajectory, delta: float,
                    omega_y: tuple | None = None, t_max: float | None = None):
    """Lebesgue measure of ``{(t, y) in Omega : |(Y, Z) - (X, P)| >= delta}`` by cell counting.

    Cells are ``dt x dy`` around the stored times and y seeds; flagged atoms
    count as bad. Returns ``(measure, |Omega|)``.
    """
    t = ens.times
    dt = float(t[1] - t[0])
    ymask = np.ones(ens.y.size, dtype=bool) if omega_y is None else (ens.y >= omega_y[0]) & (ens.y <= omega_y[1])
    tmask = np.ones(t.size, dtype=bool) if t_max is None else t <= t_max + 1e-12
    Xc = np.array([traj.at(tk)[0] for tk in t[tmask]])
    Pc = np.array([traj.at(tk)[1] for tk in t[tmask]])
    dev = np.hypot(ens.Y[tmask][:, ymask] - Xc[:, None], ens.Z[tmask][:, ymask] - Pc[:, None])
    bad = (dev >= delta) | ens.flags[ymask][None, :]
    # trapezoid-style cell weights in t so that Omega = [0, T] x y-box exactly
    wt = np.full(int(tmask.sum()), dt)
    wt[0] = wt[-1] = dt / 2
    cell = np.broadcast_to(wt[:, None] * ens.dy, bad.shape)
    return float(np.sum(cell * bad)), float(np.sum(cell))


def good_set_probability(ens, traj: ClassicalTrajectory, R: float, T: float) -> float:
    """Weighted fraction of seeds with ``max_{t <= T} |X(t) - X_cl(t)| <= R sqrt(eps)``.

    Accepts a RescaledEnsemble or a TrajectoryEnsemble; the weights are the
    seed quadrature weights (``rho_0 dx`` or ``|a|**2 dy``).
    """
    Xs = ens.Y if isinstance(ens, RescaledEnsemble) else ens.X
    t = ens.times
    sel = t <= T + 1e-12
    Xc = np.array([traj.at(tk)[0] for tk in t[sel]])
    dev = np.max(np.abs(Xs[sel] - Xc[:, None]), axis=0)
    good = (dev <= R * np.sqrt(ens.epsilon)) & ~ens.flags
    return float(np.sum(ens.weights[good]) / np.sum(ens.weights))


@dataclass(frozen=True)
class YoungHistogram:
    """Per-(t, y)-cell phase-space histograms and concentration scores."""

    t_edges: np.ndarray
    y_edges: np.ndarray
    x_edges: np.ndarray
    p_edges: np.ndarray
    counts: np.ndarray
    cell_mass: np.ndarray
    scores: np.ndarray

    def fraction_above(self, level: float) -> float:
        ok = self.cell_mass > 0
        return float(np.mean(self.scores[ok] >= level))


def young_histogram(ens: RescaledEnsemble, traj: ClassicalTrajectory, delta: float, n_t: int = 10,
                    n_y: int = 12, omega_y: tuple = (-3.0, 3.0), bins: int = 16, half_width: float = 0.5) -> YoungHistogram:
    """Bin the atoms ``(Y, Z)`` of every (t, y) cell into an (x, p) histogram around ``(X(t), P(t))``.

    Each cell holds all stored times and y seeds that fall in it, weighted
    by ``|a(y)|**2 dy``. The score of a cell is its mass fraction within
    distance ``delta`` of the classical point.
    """
    t = ens.times
    t_edges = np.linspace(t[0], t[-1], n_t + 1)
    y_edges = np.linspace(omega_y[0], omega_y[1], n_y + 1)
    ti = np.clip(np.searchsorted(t_edges, t, side="right") - 1, 0, n_t - 1)
    yi = np.searchsorted(y_edges, ens.y, side="right") - 1
    ysel = (yi >= 0) & (yi < n_y)
    rel = np.linspace(-half_width, half_width, bins + 1)
    counts = np.zeros((n_t, n_y, bins, bins))
    mass = np.zeros((n_t, n_y))
    near = np.zeros((n_t, n_y))
    for k, tk in enumerate(t):
        X, P, _ = traj.at(tk)
        dx = ens.Y[k, ysel] - X
        dp = ens.Z[k, ysel] - P
        w = np.where(ens.flags[ysel], 0.0, ens.weights[ysel])
        cells = yi[ysel]
        close = np.hypot(dx, dp) < delta
        np.add.at(mass[ti[k]], cells, w)
        np.add.at(near[ti[k]], cells, w * close)
        ix = np.clip(np.searchsorted(rel, dx, side="right") - 1, 0, bins - 1)
        ip = np.clip(np.searchsorted(rel, dp, side="right") - 1, 0, bins - 1)
        np.add.at(counts[ti[k]], (cells, ix, ip), w)
    scores = np.divide(near, mass, out=np.zeros_like(near), where=mass > 0)
    return YoungHistogram(t_edges, y_edges, rel, rel, counts, mass, scores)
