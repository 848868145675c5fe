"""Strang split-step propagation of the semiclassical Schrodinger equation.

    i eps psi_t = -(eps**2 / 2) Laplace(psi) + V psi

Kinetic half steps are diagonal in Fourier space and the potential step is
diagonal on the grid, so each step is unitary up to round-off.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Grid, Potential, WaveFunction, boundary_mass, l2_norm_sq, quadrature
from .errors import DomainEscapeError, InstabilityError, InvalidStateError

__all__ = [
    "PropagatorConfig",
    "Timeline",
    "propagate",
    "mass",
    "energy",
    "kinetic_energy",
    "default_dt",
    "write_snapshot",
    "read_snapshot",
]


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float
    n_steps: int
    store_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 0 or self.store_every < 1:
            raise ValueError("n_steps must be >= 0 and store_every >= 1")

    @property
    def final_time(self) -> float:
        return self.dt * self.n_steps


def default_dt(grid: Grid, epsilon: float) -> float:
    """Step that resolves the potential phase and the largest kinetic phase on the grid.

    Strang splitting is unconditionally stable, so this is an accuracy guard
    rather than a stability limit.
    """
    h = min(grid.spacing)
    return 0.5 * min(h, epsilon, h**2 / epsilon)


@dataclass(frozen=True)
class Timeline:
    """Stored frames ``psi(t_k)`` on a shared grid."""

    grid: Grid
    epsilon: float
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or self.values.shape != (t.size,) + self.grid.shape:
            raise InvalidStateError("timeline frames do not match times/grid")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise InvalidStateError("timeline times must be strictly increasing")
        object.__setattr__(self, "times", t)

    def __len__(self):
        return self.times.size

    def frame(self, k: int) -> WaveFunction:
        return WaveFunction(self.grid, self.values[k], self.epsilon)

    def __iter__(self):
        for k in range(len(self)):
            yield self.times[k], self.frame(k)

    @property
    def frame_dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self) > 1 else 0.0

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not on the frame grid")
        return k

    def masses(self) -> np.ndarray:
        return np.sum(np.abs(self.values) ** 2, axis=tuple(range(1, self.values.ndim))) * self.grid.cell_volume

    def subsample(self, stride: int) -> "Timeline":
        return Timeline(self.grid, self.epsilon, self.times[::stride], self.values[::stride])


def propagate(psi0: WaveFunction, V: Potential, cfg: PropagatorConfig,
              boundary_guard: float | None = 1e-4) -> Timeline:
    """Run the split-step scheme and return the stored frames.

    ``boundary_guard`` is the largest admissible mass outside the central 80%
    of the box; pass ``None`` for genuinely periodic states such as plane waves.
    """
    grid, eps, dt = psi0.grid, psi0.epsilon, cfg.dt
    k2 = grid.k_squared
    half_kin = np.exp(-0.25j * eps * dt * k2)
    full_kin = half_kin**2
    pot = np.exp(-1j * dt * V.sample(grid) / eps)

    n_frames = cfg.n_steps // cfg.store_every + 1
    frames = np.empty((n_frames,) + grid.shape, dtype=complex)
    times = np.empty(n_frames)
    psi = np.array(psi0.values)
    frames[0], times[0] = psi, 0.0
    axes = tuple(range(grid.d))

    step = 0
    for f in range(1, n_frames):
        # merge adjacent kinetic half steps inside one stored block
        phat = np.fft.fftn(psi, axes=axes) * half_kin
        for j in range(cfg.store_every):
            psi = np.fft.ifftn(phat, axes=axes) * pot
            phat = np.fft.fftn(psi, axes=axes)
            phat *= half_kin if j == cfg.store_every - 1 else full_kin
        psi = np.fft.ifftn(phat, axes=axes)
        step += cfg.store_every
        if not np.all(np.isfinite(psi)):
            raise InstabilityError(f"non-finite values after step {step}")
        frames[f], times[f] = psi, step * dt
        if boundary_guard is not None:
            bm = boundary_mass(WaveFunction(grid, psi, eps))
            if bm > boundary_guard:
                raise DomainEscapeError(f"boundary mass {bm:.3e} exceeds {boundary_guard:.1e} at t={step * dt:.4g}")
    return Timeline(grid, eps, times, frames)


def mass(psi: WaveFunction) -> float:
    return l2_norm_sq(psi)


def kinetic_energy(psi: WaveFunction) -> float:
    """``(eps**2/2) ||grad psi||**2`` evaluated in Fourier space."""
    grid = psi.grid
    ph = np.fft.fftn(psi.values)
    n_tot = np.prod(grid.shape)
    grad_sq = np.sum(grid.k_squared * np.abs(ph) ** 2) / n_tot * grid.cell_volume
    return float(0.5 * psi.epsilon**2 * grad_sq)


def energy(psi: WaveFunction, V: Potential) -> float:
    return kinetic_energy(psi) + float(quadrature(V.sample(psi.grid) * psi.density, psi.grid))


_MAGIC = b"BHSN"
_VERSION = 1


def write_snapshot(path, psi: WaveFunction, t: float) -> None:
    """Binary frame dump.

    Layout (little-endian): magic ``BHSN``, uint32 version, uint32 d,
    d x uint64 n, d x float64 x_min, d x float64 x_max, float64 eps,
    float64 t, then interleaved (re, im) float64 pairs in C order.
    """
    g = psi.grid
    head = struct.pack("<4sII", _MAGIC, _VERSION, g.d)
    head += struct.pack(f"<{g.d}Q", *g.n)
    head += struct.pack(f"<{g.d}d", *g.x_min) + struct.pack(f"<{g.d}d", *g.x_max)
    head += struct.pack("<dd", psi.epsilon, t)
    payload = np.empty(psi.values.size * 2, dtype="<f8")
    flat = psi.values.ravel()
    payload[0::2], payload[1::2] = flat.real, flat.imag
    Path(path).write_bytes(head + payload.tobytes())


def read_snapshot(path) -> tuple[WaveFunction, float]:
    raw = Path(path).read_bytes()
    magic, version, d = struct.unpack_from("<4sII", raw, 0)
    if magic != _MAGIC or version != _VERSION:
        raise InvalidStateError("not a snapshot file or unsupported version")
    off = 12
    n = struct.unpack_from(f"<{d}Q", raw, off)
    off += 8 * d
    lo = struct.unpack_from(f"<{d}d", raw, off)
    off += 8 * d
    hi = struct.unpack_from(f"<{d}d", raw, off)
    off += 8 * d
    eps, t = struct.unpack_from("<dd", raw, off)
    off += 16
    data = np.frombuffer(raw, dtype="<f8", offset=off)
    grid = Grid(lo, hi, n)
    values = (data[0::2] + 1j * data[1::2]).reshape(grid.shape)
    return WaveFunction(grid, values, eps), t
