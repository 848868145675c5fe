"""Discrete Wigner and Husimi transforms on a periodic line, and a dictionary weak distance.

With ``s = eps*y/2`` the transform reads

    w(x, p) = 1/(pi eps) * int psi(x - s) conj(psi(x + s)) exp(2 i s p / eps) ds.

Half-spacing offsets ``s_m = m dx/2`` come from a twofold Fourier refinement
of ``psi``; the sum over ``m`` is one FFT of length ``2n`` per row, which puts
``p`` on the grid ``p_l = pi eps l / L``, ``l = -n .. n-1``.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .bohmian import EmpiricalPhaseMeasure, pair
from .core import TestFunction, WaveFunction, fourier_upsample

__all__ = [
    "WignerField",
    "wigner_transform",
    "wigner_moments",
    "wigner_second_moment",
    "wigner_p_moments",
    "wigner_pair",
    "husimi",
    "weak_distance",
    "write_wigner_csv",
    "write_raster",
    "read_raster",
]


@dataclass(frozen=True)
class WignerField:
    """Phase-space field ``values[i, l]`` at ``(x[i], p[l])``.

    ``kind`` is ``"wigner"`` (may be negative) or ``"husimi"`` (non-negative).
    ``imag_residue`` is the largest discarded imaginary part.
    """

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray
    epsilon: float
    dx: float
    dp: float
    kind: str = "wigner"
    imag_residue: float = 0.0

    @property
    def mass(self) -> float:
        return float(np.sum(self.values) * self.dx * self.dp)

    def to_measure(self) -> EmpiricalPhaseMeasure:
        X, P = np.meshgrid(self.x, self.p, indexing="ij")
        return EmpiricalPhaseMeasure(X, P, self.values * self.dx * self.dp, cell=self.dx,
                                     signed=self.kind == "wigner")


def _p_columns(n: int, L: float, eps: float, p_window):
    l = np.arange(-n, n)
    p = np.pi * eps * l / L
    if p_window is None:
        return l, p
    keep = (p >= p_window[0]) & (p <= p_window[1])
    return l[keep], p[keep]


def wigner_transform(psi: WaveFunction, p_window: tuple | None = None, chunk: int = 256) -> WignerField:
    """Wigner function on the spatial nodes; ``p_window`` keeps only part of the momentum grid.

    The full grid spans ``|p| <= pi eps n / L``; its p-marginal equals
    ``|psi|**2`` at every node.
    """
    g = psi.grid
    g._require_line()
    n, L, eps = g.n[0], g.lengths[0], psi.epsilon
    up = fourier_upsample(psi.values, 2)
    N = 2 * n
    m = np.arange(N)
    l, p = _p_columns(n, L, eps, p_window)
    cols = np.mod(l, N)
    out = np.empty((n, l.size))
    resid = 0.0
    norm = (g.dx / 2) / (np.pi * eps)
    for s in range(0, n, chunk):
        rows = np.arange(s, min(s + chunk, n))
        c = 2 * rows[:, None]
        f = up[np.mod(c - m, N)] * np.conj(up[np.mod(c + m, N)])
        W = np.fft.ifft(f, axis=1)[:, cols] * (N * norm)
        resid = max(resid, float(np.max(np.abs(W.imag))) if W.size else 0.0)
        out[rows] = W.real
    return WignerField(g.x.copy(), p, out, eps, g.dx, np.pi * eps / L, "wigner", resid)


def wigner_moments(w: WignerField):
    """``(m0, m1)``: p-quadrature of ``w`` and ``p w`` at every node."""
    m0 = np.sum(w.values, axis=1) * w.dp
    m1 = w.values @ w.p * w.dp
    return m0, m1


def wigner_second_moment(w: WignerField) -> np.ndarray:
    return w.values @ (w.p**2) * w.dp


def wigner_p_moments(psi: WaveFunction, chunk: int = 128):
    """``(m0, m1, m2)`` of the full-grid Wigner function at every node, without storing it."""
    g = psi.grid
    g._require_line()
    n, L, eps = g.n[0], g.lengths[0], psi.epsilon
    up = fourier_upsample(psi.values, 2)
    N = 2 * n
    m = np.arange(N)
    l = np.fft.fftfreq(N, 1.0 / N)
    l[n] = -n
    p = np.pi * eps * l / L
    dp = np.pi * eps / L
    norm = (g.dx / 2) / (np.pi * eps) * N * dp
    out = np.empty((3, n))
    for s in range(0, n, chunk):
        rows = np.arange(s, min(s + chunk, n))
        c = 2 * rows[:, None]
        f = up[np.mod(c - m, N)] * np.conj(up[np.mod(c + m, N)])
        W = np.fft.ifft(f, axis=1).real * norm
        out[0, rows] = W.sum(axis=1)
        out[1, rows] = W @ p
        out[2, rows] = W @ (p * p)
    return out[0], out[1], out[2]


def wigner_pair(psi: WaveFunction, phi: TestFunction, p_window: tuple | None = None) -> float:
    """``<w, phi>`` for the Wigner function of ``psi``.

    A momentum factor that is a polynomial of degree at most two is paired
    through the exact full-grid p-moments; a compactly supported one through
    a transform restricted to its support (or ``p_window``).
    """
    g = psi.grid
    mom = phi.momentum
    gx = phi.space(g.x)
    if not mom.compact:
        c = np.asarray(mom.coeffs) * mom.scale
        if c.size > 3:
            raise ValueError("polynomial momentum factors above degree two need a window")
        c = np.pad(c, (0, 3 - c.size))
        m0, m1, m2 = wigner_p_moments(psi)
        # expand the polynomial in z = p - center into powers of p
        z0 = mom.center
        poly = c[0] - c[1] * z0 + c[2] * z0**2, c[1] - 2 * c[2] * z0, c[2]
        dens = poly[0] * m0 + poly[1] * m1 + poly[2] * m2
        return float(np.sum(gx * dens) * g.dx)
    win = mom.support() if p_window is None else p_window
    return pair(wigner_transform(psi, p_window=win).to_measure(), phi)


def husimi(psi: WaveFunction, width: float | None = None, p_window: tuple | None = None,
           chunk: int = 256) -> WignerField:
    """Husimi density ``|<phi_{x,p}, psi>|**2 / (2 pi eps)``.

    ``phi_{x,p}`` is a Gaussian coherent state whose density has standard
    deviation ``width`` (default ``sqrt(eps/2)``). The result equals the Wigner
    function smoothed by a Gaussian with variances ``width**2`` in x and
    ``eps**2 / (4 width**2)`` in p, and is non-negative by construction. The
    momentum grid is ``eps * k`` with ``k`` the box wavenumbers.
    """
    g = psi.grid
    g._require_line()
    n, L, eps, dx = g.n[0], g.lengths[0], psi.epsilon, g.dx
    s = np.sqrt(eps / 2) if width is None else float(width)
    k = np.fft.fftshift(g.k)
    p = eps * k
    keep = np.ones(n, dtype=bool) if p_window is None else (p >= p_window[0]) & (p <= p_window[1])
    x = g.x
    out = np.empty((n, int(keep.sum())))
    amp = (2 * np.pi * s**2) ** -0.25
    for a in range(0, n, chunk):
        q = x[a:a + chunk]
        # periodic distance so packets near the edge wrap consistently
        d = g.wrap(x[None, :] - q[:, None] + g.x_min[0] + L / 2) - (g.x_min[0] + L / 2)
        win = amp * np.exp(-d**2 / (4 * s**2))
        F = np.fft.fftshift(np.fft.fft(win * psi.values[None, :], axis=1), axes=1) * dx
        out[a:a + chunk] = np.abs(F[:, keep]) ** 2
    return WignerField(x.copy(), p[keep], out / (2 * np.pi * eps), eps, dx, eps * g.dk[0], "husimi", 0.0)


def _as_measure(mu) -> EmpiricalPhaseMeasure:
    return mu.to_measure() if isinstance(mu, WignerField) else mu


def weak_distance(muA, muB, dictionary: Sequence[TestFunction], x_window: tuple, p_window: tuple) -> float:
    """``max_phi |<muA, phi> - <muB, phi>|`` over a dictionary of unit-C1 test functions.

    Each entry is rescaled to unit sampled C1 norm on the window before pairing.
    Measures may be EmpiricalPhaseMeasure or WignerField.
    """
    if not dictionary:
        raise ValueError("empty dictionary")
    a, b = _as_measure(muA), _as_measure(muB)
    best = 0.0
    for phi in dictionary:
        phi_n = phi.normalized(x_window, p_window)
        best = max(best, abs(pair(a, phi_n) - pair(b, phi_n)))
    return float(best)


def write_wigner_csv(path, w: WignerField) -> None:
    """Long-format CSV with columns ``x, p, w``."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "p", "w"])
        for i, xi in enumerate(w.x):
            for l, pl in enumerate(w.p):
                wr.writerow([repr(float(xi)), repr(float(pl)), repr(float(w.values[i, l]))])


_RASTER_MAGIC = b"BHWR"


def write_raster(path, w: WignerField) -> None:
    """Compact binary raster.

    Layout (little-endian): magic ``BHWR``, uint32 version 1, uint32 kind
    (0 wigner, 1 husimi), uint64 nx, uint64 np, float64 eps, x0, dx, p0, dp,
    then ``nx * np`` float64 values in row-major (x-major) order.
    """
    head = struct.pack("<4sII", _RASTER_MAGIC, 1, 0 if w.kind == "wigner" else 1)
    head += struct.pack("<QQ", w.x.size, w.p.size)
    head += struct.pack("<5d", w.epsilon, float(w.x[0]), w.dx, float(w.p[0]), w.dp)
    Path(path).write_bytes(head + np.ascontiguousarray(w.values, dtype="<f8").tobytes())


def read_raster(path) -> WignerField:
    raw = Path(path).read_bytes()
    magic, version, kind = struct.unpack_from("<4sII", raw, 0)
    if magic != _RASTER_MAGIC or version != 1:
        raise ValueError("not a raster file")
    nx, npp = struct.unpack_from("<QQ", raw, 12)
    eps, x0, dx, p0, dp = struct.unpack_from("<5d", raw, 28)
    vals = np.frombuffer(raw, dtype="<f8", offset=68).reshape(nx, npp).copy()
    return WignerField(x0 + dx * np.arange(nx), p0 + dp * np.arange(npp), vals, eps, dx, dp,
                       "wigner" if kind == 0 else "husimi")
