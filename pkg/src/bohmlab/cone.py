"""Concentrating states with a cone-shaped phase on a line.

``psi = eps**(-1/4) sqrt(rho_prof(|x|/sqrt(eps))) exp(i S(x)/eps)`` with
``S(x) = s0 * sqrt(x**2 + delta0**2)``, an even phase whose slope tends to
``+-s0`` away from the tip. Both the Bohmian and the Wigner measure
concentrate on ``x = 0`` with momenta ``+-s0`` in equal parts, so the limit
is not supported on a velocity graph.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .bohmian import bohmian_measure, pair
from .classical_limit import DEFAULT_BIN_WIDTH, EpsSequence, FitResult, coarse_gap_pairing, fit_rate
from .core import Bump, Grid, TestFunction, WaveFunction
from .errors import SupportError
from .hydrodynamics import DEFAULT_NODE_ETA, extract_fields
from .wigner import wigner_pair

__all__ = ["ConeState", "ConePairing", "gaussian_density_profile", "build_cone_state", "cone_limit", "cone_limit_pairing"]


def gaussian_density_profile(y):
    """``exp(-y**2)/sqrt(pi)``: unit mass on the line."""
    return np.exp(-np.asarray(y, dtype=float) ** 2) / np.sqrt(np.pi)


@dataclass(frozen=True)
class ConeState:
    """Parameters of the cone family at one eps.

    ``delta0`` is the tip mollification length; ``None`` means ``kappa * eps``.
    """

    epsilon: float
    profile: Callable = gaussian_density_profile
    s0: float = 1.0
    delta0: float | None = None
    kappa: float = 1.0

    @property
    def tip(self) -> float:
        return self.kappa * self.epsilon if self.delta0 is None else self.delta0

    def phase(self, x):
        return self.s0 * np.sqrt(np.asarray(x, dtype=float) ** 2 + self.tip**2)

    def phase_slope(self, x):
        x = np.asarray(x, dtype=float)
        return self.s0 * x / np.sqrt(x**2 + self.tip**2)

    def profile_mass(self) -> float:
        return quad(lambda y: float(self.profile(y)), -np.inf, np.inf)[0]

    def directional_limits(self):
        """Slope of the unmollified phase on the two rays, ``(chi(+1), chi(-1))``."""
        return self.s0, -self.s0


def build_cone_state(state: ConeState, grid: Grid) -> WaveFunction:
    grid._require_line()
    eps = state.epsilon
    x = grid.x
    y = np.abs(x) / np.sqrt(eps)
    rho = np.asarray(state.profile(y), dtype=float) / np.sqrt(eps)
    if np.max(rho[~grid.central_mask(0.8)]) > 1e-8 * np.max(rho):
        raise SupportError("cone profile does not fit in the box at this eps")
    return WaveFunction(grid, np.sqrt(rho) * np.exp(1j * state.phase(x) / eps), eps)


def cone_limit(phi: TestFunction, s0: float = 1.0, mass: float = 1.0) -> float:
    """Limit pairing ``mass * (phi(0, s0) + phi(0, -s0)) / 2``."""
    v = phi.space(np.array(0.0)) * (phi.momentum(np.array(s0)) + phi.momentum(np.array(-s0))) / 2
    return float(mass * v)


@dataclass
class ConePairing:
    eps: np.ndarray
    bohmian: np.ndarray
    wigner: np.ndarray
    limit: float
    bohmian_fit: FitResult
    wigner_fit: FitResult
    gap_fit: FitResult | None = None
    cs_gap: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def bohmian_gap(self) -> np.ndarray:
        return np.abs(self.bohmian - self.limit)

    @property
    def wigner_gap(self) -> np.ndarray:
        return np.abs(self.wigner - self.limit)

    @property
    def mutual_gap(self) -> np.ndarray:
        return np.abs(self.bohmian - self.wigner)


def cone_limit_pairing(eps_list, phi: TestFunction, grid: Grid, s0: float = 1.0, kappa: float = 1.0,
                       profile: Callable = gaussian_density_profile, gap_bump: Bump | None = None,
                       bin_width: float = DEFAULT_BIN_WIDTH, node_eta: float = DEFAULT_NODE_ETA) -> ConePairing:
    """Bohmian and Wigner pairings with ``phi`` along the eps sequence, with fitted limits.

    With ``gap_bump`` the coarse-bin second-moment gap of the Bohmian measure
    is paired with it as well; its limit certifies a non-mono-kinetic limit.
    """
    seq = EpsSequence(eps_list)
    b, w, gaps = [], [], []
    for e in seq.eps:
        st = ConeState(float(e), profile, s0, None, kappa)
        psi = build_cone_state(st, grid)
        fields = extract_fields(psi, node_eta)
        b.append(pair(bohmian_measure(fields), phi))
        w.append(wigner_pair(psi, phi))
        if gap_bump is not None:
            rho = np.where(fields.node_mask, 0.0, fields.rho)
            u = fields.u[0]
            gaps.append(coarse_gap_pairing(grid, rho, rho * u, rho * u * u, [gap_bump], bin_width)[0])
    b, w = np.array(b), np.array(w)
    mass = ConeState(1.0, profile).profile_mass()
    out = ConePairing(seq.eps, b, w, cone_limit(phi, s0, mass), fit_rate(zip(seq.eps, b)), fit_rate(zip(seq.eps, w)))
    if gap_bump is not None:
        out.cs_gap = np.array(gaps)
        out.gap_fit = fit_rate(zip(seq.eps, out.cs_gap))
    out.meta = {"kappa": kappa, "s0": s0, "bin_width": bin_width}
    return out
