"""Madelung fields, the Bohm potential and static estimates.

Velocity-type quantities (``u``, ``V_B``, ``|J|**2/rho``) are only defined
where the density is not negligible. Nodes below ``node_eta * max(rho)`` are
masked explicitly and every routine reports what it dropped.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Grid, Potential, TestFunction, WaveFunction, quadrature, spectral_derivative, spectral_gradient
from .errors import DegenerateStateError
from .schrodinger import Timeline

__all__ = [
    "HydroFields",
    "KineticSplit",
    "StaticBoundReport",
    "extract_fields",
    "bohm_potential",
    "bohm_force",
    "kinetic_densities",
    "kinetic_split",
    "qhd_residual",
    "static_bound",
    "div_grad_abs_outer",
    "write_fields_csv",
]

DEFAULT_NODE_ETA = 1e-6


def _node_mask(rho: np.ndarray, node_eta: float) -> np.ndarray:
    top = float(np.max(rho))
    if top <= 0:
        raise DegenerateStateError("density vanishes identically")
    return rho < node_eta * top


def _safe_div(a, b, mask):
    out = np.zeros(np.broadcast(a, b).shape, dtype=np.result_type(a, b, float))
    np.divide(a, b, out=out, where=~np.broadcast_to(mask, out.shape))
    return out


@dataclass(frozen=True)
class HydroFields:
    """Density, current, velocity and Bohm potential of one state.

    ``J`` and ``u`` carry a leading axis of length ``d``. ``u`` and ``V_B`` are
    zero on masked nodes.
    """

    grid: Grid
    epsilon: float
    rho: np.ndarray
    J: np.ndarray
    u: np.ndarray
    V_B: np.ndarray
    node_mask: np.ndarray

    @property
    def mass(self) -> float:
        return quadrature(self.rho, self.grid)

    @property
    def masked_mass(self) -> float:
        return quadrature(np.where(self.node_mask, self.rho, 0.0), self.grid)


def extract_fields(psi: WaveFunction, node_eta: float = DEFAULT_NODE_ETA) -> HydroFields:
    grid, eps = psi.grid, psi.epsilon
    v = psi.values
    grad = spectral_gradient(v, grid)
    rho = np.abs(v) ** 2
    mask = _node_mask(rho, node_eta)
    J = eps * np.imag(np.conj(v) * grad)
    u = _safe_div(J, rho, mask)
    V_B = bohm_potential(rho, grid, eps, node_eta=node_eta, sqrt_rho=np.abs(v))
    return HydroFields(grid, eps, rho, J, u, V_B, mask)


def bohm_potential(rho: np.ndarray, grid: Grid, epsilon: float, node_eta: float = DEFAULT_NODE_ETA,
                   sqrt_rho: np.ndarray | None = None) -> np.ndarray:
    """``-(eps**2/2) Laplace(sqrt(rho)) / sqrt(rho)`` on unmasked nodes, zero elsewhere.

    Pass ``sqrt_rho = |psi|`` when available; it avoids the cancellation of
    taking a square root of a squared modulus near nodes.
    """
    a = np.sqrt(np.maximum(rho, 0.0)) if sqrt_rho is None else np.asarray(sqrt_rho, dtype=float)
    mask = _node_mask(np.asarray(rho), node_eta)
    lap = sum(spectral_derivative(a, grid, axis=i, order=2) for i in range(grid.d))
    return -0.5 * epsilon**2 * _safe_div(lap, a, mask)


def bohm_force(psi: WaveFunction, node_eta: float = DEFAULT_NODE_ETA) -> np.ndarray:
    """Gradient of the Bohm potential, ``(d, ...)``, zero on masked nodes.

    Uses ``grad(Lap a / a) = grad(Lap a)/a - Lap(a) grad(a)/a**2`` with
    ``a = |psi|`` so that no derivative of a masked quotient is taken.
    """
    grid, eps = psi.grid, psi.epsilon
    a = np.abs(psi.values)
    mask = _node_mask(a**2, node_eta)
    lap = sum(spectral_derivative(a, grid, axis=i, order=2) for i in range(grid.d))
    out = []
    for i in range(grid.d):
        grad_lap = spectral_derivative(lap, grid, axis=i)
        da = spectral_derivative(a, grid, axis=i)
        term = _safe_div(grad_lap, a, mask) - _safe_div(lap * da, a**2, mask)
        out.append(-0.5 * eps**2 * term)
    return np.stack(out)


def kinetic_densities(psi: WaveFunction, node_eta: float = DEFAULT_NODE_ETA):
    """Pointwise split of ``eps**2 |grad psi|**2``.

    Returns ``(current, quantum, total, mask)`` where ``current = |J|**2/rho``
    and ``quantum = eps**2 |grad |psi||**2`` on unmasked nodes. On masked
    nodes ``current`` is set to zero and ``quantum`` to ``total``, so that
    ``current + quantum == total`` holds everywhere.
    """
    grid, eps = psi.grid, psi.epsilon
    v = psi.values
    grad = spectral_gradient(v, grid)
    rho = np.abs(v) ** 2
    mask = _node_mask(rho, node_eta)
    z = np.conj(v) * grad
    total = eps**2 * np.sum(np.abs(grad) ** 2, axis=0)
    current = eps**2 * np.sum(_safe_div(np.imag(z) ** 2, rho, mask), axis=0)
    quantum = eps**2 * np.sum(_safe_div(np.real(z) ** 2, rho, mask), axis=0)
    quantum = np.where(mask, total, quantum)
    return current, quantum, total, mask


@dataclass(frozen=True)
class KineticSplit:
    """Current and quantum parts of the kinetic energy.

    Iterates as ``(current_energy, quantum_energy)``; ``masked_energy`` is the
    kinetic energy sitting on masked nodes and left out of both parts.
    """

    current_energy: float
    quantum_energy: float
    masked_energy: float

    def __iter__(self):
        yield self.current_energy
        yield self.quantum_energy


def kinetic_split(psi: WaveFunction, node_eta: float = 1e-14) -> KineticSplit:
    current, quantum, total, mask = kinetic_densities(psi, node_eta)
    g = psi.grid
    return KineticSplit(
        0.5 * quadrature(current, g),
        0.5 * quadrature(np.where(mask, 0.0, quantum), g),
        0.5 * quadrature(np.where(mask, total, 0.0), g),
    )


def qhd_residual(timeline: Timeline, V: Potential, tests: Sequence[TestFunction],
                 node_eta: float = DEFAULT_NODE_ETA) -> np.ndarray:
    """Weak residuals of the two hydrodynamic equations on a line.

    For each spatial test function ``g`` and interior frame ``k``::

        r1 = <g, d_t rho> - <g', J>
        r2 = <g, d_t J> - <g', J**2/rho + eps**2 (|psi|')**2 - (eps**2/4) rho''> + <g, rho V'>

    with centered time differences; the second flux term is the weak form of
    ``rho V_B'``.  Returns an array ``(len(tests), 2)`` of
    the largest ``|r1|`` and ``|r2|`` over interior frames.
    """
    if len(timeline) < 3:
        raise ValueError("qhd_residual needs at least three frames")
    grid, eps = timeline.grid, timeline.epsilon
    x = grid.x
    h = timeline.frame_dt
    dV = V.gradient(x)
    rho, J, stress = [], [], []
    for _, psi in timeline:
        cur, quant, _, _ = kinetic_densities(psi, node_eta)
        r = psi.density
        rho.append(r)
        J.append(eps * np.imag(np.conj(psi.values) * spectral_derivative(psi.values, grid)))
        stress.append(cur + quant - 0.25 * eps**2 * spectral_derivative(r, grid, order=2))
    rho, J, stress = np.array(rho), np.array(J), np.array(stress)
    out = np.zeros((len(tests), 2))
    for i, phi in enumerate(tests):
        if phi.is_zero:
            continue
        g, dg = phi.space(x), phi.space.derivative(x)
        drho = (rho[2:] - rho[:-2]) / (2 * h)
        dJ = (J[2:] - J[:-2]) / (2 * h)
        r1 = quadrature(g * drho - dg * J[1:-1], grid)
        r2 = quadrature(g * dJ - dg * stress[1:-1] + g * rho[1:-1] * dV, grid)
        out[i] = np.max(np.abs(r1)), np.max(np.abs(r2))
    return out


def div_grad_abs_outer(psi: WaveFunction, node_eta: float = DEFAULT_NODE_ETA):
    """Pointwise ``d/dx ((d|psi|/dx)**2)`` on a line, from ``psi``, ``psi'`` and ``psi''`` only.

    Uses ``(|psi|')**2 = Re(|psi'|**2 + (conj(psi)/psi) psi'**2) / 2`` and
    differentiates it by the product rule, so no derivative of ``|psi|`` is
    ever taken numerically. Returns ``(field, mask)``; masked nodes hold zero.
    """
    g = psi.grid
    v = psi.values
    d1 = spectral_derivative(v, g)
    d2 = spectral_derivative(v, g, order=2)
    mask = _node_mask(np.abs(v) ** 2, node_eta)
    ratio = _safe_div(np.conj(v), v, mask)
    im_log = np.imag(_safe_div(d1, v, mask))
    val = (np.real(d2 * np.conj(d1)) + np.real(ratio * d1 * d2)
           + 0.5 * np.real(d1**2 * (-2j) * im_log * ratio))
    return np.where(mask, 0.0, val), mask


@dataclass(frozen=True)
class StaticBoundReport:
    """Pointwise divergence estimate and its integrated form against one test function.

    ``rhs_field`` is the pointwise majorant, ``M_eps`` the explicit constant
    bounding ``integral_lhs``. ``constant`` records which majorant was used.
    """

    lhs_field: np.ndarray
    rhs_field: np.ndarray
    node_mask: np.ndarray
    lhs_max: float
    margin: float
    integral_lhs: float
    M_eps: float
    constant: str
    flagged: bool

    @property
    def pointwise_holds(self) -> bool:
        return not self.flagged

    @property
    def integral_holds(self) -> bool:
        return self.integral_lhs <= self.M_eps * (1 + 1e-8)


def static_bound(psi: WaveFunction, phi: TestFunction, constant: str = "paper",
                 node_eta: float = DEFAULT_NODE_ETA, p_window: tuple = (-50.0, 50.0),
                 rtol: float = 1e-8) -> StaticBoundReport:
    """Check the pointwise divergence estimate and the integrated bound on a line.

    ``constant="paper"`` uses the majorant ``|psi''psi'| + |Im(psi'/psi)| |psi'|**2 / 2``
    together with the constant ``M = ||psi'||**2 / eps * sup_xi int |xi phi| dx
    + eps ||psi'|| ||psi''|| sup_xi int |phi| dx`` (norms over the whole box).
    ``constant="corrected"`` uses ``2|psi''psi'| + |Im(psi'/psi)| |psi'|**2``, which
    is what the product rule actually yields, and the matching constant
    ``M = ||psi'||**2 / eps * sup |xi phi| + 2 ||psi'|| ||psi''|| sup |phi|``.
    """
    if constant not in ("paper", "corrected"):
        raise ValueError("constant must be 'paper' or 'corrected'")
    g, eps = psi.grid, psi.epsilon
    v = psi.values
    d1 = spectral_derivative(v, g)
    d2 = spectral_derivative(v, g, order=2)
    lhs, mask = div_grad_abs_outer(psi, node_eta)
    lhs = np.abs(lhs)
    im_log = np.abs(np.imag(_safe_div(d1, v, mask)))
    c1, c2 = (1.0, 0.5) if constant == "paper" else (2.0, 1.0)
    rhs = np.where(mask, 0.0, c1 * np.abs(d2 * d1) + c2 * im_log * np.abs(d1) ** 2)
    gap = (rhs - lhs)[~mask]
    scale = max(float(np.max(rhs)), float(np.max(lhs)), 1e-300)
    margin = float(np.min(gap) / scale)
    flagged = bool(np.any(gap < -rtol * scale))

    u = _safe_div(eps * np.imag(np.conj(v) * d1), np.abs(v) ** 2, mask)
    phi_u = phi.space(g.x) * phi.momentum(u)
    integral = quadrature(np.where(mask, 0.0, lhs * np.abs(phi_u)), g)

    n1 = np.sqrt(quadrature(np.abs(d1) ** 2, g))
    n2 = np.sqrt(quadrature(np.abs(d2) ** 2, g))
    xi = np.linspace(*p_window, 20001)
    sig = np.abs(phi.momentum(xi))
    if constant == "paper":
        int_g = quadrature(np.abs(phi.space(g.x)), g)
        M = n1**2 / eps * int_g * np.max(np.abs(xi) * sig) + eps * n1 * n2 * int_g * np.max(sig)
    else:
        sup_g = float(np.max(np.abs(phi.space(g.x))))
        M = n1**2 / eps * sup_g * np.max(np.abs(xi) * sig) + 2 * n1 * n2 * sup_g * np.max(sig)
    return StaticBoundReport(lhs, rhs, mask, float(np.max(lhs)), margin, float(integral), float(M),
                             constant, flagged)


def write_fields_csv(path, fields: HydroFields) -> None:
    """CSV with columns ``x, rho, Jx, ux, V_B, masked`` (plus ``y, Jy, uy`` in 2-D)."""
    g = fields.grid
    coords = [c.ravel() for c in g.mesh]
    names = ["x", "y"][: g.d]
    cols = names + ["rho"] + ["J" + n for n in names] + ["u" + n for n in names] + ["V_B", "masked"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        data = coords + [fields.rho.ravel()] + [j.ravel() for j in fields.J] + [u.ravel() for u in fields.u]
        data += [fields.V_B.ravel(), fields.node_mask.ravel().astype(int)]
        for row in zip(*data):
            w.writerow([repr(float(r)) if not isinstance(r, (np.integer, int)) else int(r) for r in row])
