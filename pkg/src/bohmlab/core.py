"""Grids, states, potentials, test functions and spectral calculus.

Everything here works on a periodic box with the rectangle rule, which is
spectrally accurate for smooth periodic integrands. One- and two-dimensional
grids are supported; most downstream modules only use ``d == 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidStateError, SupportError

__all__ = [
    "Grid",
    "WaveFunction",
    "Potential",
    "Bump",
    "TestFunction",
    "l2_norm_sq",
    "spectral_gradient",
    "spectral_derivative",
    "spectral_laplacian",
    "quadrature",
    "boundary_mass",
    "fourier_upsample",
    "trig_interpolate",
    "gaussian_state",
    "plane_wave",
    "free_potential",
    "harmonic_potential",
    "lorentzian_potential",
]


def _as_tuple(value, d=None):
    if np.ndim(value) == 0:
        return (value,) if d is None else (value,) * d
    return tuple(value)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[x_min, x_max)`` per axis.

    Scalars build a line; sequences of length two build a plane. ``n`` must be
    a power of two on every axis.
    """

    x_min: tuple
    x_max: tuple
    n: tuple

    def __post_init__(self):
        n = tuple(int(v) for v in _as_tuple(self.n))
        d = len(n)
        lo = tuple(float(v) for v in _as_tuple(self.x_min, d))
        hi = tuple(float(v) for v in _as_tuple(self.x_max, d))
        if d not in (1, 2) or len(lo) != d or len(hi) != d:
            raise ValueError("grid dimension must be 1 or 2 with matching bounds")
        for a, b, m in zip(lo, hi, n):
            if not b > a:
                raise ValueError(f"x_max must exceed x_min (got {a}, {b})")
            if m < 2 or m & (m - 1):
                raise ValueError(f"n must be a power of two (got {m})")
        object.__setattr__(self, "x_min", lo)
        object.__setattr__(self, "x_max", hi)
        object.__setattr__(self, "n", n)

    @property
    def d(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple:
        return self.n

    @property
    def lengths(self) -> tuple:
        return tuple(b - a for a, b in zip(self.x_min, self.x_max))

    @property
    def spacing(self) -> tuple:
        return tuple(L / m for L, m in zip(self.lengths, self.n))

    @property
    def dx(self) -> float:
        """Spacing of a one-dimensional grid."""
        self._require_line()
        return self.spacing[0]

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def axes(self) -> list[np.ndarray]:
        return [a + h * np.arange(m) for a, h, m in zip(self.x_min, self.spacing, self.n)]

    @property
    def x(self) -> np.ndarray:
        """Node coordinates of a one-dimensional grid."""
        self._require_line()
        return self.axes[0]

    @property
    def mesh(self) -> tuple:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @property
    def wavenumber_axes(self) -> list[np.ndarray]:
        return [2 * np.pi * np.fft.fftfreq(m, h) for m, h in zip(self.n, self.spacing)]

    @property
    def k(self) -> np.ndarray:
        """Angular wavenumbers (FFT order) of a one-dimensional grid."""
        self._require_line()
        return self.wavenumber_axes[0]

    @property
    def k_mesh(self) -> tuple:
        return tuple(np.meshgrid(*self.wavenumber_axes, indexing="ij"))

    @property
    def k_squared(self) -> np.ndarray:
        return sum(kk**2 for kk in self.k_mesh)

    @property
    def dk(self) -> tuple:
        """Spacing of the dual momentum grid, ``2*pi/L`` per axis."""
        return tuple(2 * np.pi / L for L in self.lengths)

    def central_mask(self, fraction: float = 0.8) -> np.ndarray:
        """Boolean mask of the nodes inside the central ``fraction`` of every axis."""
        masks = []
        for ax, a, L in zip(self.mesh, self.x_min, self.lengths):
            c = a + L / 2
            masks.append(np.abs(ax - c) <= fraction * L / 2)
        return np.logical_and.reduce(masks)

    def wrap(self, x: np.ndarray, axis: int = 0) -> np.ndarray:
        """Map positions back into ``[x_min, x_max)`` along ``axis``."""
        a, L = self.x_min[axis], self.lengths[axis]
        return a + np.mod(np.asarray(x) - a, L)

    def _require_line(self):
        if self.d != 1:
            raise ValueError("operation defined for one-dimensional grids only")


@dataclass(frozen=True)
class WaveFunction:
    """Complex field on a grid together with its semiclassical parameter."""

    grid: Grid
    values: np.ndarray
    epsilon: float

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            raise InvalidStateError(f"values shape {values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidStateError("wave function contains non-finite values")
        if not 0 < self.epsilon <= 1:
            raise InvalidStateError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "epsilon", float(self.epsilon))

    def normalized(self) -> "WaveFunction":
        return self.with_values(self.values / np.sqrt(l2_norm_sq(self)))

    def with_values(self, values: np.ndarray) -> "WaveFunction":
        return WaveFunction(self.grid, values, self.epsilon)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def __mul__(self, c):
        return self.with_values(c * self.values)

    __rmul__ = __mul__


def l2_norm_sq(psi: WaveFunction) -> float:
    """Squared L2 norm by the rectangle rule."""
    v = np.asarray(psi.values)
    if not np.all(np.isfinite(v)):
        raise InvalidStateError("wave function contains non-finite values")
    return float(np.sum(np.abs(v) ** 2) * psi.grid.cell_volume)


def quadrature(f: np.ndarray, grid: Grid):
    """Rectangle rule over the trailing grid axes of ``f``."""
    f = np.asarray(f)
    axes = tuple(range(f.ndim - grid.d, f.ndim))
    out = np.sum(f, axis=axes) * grid.cell_volume
    return out.item() if np.ndim(out) == 0 else out


def spectral_derivative(f: np.ndarray, grid: Grid, axis: int = 0, order: int = 1) -> np.ndarray:
    """Exact derivative of the trigonometric interpolant along ``axis``.

    The Nyquist mode is dropped for odd orders so that real fields stay real.
    """
    f = np.asarray(f)
    k = grid.wavenumber_axes[axis].copy()
    m = grid.n[axis]
    mult = (1j * k) ** order
    if order % 2 == 1:
        mult[m // 2] = 0.0
    shape = [1] * grid.d
    shape[axis] = m
    fax = f.ndim - grid.d + axis
    out = np.fft.ifft(np.fft.fft(f, axis=fax) * mult.reshape(shape), axis=fax)
    if np.isrealobj(f):
        return out.real
    return out


def spectral_gradient(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral gradient, stacked along a new leading axis of length ``d``."""
    return np.stack([spectral_derivative(f, grid, axis=a) for a in range(grid.d)])


def spectral_laplacian(f: np.ndarray, grid: Grid) -> np.ndarray:
    f = np.asarray(f)
    out = np.fft.ifftn(-grid.k_squared * np.fft.fftn(f))
    return out.real if np.isrealobj(f) else out


def boundary_mass(psi: WaveFunction, fraction: float = 0.8) -> float:
    """Mass carried by the nodes outside the central ``fraction`` of the box."""
    rho = psi.density
    return float(np.sum(rho[~psi.grid.central_mask(fraction)]) * psi.grid.cell_volume)


def fourier_upsample(f: np.ndarray, factor: int) -> np.ndarray:
    """Values of the trigonometric interpolant of a 1-D periodic ``f`` on a grid ``factor`` times finer."""
    f = np.asarray(f)
    n = f.shape[-1]
    F = np.fft.fft(f, axis=-1)
    G = np.zeros(f.shape[:-1] + (n * factor,), dtype=complex)
    h = n // 2
    G[..., :h] = F[..., :h]
    G[..., -h + 1:] = F[..., h + 1:]
    # split the Nyquist coefficient symmetrically
    G[..., h] = 0.5 * F[..., h]
    G[..., -h] = 0.5 * F[..., h]
    out = np.fft.ifft(G, axis=-1) * factor
    return out.real if np.isrealobj(f) else out


def trig_interpolate(f: np.ndarray, grid: Grid, points: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Evaluate the trigonometric interpolant of a 1-D periodic field at arbitrary points."""
    f = np.asarray(f)
    n = grid.n[0]
    F = np.fft.fft(f) / n
    k = grid.k.copy()
    F[n // 2] *= 0.5
    # the Nyquist term becomes a cosine: keep both signs
    k_all = np.concatenate([k, [-k[n // 2]]])
    F_all = np.concatenate([F, [F[n // 2]]])
    pts = np.asarray(points, dtype=float).ravel() - grid.x_min[0]
    out = np.empty(pts.size, dtype=complex)
    for s in range(0, pts.size, chunk):
        e = np.exp(1j * np.outer(pts[s:s + chunk], k_all))
        out[s:s + chunk] = e @ F_all
    out = out.reshape(np.shape(points))
    return out.real if np.isrealobj(f) else out


@dataclass(frozen=True)
class Potential:
    """External potential with exact derivatives.

    ``value`` accepts one coordinate array per dimension. ``gradient``,
    ``hessian`` and ``third`` are one-dimensional derivative callables and may
    be ``None`` when the potential is only used for sampling.
    """

    name: str
    value: Callable[..., np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    hessian: Callable[[np.ndarray], np.ndarray] | None = None
    third: Callable[[np.ndarray], np.ndarray] | None = None
    smoothness: str = "C3b"
    unbounded_test_only: bool = False
    quadratic: bool = False

    def __post_init__(self):
        if self.smoothness not in ("C1b", "C2b", "C3b"):
            raise ValueError(f"unknown smoothness tag {self.smoothness!r}")

    def sample(self, grid: Grid) -> np.ndarray:
        v = np.broadcast_to(np.asarray(self.value(*grid.mesh), dtype=float), grid.shape)
        if not np.all(np.isfinite(v)):
            raise InvalidStateError(f"potential {self.name} is not finite on the grid")
        return np.array(v)

    def check_regularity(self, grid: Grid) -> float:
        """Finite-difference sup of the third derivative on a 1-D grid."""
        v = self.sample(grid)
        h = grid.dx
        d3 = (np.roll(v, -2) - 2 * np.roll(v, -1) + 2 * np.roll(v, 1) - np.roll(v, 2)) / (2 * h**3)
        inner = grid.central_mask(0.9)
        return float(np.max(np.abs(d3[inner])))

    def shifted(self, c: float) -> "Potential":
        f = self.value
        return Potential(self.name + f"+{c}", lambda *xs: f(*xs) + c, self.gradient, self.hessian,
                         self.third, self.smoothness, self.unbounded_test_only, self.quadratic)


def free_potential() -> Potential:
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return Potential("free", lambda *xs: 0.0 * sum(np.asarray(x, dtype=float) for x in xs),
                     zero, zero, zero, "C3b", quadratic=True)


def harmonic_potential(omega: float = 1.0) -> Potential:
    """``omega**2 |x|**2 / 2``; unbounded, so admitted for tests only."""
    w2 = omega**2
    return Potential(
        "harmonic",
        lambda *xs: 0.5 * w2 * sum(np.asarray(x, dtype=float) ** 2 for x in xs),
        lambda x: w2 * np.asarray(x, dtype=float),
        lambda x: w2 * np.ones_like(np.asarray(x, dtype=float)),
        lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        "C3b",
        unbounded_test_only=True,
        quadratic=True,
    )


def lorentzian_potential(amplitude: float = 1.0) -> Potential:
    """Bounded ``amplitude / (1 + x**2)`` with all derivatives bounded."""
    A = amplitude

    def value(*xs):
        r2 = sum(np.asarray(x, dtype=float) ** 2 for x in xs)
        return A / (1 + r2)

    def grad(x):
        x = np.asarray(x, dtype=float)
        return -2 * A * x / (1 + x**2) ** 2

    def hess(x):
        x = np.asarray(x, dtype=float)
        return A * (6 * x**2 - 2) / (1 + x**2) ** 3

    def third(x):
        x = np.asarray(x, dtype=float)
        return 24 * A * x * (1 - x**2) / (1 + x**2) ** 4

    return Potential("lorentzian", value, grad, hess, third, "C3b")


def _bump(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1
    ri = r[inside]
    out[inside] = np.exp(1 - 1 / (1 - ri**2))
    return out


def _bump_prime(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1
    ri = r[inside]
    out[inside] = np.exp(1 - 1 / (1 - ri**2)) * (-2 * ri / (1 - ri**2) ** 2)
    return out


@dataclass(frozen=True)
class Bump:
    """Polynomial times the smooth bump ``exp(1 - 1/(1 - r**2))``.

    ``z = s - center`` and ``r = z / radius``; the polynomial is evaluated in
    ``z`` with coefficients in increasing degree. ``radius = inf`` drops the
    bump and leaves a pure polynomial (used for moment symbols such as ``p**2``).
    """

    center: float = 0.0
    radius: float = np.inf
    coeffs: tuple = (1.0,)
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.radius > 0:
            raise ValueError("bump radius must be positive")

    @property
    def compact(self) -> bool:
        return np.isfinite(self.radius)

    def __call__(self, s):
        z = np.asarray(s, dtype=float) - self.center
        poly = np.polynomial.polynomial.polyval(z, self.coeffs)
        if not self.compact:
            return self.scale * poly
        return self.scale * poly * _bump(z / self.radius)

    def derivative(self, s):
        z = np.asarray(s, dtype=float) - self.center
        c = np.asarray(self.coeffs)
        poly = np.polynomial.polynomial.polyval(z, c)
        dpoly = np.polynomial.polynomial.polyval(z, np.polynomial.polynomial.polyder(c)) if c.size > 1 else 0.0 * z
        if not self.compact:
            return self.scale * dpoly
        r = z / self.radius
        return self.scale * (dpoly * _bump(r) + poly * _bump_prime(r) / self.radius)

    def support(self) -> tuple[float, float]:
        return (self.center - self.radius, self.center + self.radius)

    def scaled(self, c: float) -> "Bump":
        return Bump(self.center, self.radius, self.coeffs, self.scale * c)

    @classmethod
    def one(cls) -> "Bump":
        return cls()


@dataclass(frozen=True)
class TestFunction:
    """Separable test function ``time(t) * space(x) * momentum(p)``.

    ``chi(t, x) = time(t) * space(x)`` and ``sigma(p) = momentum(p)``.
    """

    __test__ = False  # keep pytest from collecting this class

    space: Bump = field(default_factory=Bump)
    momentum: Bump = field(default_factory=Bump)
    time: Bump = field(default_factory=Bump)

    def __call__(self, x, p, t=None):
        val = self.space(x) * self.momentum(p)
        if t is not None:
            val = val * self.time(t)
        return val

    def chi(self, t, x):
        return np.multiply.outer(self.time(t), self.space(x))

    def dchi_dt(self, t, x):
        return np.multiply.outer(self.time.derivative(t), self.space(x))

    def dchi_dx(self, t, x):
        return np.multiply.outer(self.time(t), self.space.derivative(x))

    def sigma(self, p):
        return self.momentum(p)

    def dsigma(self, p):
        return self.momentum.derivative(p)

    @property
    def is_zero(self) -> bool:
        return self.space.scale == 0 or self.momentum.scale == 0 or self.time.scale == 0

    def c1_norm(self, x_window: tuple, p_window: tuple, samples: int = 2001) -> float:
        """Sampled ``sup|phi| + sup|grad phi|`` over a phase-space window."""
        xs = np.linspace(*x_window, samples)
        ps = np.linspace(*p_window, samples)
        fx, dfx = np.abs(self.space(xs)), np.abs(self.space.derivative(xs))
        fp, dfp = np.abs(self.momentum(ps)), np.abs(self.momentum.derivative(ps))
        return float(fx.max() * fp.max() + dfx.max() * fp.max() + fx.max() * dfp.max())

    def normalized(self, x_window: tuple, p_window: tuple) -> "TestFunction":
        c = self.c1_norm(x_window, p_window)
        if c == 0:
            return self
        return TestFunction(self.space.scaled(1 / c), self.momentum, self.time)

    def check_support(self, x_window: tuple | None = None, p_window: tuple | None = None):
        for bump, win, label in ((self.space, x_window, "x"), (self.momentum, p_window, "p")):
            if win is None or not bump.compact:
                continue
            lo, hi = bump.support()
            if lo < win[0] or hi > win[1]:
                raise SupportError(f"{label}-support [{lo}, {hi}] leaves window {win}")


def gaussian_state(grid: Grid, epsilon: float, x0: float = 0.0, p0: float = 0.0,
                   sigma: float = 1.0, phase: Callable | None = None) -> WaveFunction:
    """Normalized 1-D Gaussian whose density has standard deviation ``sigma``.

    The state is ``exp(-(x-x0)**2/(4 sigma**2) + i p0 (x-x0)/eps)`` times an
    optional extra phase ``exp(i phase(x)/eps)``.
    """
    x = grid.x
    amp = (2 * np.pi * sigma**2) ** -0.25 * np.exp(-((x - x0) ** 2) / (4 * sigma**2))
    arg = p0 * (x - x0)
    if phase is not None:
        arg = arg + phase(x)
    return WaveFunction(grid, amp * np.exp(1j * arg / epsilon), epsilon)


def plane_wave(grid: Grid, epsilon: float, p0: float) -> WaveFunction:
    """``exp(i p0 x / eps)``; ``p0/eps`` must be a box wavenumber for exactness."""
    return WaveFunction(grid, np.exp(1j * p0 * grid.x / epsilon), epsilon)
