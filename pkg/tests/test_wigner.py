import numpy as np
import pytest
from hypothesis import given, strategies as st

from bohmlab.bohmian import EmpiricalPhaseMeasure
from bohmlab.core import Bump, Grid, TestFunction, WaveFunction, gaussian_state, plane_wave
from bohmlab.wigner import (husimi, read_raster, weak_distance, wigner_moments, wigner_p_moments, wigner_pair,
                            wigner_second_moment, wigner_transform, write_raster, write_wigner_csv)


def gaussian_wigner(x, p, eps, x0, p0, s):
    return np.exp(-((x - x0) ** 2) / (2 * s**2) - 2 * s**2 * (p - p0) ** 2 / eps**2) / (np.pi * eps)


def test_gaussian_wigner_closed_form_on_central_rows():
    g = Grid(-6, 6, 256)
    eps, x0, p0, s = 0.2, 0.3, 0.4, 0.5
    w = wigner_transform(gaussian_state(g, eps, x0, p0, s))
    # rows half a box away from the packet carry its periodic ghost
    rows = np.abs(g.x - x0) < 2
    X, P = np.meshgrid(w.x[rows], w.p, indexing="ij")
    assert np.max(np.abs(w.values[rows] - gaussian_wigner(X, P, eps, x0, p0, s))) < 1e-12
    assert w.imag_residue < 1e-12


@given(seed=st.integers(0, 10_000))
def test_p_marginals_are_density_and_current(seed):
    r = np.random.default_rng(seed)
    g = Grid(-6, 6, 128)
    c = r.normal(size=3) + 1j * r.normal(size=3)
    v = sum(c[j] * np.exp(1j * (j + 1) * g.x) for j in range(3)) * np.exp(-g.x**2)
    psi = WaveFunction(g, v, 0.3)
    w = wigner_transform(psi)
    m0, m1 = wigner_moments(w)
    J = 0.3 * np.imag(np.conj(v) * np.gradient(v, g.dx))  # only used for a sanity scale
    assert np.max(np.abs(m0 - psi.density)) < 1e-12 * np.max(psi.density) + 1e-14
    e0, e1, e2 = wigner_p_moments(psi)
    assert np.max(np.abs(e0 - m0)) < 1e-11 * np.max(psi.density)
    assert np.max(np.abs(e1 - m1)) < 1e-11 * (np.max(np.abs(J)) + np.max(psi.density))
    assert np.max(np.abs(e2 - wigner_second_moment(w))) < 1e-10 * np.max(np.abs(e2))


def test_plane_wave_wigner_sits_on_one_momentum():
    g = Grid(-np.pi, np.pi, 64)
    eps = 0.1
    w = wigner_transform(plane_wave(g, eps, 1.0))
    col = np.argmin(np.abs(w.p - 1.0))
    assert abs(w.p[col] - 1.0) < 1e-12
    assert np.max(np.abs(np.delete(w.values, col, axis=1))) < 1e-12
    assert w.mass == pytest.approx(2 * np.pi, rel=1e-12)


def test_windowed_transform_matches_full_columns():
    g = Grid(-6, 6, 256)
    psi = gaussian_state(g, 0.1, 0.0, 0.5, 0.6)
    full = wigner_transform(psi)
    part = wigner_transform(psi, p_window=(0.0, 1.0))
    keep = (full.p >= 0.0) & (full.p <= 1.0)
    assert np.array_equal(part.p, full.p[keep])
    assert np.max(np.abs(part.values - full.values[:, keep])) < 1e-14


def test_pairing_with_polynomial_and_compact_momentum_factors():
    g = Grid(-6, 6, 256)
    eps, p0 = 0.1, 0.5
    psi = gaussian_state(g, eps, 0.0, p0, 0.6)
    b = Bump(0.0, 2.0)
    # the p-factor p pairs to the current; for a Gaussian that is p0 * rho
    by_poly = wigner_pair(psi, TestFunction(b, Bump(0.0, np.inf, (0.0, 1.0))))
    assert by_poly == pytest.approx(p0 * np.sum(b(g.x) * psi.density) * g.dx, rel=1e-10)
    # a compact p-factor far wider than the momentum spread acts like 1
    wide = wigner_pair(psi, TestFunction(b, Bump(p0, 3.0)))
    assert wide == pytest.approx(np.sum(b(g.x) * psi.density * Bump(p0, 3.0)(p0)) * g.dx, rel=1e-3)


def test_husimi_is_nonnegative_and_smooths_the_wigner_function():
    g = Grid(-6, 6, 256)
    eps, x0, p0, s = 0.2, 0.2, -0.3, 0.4
    h = husimi(gaussian_state(g, eps, x0, p0, s))
    assert h.kind == "husimi"
    assert np.min(h.values) >= 0
    # Gaussian smoothing adds eps/2 to the x-variance and eps/2 to the p-variance
    sx2 = s**2 + eps / 2
    sp2 = eps**2 / (4 * s**2) + eps / 2
    X, P = np.meshgrid(h.x, h.p, indexing="ij")
    expect = np.exp(-((X - x0) ** 2) / (2 * sx2) - (P - p0) ** 2 / (2 * sp2)) / (2 * np.pi * np.sqrt(sx2 * sp2))
    rows = np.abs(g.x) < 3
    assert np.max(np.abs(h.values[rows] - expect[rows])) < 1e-8
    assert h.mass == pytest.approx(1.0, abs=1e-8)


def test_weak_distance_of_opposite_momentum_atoms():
    b = Bump(0.0, 1.0)
    phi = TestFunction(b, Bump(0.0, 2.0))
    a = EmpiricalPhaseMeasure([0.0], [0.5], [1.0])
    c = EmpiricalPhaseMeasure([0.0], [0.5], [1.0])
    assert weak_distance(a, c, [phi], (-1, 1), (-2, 2)) == 0.0
    d = EmpiricalPhaseMeasure([0.0], [-0.5], [1.0])
    assert weak_distance(a, d, [TestFunction(b, Bump(0.5, 0.5))], (-1, 1), (0, 1)) > 0
    with pytest.raises(ValueError):
        weak_distance(a, d, [], (-1, 1), (-1, 1))


def test_raster_round_trip_and_csv(tmp_path):
    g = Grid(-4, 4, 32)
    w = wigner_transform(gaussian_state(g, 0.2, 0.0, 0.0, 0.5), p_window=(-1, 1))
    write_raster(tmp_path / "w.bin", w)
    back = read_raster(tmp_path / "w.bin")
    assert np.array_equal(back.values, w.values) and np.array_equal(back.p, w.p)
    assert back.epsilon == w.epsilon and back.kind == w.kind
    write_wigner_csv(tmp_path / "w.csv", w)
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "x,p,w" and len(lines) == 1 + w.values.size
