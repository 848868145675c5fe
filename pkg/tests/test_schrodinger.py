import numpy as np
import pytest
from hypothesis import given, strategies as st

from bohmlab.core import Grid, free_potential, gaussian_state, harmonic_potential, plane_wave
from bohmlab.errors import DomainEscapeError
from bohmlab.schrodinger import (PropagatorConfig, Timeline, default_dt, energy, kinetic_energy, mass, propagate,
                                 read_snapshot, write_snapshot)


def free_gaussian_exact(x, t, eps, x0, p0, sigma):
    # density of a freely spreading Gaussian: width sigma * sqrt(1 + (eps t / (2 sigma^2))^2)
    s_t = sigma * np.sqrt(1 + (eps * t / (2 * sigma**2)) ** 2)
    return np.exp(-((x - x0 - p0 * t) ** 2) / (2 * s_t**2)) / np.sqrt(2 * np.pi * s_t**2)


def test_plane_wave_is_exact_up_to_phase():
    g = Grid(-np.pi, np.pi, 128)
    eps = 0.1
    psi = plane_wave(g, eps, 1.0)
    tl = propagate(psi, free_potential(), PropagatorConfig(0.01, 100, 50), boundary_guard=None)
    t = tl.times[-1]
    expect = psi.values * np.exp(-1j * t / (2 * eps))
    assert np.max(np.abs(tl.values[-1] - expect)) < 1e-11


def test_free_gaussian_density_matches_closed_form():
    g = Grid(-8, 8, 1024)
    eps = 0.1
    psi = gaussian_state(g, eps, 0.0, 0.5, 0.5)
    tl = propagate(psi, free_potential(), PropagatorConfig(1e-3, 1000, 250))
    for t, f in tl:
        assert np.max(np.abs(f.density - free_gaussian_exact(g.x, t, eps, 0.0, 0.5, 0.5))) < 1e-10


def test_harmonic_coherent_state_returns_after_one_period():
    g = Grid(-6, 6, 512)
    eps = 0.05
    psi = gaussian_state(g, eps, 1.0, 0.0, np.sqrt(eps / 2))
    n = 2000
    tl = propagate(psi, harmonic_potential(), PropagatorConfig(2 * np.pi / n, n, n))
    # the coherent state picks up a global phase exp(-i pi) after a full period
    assert np.max(np.abs(np.abs(tl.values[-1]) - np.abs(psi.values))) < 1e-5


@given(p0=st.floats(-1, 1), x0=st.floats(-1, 1))
def test_mass_and_energy_conserved(p0, x0):
    g = Grid(-8, 8, 256)
    psi = gaussian_state(g, 0.2, x0, p0, 0.7)
    V = harmonic_potential(0.5)
    tl = propagate(psi, V, PropagatorConfig(2e-3, 200, 50))
    M = tl.masses()
    E = np.array([energy(f, V) for _, f in tl])
    assert np.max(np.abs(M / M[0] - 1)) < 1e-12
    assert np.max(np.abs(E / E[0] - 1)) < 1e-6


def test_kinetic_energy_of_plane_wave():
    g = Grid(-np.pi, np.pi, 64)
    psi = plane_wave(g, 0.25, 1.0)
    assert kinetic_energy(psi) == pytest.approx(0.5 * mass(psi), rel=1e-13)


def test_boundary_guard_raises():
    g = Grid(-2, 2, 256)
    psi = gaussian_state(g, 0.1, 0.0, 1.5, 0.2)
    with pytest.raises(DomainEscapeError):
        propagate(psi, free_potential(), PropagatorConfig(1e-2, 200, 10))


def test_default_dt_resolves_phase():
    g = Grid(-4, 4, 1024)
    dt = default_dt(g, 0.01)
    assert dt <= 0.5 * g.dx**2 / 0.01 + 1e-15 and dt <= 0.005


def test_timeline_validation_and_lookup():
    g = Grid(0, 1, 8)
    vals = np.ones((3, 8), dtype=complex)
    tl = Timeline(g, 0.1, np.array([0.0, 0.5, 1.0]), vals)
    assert tl.index_of(0.5) == 1 and tl.frame_dt == 0.5
    with pytest.raises(ValueError):
        tl.index_of(0.3)
    with pytest.raises(Exception):
        Timeline(g, 0.1, np.array([0.0, 0.0, 1.0]), vals)


def test_snapshot_roundtrip(tmp_path):
    g = Grid(-3, 5, 64)
    psi = gaussian_state(g, 0.3, 1.0, 0.2, 0.6)
    write_snapshot(tmp_path / "s.bhsn", psi, 1.25)
    back, t = read_snapshot(tmp_path / "s.bhsn")
    assert t == 1.25 and back.epsilon == 0.3 and back.grid == g
    assert np.array_equal(back.values, psi.values)
