import numpy as np
import pytest
from hypothesis import given, strategies as st

from bohmlab.classical_limit import (DefectReport, EpsSequence, default_eps_sequence, defect_pairings, extrapolate,
                                     fit_rate, teq_check, temperature_tensor, time_localized, vlasov_weak_residual)
from bohmlab.core import Bump, Grid, TestFunction, free_potential, gaussian_state, plane_wave
from bohmlab.errors import ConvergenceError, SupportError
from bohmlab.schrodinger import PropagatorConfig, propagate
from bohmlab.wigner import wigner_transform

EPS = np.geomspace(1e-1, 1e-3, 7)


def pts(f):
    return [(e, f(e)) for e in EPS]


def test_fit_linear_approach():
    r = fit_rate(pts(lambda e: 3 + e))
    assert r.converged
    assert r.limit == pytest.approx(3, abs=1e-6)
    assert r.exponent == pytest.approx(1, abs=1e-3)


def test_fit_square_root_approach():
    r = fit_rate(pts(lambda e: 1 + 2 * np.sqrt(e)))
    assert r.converged
    assert r.limit == pytest.approx(1, abs=1e-5)
    assert r.exponent == pytest.approx(0.5, abs=1e-3)


def test_fit_flags_oscillation():
    assert not fit_rate(pts(lambda e: np.sin(1 / e))).converged


def test_fit_settled_and_superalgebraic_sequences():
    r = fit_rate(pts(lambda e: 2.0))
    assert r.converged and r.limit == 2.0
    r = fit_rate(pts(lambda e: 5e-3 * np.exp(-0.5 / e)))
    assert r.converged and abs(r.limit) < 1e-20


def test_power_and_growth_modes():
    r = fit_rate(pts(lambda e: 4 * e**2), mode="power")
    assert r.converged and r.exponent == pytest.approx(2, abs=1e-10)
    blow = pts(lambda e: 0.1 * e**-3)
    assert not fit_rate(blow, mode="power").converged
    g = fit_rate(blow, mode="growth")
    assert g.converged and g.exponent == pytest.approx(-3, abs=1e-10)
    with pytest.raises(ValueError):
        fit_rate(blow, mode="cubic")


@given(c=st.floats(-5, 5), a=st.floats(0.1, 10), q=st.floats(0.3, 2.0), sign=st.sampled_from([-1, 1]))
def test_fit_recovers_limit_and_rate(c, a, q, sign):
    r = fit_rate(pts(lambda e: c + sign * a * e**q))
    assert r.converged
    assert r.limit == pytest.approx(c, abs=1e-4 * a + 1e-9)
    assert r.exponent == pytest.approx(q, abs=1e-2)


def test_eps_sequence_rules():
    with pytest.raises(ValueError, match="epsilon list must be decreasing"):
        EpsSequence([0.1, 0.2, 0.05, 0.01])
    with pytest.raises(ValueError):
        EpsSequence([0.1, 0.05])
    seq = EpsSequence(default_eps_sequence())
    assert np.all(np.diff(seq.eps) < 0)
    lim, rate = extrapolate(EpsSequence(EPS, [3 + e for e in EPS]))
    assert lim == pytest.approx(3, abs=1e-6)
    with pytest.raises(ConvergenceError):
        extrapolate(EpsSequence(EPS, [np.sin(1 / e) for e in EPS]), strict=True)


def test_vlasov_residual_vanishes_for_plane_wave():
    g = Grid(-np.pi, np.pi, 128)
    tl = propagate(plane_wave(g, 0.1, 1.0), free_potential(), PropagatorConfig(1e-3, 1000, 10), boundary_guard=None)
    chi = TestFunction(Bump(0.0, 1.5), Bump(1.0, 0.5), Bump(0.3, 0.3))
    assert vlasov_weak_residual(tl, free_potential(), chi) < 1e-10
    late = TestFunction(Bump(0.0, 1.5), Bump(1.0, 0.5), Bump(1.0, 0.3))
    with pytest.raises(SupportError):
        vlasov_weak_residual(tl, free_potential(), late)


def test_temperature_of_gaussian_is_its_momentum_variance():
    g = Grid(-6, 6, 256)
    eps, s = 0.2, 0.5
    T = temperature_tensor(wigner_transform(gaussian_state(g, eps, 0.0, 0.4, s)))
    rows = np.abs(g.x) < 1.5
    assert np.max(np.abs(T[rows] - eps**2 / (4 * s**2))) < 1e-10


def test_plane_wave_defects_vanish():
    g = Grid(-np.pi, np.pi, 256)
    d = defect_pairings(plane_wave(g, 0.05, 1.0), [Bump(0.0, 1.0)])
    assert abs(d["A"][0]) < 1e-20 and abs(d["B"][0]) < 1e-14 and abs(d["rhoT"][0]) < 1e-12
    # beta_m2 uses p**2 times a wide bump of radius 1e3, which is 1 - O(1e-6) at p = 1
    assert d["K"][0] == pytest.approx(d["beta_m2"][0], rel=1e-5)


def test_time_localized_average_of_a_constant():
    g = Grid(-np.pi, np.pi, 32)
    tl = propagate(plane_wave(g, 0.1, 1.0), free_potential(), PropagatorConfig(0.01, 100, 1), boundary_guard=None)
    out = time_localized(tl, lambda psi: {"m": np.array([np.sum(psi.density) * g.dx])}, Bump(0.5, 0.2))
    assert out["m"][0] == pytest.approx(2 * np.pi, rel=1e-8)
    with pytest.raises(SupportError):
        time_localized(tl, lambda psi: {}, Bump(5.0, 0.1))


def test_wkb_family_is_monokinetic_in_the_limit(tmp_path):
    g = Grid(-6, 6, 2048)
    fam = lambda e: gaussian_state(g, e, 0.0, 0.0, 0.5, phase=lambda x: 0.5 * np.sin(x))
    rep = teq_check("wkb_static", fam, [0.1, 0.05, 0.025, 0.0125], [Bump(0.0, 1.0)])
    assert abs(rep.limits["rhoT"][0]) < 2e-3
    assert rep.residual[0] < 2e-3
    back = DefectReport.from_json(rep.to_json())
    assert back.limits == rep.limits and back.eps == rep.eps
