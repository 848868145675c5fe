import numpy as np
import pytest
from hypothesis import given, strategies as st

from bohmlab.cone import ConeState, build_cone_state, cone_limit, cone_limit_pairing, gaussian_density_profile
from bohmlab.core import Bump, Grid, TestFunction
from bohmlab.errors import SupportError

P2 = Bump(0.0, np.inf, (0.0, 0.0, 1.0))
P1 = Bump(0.0, np.inf, (0.0, 1.0))


@given(eps=st.floats(1e-3, 0.1), kappa=st.floats(0.5, 2.0))
def test_phase_slope_tends_to_plus_minus_s0(eps, kappa):
    st_ = ConeState(eps, s0=1.5, kappa=kappa)
    assert st_.tip == pytest.approx(kappa * eps)
    far = 50 * kappa * eps
    assert st_.phase_slope(far) == pytest.approx(1.5, rel=1e-3)
    assert st_.phase_slope(-far) == pytest.approx(-1.5, rel=1e-3)
    assert st_.directional_limits() == (1.5, -1.5)


def test_state_has_profile_mass_and_fits_the_box():
    g = Grid(-2, 2, 1024)
    psi = build_cone_state(ConeState(0.01), g)
    assert np.sum(psi.density) * g.dx == pytest.approx(1.0, abs=1e-12)
    assert ConeState(0.01).profile_mass() == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(SupportError):
        build_cone_state(ConeState(1.0), g)


def test_limit_pairing_values():
    b = Bump(0.0, 0.5)
    assert cone_limit(TestFunction(b, P2), 1.0) == pytest.approx(b(0.0))
    assert cone_limit(TestFunction(b, P2), 2.0) == pytest.approx(4 * b(0.0))
    assert cone_limit(TestFunction(b, P1), 1.0) == 0.0


def test_pairings_split_between_two_momenta():
    g = Grid(-2, 2, 4096)
    b = Bump(0.0, 0.5)
    eps = [0.02, 0.01, 0.005, 0.0025]
    res = cone_limit_pairing(eps, TestFunction(b, P2), g, gap_bump=b, bin_width=0.25)
    gap = res.bohmian_gap
    assert np.all(np.diff(gap) < 0)
    assert gap[-1] < 0.1
    # the Wigner p**2 moment adds the quantum kinetic density, which is O(eps)
    ratio = res.mutual_gap[:-1] / res.mutual_gap[1:]
    assert np.all((ratio > 1.8) & (ratio < 2.2))
    # two momenta +-1 with equal mass in one bin: the gap is close to the full second moment
    assert res.cs_gap[-1] > 0.5
    odd = cone_limit_pairing(eps, TestFunction(b, P1), g)
    assert np.max(np.abs(odd.bohmian)) < 1e-10 and np.max(np.abs(odd.wigner)) < 1e-10


def test_gaussian_density_profile_has_unit_mass():
    y = np.linspace(-10, 10, 20001)
    assert np.sum(gaussian_density_profile(y)) * (y[1] - y[0]) == pytest.approx(1.0, abs=1e-12)
