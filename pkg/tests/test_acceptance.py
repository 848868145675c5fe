"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Scenario runs are shared through a session cache, so the whole suite takes
a few minutes on one core.
"""
import numpy as np
import pytest

from bohmlab import scenarios as S
from bohmlab.core import Bump, Grid, TestFunction, WaveFunction
from bohmlab.hydrodynamics import static_bound
from bohmlab.runner import run_experiment

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    cache = {}

    def get(sid):
        if sid not in cache:
            out = tmp_path_factory.mktemp(sid)
            cache[sid] = run_experiment(S.CATALOG[sid].defaults, workers=1, output=out)
        return cache[sid]

    return get


def _limit(res, q):
    return res.report(q).limit


def smooth_state(seed, grid, eps):
    """Gaussian envelope times a random complex trigonometric polynomial and a random phase."""
    r = np.random.default_rng(seed)
    x = grid.x
    c = r.normal(size=4) + 1j * r.normal(size=4)
    amp = sum(c[j] * np.cos((j + 1) * x + r.uniform(0, 2 * np.pi)) for j in range(4)) + 3.0
    phase = r.uniform(-1, 1) * np.sin(x + r.uniform(0, 2 * np.pi)) + r.uniform(-1, 1) * x
    return WaveFunction(grid, np.exp(-x**2 / 2) * amp * np.exp(1j * phase / eps), eps)


def test_criterion_01_conservation(runs, criterion):
    worst_m, worst_e, steps = 0.0, 0.0, set()
    for sid in S.CATALOG:
        res = runs(sid)
        steps.add(res.config.n_steps)
        worst_m = max(worst_m, max(v for _, v in res.report("mass_drift").pairs))
        worst_e = max(worst_e, max(v for _, v in res.report("energy_drift").pairs))
    ok = steps == {10_000} and worst_m <= 1e-10 and worst_e <= 1e-8
    assert criterion(1, ok, f"steps={sorted(steps)} max mass drift={worst_m:.2e} max energy drift={worst_e:.2e}")


def test_criterion_02_madelung_identities(runs, criterion):
    moments, split = 0.0, 0.0
    for sid in ("plane_wave", "free_gaussian"):
        res = runs(sid)
        for q in ("madelung_m0", "madelung_m1", "wigner_m0", "wigner_m1"):
            moments = max(moments, max(v for _, v in res.report(q).pairs))
        split = max(split, max(v for _, v in res.report("kinetic_split").pairs))
    ok = moments <= 1e-6 and split <= 1e-8
    assert criterion(2, ok, f"max moment error={moments:.2e} kinetic split error={split:.2e}")


def test_criterion_03_static_bound(runs, criterion):
    # n=4096 resolves momenta up to 8 at eps=1e-2; these states stay below 3
    g = Grid(-8, 8, 4096)
    phi = TestFunction(Bump(0.0, 2.0), Bump(0.0, 3.0))
    rng = np.random.default_rng(2024)
    eps_draws = 10 ** rng.uniform(-2, -1, 50)
    literal = [static_bound(smooth_state(k, g, e), phi, "paper") for k, e in enumerate(eps_draws)]
    corrected = [static_bound(smooth_state(k, g, e), phi, "corrected") for k, e in enumerate(eps_draws)]
    n_point = sum(r.pointwise_holds for r in literal)
    n_int = sum(r.integral_holds for r in literal)
    n_corr = sum(r.pointwise_holds and r.integral_holds for r in corrected)
    wkb = runs("wkb_single")
    ratio = max(v for _, v in wkb.report("static_integral_ratio").pairs)
    growth = -wkb.report("M_eps").rate
    growth_ok = bool(wkb.report("M_eps").passed)
    print(f"  corrected majorant: pointwise and integral hold on {n_corr}/50 states")
    ok = n_point == 50 and n_int == 50 and ratio <= 1 and growth_ok
    assert criterion(3, ok, f"literal pointwise {n_point}/50, literal integral {n_int}/50, "
                            f"wkb integral/M={ratio:.3g}, M growth exponent={growth:.3f}")


def test_criterion_04_equivariance(criterion):
    out = []
    for sid, eps in (("free_gaussian", 0.1), ("harmonic_coherent", 0.01)):
        w = []
        # halving dx halves the seed spacing too: (n, seeds) = (2048, 4096) -> (4096, 8192)
        for n, seeds in ((2048, 4096), (4096, 8192)):
            cfg = S.CATALOG[sid].defaults.with_overrides(n=n, eps=(eps,), params={"seeds": float(seeds)})
            tl = S._run(cfg, S.initial_state(cfg, eps), S.potential(cfg))
            w.append(S._equivariance(cfg, tl, 1.0)["equivariance_w1"])
        out.append((sid, w[0], w[0] / w[1]))
    ok = all(w1 <= 5e-3 and r >= 1.8 for _, w1, r in out)
    assert criterion(4, ok, "; ".join(f"{s}: W1={w1:.2e} ratio={r:.2f}" for s, w1, r in out))


def test_criterion_05_vlasov_residual(runs, criterion):
    stationary = max(max(v for _, v in runs(sid).report("vlasov_residual").pairs)
                     for sid in ("plane_wave", "two_wave"))
    base = S.CATALOG["free_gaussian"].defaults
    r = []
    for dt in (1e-4, 5e-5):
        # the frame stride in steps stays fixed, so halving dt also halves the frame spacing
        cfg = base.with_overrides(dt=dt)
        r.append(S.measure(cfg, cfg.eps[0])[0]["vlasov_residual"])
    ratio = r[0] / r[1]
    ok = stationary <= 1e-8 and ratio >= 3.5
    assert criterion(5, ok, f"stationary max={stationary:.2e}; free_gaussian {r[0]:.2e} -> {r[1]:.2e} ratio={ratio:.1f}")


def test_criterion_06_defect_identity(runs, criterion):
    tw, wk = runs("two_wave"), runs("wkb_single")
    lims = {q: [_limit(tw, f"{q}_{j}") for j in (0, 1)] for q in ("rhoT", "A", "B", "C")}
    ok_tw = (all(abs(v - 1) <= 0.05 for v in lims["rhoT"] + lims["A"])
             and all(abs(v) <= 0.05 for v in lims["B"] + lims["C"]))
    ok_tw &= all(tw.report(f"{q}_{j}").passed for q in ("rhoT", "A", "B", "C") for j in (0, 1))
    wk_max = max(abs(_limit(wk, f"{q}_{j}")) for q in ("rhoT", "A", "B", "C") for j in (0, 1))
    ok_wk = wk_max <= 0.02 and all(wk.report(f"{q}_{j}").passed for q in ("rhoT", "A", "B", "C") for j in (0, 1))
    detail = ("two_wave " + " ".join(f"{q}={min(v):.4f}..{max(v):.4f}" for q, v in lims.items())
              + f"; wkb_single max |limit|={wk_max:.2e}")
    assert criterion(6, ok_tw and ok_wk, detail)


def test_criterion_07_dictionary_diagnostic(runs, criterion):
    parts, ok = [], True
    for sid in ("wkb_single", "harmonic_coherent", "packet_c3b"):
        rep = runs(sid).report("dictionary_distance")
        t = rep.metadata["temperature_limit"]
        applies = abs(t) <= 0.02
        good = (rep.passed is True) if applies else True
        ok &= good
        parts.append(f"{sid}: T={t:.1e} distance={rep.limit:.2e}" + ("" if applies else " (not applicable)"))
    assert criterion(7, ok, "; ".join(parts))


def test_criterion_08_packet_error_law(runs, criterion):
    res = runs("packet_c3b")
    rate = res.report("packet_error").rate
    ctrl = max(v for _, v in res.report("control_error").pairs)
    ok = 0.4 <= rate <= 0.6 and not res.report("packet_error").flag and ctrl <= 1e-6
    assert criterion(8, ok, f"packet error exponent={rate:.3f} control error={ctrl:.2e}")


def test_criterion_09_packet_limit_pairing(runs, criterion):
    res = runs("packet_c3b")
    rb, rw = res.report("gap_bohmian"), res.report("gap_wigner")
    mutual = res.report("pairing_mutual").pairs[-1][1]
    ok = rb.passed and rw.passed and rb.rate >= 0.4 and rw.rate >= 0.4 and mutual <= 0.05
    assert criterion(9, bool(ok), f"gap exponents bohmian={rb.rate:.3f} wigner={rw.rate:.3f}; "
                                  f"mutual gap at eps=1e-3={mutual:.2e}")


def test_criterion_10_convergence_in_measure(runs, criterion):
    res = runs("harmonic_coherent")
    vals = [v for _, v in res.report("bad_set_fraction").pairs]
    monotone = all(b <= a * 1.1 + 1e-12 for a, b in zip(vals, vals[1:]))
    good = res.report("good_set_probability").pairs[-1][1]
    ok = monotone and vals[-1] <= 0.05 and good >= 0.95
    assert criterion(10, ok, "bad-set fractions " + ", ".join(f"{v:.3f}" for v in vals)
                     + f"; good-set probability={good:.6f}")


def test_criterion_11_cone(runs, criterion):
    res = runs("cone")
    p2b, p2w = _limit(res, "p2_beta"), _limit(res, "p2_wigner")
    ob, ow = _limit(res, "odd_beta"), _limit(res, "odd_wigner")
    gap = _limit(res, "cs_gap")
    ok = (abs(p2b - 1) <= 0.05 and abs(p2w - 1) <= 0.05 and abs(ob) <= 0.05 and abs(ow) <= 0.05 and gap >= 0.5
          and all(res.report(q).passed for q in ("p2_beta", "p2_wigner", "odd_beta", "odd_wigner", "cs_gap")))
    assert criterion(11, ok, f"p2 beta={p2b:.4f} wigner={p2w:.4f}; odd beta={ob:.1e} wigner={ow:.1e}; "
                             f"cs_gap={gap:.4f}")


def test_criterion_12_determinism(runs, criterion, tmp_path):
    a = runs("cone")
    b = run_experiment(S.CATALOG["cone"].defaults, workers=2, output=tmp_path)
    worst = 0.0
    for ra, rb in zip(a.values, b.values):
        assert ra.keys() == rb.keys()
        worst = max(worst, max(abs(ra[k] - rb[k]) for k in ra))
    lim = max(abs(x.limit - y.limit) for x, y in zip(a.reports, b.reports) if np.isfinite(x.limit))
    ok = worst <= 1e-12 and lim <= 1e-12
    assert criterion(12, ok, f"workers 1 vs 2: max value difference={worst:.1e}, max limit difference={lim:.1e}")
