import json
import math

import numpy as np
import pytest

from elliptlab.experiments import (
    H_STAR,
    ExperimentError,
    ExperimentReport,
    ZhikovSetup,
    blowup_probe,
    find_h_star,
    gradient_scaling,
    make_boundary,
    pppot_check,
    u_star,
    u_star_gradient_norm,
    u_zero,
    zhikov_c1,
    zhikov_energy_of_competitor,
    zhikov_gap,
)
from elliptlab.integrand import Integrand, make_coefficient

C1_AT_1_5 = 9.8883982789


# -- the Zhikov construction ---------------------------------------------------


def test_u_star_is_zero_homogeneous_and_bounded(rng):
    x = rng.uniform(-1, 1, (200, 2))
    np.testing.assert_allclose(u_star(x, 2.0), u_star(0.1 * x, 2.0), atol=1e-12)
    assert np.abs(u_star(x, 2.0)).max() <= 2.0 + 1e-12
    np.testing.assert_allclose(u_zero(x, 1.0), np.sum(x**2, 1) * u_star(x, 1.0))


def test_u_star_gradient_matches_finite_differences(rng):
    rho = rng.uniform(0.2, 0.9, 50)
    th = rng.uniform(0, 2 * np.pi, 50)
    x = np.stack([rho * np.cos(th), rho * np.sin(th)], 1)
    h = 1e-6
    gx = (u_star(x + [h, 0]) - u_star(x - [h, 0])) / (2 * h)
    gy = (u_star(x + [0, h]) - u_star(x - [0, h])) / (2 * h)
    fd = np.hypot(gx, gy)
    ok = np.abs(np.cos(2 * th)) > 1e-3  # away from the cone rays
    np.testing.assert_allclose(u_star_gradient_norm(rho, th)[ok], fd[ok], rtol=1e-5, atol=1e-6)


def test_competitor_energy():
    Z = ZhikovSetup()
    assert zhikov_c1(1.5) == pytest.approx(C1_AT_1_5, rel=1e-10)
    # analytic separation: radial factor 1/(2-p) times the angular integral of |2 cos 2θ|^p over the p-zone
    th = np.linspace(0, 2 * np.pi, 400_001)
    ang = np.where(np.cos(2 * th) >= 0, np.abs(2 * np.cos(2 * th)) ** 1.5, 0.0)
    angular = np.trapezoid(ang, th) if hasattr(np, "trapezoid") else np.trapz(ang, th)
    assert zhikov_energy_of_competitor(Z) == pytest.approx(angular / 0.5, rel=1e-8)
    assert zhikov_energy_of_competitor(Z) == pytest.approx(C1_AT_1_5, rel=1e-10)
    for p in (1.2, 1.5, 1.8):
        a = zhikov_energy_of_competitor(Z.replace(p=p, h=1.0))
        b = zhikov_energy_of_competitor(Z.replace(p=p, h=2.0))
        assert b == pytest.approx(2**p * a, rel=1e-9)


def test_setup_validation():
    with pytest.raises(ExperimentError):
        ZhikovSetup(q=2.3)
    with pytest.raises(ExperimentError):
        ZhikovSetup(h=-1)
    ZhikovSetup(q=1.5, strict=False)


def test_zhikov_gap_detected_at_h_star():
    rep = zhikov_gap(ZhikovSetup(h=H_STAR))
    assert rep.flags["gap_detected"] and rep.flags["gap_positive_all_levels"]
    assert all(row["relative_gap"] >= 0.10 for row in rep.table)
    assert rep.value("last_shrink") <= 0.20
    assert [row["rings"] for row in rep.table] == [8, 16, 32]
    assert rep.passed
    # reports are deterministic
    assert json.dumps(rep.to_dict(), sort_keys=True) == json.dumps(zhikov_gap(ZhikovSetup(h=H_STAR)).to_dict(), sort_keys=True)


@pytest.mark.parametrize("setup", [ZhikovSetup(h=0.1), ZhikovSetup(h=H_STAR, q=1.5, strict=False)], ids=["small-h", "q=p"])
def test_zhikov_controls(setup):
    rep = zhikov_gap(setup)
    assert not rep.flags["gap_detected"]
    assert rep.flags["gap_indistinguishable"]


def test_find_h_star_reproduces_fixture():
    h, trail = find_h_star(ZhikovSetup(), lo=8.0, hi=32.0, rtol=0.01)
    assert h == pytest.approx(H_STAR, rel=0.02)
    assert len(trail) >= 3


def test_zhikov_gap_needs_two_levels():
    with pytest.raises(ExperimentError):
        zhikov_gap(ZhikovSetup(), refinement_levels=1)


# -- scaling -------------------------------------------------------------------

AMPS = np.logspace(-1, 1, 10)


def test_scaling_harmonic():
    rep = gradient_scaling(Integrand("p-power", 2.0), AMPS)
    assert rep.value("slope") == pytest.approx(0.5, abs=0.05)
    assert rep.value("gradient_constant_max") == pytest.approx(rep.value("gradient_constant_min"), rel=1e-6)
    assert rep.passed


def test_scaling_invariances():
    I = Integrand("double-phase", 2.0, 2.5, 0.0, 1.0, 1.0, make_coefficient("constant", {"value": 1.0}))
    a = gradient_scaling(I, AMPS, rings=4)
    b = gradient_scaling(I, AMPS[::-1], rings=4)
    c = gradient_scaling(I, AMPS, rings=4, rotate=True)
    assert b.value("slope") == pytest.approx(a.value("slope"), abs=1e-3)
    assert c.value("slope") == pytest.approx(a.value("slope"), abs=1e-3)


def test_scaling_rejects_short_span():
    with pytest.raises(ExperimentError):
        gradient_scaling(Integrand("p-power", 2.0), [1.0, 2.0, 5.0])
    with pytest.raises(ExperimentError):
        gradient_scaling(Integrand("double-phase", 2.0, 3.0, 0.0, 1.0, 0.5, make_coefficient("radial-power", alpha=0.5)), AMPS)


# -- blow-up -------------------------------------------------------------------


def test_blowup_probe_small_ladder():
    rep = blowup_probe(1.5, 3.0, 0.5, levels=(4, 8, 16))
    assert rep.checks["ordering"] and rep.checks["complete"]
    f = rep.value("supercritical_growth_factors")
    assert min(f) > 1.4


def test_blowup_probe_validation():
    with pytest.raises(ExperimentError):
        blowup_probe(1.5, 3.0, 0.5, levels=(4, 8))
    with pytest.raises(ExperimentError):
        blowup_probe(2.0, 2.2, 0.5)
    with pytest.raises(ExperimentError):
        blowup_probe(1.5, 3.0, 0.5, coefficient="constant")


# -- pppot ---------------------------------------------------------------------

OFF_NODE = [(0.13, 0.07), (-0.31, 0.22), (0.05, -0.44), (0.4, 0.31)]


def test_pppot_affine_ratio_one():
    rep = pppot_check(3.0, lambda x: 0 * x[:, 0], OFF_NODE, rings=(8,), boundary="affine",
                      boundary_params={"b": [0.6, -0.2], "c": 0.1})
    assert rep.value("max_ratio") == pytest.approx(1.0, rel=1e-9)


def test_pppot_radial_oracle():
    # exact solution (|x|^2 - 1)/4 of Δu = 1, so |Du| = |x|/2; the element gradient is first-order accurate
    rho = 0.25
    rep = pppot_check(2.0, lambda x: np.ones(len(x)), OFF_NODE, rings=(32,), rho=rho, mu=0.0)
    exact = []
    for x in OFF_NODE:
        r = math.hypot(*x)
        lhs = r / 2
        # ⟨|y|/2⟩ over B_ρ(x) by polar midpoint quadrature
        t = (np.arange(400) + 0.5) / 400 * rho
        a = (np.arange(720) + 0.5) / 720 * 2 * np.pi
        Y = np.array(x)[:, None, None] + np.stack([np.outer(t, np.cos(a)), np.outer(t, np.sin(a))])
        avg = np.sum(np.hypot(*Y) / 2 * t[:, None]) * (rho / 400) * (2 * np.pi / 720) / (np.pi * rho**2)
        exact.append(lhs / (math.pi * rho + avg))
    assert rep.value("max_ratio") == pytest.approx(max(exact), rel=0.03)


def test_pppot_bump_stable():
    f = lambda x: np.exp(-np.sum((x - [0.2, 0.1]) ** 2, axis=1) / 0.05)  # noqa: E731
    rep = pppot_check(3.0, f, OFF_NODE, rings=(8, 16))
    assert rep.value("relative_change") <= 0.25
    assert rep.passed


def test_pppot_validation():
    with pytest.raises(ExperimentError):
        pppot_check(1.5, lambda x: x[:, 0], OFF_NODE)
    with pytest.raises(ExperimentError):
        pppot_check(2.0, lambda x: x[:, 0], [(0.9, 0.0)])


# -- reports -------------------------------------------------------------------


def test_report_markers_and_provenance():
    rep = ExperimentReport("x", {"a": 1})
    rep.record("big", math.inf)
    rep.record("bad", float("nan"), "fitted")
    d = rep.to_dict()
    assert d["quantities"]["big"]["value"] == "inf"
    assert d["quantities"]["bad"] == {"value": "nan", "provenance": "fitted"}
    assert "runtime" not in d
    json.dumps(d, allow_nan=False)
    with pytest.raises(ValueError):
        rep.record("c", 1.0, "guessed")


def test_boundary_registry():
    x = np.array([[0.3, 0.4]])
    assert make_boundary("affine", {"b": [1, 2], "c": 3})(x)[0] == pytest.approx(4.1)
    assert make_boundary("zhikov", {"h": 2.0})(x)[0] == pytest.approx(u_zero(x, 2.0)[0])
    with pytest.raises(ExperimentError):
        make_boundary("nope")
