import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isoyamabe.curves import Constant
from isoyamabe.discretize import GridFunction, assemble, build_grid, quotient
from isoyamabe.profile import make_hemisphere, make_spherical_band
from isoyamabe.yamabe import (AdmissibilityError, SolveOptions, SolverError, check_subcritical,
                              constant_curvature_metrics, el_residual, minimize_quotient, quotient_gradient,
                              shooting_mismatch, shooting_solve)

from conftest import clifford, hemi_product

VOL3 = math.pi ** 2


def sup_dist(a: GridFunction, b: GridFunction) -> float:
    return max(float(np.max(np.abs(a.values - b.values))), *(abs(x - y) for x, y in zip(a.traces, b.traces)))


# -- admissibility -------------------------------------------------------------


@pytest.mark.parametrize("p,mode,s,ok", [
    (make_hemisphere(3), "interior", 5.99, True),
    (make_hemisphere(3), "interior", 6.0, False),
    (make_hemisphere(3), "boundary", 3.99, True),
    (make_hemisphere(3), "boundary", 4.0, False),
    (clifford(0.5, 1.0), "interior", 5.5, True),
    (clifford(0.5, 1.0), "interior", 6.0, False),
    (clifford(0.5, 1.0), "boundary", 4.0, False),
    (clifford(0.0, 0.5), "interior", 50.0, True),
    (hemi_product(), "interior", 4.0, True),
    (hemi_product(), "boundary", 3.0, True),
])
def test_check_subcritical(p, mode, s, ok):
    v = check_subcritical(p, s, mode)
    assert bool(v) is ok
    assert v.describe()


def test_thresholds_are_exact_rationals():
    v = check_subcritical(clifford(0.5, 1.0), 5.0, "interior")
    assert v.threshold == Fraction(6) and v.k_f == 1
    assert check_subcritical(clifford(0.5, 1.0), 3.0, "boundary").threshold == Fraction(4)
    assert check_subcritical(clifford(0.0, 0.5), 3.0, "boundary").threshold is None


@pytest.mark.parametrize("s,mode", [(6.0, "interior"), (7.0, "interior"), (4.0, "boundary"), (0.5, "interior")])
def test_gate_rejects(hemi3, hemi3_grid, s, mode):
    with pytest.raises(AdmissibilityError):
        minimize_quotient(hemi3, hemi3_grid, s, mode)


def test_boundary_mode_refuses_negative_dirichlet():
    p = make_hemisphere(3).with_scalar_curvature(Constant(-100.0))
    with pytest.raises(SolverError, match="unbounded"):
        minimize_quotient(p, build_grid(p, 200), 3.0, "boundary")


def test_bad_mode(hemi3, hemi3_grid):
    with pytest.raises(ValueError):
        minimize_quotient(hemi3, hemi3_grid, 3.0, "sideways")


# -- interior solves -------------------------------------------------------------


@pytest.mark.parametrize("s", [2.0, 3.0, 4.0, 5.0])
def test_hemisphere_interior_rigidity(hemi3, hemi3_grid, s):
    # minimizers are constant up to s = p_n, so J = s_g vol^(1 - 2/s)
    rep = minimize_quotient(hemi3, hemi3_grid, s, "interior",
                            SolveOptions(init="random", seed=3, tol=1e-9))
    assert rep.converged and rep.minimizer.min() > 0
    assert rep.value == pytest.approx(6 * VOL3 ** (1 - 2 / s), rel=1e-8)
    phi = rep.minimizer
    assert (phi.max() - phi.min()) / phi.max() < 1e-6
    assert rep.residuals.interior <= 1e-9


@pytest.mark.parametrize("s", [3.0, 4.0, 5.0])
def test_interior_shooting_agreement(hemi3, hemi3_grid, s):
    rep = minimize_quotient(hemi3, hemi3_grid, s, "interior", SolveOptions(init="random", seed=1))
    shot = shooting_solve(hemi3, s, rep.lagrange_c, "interior", rep.minimizer, hemi3_grid)
    assert sup_dist(shot, rep.minimizer) <= 1e-5


def test_interior_nonconstant_minimizer_band():
    # band with umbilic but non-minimal boundary: minimizer is not constant
    p = make_spherical_band(3, 0.2, 0.9)
    g = build_grid(p, 400)
    rep = minimize_quotient(p, g, 4.0, "interior")
    assert rep.converged and rep.minimizer.min() > 0
    assert rep.minimizer.max() - rep.minimizer.min() > 1e-3
    shot = shooting_solve(p, 4.0, rep.lagrange_c, "interior", rep.minimizer, g)
    assert sup_dist(shot, rep.minimizer) <= 1e-5
    res = el_residual(p, g, rep.minimizer, 4.0, rep.lagrange_c, "interior")
    assert res.interior <= 1e-6 and res.boundary_max <= 1e-8


def test_minimizer_is_at_most_any_test_function():
    p = make_spherical_band(3, 0.2, 0.9)
    g = build_grid(p, 200)
    rep = minimize_quotient(p, g, 4.0, "interior")
    forms = assemble(p, g)
    rng = np.random.default_rng(0)
    for _ in range(5):
        c = rng.uniform(-1, 1, 3)
        phi = GridFunction.from_function(g, lambda t: 2 + c[0] * t + c[1] * t * t + c[2] * np.cos(3 * t))
        assert quotient(forms, phi, 4.0) >= rep.value - 1e-9


# -- boundary solves -------------------------------------------------------------


@pytest.mark.parametrize("s", [2.5, 3.0])
def test_hemisphere_boundary(hemi3, hemi3_grid, s):
    rep = minimize_quotient(hemi3, hemi3_grid, s, "boundary")
    assert rep.converged and rep.minimizer.min() > 0
    assert rep.residuals.interior <= 1e-6 and rep.residuals.boundary_max <= 1e-8
    assert rep.lagrange_c == pytest.approx(rep.value / (2 * (hemi3.dim - 1)), rel=1e-12)
    shot = shooting_solve(hemi3, s, rep.lagrange_c, "boundary", rep.minimizer, hemi3_grid)
    assert sup_dist(shot, rep.minimizer) <= 1e-5


def test_boundary_value_converges(hemi3):
    vals = [minimize_quotient(hemi3, build_grid(hemi3, m), 3.0, "boundary").value for m in (200, 400, 800)]
    assert math.log2(abs(vals[0] - vals[1]) / abs(vals[1] - vals[2])) > 1.8


def test_two_boundary_components():
    p = make_spherical_band(3, -0.5, 0.5)
    g = build_grid(p, 400)
    rep = minimize_quotient(p, g, 3.0, "boundary")
    assert rep.converged and len(rep.residuals.boundary) == 2
    # symmetric band: symmetric minimizer
    v = rep.minimizer.values
    assert np.max(np.abs(v - v[::-1])) <= 1e-6 * v.max()


# -- gradient and residual helpers ---------------------------------------------------


@pytest.mark.parametrize("mode,s", [("interior", 4.0), ("boundary", 3.0)])
def test_gradient_matches_finite_differences(mode, s):
    p = make_spherical_band(3, 0.2, 0.9)
    forms = assemble(p, build_grid(p, 40))
    rng = np.random.default_rng(5)
    x = 1 + 0.3 * rng.random(forms.size)
    g = quotient_gradient(forms, x, s, mode)

    def q(y):
        return quotient(forms, forms.grid_function(y), s, mode)

    fd = np.zeros_like(x)
    for i in range(x.size):
        h = 1e-6 * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        fd[i] = (q(x + e) - q(x - e)) / (2 * h)
    assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(fd)


def test_report_json(hemi3, hemi3_grid):
    rep = minimize_quotient(hemi3, hemi3_grid, 4.0)
    doc = json.loads(json.dumps(rep.to_json()))
    assert doc["value"] == pytest.approx(6 * math.pi)
    assert doc["mode"] == "interior" and doc["converged"] is True


def test_impossible_tolerance_raises_with_diagnostics():
    p = make_spherical_band(3, 0.2, 0.9)
    with pytest.raises(SolverError) as info:
        minimize_quotient(p, build_grid(p, 1600), 4.0, "interior", SolveOptions(tol=1e-16, max_iter=3000))
    assert info.value.diagnostics


def test_shooting_mismatch_zero_at_solution(hemi3):
    c = 6 * VOL3 ** (1 - 2 / 4.0)
    # constant solution of 8 Delta u + 6 u = c u^3 with unit L^4 norm
    u0 = (6 / c) ** 0.5
    assert abs(shooting_mismatch(hemi3, 4.0, c, "interior", u0)) <= 1e-9


# -- constant curvature metrics ---------------------------------------------------------


@pytest.mark.parametrize("p", [hemi_product(), make_spherical_band(2, 0.3, 1.0)], ids=lambda p: p.name)
def test_constant_curvature_metrics_product(p):
    from isoyamabe.profile import make_product
    prof = p if p.dim == 4 else make_product(p, 2, 2.0, 1.0)
    h1, h2, cert = constant_curvature_metrics(prof, build_grid(prof, 400))
    assert cert.passed, cert.checks
    t = np.linspace(prof.t_lo, prof.t_hi, 501)
    s1 = h1.s_g(t)
    assert np.ptp(s1) / abs(np.mean(s1)) <= 1e-5
    assert all(abs(e.mean_curvature) <= 1e-6 for e in h1.boundary_components)
    assert np.max(np.abs(h2.s_g(t))) <= 1e-5
    hs = [e.mean_curvature for e in h2.boundary_components]
    assert max(hs) - min(hs) <= 1e-6
    assert h2.volume() == pytest.approx(1.0, rel=1e-6)


def test_constant_curvature_metrics_rejects_inadmissible(hemi3, hemi3_grid):
    with pytest.raises(AdmissibilityError):
        constant_curvature_metrics(hemi3, hemi3_grid)


@settings(max_examples=10, deadline=None)
@given(st.floats(1.2, 5.5))
def test_interior_value_matches_rigidity_for_any_s(s):
    p = make_hemisphere(3)
    rep = minimize_quotient(p, build_grid(p, 100), s, "interior")
    assert rep.value == pytest.approx(6 * VOL3 ** (1 - 2 / s), rel=1e-8)
