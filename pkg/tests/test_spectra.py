import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isoyamabe.curves import Constant
from isoyamabe.discretize import assemble, build_grid
from isoyamabe.profile import make_cylinder_demo, make_hemisphere, make_spherical_band
from isoyamabe.spectra import SpectrumError, conformal_eigen_probe, neumann_spectrum, richardson

from conftest import clifford, hemi_product


def gegenbauer(n, count):
    """Radial Neumann eigenvalues of S^n_+: l(l + n - 1) at even l."""
    return [l * (l + n - 1) for l in range(0, 2 * count, 2)]


@pytest.mark.parametrize("n", [2, 3, 4])
def test_hemisphere_spectrum(n):
    p = make_hemisphere(n)
    res = neumann_spectrum(p, build_grid(p, 1000), 4)
    np.testing.assert_allclose(res.eigenvalues[1:], gegenbauer(n, 4)[1:], rtol=2e-4)
    assert abs(res.eigenvalues[0]) <= 1e-10


@pytest.mark.parametrize("m", [200, 400, 800])
def test_richardson_hemisphere3(m):
    p = make_hemisphere(3)
    fine = neumann_spectrum(p, build_grid(p, 2 * m), 3, estimate_error=False).eigenvalues
    coarse = neumann_spectrum(p, build_grid(p, m), 3, estimate_error=False).eigenvalues
    err_fine = abs(fine[1] - 8) / 8
    err_rich = abs(richardson(coarse[1], fine[1]) - 8) / 8
    assert err_rich < err_fine


def test_second_order_convergence():
    p = make_hemisphere(3)
    errs = [abs(neumann_spectrum(p, build_grid(p, m), 2, estimate_error=False).eigenvalues[1] - 8) for m in (250, 500, 1000)]
    assert math.log2(errs[0] / errs[1]) >= 1.9 and math.log2(errs[1] / errs[2]) >= 1.9


@pytest.mark.parametrize("p", [make_hemisphere(3), make_spherical_band(3, 0.2, 0.9), make_cylinder_demo(),
                               clifford(0.5, 1.0), hemi_product()], ids=lambda p: p.name)
def test_constant_mode_and_orthonormality(p):
    res = neumann_spectrum(p, build_grid(p, 300), 5, estimate_error=False)
    assert abs(res.eigenvalues[0]) <= 1e-10
    v0 = res.eigenfunctions[0].values
    assert np.ptp(v0) <= 1e-8 * np.max(np.abs(v0))
    m = res.forms.mass
    gram = np.array([[np.sum(m * a.values * b.values) for b in res.eigenfunctions] for a in res.eigenfunctions])
    np.testing.assert_allclose(gram, np.eye(5), atol=1e-9)
    assert np.all(np.diff(res.eigenvalues) > 0)
    # sign convention: positive first cell value
    assert all(f.values[0] > 0 for f in res.eigenfunctions)


def test_cylinder_spectrum_closed_form():
    # f = cos z on S^1 x [pi/6, 5pi/6]: radial Neumann modes cos(k (z - pi/6) / (2/3))
    p = make_cylinder_demo()
    res = neumann_spectrum(p, build_grid(p, 1600), 4, estimate_error=False)
    want = [(k * math.pi / (2 * math.pi / 3)) ** 2 for k in range(4)]
    np.testing.assert_allclose(res.eigenvalues[1:], want[1:], rtol=1e-5)


def test_neumann_flux_vanishes_at_boundary():
    p = make_spherical_band(3, 0.2, 0.9)
    res = neumann_spectrum(p, build_grid(p, 400), 3, estimate_error=False)
    forms = res.forms
    scale = 2 * np.max(forms.flux)
    for f, mu in zip(res.eigenfunctions, res.eigenvalues):
        x = f.values
        kx = forms.neumann_apply(x)
        assert np.max(np.abs(kx - mu * forms.mass * x)) <= 1e-12 * scale * np.max(np.abs(x))
        # interior fluxes telescope, so the sum is the net flux through the boundary
        assert abs(np.sum(kx)) <= 1e-9 * np.sqrt(np.sum(forms.mass * x * x))


def test_count_too_large():
    p = make_hemisphere(3)
    with pytest.raises(SpectrumError):
        neumann_spectrum(p, build_grid(p, 20), 11)
    with pytest.raises(SpectrumError):
        neumann_spectrum(p, build_grid(p, 20), 0)


def test_error_estimates_present():
    p = make_hemisphere(3)
    res = neumann_spectrum(p, build_grid(p, 400), 3)
    assert np.all(np.isfinite(res.error_estimates))
    assert abs(res.eigenvalues[1] - 8) <= 3 * res.error_estimates[1]


def test_probe_hemisphere_closed_forms(hemi3, hemi3_grid):
    r = conformal_eigen_probe(hemi3, hemi3_grid)
    assert r.signs == {"D": 1, "B": 1, "L": 1} and r.common_sign == 1
    assert r.ytilde_finite and not r.ytilde_possibly_minus_infinity
    # Robin = Neumann (minimal boundary): constant eigenfunction, lambda = s_g
    assert r.lambda_L == pytest.approx(6.0, rel=1e-8)
    # Dirichlet: first odd Gegenbauer mode l = 1, a_n * 3 + s_g = 30
    assert r.lambda_D == pytest.approx(30.0, rel=1e-5)
    # stereographic image is the flat unit ball: Steklov eigenvalue 1
    assert r.lambda_B == pytest.approx(1.0, rel=1e-5)


def test_probe_scalar_flat():
    p = make_hemisphere(3).with_scalar_curvature(Constant(0.0))
    r = conformal_eigen_probe(p, build_grid(p, 400))
    assert r.signs["L"] == 0 and r.signs["B"] == 0
    assert abs(r.lambda_L) <= 1e-8
    assert r.ytilde_finite


@pytest.mark.parametrize("k", [10.0, 20.0])
def test_probe_moderately_negative(k):
    # lambda_D stays positive; Steklov and Robin signs agree
    p = make_hemisphere(3).with_scalar_curvature(Constant(-k))
    r = conformal_eigen_probe(p, build_grid(p, 400))
    assert r.lambda_L == pytest.approx(-k, rel=1e-8)
    assert r.signs["L"] == r.signs["B"] == -1
    assert not r.ytilde_finite


def test_probe_large_negative_flags():
    p = make_hemisphere(3).with_scalar_curvature(Constant(-100.0))
    r = conformal_eigen_probe(p, build_grid(p, 400))
    assert r.lambda_D < 0 and r.signs["D"] == -1
    assert r.ytilde_possibly_minus_infinity and r.steklov_degenerate
    assert math.isnan(r.lambda_B) and r.signs["B"] is None
    doc = json.loads(json.dumps(r.to_json(), allow_nan=False))
    assert doc["lambda_B"] is None


@pytest.mark.parametrize("p", [make_spherical_band(3, -0.9, 1.0), make_spherical_band(3, -0.5, 0.5),
                               make_spherical_band(4, 0.2, 0.9), hemi_product()], ids=lambda p: p.name)
def test_probe_positive_family(p):
    r = conformal_eigen_probe(p, build_grid(p, 400))
    assert r.common_sign == 1


@settings(max_examples=15, deadline=None)
@given(st.floats(-15.0, 15.0))
def test_probe_robin_equals_shifted_neumann(shift):
    # minimal boundary: Robin problem is Neumann, so lambda_L = s_g exactly
    p = make_hemisphere(3).with_scalar_curvature(Constant(shift))
    r = conformal_eigen_probe(p, build_grid(p, 100))
    assert r.lambda_L == pytest.approx(shift, abs=1e-8 * (1 + abs(shift)))
