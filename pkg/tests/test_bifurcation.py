import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isoyamabe.bifurcation import (BifurcationError, ProductData, a_const, bifurcation_points, branch_at_r,
                                   branch_to_metric, continue_branch, discrete_map, kernel_check, p_crit,
                                   product_bifurcation_times, root_lambda)
from isoyamabe.discretize import build_grid
from isoyamabe.profile import make_hemisphere, make_spherical_band

S2_MUS = [6.0, 20.0, 42.0]  # even-degree radial Neumann eigenvalues l(l+1) of S^2_+


@pytest.fixture(scope="module")
def base():
    return make_hemisphere(2)


@pytest.fixture(scope="module")
def base_grid(base):
    return build_grid(base, 400)


@pytest.fixture(scope="module")
def pdata(base):
    return ProductData(base, 2, 2.0)


@pytest.fixture(scope="module")
def branch(base, base_grid, pdata):
    return continue_branch(base, base_grid, pdata.p_N, 1, r_max=0.05)


# -- closed forms ------------------------------------------------------------------


def test_constants():
    assert a_const(4) == 6.0 and p_crit(4) == 4.0
    assert a_const(3) == 8.0 and p_crit(3) == 6.0


def test_product_data(pdata):
    assert pdata.dim == 4 and pdata.s_g == pytest.approx(2.0)
    assert pdata.lambda_of_t(0.125) == pytest.approx(3.0, rel=1e-14)
    assert pdata.t_of_lambda(3.0) == pytest.approx(0.125, rel=1e-14)
    with pytest.raises(BifurcationError):
        pdata.t_of_lambda(pdata.s_g / pdata.a_N)


def test_times_closed_form(pdata):
    res = product_bifurcation_times(2, pdata.s_g, 2.0, 2, S2_MUS)
    want = [2.0 / (mu * 3 - 2.0) for mu in S2_MUS]
    assert [bt.t for bt in res.times] == pytest.approx(want, rel=1e-14)
    assert [bt.lam for bt in res.times] == pytest.approx([mu / 2 for mu in S2_MUS], rel=1e-14)
    assert [bt.i for bt in res.times] == [1, 2, 3] and res.notices == []


def test_times_resonance_and_sign():
    # mu (N-1) = s_g is excluded; mu (N-1) < s_g gives t < 0 and is dropped
    res = product_bifurcation_times(2, 6.0, 1.0, 2, [1.0, 2.0, 5.0])
    assert [bt.i for bt in res.times] == [3]
    assert len(res.notices) == 2 and "resonant" in res.notices[1] and "not positive" in res.notices[0]


def test_times_need_positive_curvatures():
    with pytest.raises(BifurcationError):
        product_bifurcation_times(2, -1.0, 1.0, 2, [6.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 6), st.integers(1, 5), st.floats(0.1, 50), st.floats(0.1, 50),
       st.lists(st.floats(0.1, 200), min_size=1, max_size=6))
def test_times_satisfy_lambda_relation(m, n, s_g, s_h, mus):
    res = product_bifurcation_times(m, s_g, s_h, n, mus)
    big = m + n
    ts = [bt.t for bt in res.times]
    assert ts == sorted(ts, reverse=True)
    for bt in res.times:
        lam = (s_g + s_h / bt.t) / a_const(big)
        assert lam * (p_crit(big) - 2) == pytest.approx(bt.mu, rel=1e-10)
    assert len(res.times) + len(res.notices) == len(mus)


@settings(max_examples=100, deadline=None)
@given(st.floats(-50, 50), st.floats(2.01, 10))
def test_map_vanishes_on_constant(lam, s):
    p = make_spherical_band(3, 0.2, 0.9)
    g = build_grid(p, 64)
    assert np.max(np.abs(discrete_map(p, g, np.ones(64), lam, s))) <= 1e-14


def test_bifurcation_points_need_s_above_two():
    p = make_hemisphere(2)
    with pytest.raises(BifurcationError):
        bifurcation_points(p, build_grid(p, 64), 2.0, 2)


# -- discrete bifurcation points ----------------------------------------------------------


def test_bifurcation_points(base, base_grid, pdata):
    pts = bifurcation_points(base, base_grid, pdata.p_N, 3)
    assert [pt.i for pt in pts] == [1, 2, 3]
    np.testing.assert_allclose([pt.mu for pt in pts], S2_MUS, rtol=1e-4)
    np.testing.assert_allclose([pt.lam for pt in pts], [mu / 2 for mu in S2_MUS], rtol=1e-4)


@pytest.mark.parametrize("i", [1, 2, 3])
def test_kernel_is_one_dimensional(base, base_grid, pdata, i):
    k = kernel_check(base, base_grid, pdata.p_N, i)
    assert k["simple"]
    assert k["sigma_1"] <= 1e-8 * S2_MUS[i - 1]
    assert k["sigma_2"] >= 0.5 * k["spectral_gap"]


# -- branches -------------------------------------------------------------------------------


def test_branch_reaches_r_max(branch):
    assert not branch.truncated and branch.diagnostics == []
    assert branch.samples[-1].r == pytest.approx(0.05, rel=1e-10)
    assert all(smp.residual <= 1e-9 for smp in branch.samples)
    rs = [smp.r for smp in branch.samples]
    assert all(np.diff(rs) > 0)
    assert all(smp.u.min() > 0 for smp in branch.samples)


@pytest.mark.parametrize("r", [1e-3, 5e-4])
def test_branch_tangent_is_eigenfunction(base, base_grid, pdata, branch, r):
    smp = branch_at_r(base, base_grid, 1, r, pdata.p_N)
    v = branch.eigenfunction.values
    assert smp.distance_to_trivial / (r * np.max(np.abs(v))) == pytest.approx(1.0, abs=0.05)
    dev = smp.u.values - 1.0 - r * v
    assert np.max(np.abs(dev)) <= 0.05 * r * np.max(np.abs(v))


def test_root_lambda(base, base_grid, pdata, branch):
    lam0 = root_lambda(base, base_grid, 1, 2e-4, pdata.p_N)
    assert lam0 == pytest.approx(branch.lambda_i, abs=1e-6)
    assert lam0 == pytest.approx(3.0, rel=1e-4)


def test_branch_to_metric_certificates(pdata, branch):
    t1 = product_bifurcation_times(2, pdata.s_g, 2.0, 2, [branch.mu]).times[0].t
    for smp in branch.samples[1:]:
        cert = branch_to_metric(pdata, smp, t1)
        assert cert["passed"], cert
        assert not cert["trivial"]
        assert cert["gamma_minus_t_i"] <= 0.05
    first = branch_to_metric(pdata, branch.samples[0], t1)
    assert first["trivial"] and first["label"].startswith("trivial")
    assert first["gamma_minus_t_i"] <= 1e-4


def test_branch_index_must_be_positive():
    p = make_hemisphere(3)
    with pytest.raises((BifurcationError, ValueError)):
        continue_branch(p, build_grid(p, 16), i=0)


def test_budget_exhaustion_is_reported(base, base_grid, pdata):
    br = continue_branch(base, base_grid, pdata.p_N, 1, r_max=0.05, steps=3)
    assert br.diagnostics and "budget" in br.diagnostics[0]
    assert len(br.samples) == 3
