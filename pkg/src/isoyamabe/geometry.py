"""Geometric quantities computed from a profile.

The volume of M pushes forward under f to w(t) dt, with (b w)' = -a w.  The
weight is assembled from a smooth part integrated by composite Gauss-Legendre
and an explicit power |t - t_e|^nu at each focal endpoint t_e, so that cell
integrals near focal sets can use Gauss-Jacobi rules.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.special import roots_jacobi

from .curves import Analytic, ScalarCurve
from .profile import (BoundaryComponent, FocalEndpoint, IsoparametricProfile, ProfileError,
                      ZERO_TOL, indicial_exponent)


class WeightError(ProfileError):
    pass


class WeightCurve(ScalarCurve):
    """Volume density w(t) of a profile, normalized by the reference level area."""

    kind = "weight"

    def __init__(self, p: IsoparametricProfile, panels: int = 64, order: int = 20):
        self.profile = p
        ta, tb = p.interval
        self.focal = []  # (t_e, nu_e, c_e)
        for e in p.focal_endpoints:
            db = float(p.b(e.param, 1))
            if abs(db) <= ZERO_TOL:
                raise WeightError(f"b vanishes to order >= 2 at focal endpoint {e.param}")
            c = float(p.a(e.param)) / db
            self.focal.append((e.param, indicial_exponent(p, e.param), c))
        self._edges = np.linspace(ta, tb, panels + 1)
        x, wq = leggauss(order)
        self._gl = (x, wq)
        half = 0.5 * np.diff(self._edges)
        mid = 0.5 * (self._edges[:-1] + self._edges[1:])
        nodes = mid[:, None] + half[:, None] * x[None, :]
        per_panel = (self._regular(nodes) * wq[None, :]).sum(axis=1) * half
        self._cum = np.concatenate([[0.0], np.cumsum(per_panel)])
        t_ref, area = p.weight_norm
        self._g_ref = 0.0
        self._g_ref = float(self._antideriv(np.array([t_ref]))[0])
        self._k = 1.0
        raw = float(self(np.array([t_ref]))[0] * np.sqrt(p.b(t_ref)))
        if not np.isfinite(raw) or raw <= 0:
            raise WeightError(f"weight ODE blew up at the reference level t_ref={t_ref}")
        self._k = area / raw
        probe = self(np.linspace(ta, tb, 257)[1:-1])
        if not np.all(np.isfinite(probe)) or np.any(probe <= 0):
            raise WeightError("weight ODE produced a non-finite or non-positive density; "
                              f"min={np.nanmin(probe)}, max={np.nanmax(probe)}")

    def _regular(self, t):
        p = self.profile
        r = p.a(t) / p.b(t)
        for t_e, _, c in self.focal:
            r = r - c / (t - t_e)
        return r

    def _antideriv(self, t):
        """Integral of the regular part of a/b from t_ref to t."""
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self._edges, t, side="right") - 1, 0, len(self._edges) - 2)
        left = self._edges[k]
        x, wq = self._gl
        half = 0.5 * (t - left)
        nodes = (left + half)[..., None] + half[..., None] * x
        part = (self._regular(nodes) * wq).sum(axis=-1) * half
        return self._cum[k] + part - self._g_ref

    def _beta(self, t):
        """b / prod |t - t_e|, smooth and positive on the closed interval."""
        p = self.profile
        t = np.asarray(t, dtype=float)
        out = np.array(p.b(t), dtype=float)
        prod = np.ones_like(t)
        for t_e, _, _ in self.focal:
            prod = prod * np.abs(t - t_e)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = out / prod
        for t_e, _, _ in self.focal:
            at = t == t_e
            if np.any(at):
                val = abs(float(p.b(t_e, 1)))
                for o, _, _ in self.focal:
                    if o != t_e:
                        val *= abs(t_e - o)
                out[at] = val
        return out

    def reduced(self, t, skip=None):
        """w(t) / |t - skip|^nu for a focal endpoint ``skip`` (or w itself)."""
        t = np.asarray(t, dtype=float)
        val = self._k * np.exp(-self._antideriv(t)) / self._beta(t)
        for t_e, nu, _ in self.focal:
            if t_e != skip:
                val = val * np.abs(t - t_e) ** nu
        return val

    def __call__(self, t, nu: int = 0):
        t = np.asarray(t, dtype=float)
        if nu == 0:
            return self.reduced(t)
        if nu == 1:
            p = self.profile
            return -self.reduced(t) * (p.a(t) + p.b(t, 1)) / p.b(t)
        raise NotImplementedError("weight derivatives above first order")

    def level_area(self, t):
        """Area of M_t, equal to w sqrt(b)."""
        t = np.asarray(t, dtype=float)
        return self(t) * np.sqrt(np.maximum(self.profile.b(t), 0.0))

    def flux_coefficient(self, t):
        """b(t) w(t); vanishes at focal endpoints."""
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        sing = np.zeros(t.shape, dtype=bool)
        for t_e, nu, _ in self.focal:
            at = t == t_e
            out[at] = 0.0
            sing |= at
        reg = ~sing
        out[reg] = self.profile.b(t[reg]) * self(t[reg])
        return out

    def cell_integrals(self, nodes, order: int = 10, factor=None):
        """Integral of factor(t) w(t) over each [nodes[i], nodes[i+1]]."""
        nodes = np.asarray(nodes, dtype=float)
        lo, hi = nodes[:-1], nodes[1:]
        x, wq = leggauss(order)
        half = 0.5 * (hi - lo)
        pts = (lo + half)[:, None] + half[:, None] * x[None, :]

        def f(t, skip=None):
            val = self.reduced(t, skip=skip)
            return val if factor is None else val * factor(t)

        out = (f(pts) * wq[None, :]).sum(axis=1) * half
        for t_e, nu, _ in self.focal:
            # Gauss-Jacobi with weight (1+x)^nu, the singular end mapped to x = -1
            xj, wj = roots_jacobi(order, 0.0, nu)
            for i in np.flatnonzero((lo == t_e) | (hi == t_e)):
                h = hi[i] - lo[i]
                s = 0.5 * h * (1.0 + xj)
                pts_i = lo[i] + s if lo[i] == t_e else hi[i] - s
                out[i] = (0.5 * h) ** (nu + 1) * np.dot(wj, f(pts_i, skip=t_e))
        return out

    def integral(self, t1: float, t2: float, panels: int = 64) -> float:
        return float(np.sum(self.cell_integrals(np.linspace(t1, t2, panels + 1))))


def reconstruct_weight(p: IsoparametricProfile) -> WeightCurve:
    """Solve (b w)' = -a w with w(t_ref) sqrt(b(t_ref)) = reference area."""
    return WeightCurve(p)


def mean_curvature_of_level(p: IsoparametricProfile, t: float) -> float:
    """Mean curvature (trace of the shape operator) of the level M_t w.r.t. grad f/|grad f|."""
    if not p.t_lo <= t <= p.t_hi:
        raise ProfileError(f"t={t} outside the profile interval {p.interval}")
    if not float(p.b(t)) > 0:
        raise ProfileError(f"singular level: b({t}) <= 0 (focal set)")
    return float(p.level_trace_curvature(t))


def geodesic_distance(p: IsoparametricProfile, t1: float, t2: float) -> float:
    """Distance between the levels M_t1 and M_t2: integral of dt / sqrt(b)."""
    for t in (t1, t2):
        if not p.t_lo <= t <= p.t_hi:
            raise ProfileError(f"t={t} outside the profile interval {p.interval}")
    if t1 == t2:
        return 0.0
    lo, hi = min(t1, t2), max(t1, t2)
    inner = np.linspace(lo, hi, 513)[1:-1]
    inner = inner[(inner > lo) & (inner < hi)]
    if np.any(p.b(inner) <= 0):
        raise ProfileError("b vanishes inside the integration range")
    focal = {e.param for e in p.focal_endpoints}
    mid = 0.5 * (p.t_lo + p.t_hi)
    total = 0.0
    for x, y, t_e, d in ((lo, min(hi, mid), p.t_lo, 1.0), (max(lo, mid), hi, p.t_hi, -1.0)):
        if not x < y:
            continue
        if t_e not in focal:
            val, _ = integrate.quad(lambda t: 1.0 / np.sqrt(p.b(t)), x, y, epsabs=0.0, epsrel=1e-13, limit=200)
            total += val
            continue
        db = abs(float(p.b(t_e, 1)))
        if db <= ZERO_TOL:
            raise ProfileError(f"non-integrable singularity: b vanishes to order >= 2 at t={t_e}")
        # t = t_e + d sigma^2 removes the inverse square root
        lim = 2.0 / math.sqrt(db)

        def g(sig, t_e=t_e, d=d, lim=lim):
            bt = float(p.b(t_e + d * sig * sig))
            return 2.0 * sig / math.sqrt(bt) if bt > 0 and sig > 0 else lim

        s1, s2 = sorted((math.sqrt(abs(x - t_e)), math.sqrt(abs(y - t_e))))
        val, _ = integrate.quad(g, s1, s2, epsabs=0.0, epsrel=1e-13, limit=200)
        total += val
    return float(total)


# -- conformal class ---------------------------------------------------------


def conformal_laplacian(p: IsoparametricProfile, u: ScalarCurve, t):
    """L_g(u) = a_n (-b u'' + a u') + s_g u for radial u."""
    t = np.asarray(t, dtype=float)
    return p.a_n * (-p.b(t) * u(t, 2) + p.a(t) * u(t, 1)) + p.s_g(t) * u(t)


def boundary_operator(p: IsoparametricProfile, u: ScalarCurve, comp: BoundaryComponent) -> float:
    """B_g(u) = 2/(n-2) du/d(eta) + h_g u at a boundary component."""
    r = comp.param
    dnu = comp.orientation * np.sqrt(float(p.b(r))) * float(u(r, 1))
    return float(2.0 / (p.dim - 2) * dnu + p.boundary_mean_curvature(comp) * float(u(r)))


def conformal_change(p: IsoparametricProfile, u: ScalarCurve, name: str | None = None,
                     check_samples: int = 1025) -> IsoparametricProfile:
    """Profile of g_u = u^(p_n - 2) g for a positive radial function u."""
    n = p.dim
    k = p.p_n - 2.0
    pn = p.p_n
    a_n = p.a_n
    ts = np.linspace(p.t_lo, p.t_hi, check_samples)
    uv = u(ts)
    if not np.all(np.isfinite(uv)) or np.any(uv <= 0):
        raise ProfileError("conformal factor u must be positive on the whole interval")

    a, b, s = p.a, p.b, p.s_g

    def a_new(t):
        uu, du = u(t), u(t, 1)
        return a(t) * uu ** -k - 2.0 * b(t) * uu ** (-k - 1) * du

    def da_new(t):
        uu, du, d2u = u(t), u(t, 1), u(t, 2)
        return (a(t, 1) * uu ** -k - k * a(t) * uu ** (-k - 1) * du
                - 2.0 * (b(t, 1) * uu ** (-k - 1) * du
                         - (k + 1) * b(t) * uu ** (-k - 2) * du ** 2
                         + b(t) * uu ** (-k - 1) * d2u))

    def b_new(t):
        return b(t) * u(t) ** -k

    def db_new(t):
        uu = u(t)
        return b(t, 1) * uu ** -k - k * b(t) * uu ** (-k - 1) * u(t, 1)

    def s_new(t):
        return u(t) ** (1 - pn) * conformal_laplacian(p, u, t)

    def ds_new(t):
        uu, du, d2u, d3u = u(t), u(t, 1), u(t, 2), u(t, 3)
        lap = conformal_laplacian(p, u, t)
        dlap = (a_n * (-b(t, 1) * d2u - b(t) * d3u + a(t, 1) * du + a(t) * d2u)
                + s(t, 1) * uu + s(t) * du)
        return (1 - pn) * uu ** -pn * du * lap + uu ** (1 - pn) * dlap

    ends = []
    for e in p.endpoints:
        if isinstance(e, BoundaryComponent):
            ur = float(u(e.param))
            h = ur ** (-pn / 2) * boundary_operator(p, u, e)
            ends.append(BoundaryComponent(e.param, e.orientation, h))
        else:
            ends.append(FocalEndpoint(e.param, e.focal_dim, e.vanishing_order))
    t_ref, area = p.weight_norm
    phi_ref = float(u(t_ref)) ** k
    return IsoparametricProfile(
        name=name or f"{p.name}_conf", dim=n, interval=p.interval,
        a=Analytic(a_new, [da_new], "a_conf"),
        b=Analytic(b_new, [db_new], "b_conf"),
        s_g=Analytic(s_new, [ds_new], "s_conf"),
        endpoints=tuple(ends),
        weight_norm=(t_ref, area * phi_ref ** ((n - 1) / 2)),
    )
