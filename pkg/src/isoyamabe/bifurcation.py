"""Bifurcation from the constant solution of Delta u + lambda (u - u^(s-1)) = 0.

Discretely F(u, lambda) = K u / m + lambda (u - u^(s-1)) with K the Neumann
stiffness (flux differences) and m the cell masses, the same operator as in
``spectra``.  Its linearization at u = 1 is K/m - lambda (s-2), so the discrete
bifurcation points are exactly mu_i / (s-2) for the discrete Neumann eigenvalues.

On a product (M x N, g + t h) with f pulled back from M, radial functions see
only the Laplacian of M, and u^(p-2)(g + t h) has constant scalar curvature with
minimal boundary iff Delta u + lambda(t)(u - u^(p-1)) = 0 with
lambda(t) = (s_g + s_h / t) / a_{m+n}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigvalsh_tridiagonal

from .discretize import AssembledForms, Grid, GridFunction, assemble
from .geometry import conformal_change
from .profile import IsoparametricProfile, ProfileError, make_product
from .spectra import neumann_spectrum


class BifurcationError(ValueError):
    pass


@dataclass(frozen=True)
class BifurcationPoint:
    i: int
    mu: float
    lam: float


def bifurcation_points(p: IsoparametricProfile, grid: Grid, s: float, count: int) -> list[BifurcationPoint]:
    """lambda_i = mu_i / (s - 2) for i = 1..count."""
    if not s > 2:
        raise BifurcationError(f"bifurcation points need s > 2, got s={s}")
    spec = neumann_spectrum(p, grid, count + 1, estimate_error=False)
    return [BifurcationPoint(i, float(mu), float(mu) / (s - 2)) for i, mu in enumerate(spec.eigenvalues) if i >= 1]


# -- product data --------------------------------------------------------------


def a_const(n: int) -> float:
    return 4.0 * (n - 1) / (n - 2)


def p_crit(n: int) -> float:
    return 2.0 * n / (n - 2)


@dataclass(frozen=True)
class ProductData:
    """(M x N, g + t h): base profile of M, closed factor N of dimension n_factor and scalar curvature s_h."""

    base: IsoparametricProfile
    n_factor: int
    s_h: float
    factor_volume: float = 1.0

    @property
    def dim(self) -> int:
        return self.base.dim + self.n_factor

    @property
    def s_g(self) -> float:
        if not self.base.has_constant_scalar_curvature():
            raise ProfileError("product construction needs constant s_g on the base")
        return float(self.base.s_g(self.base.weight_norm[0]))

    @property
    def a_N(self) -> float:
        return a_const(self.dim)

    @property
    def p_N(self) -> float:
        return p_crit(self.dim)

    def lambda_of_t(self, t: float) -> float:
        return (self.s_g + self.s_h / t) / self.a_N

    def t_of_lambda(self, lam: float) -> float:
        floor = self.s_g / self.a_N
        if not lam > floor:
            raise BifurcationError(f"lambda={lam} is not above s_g/a_N={floor}; no product scale realizes it")
        return self.s_h / (self.a_N * lam - self.s_g)

    def profile(self, t: float) -> IsoparametricProfile:
        return make_product(self.base, self.n_factor, self.s_h, t, self.factor_volume)


@dataclass(frozen=True)
class BifurcationTime:
    i: int
    mu: float
    t: float
    lam: float


@dataclass
class TimesResult:
    times: list[BifurcationTime]
    notices: list[str] = field(default_factory=list)


def product_bifurcation_times(m: int, s_g: float, s_h: float, n_factor: int, mus,
                              rtol: float = 1e-12) -> TimesResult:
    """t_i = s_h / (mu_i (m+n-1) - s_g) for mus = [mu_1, mu_2, ...], kept if positive, sorted decreasing.

    Uses a_N / (p_N - 2) = N - 1 with N = m + n.  Each t_i is cross-checked by
    lambda(t_i) (p_N - 2) = mu_i.
    """
    if not (s_g > 0 and s_h > 0):
        raise BifurcationError("product bifurcation times need s_g > 0 and s_h > 0")
    big_n = m + n_factor
    a_n, p_n = a_const(big_n), p_crit(big_n)
    times, notices = [], []
    for i, mu in enumerate(mus, start=1):
        mu = float(mu)
        denom = mu * (big_n - 1) - s_g
        if abs(denom) <= 1e-12 * max(1.0, abs(s_g)):
            notices.append(f"i={i}: mu_i (m+n-1) = s_g, resonant eigenvalue excluded")
            continue
        t = s_h / denom
        if t <= 0:
            notices.append(f"i={i}: t_i = {t:.6g} not positive, dropped")
            continue
        lam = (s_g + s_h / t) / a_n
        if abs(lam * (p_n - 2) - mu) > rtol * max(1.0, abs(mu)):
            raise BifurcationError(f"i={i}: lambda(t_i)(p-2) = {lam * (p_n - 2)!r} differs from mu_i = {mu!r}")
        times.append(BifurcationTime(i, mu, t, lam))
    times.sort(key=lambda bt: -bt.t)
    return TimesResult(times, notices)


# -- discrete map F^s ------------------------------------------------------------


class _BifMap:
    def __init__(self, forms: AssembledForms, s: float):
        self.forms, self.s = forms, s
        self.m = forms.mass
        self.k = forms.neumann_matrix()
        self.vol = float(self.m.sum())

    def weak(self, u, lam):
        # flux differences keep F(1, lambda) exactly zero
        return self.forms.neumann_apply(u) + lam * self.m * (u - u ** (self.s - 1))

    def strong(self, u, lam):
        return self.weak(u, lam) / self.m

    def residual(self, u, lam) -> float:
        f = self.strong(u, lam)
        return math.sqrt(float(np.sum(self.m * f * f)) / self.vol)

    def jac_u(self, u, lam):
        return self.k + sp.diags(lam * self.m * (1.0 - (self.s - 1) * u ** (self.s - 2)))

    def jac_lam(self, u):
        return self.m * (u - u ** (self.s - 1))


def discrete_map(p: IsoparametricProfile, grid: Grid, u, lam: float, s: float) -> np.ndarray:
    """Strong form of F^s on cell values."""
    f = _BifMap(assemble(p, grid), s)
    vals = u.values if isinstance(u, GridFunction) else np.asarray(u, float)
    return f.strong(vals, lam)


def kernel_check(p: IsoparametricProfile, grid: Grid, s: float, i: int) -> dict:
    """Two smallest |eigenvalues| of the symmetrized linearization at (1, lambda_i)."""
    forms = assemble(p, grid)
    mu = neumann_spectrum(p, grid, i + 2, estimate_error=False).eigenvalues
    lam_i = mu[i] / (s - 2)
    k, m = forms.flux, forms.mass
    main = np.zeros(m.size)
    main[:-1] += k
    main[1:] += k
    d = main / m - lam_i * (s - 2)
    e = -k / np.sqrt(m[:-1] * m[1:])
    ev = np.sort(np.abs(eigvalsh_tridiagonal(d, e)))
    gap = min(abs(mu[i] - mu[i - 1]), abs(mu[i + 1] - mu[i]))
    return {"lambda_i": float(lam_i), "sigma_1": float(ev[0]), "sigma_2": float(ev[1]), "spectral_gap": float(gap),
            "simple": bool(ev[0] <= 1e-8 * max(1.0, mu[i]) and ev[1] >= 0.5 * gap)}


# -- continuation ----------------------------------------------------------------


@dataclass
class BranchSample:
    r: float
    u: GridFunction
    lam: float
    residual: float
    distance_to_trivial: float
    newton_iterations: int = 0

    def to_row(self):
        return {"r": self.r, "lambda": self.lam, "residual": self.residual,
                "distance_to_trivial": self.distance_to_trivial}


@dataclass
class Branch:
    i: int
    s: float
    mu: float
    lambda_i: float
    eigenfunction: GridFunction
    samples: list[BranchSample]
    truncated: bool = False
    diagnostics: list[str] = field(default_factory=list)


def _sample(fmap: _BifMap, grid: Grid, u, lam, v, its=0) -> BranchSample:
    r = float(np.sum(fmap.m * (u - 1.0) * v))
    gf = GridFunction(grid, u.copy())
    dist = max(float(np.max(np.abs(u - 1.0))), *(abs(t - 1.0) for t in gf.traces))
    return BranchSample(r, gf, float(lam), fmap.residual(u, lam), dist, its)


def _newton(fmap: _BifMap, u, lam, row_u, row_lam, rhs_fn, tol, max_iter=12):
    """Newton on [F(u, lam) = 0; row_u . u + row_lam lam = target]; returns (u, lam, its) or None."""
    res = fmap.residual(u, lam)
    for its in range(1, max_iter + 1):
        jac = sp.bmat([[fmap.jac_u(u, lam), fmap.jac_lam(u)[:, None]],
                       [row_u[None, :], np.array([[row_lam]])]], format="csc")
        rhs = -np.concatenate([fmap.weak(u, lam), [rhs_fn(u, lam)]])
        try:
            step = spla.spsolve(jac, rhs)
        except RuntimeError:
            return None
        if not np.all(np.isfinite(step)):
            return None
        u, lam = u + step[:-1], lam + step[-1]
        new = fmap.residual(u, lam)
        if new <= tol and abs(rhs_fn(u, lam)) <= 1e-12 * (1.0 + abs(lam)):
            return u, lam, its
        if its > 3 and new > 0.5 * res:
            return None
        res = new
    return None


def _setup(p, grid, s, i):
    if s is None:
        s = p.p_n
    if not s > 2:
        raise BifurcationError(f"bifurcation needs s > 2, got s={s}")
    if i < 1:
        raise BifurcationError("branch index i must be >= 1")
    spec = neumann_spectrum(p, grid, i + 2, estimate_error=False)
    mu = spec.eigenvalues
    gap = min(mu[i] - mu[i - 1], mu[i + 1] - mu[i])
    if gap <= 1e-8 * mu[i]:
        raise BifurcationError(f"mu_{i} is not numerically simple (gap {gap:.3e})")
    v = spec.eigenfunctions[i]
    fmap = _BifMap(spec.forms, s)
    return s, float(mu[i]), float(mu[i]) / (s - 2), v, fmap


def branch_at_r(p: IsoparametricProfile, grid: Grid, i: int, r: float, s: float | None = None,
                guess: BranchSample | None = None, tol: float = 1e-10) -> BranchSample:
    """Branch point with <u - 1, v_i>_m = r (Newton from 1 + r v_i or from ``guess``)."""
    s, mu, lam_i, v, fmap = _setup(p, grid, s, i)
    vv = v.values
    mv = fmap.m * vv
    if guess is None:
        u0, l0 = 1.0 + r * vv, lam_i
    else:
        u0, l0 = guess.u.values + (r - guess.r) * vv, guess.lam
    out = _newton(fmap, u0, l0, mv, 0.0, lambda u, lam: float(mv @ (u - 1.0)) - r, tol)
    if out is None:
        raise BifurcationError(f"Newton failed at r={r}")
    u, lam, its = out
    return _sample(fmap, grid, u, lam, vv, its)


def continue_branch(p: IsoparametricProfile, grid: Grid, s: float | None = None, i: int = 1,
                    r_max: float = 0.05, steps: int = 200, tol: float = 1e-10,
                    ds_max: float | None = None) -> Branch:
    """Pseudo-arclength continuation of the i-th branch from (1 + r0 v_i, lambda_i).

    The arclength metric is the weighted L^2 product on u plus the plain product on
    lambda.  Step length grows by 1.5 after fast Newton solves and halves on
    failure; the last sample is placed exactly at r = r_max.
    """
    s, mu, lam_i, v, fmap = _setup(p, grid, s, i)
    vv = v.values
    m = fmap.m
    r0 = 1e-3 / float(np.max(np.abs(vv)))
    ds_max = ds_max or r_max / 8
    u1 = np.ones(m.size)
    samples = [_sample(fmap, grid, u1, lam_i, vv)]
    diags: list[str] = []
    # first step along the kernel direction
    tan_u, tan_l = vv.copy(), 0.0
    x_u, x_l = u1, lam_i
    ds = r0
    truncated = False
    while len(samples) < steps:
        pu, pl = x_u + ds * tan_u, x_l + ds * tan_l
        row_u, row_l = m * tan_u, tan_l

        def arclength(u, lam, pu=pu, pl=pl, row_u=row_u, row_l=row_l):
            return float(row_u @ (u - pu)) + row_l * (lam - pl)

        out = _newton(fmap, pu, pl, row_u, row_l, arclength, tol)
        if out is None:
            ds *= 0.5
            if ds < 1e-10:
                truncated = True
                diags.append(f"Newton failed after step halving at r={samples[-1].r:.6g}")
                break
            continue
        u, lam, its = out
        if np.any(u <= 0):
            truncated = True
            diags.append(f"positivity lost after r={samples[-1].r:.6g}")
            break
        smp = _sample(fmap, grid, u, lam, vv, its)
        if smp.r >= r_max:
            try:
                smp = branch_at_r(p, grid, i, r_max, s, guess=samples[-1], tol=tol)
            except BifurcationError as exc:
                truncated = True
                diags.append(str(exc))
                break
            samples.append(smp)
            break
        du, dl = u - x_u, lam - x_l
        norm = math.sqrt(float(np.sum(m * du * du)) + dl * dl)
        tan_u, tan_l = du / norm, dl / norm
        x_u, x_l = u, lam
        samples.append(smp)
        ds = min(1.5 * ds, ds_max) if its <= 3 else (0.7 * ds if its >= 6 else ds)
    else:
        diags.append(f"step budget of {steps} samples exhausted before r_max")
    return Branch(i, s, mu, lam_i, v, samples, truncated, diags)


def root_lambda(p: IsoparametricProfile, grid: Grid, i: int, r: float, s: float | None = None) -> float:
    """lambda at r = 0+ by linear extrapolation from branch points at r and r/2."""
    full = branch_at_r(p, grid, i, r, s)
    half = branch_at_r(p, grid, i, r / 2, s)
    return 2.0 * half.lam - full.lam


# -- certificates --------------------------------------------------------------


def branch_to_metric(product: ProductData, sample: BranchSample, t_i: float | None = None,
                     s_tol: float = 1e-5, h_tol: float = 1e-6, check_samples: int = 2001) -> dict:
    """Build u^(p-2) (g + gamma h) from a branch sample and certify it."""
    gamma = product.t_of_lambda(sample.lam)
    prof = product.profile(gamma)
    lam_back = product.lambda_of_t(gamma)
    curve = sample.u.to_curve()
    conf = conformal_change(prof, curve, name=f"{prof.name}_branch")
    ts = np.linspace(prof.t_lo, prof.t_hi, check_samples)
    sv = conf.s_g(ts)
    s_mean = float(np.mean(sv))
    spread = float(np.ptp(sv)) / abs(s_mean)
    hmax = max((abs(e.mean_curvature) for e in conf.boundary_components), default=0.0)
    # trace extrapolation of u = 1 may be off by an ulp while the residual is exactly 0
    trivial = sample.distance_to_trivial <= 10 * max(sample.residual, np.finfo(float).eps)
    cert = {
        "gamma": gamma,
        "lambda": sample.lam,
        "lambda_recomputed": lam_back,
        "lambda_mismatch": abs(lam_back - sample.lam),
        "scalar_curvature": s_mean,
        "scalar_relative_spread": spread,
        "boundary_mean_curvature_max": hmax,
        "distance_to_trivial": sample.distance_to_trivial,
        "residual": sample.residual,
        "trivial": trivial,
        "gamma_minus_t_i": None if t_i is None else abs(gamma - t_i),
    }
    cert["passed"] = bool(spread <= s_tol and hmax <= h_tol and cert["lambda_mismatch"] <= 1e-10 * max(1.0, sample.lam))
    cert["label"] = "trivial (product metric itself)" if trivial else "nontrivial constant scalar curvature metric"
    return cert


__all__ = [
    "BifurcationError", "BifurcationPoint", "bifurcation_points", "ProductData", "BifurcationTime",
    "TimesResult", "product_bifurcation_times", "discrete_map", "kernel_check", "BranchSample", "Branch",
    "branch_at_r", "continue_branch", "root_lambda", "branch_to_metric",
]
