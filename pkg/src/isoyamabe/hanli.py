"""Constrained minimization on B^{a,b}_{p,q} and prescribed boundary mean curvature.

Minimize E(u) over radial u with a int u^p dv + b int_{bdry} u^q dsigma = 1.  The
scaling lambda(u) solving F(lambda) = a N_p lambda^p + b N_q lambda^q = 1 turns
any positive u into a feasible one, so the flow minimizes G(u) = lambda(u)^2 E(u).
A minimizer solves L_g u = c1 u^(p-1), B_g u = c2 u^(q-1); rescaling v = kappa u
with kappa^(p-2) = c1 gives L_g v = v^(p-1) and B_g v = c_ab v^(q-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .discretize import AssembledForms, Grid, GridFunction, assemble
from .profile import IsoparametricProfile, require_usable
from .spectra import conformal_eigen_probe
from .yamabe import AdmissibilityError, SolveOptions, SolverError, check_subcritical


class HanLiError(SolverError):
    pass


@dataclass(frozen=True)
class ConstraintSpec:
    a: float
    b: float
    p: float | None = None  # default p_n
    q: float | None = None  # default p_n^bdry

    def resolved(self, prof: IsoparametricProfile) -> ConstraintSpec:
        p = prof.p_n if self.p is None else float(self.p)
        q = prof.p_bdry if self.q is None else float(self.q)
        spec = ConstraintSpec(float(self.a), float(self.b), p, q)
        spec.validate()
        return spec

    def validate(self):
        if not self.a > 0:
            raise ValueError(f"constraint needs a > 0, got {self.a}")
        if self.p is not None and self.q is not None and not (1 <= self.q < self.p):
            raise ValueError(f"constraint needs 1 <= q < p, got p={self.p}, q={self.q}")


# -- projection onto the constraint --------------------------------------------


def _powers(forms: AssembledForms, x, spec: ConstraintSpec):
    return forms.interior_power(x, spec.p), forms.boundary_power(x, spec.q)


def scaling_root(alpha: float, beta: float, p: float, q: float) -> float:
    """Unique positive root of alpha t^p + beta t^q = 1 (alpha > 0).

    For beta >= 0 the left side increases from 0; for beta < 0 it has a single
    negative minimum and the root lies to its right.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")

    def f(t):
        return alpha * t ** p + beta * t ** q - 1.0

    def df(t):
        return alpha * p * t ** (p - 1) + beta * q * t ** (q - 1)

    if beta >= 0:
        lo = 0.0
    else:
        lo = (-beta * q / (alpha * p)) ** (1.0 / (p - q))  # minimizer of F, F(lo) < 0
    hi = max(1.0, 2.0 * lo)
    while f(hi) < 0:
        lo, hi = hi, 2.0 * hi
    t = brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    for _ in range(3):
        d = df(t)
        if d <= 0:
            break
        t_new = t - f(t) / d
        if not lo <= t_new <= hi or abs(f(t_new)) >= abs(f(t)):
            break
        t = t_new
    return float(t)


def constraint_project(prof: IsoparametricProfile, grid: Grid, phi, spec: ConstraintSpec,
                       forms: AssembledForms | None = None) -> float:
    """Scaling lambda > 0 with lambda * phi on the constraint set."""
    spec = spec.resolved(prof)
    forms = forms or assemble(prof, grid)
    x = forms.vector(phi)
    if np.any(x <= 0):
        raise ValueError("constraint projection needs a positive function")
    n_p, n_q = _powers(forms, x, spec)
    return scaling_root(spec.a * n_p, spec.b * n_q, spec.p, spec.q)


def feasibility(forms: AssembledForms, x, spec: ConstraintSpec) -> float:
    n_p, n_q = _powers(forms, x, spec)
    return abs(spec.a * n_p + spec.b * n_q - 1.0)


# -- minimization --------------------------------------------------------------


@dataclass
class HanLiResult:
    spec: ConstraintSpec
    minimizer: GridFunction
    value: float  # Y^{a,b}_{p,q;f}
    c1: float
    c2: float
    A: float  # a p N_p + b q N_q at the minimizer
    residual_interior: float
    residual_boundary: list[float]
    iterations: int
    feasibility_max: float
    log: list[dict] = field(default_factory=list, repr=False)
    vector: np.ndarray = field(default=None, repr=False)
    forms: AssembledForms = field(default=None, repr=False)

    @property
    def kappa(self) -> float:
        """Scale with L_g(kappa u) = (kappa u)^(p-1)."""
        return self.c1 ** (1.0 / (self.spec.p - 2.0))

    @property
    def c_ab(self) -> float:
        """Boundary constant of the rescaled solution kappa u."""
        return self.c2 * self.kappa ** (2.0 - self.spec.q)

    def to_json(self):
        return {"a": self.spec.a, "b": self.spec.b, "p": self.spec.p, "q": self.spec.q,
                "Y_ab": self.value, "A": self.A, "c1": self.c1, "c2": self.c2, "c_ab": self.c_ab,
                "residual_interior": self.residual_interior, "residual_boundary": self.residual_boundary,
                "iterations": self.iterations, "feasibility_max": self.feasibility_max}


def _multipliers(forms: AssembledForms, x, spec: ConstraintSpec, e: float):
    n_p, n_q = _powers(forms, x, spec)
    big_a = spec.a * spec.p * n_p + spec.b * spec.q * n_q
    c1 = spec.a * spec.p * e / big_a
    c2 = spec.b * spec.q * e / (2 * (forms.dim - 1) * big_a)
    return big_a, c1, c2


def hanli_residuals(forms: AssembledForms, x, spec: ConstraintSpec, c1: float, c2: float):
    """Residuals of L_g u = c1 u^(p-1), B_g u = c2 u^(q-1) (interior relative, boundary absolute)."""
    m = forms.m
    ax = forms.energy_apply(x)
    phi = x[:m]
    r = ax[:m] / forms.mass - c1 * phi ** (spec.p - 1)
    rel = math.sqrt(np.sum(forms.mass * r * r) / np.sum(forms.mass * phi * phi))
    bres = [abs(float(ax[m + j] / (2 * (forms.dim - 1) * bt.area) - c2 * x[m + j] ** (spec.q - 1)))
            for j, bt in enumerate(forms.boundary)]
    return rel, bres


def _gate(prof, grid, spec):
    p_ok = check_subcritical(prof, spec.p, "interior")
    q_ok = check_subcritical(prof, spec.q, "boundary")
    if not (p_ok and q_ok):
        bad = [v.describe() for v in (p_ok, q_ok) if not v]
        raise AdmissibilityError("exponents not admissible: " + "; ".join(bad))
    probe = conformal_eigen_probe(prof, grid)
    if probe.signs["L"] != 1:
        raise HanLiError(f"Yamabe constant not positive (radial probe lambda_L = {probe.lambda_L:.6g}); refusing",
                         {"lambda_L": probe.lambda_L})


def minimize_constrained(prof: IsoparametricProfile, grid: Grid, spec: ConstraintSpec,
                         options: SolveOptions | None = None, init=None, check: bool = True) -> HanLiResult:
    """Projected, preconditioned gradient flow for E on the constraint set."""
    options = options or SolveOptions()
    spec = spec.resolved(prof)
    require_usable(prof)
    if not prof.boundary_components:
        raise HanLiError("the constraint needs a boundary component")
    if check:
        _gate(prof, grid, spec)
    forms = assemble(prof, grid)
    a_mat = forms.energy_matrix()
    lu = spla.splu(a_mat.tocsc())
    options_polish = 1e-1  # try Newton polishing below this residual
    mu_p = np.concatenate([forms.mass, np.zeros(len(forms.boundary))])
    mu_q = np.concatenate([np.zeros(forms.m), forms.boundary_areas()])

    def project(x):
        x = np.abs(x)
        n_p, n_q = _powers(forms, x, spec)
        return scaling_root(spec.a * n_p, spec.b * n_q, spec.p, spec.q) * x

    if init is None:
        x = np.ones(forms.size)
        if options.init == "random":
            x = 0.5 + np.random.default_rng(options.seed).random(forms.size)
    else:
        x = np.abs(forms.vector(init)).astype(float)
    x = project(x)
    e = forms.energy(x)
    log = []
    feas_max = 0.0
    tau = 0.5
    converged = False
    best, since = math.inf, 0
    it = 0
    for it in range(options.max_iter + 1):
        big_a, c1, c2 = _multipliers(forms, x, spec, e)
        rel, bres = hanli_residuals(forms, x, spec, c1, c2)
        feas = feasibility(forms, x, spec)
        feas_max = max(feas_max, feas)
        log.append({"iter": it, "value": e, "residual": rel, "boundary_residual": max(bres),
                    "feasibility": feas})
        if rel <= options.tol and max(bres) <= options.boundary_tol:
            converged = True
            break
        if it == options.max_iter:
            break
        tot = rel + max(bres)
        if tot < 0.5 * best:
            best, since = tot, 0
        else:
            since += 1
            if since > 200:
                raise HanLiError("constrained flow stagnated", {"iteration": it, "value": e, "residual": rel})
        v = spec.a * spec.p * mu_p * x ** (spec.p - 1) + spec.b * spec.q * mu_q * x ** (spec.q - 1)
        if rel + max(bres) < options_polish:
            xn = _kkt_newton(forms, a_mat, x, v, e, big_a, spec, mu_p, mu_q, project)
            if xn is not None:
                en = forms.energy(xn)
                _, c1n, c2n = _multipliers(forms, xn, spec, en)
                rn, bn = hanli_residuals(forms, xn, spec, c1n, c2n)
                # descent safeguard keeps Newton on the minimizer, not a saddle
                if rn + max(bn) < 0.5 * (rel + max(bres)) and en <= e + 1e-12 * abs(e):
                    x, e = xn, en
                    continue
        g = 2.0 * (forms.energy_apply(x) - e / big_a * v)
        d = -lu.solve(g)
        slope = float(g @ d)
        if not slope < 0:
            raise HanLiError("no descent direction", {"iteration": it, "value": e})
        floor = 8 * np.finfo(float).eps * max(1.0, abs(e))
        tau = min(0.5, 2.0 * tau)
        while True:
            xt = project(x + tau * d)
            et = forms.energy(xt)
            if et <= e + options.armijo * tau * slope:
                break
            # below ~100 ulps the decrease is invisible: the residual decides
            if -slope * tau < 100 * floor and et <= e + floor:
                _, c1t, c2t = _multipliers(forms, xt, spec, et)
                rt, bt = hanli_residuals(forms, xt, spec, c1t, c2t)
                if rt + max(bt) < rel + max(bres):
                    break
            tau *= 0.5
            if tau < 1e-14:
                raise HanLiError("constrained flow stagnated in line search",
                                 {"iteration": it, "value": e, "residual": rel})
        x, e = xt, et
    if not converged:
        raise HanLiError(f"no convergence in {options.max_iter} iterations",
                         {"value": e, "residual": log[-1]["residual"]})
    if x.min() < 1e-8 * x.max():
        raise HanLiError("minimizer lost positivity")
    big_a, c1, c2 = _multipliers(forms, x, spec, e)
    return HanLiResult(spec, forms.grid_function(x), e, c1, c2, big_a, rel, bres, it, feas_max,
                       log, x, forms)


def _kkt_newton(forms, a_mat, x, v, e, big_a, spec, mu_p, mu_q, project):
    """One Newton step on 2Ax = l v, F(x) = 1, followed by the scaling projection."""
    lag = 2.0 * e / big_a
    dv = (spec.a * spec.p * (spec.p - 1) * mu_p * x ** (spec.p - 2)
          + spec.b * spec.q * (spec.q - 1) * mu_q * x ** (spec.q - 2))
    jac = sp.bmat([[2.0 * a_mat - lag * sp.diags(dv), -v[:, None]], [v[None, :], None]], format="csc")
    rhs = -np.concatenate([2.0 * forms.energy_apply(x) - lag * v, [0.0]])
    try:
        step = spla.spsolve(jac, rhs)
    except RuntimeError:
        return None
    if not np.all(np.isfinite(step)):
        return None
    xn = x + step[:-1]
    if np.any(xn <= 0):
        return None
    return project(xn)


# -- the c_{a,b} curve -----------------------------------------------------------


@dataclass
class CSample:
    a: float
    b: float
    Y: float
    A: float
    c: float
    c_closed_form: float  # b / sqrt(2n(n-2)a) * sqrt(Y/A); meaningful at critical exponents
    lower: float
    upper: float | None
    flags: list[str]
    residual_interior: float
    residual_boundary: float

    def to_json(self):
        return dict(self.__dict__)


def c_sample(prof: IsoparametricProfile, res: HanLiResult) -> CSample:
    n = prof.dim
    a, b = res.spec.a, res.spec.b
    y, big_a = res.value, res.A
    closed = b / math.sqrt(2 * n * (n - 2) * a) * math.sqrt(y / big_a)
    lower = b * math.sqrt(y) / (2 * n * math.sqrt(a))
    upper = b * math.sqrt(y) / (2 * math.sqrt(n * (n - 1) * a)) if b > 0 else None
    c = res.c_ab
    tol = 1e-9 * (1.0 + abs(c))
    flags = []
    if c < lower - tol:
        flags.append("below lower bound")
    if upper is not None and c > upper + tol:
        flags.append("above upper bound")
    p, q = res.spec.p, res.spec.q
    if b >= 0 and not (q - 1e-9 <= big_a <= p + 1e-9):
        flags.append("A outside [q, p]")
    if b < 0 and big_a < p - 1e-9:
        flags.append("A below p")
    return CSample(a, b, y, big_a, c, closed, lower, upper, flags, res.residual_interior,
                   max(res.residual_boundary, default=0.0))


def c_curve(prof: IsoparametricProfile, grid: Grid, path, options: SolveOptions | None = None) -> list[CSample]:
    """c_{a,b} with its bounds along a list of (a, b) points (warm-started in order)."""
    out, prev = [], None
    _gate(prof, grid, ConstraintSpec(1.0, 0.0).resolved(prof))
    for a, b in path:
        res = minimize_constrained(prof, grid, ConstraintSpec(a, b), options, init=prev, check=False)
        prev = res.minimizer
        out.append(c_sample(prof, res))
    return out


# -- prescribed mean curvature ---------------------------------------------------


@dataclass
class PrescribedResult:
    a: float
    b: float
    c: float
    v: GridFunction
    certificate: dict
    evaluations: int


def _certificate(prof, res: HanLiResult, c_target: float) -> dict:
    forms, spec = res.forms, res.spec
    x = res.kappa * res.vector
    rel, bres = hanli_residuals(forms, x, spec, 1.0, res.c_ab)
    return {"residual_interior": rel, "residual_boundary": bres, "c_ab": res.c_ab,
            "c_error": abs(res.c_ab - c_target), "Y_ab": res.value, "kappa": res.kappa}


def find_prescribed_mean_curvature(prof: IsoparametricProfile, grid: Grid, c_target: float,
                                   tol: float = 1e-7, max_sweeps: int = 40,
                                   options: SolveOptions | None = None) -> PrescribedResult:
    """(a, b) with c_{a,b} = c_target and the solution of L v = v^(p-1), B v = c v^(q-1).

    Moderate targets move b in [-1, 1] at a = 1; beyond the landmarks c_{1,+-1}
    a halves at b = +-1 until the target is bracketed (c_{a,+-1} -> +-infinity as a -> 0).
    """
    options = options or SolveOptions(tol=1e-9, boundary_tol=1e-10)
    require_usable(prof)
    if prof.k_f < 1:
        raise AdmissibilityError("prescribed mean curvature runs need k(f) >= 1")
    _gate(prof, grid, ConstraintSpec(1.0, 0.0).resolved(prof))
    cache: dict = {}
    state = {"prev": None}

    def solve(a, b):
        key = (a, b)
        if key not in cache:
            cache[key] = minimize_constrained(prof, grid, ConstraintSpec(a, b), options,
                                              init=state["prev"], check=False)
            state["prev"] = cache[key].minimizer
        return cache[key]

    def done(res):
        cert = _certificate(prof, res, c_target)
        return PrescribedResult(res.spec.a, res.spec.b, res.c_ab, res.forms.grid_function(res.kappa * res.vector),
                                cert, len(cache))

    if c_target == 0:
        return done(solve(1.0, 0.0))
    sign = 1.0 if c_target > 0 else -1.0
    land = solve(1.0, sign).c_ab
    if abs(c_target) <= abs(land):
        # b-sweep at a = 1; c_{1,0} = 0
        root = brentq(lambda b: solve(1.0, b).c_ab - c_target, 0.0, sign, xtol=1e-14, rtol=1e-13)
        res = solve(1.0, root)
    else:
        a_hi, c_hi = 1.0, land
        for _ in range(max_sweeps):
            a_lo = 0.5 * a_hi
            c_lo = solve(a_lo, sign).c_ab
            if abs(c_lo) >= abs(c_target):
                break
            a_hi, c_hi = a_lo, c_lo
        else:
            raise HanLiError(f"no bracket for c={c_target} within {max_sweeps} halvings of a",
                             {"attained_c_range": sorted([land, c_lo])})
        root = brentq(lambda la: solve(math.exp(la), sign).c_ab - c_target,
                      math.log(a_lo), math.log(a_hi), xtol=1e-14, rtol=1e-13)
        res = solve(math.exp(root), sign)
    if abs(res.c_ab - c_target) > tol:
        raise HanLiError(f"root finding stopped at c={res.c_ab}, target {c_target}",
                         {"c_error": abs(res.c_ab - c_target)})
    return done(res)


__all__ = [
    "ConstraintSpec", "HanLiError", "HanLiResult", "CSample", "PrescribedResult", "scaling_root",
    "constraint_project", "feasibility", "minimize_constrained", "hanli_residuals", "c_sample", "c_curve",
    "find_prescribed_mean_curvature",
]
