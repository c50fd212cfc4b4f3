"""Isoparametric profiles: the one-dimensional data of (M, g, f).

A profile stores a(t) = Laplacian of f, b(t) = |grad f|^2 and the scalar
curvature s_g(t) on the parameter interval, plus what sits at each end of the
interval: a boundary component of M or a focal submanifold.  The Laplacian is
the positive one (-div grad), so a(t) = n t for f = x_{n+1} on the round
sphere.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Union

import numpy as np
from scipy.special import gamma

from .curves import Constant, CurveError, Polynomial, ScalarCurve, curve_from_json, curve_to_json

ZERO_TOL = 1e-12


class ProfileError(ValueError):
    """Invalid profile construction or an operation outside a profile's domain."""


@dataclass(frozen=True)
class BoundaryComponent:
    param: float
    orientation: int
    # mean curvature of the boundary w.r.t. the outward normal, averaged
    # (trace / (n-1)); None means derive it from a and b
    mean_curvature: float | None = None


@dataclass(frozen=True)
class FocalEndpoint:
    param: float
    focal_dim: int
    # w(t) ~ C |t - param|^vanishing_order; None means use the indicial exponent
    vanishing_order: float | None = None


Endpoint = Union[BoundaryComponent, FocalEndpoint]


@dataclass(frozen=True)
class IsoparametricProfile:
    name: str
    dim: int
    interval: tuple[float, float]
    a: ScalarCurve
    b: ScalarCurve
    s_g: ScalarCurve
    endpoints: tuple[Endpoint, Endpoint]
    weight_norm: tuple[float, float]  # (t_ref, area of the level M_{t_ref})

    @property
    def t_lo(self) -> float:
        return self.interval[0]

    @property
    def t_hi(self) -> float:
        return self.interval[1]

    @property
    def boundary_components(self) -> list[BoundaryComponent]:
        return [e for e in self.endpoints if isinstance(e, BoundaryComponent)]

    @property
    def focal_endpoints(self) -> list[FocalEndpoint]:
        return [e for e in self.endpoints if isinstance(e, FocalEndpoint)]

    @property
    def k_f(self) -> int:
        """Minimum focal dimension; a boundary side contributes n - 1."""
        return min(e.focal_dim if isinstance(e, FocalEndpoint) else self.dim - 1
                   for e in self.endpoints)

    @property
    def a_n(self) -> float:
        _need_dim3(self.dim)
        return 4.0 * (self.dim - 1) / (self.dim - 2)

    @property
    def p_n(self) -> float:
        _need_dim3(self.dim)
        return 2.0 * self.dim / (self.dim - 2)

    @property
    def p_bdry(self) -> float:
        _need_dim3(self.dim)
        return 2.0 * (self.dim - 1) / (self.dim - 2)

    def level_trace_curvature(self, t):
        """Trace of the shape operator of M_t w.r.t. grad f / |grad f|."""
        t = np.asarray(t, dtype=float)
        return (2.0 * self.a(t) + self.b(t, 1)) / (2.0 * np.sqrt(self.b(t)))

    def boundary_mean_curvature(self, comp: BoundaryComponent) -> float:
        if comp.mean_curvature is not None:
            return comp.mean_curvature
        return derived_boundary_mean_curvature(self, comp.param, comp.orientation)

    def vanishing_order(self, e: FocalEndpoint) -> float:
        if e.vanishing_order is not None:
            return e.vanishing_order
        return indicial_exponent(self, e.param)

    def has_constant_scalar_curvature(self) -> bool:
        return self.s_g.is_constant()

    @cached_property
    def weight(self):
        from .geometry import reconstruct_weight

        return reconstruct_weight(self)

    def volume(self) -> float:
        return self.weight.integral(self.t_lo, self.t_hi)

    def boundary_area(self, comp: BoundaryComponent) -> float:
        return float(self.weight.level_area(comp.param))

    def with_scalar_curvature(self, s_g: ScalarCurve, name: str | None = None):
        return replace(self, s_g=s_g, name=name or self.name)

    def fingerprint(self) -> str:
        text = json.dumps(profile_to_json(self), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _need_dim3(n):
    if n < 3:
        raise ProfileError(f"conformal constants need dim >= 3, profile has dim {n}")


def sphere_area(k: int) -> float:
    """Area of the unit k-sphere."""
    return 2.0 * math.pi ** ((k + 1) / 2) / gamma((k + 1) / 2)


def derived_boundary_mean_curvature(p: IsoparametricProfile, r: float, orientation: int) -> float:
    # outward normal is orientation * grad f/|grad f|; shape operator -nabla xi
    return float(-orientation * p.level_trace_curvature(r) / (p.dim - 1))


def indicial_exponent(p: IsoparametricProfile, t_e: float) -> float:
    """Exponent nu with w ~ |t - t_e|^nu from (b w)' = -a w at a simple zero of b."""
    db = float(p.b(t_e, 1))
    if abs(db) <= ZERO_TOL:
        raise ProfileError(f"b has a zero of order >= 2 at t={t_e}; weight exponent undefined")
    return -float(p.a(t_e)) / db - 1.0


# -- validation -------------------------------------------------------------


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def usable(self) -> bool:
        return not self.violations

    def __str__(self):
        return "usable" if self.usable else "; ".join(self.violations)


def validate_profile(p: IsoparametricProfile, samples: int = 2001) -> ValidationReport:
    rep = ValidationReport()
    bad = rep.violations
    ta, tb = p.interval
    if p.dim < 2:
        bad.append("dim must be >= 2")
    if not ta < tb:
        bad.append("interval must satisfy t_lo < t_hi")
        return rep
    for nm in ("a", "b", "s_g"):
        c = getattr(p, nm)
        dom = getattr(c, "domain", None)
        if dom is not None and (dom[0] > ta + 1e-12 or dom[1] < tb - 1e-12):
            bad.append(f"{nm} table does not cover the interval")
    t = np.linspace(ta, tb, samples)[1:-1]
    bt = p.b(t)
    if not np.all(np.isfinite(bt)) or np.any(bt <= 0):
        bad.append("b not positive on interior")
    if not np.all(np.isfinite(p.a(t))) or not np.all(np.isfinite(p.s_g(t))):
        bad.append("a or s_g not finite on interior")
    if len(p.endpoints) != 2:
        bad.append("profile needs exactly two endpoints")
        return rep
    if not p.boundary_components:
        bad.append("no boundary component (M must have nonempty boundary)")
    for side, (e, end) in enumerate(zip(p.endpoints, (ta, tb))):
        label = ("left", "right")[side]
        if abs(e.param - end) > 1e-12:
            bad.append(f"{label} endpoint param {e.param} is not the interval end {end}")
            continue
        if isinstance(e, BoundaryComponent):
            want = -1 if side == 0 else 1
            if e.orientation != want:
                bad.append(f"{label} boundary orientation must be {want:+d}")
            if not float(p.b(e.param)) > 0:
                bad.append(f"{label} boundary is not a regular level (b <= 0)")
            elif e.mean_curvature is not None:
                h = derived_boundary_mean_curvature(p, e.param, e.orientation)
                if abs(h - e.mean_curvature) > 1e-6 * (1 + abs(h)):
                    bad.append(f"{label} boundary mean curvature {e.mean_curvature} "
                               f"inconsistent with a, b (expected {h})")
        else:
            if abs(float(p.b(e.param))) > 1e-10:
                bad.append(f"{label} focal endpoint has b != 0")
            if abs(float(p.b(e.param, 1))) <= ZERO_TOL:
                bad.append(f"{label} focal endpoint: b vanishes to order >= 2")
            else:
                nu = indicial_exponent(p, e.param)
                if nu <= -1:
                    bad.append(f"{label} focal endpoint: weight not integrable")
                if e.vanishing_order is not None and abs(e.vanishing_order - nu) > 1e-8:
                    bad.append(f"{label} focal endpoint: vanishing order {e.vanishing_order} "
                               f"disagrees with the weight equation ({nu})")
            if e.focal_dim < 0 or e.focal_dim > p.dim - 2:
                bad.append(f"{label} focal dimension {e.focal_dim} must lie in [0, n-2]")
    t_ref, area = p.weight_norm
    if not (ta < t_ref < tb) or not area > 0:
        bad.append("weight_norm needs an interior t_ref and positive area")
    return rep


def require_usable(p: IsoparametricProfile):
    rep = validate_profile(p)
    if not rep.usable:
        raise ProfileError(f"profile {p.name!r} not usable: {rep}")


# -- factories --------------------------------------------------------------


def make_spherical_band(n: int, c1: float, c2: float, t_ref: float | None = None) -> IsoparametricProfile:
    """f = x_{n+1} restricted to {c1 <= x_{n+1} <= c2} in the unit sphere S^n."""
    if n < 2:
        raise ProfileError("sphere dimension must be >= 2")
    if not (-1.0 <= c1 < c2 <= 1.0):
        raise ProfileError(f"need -1 <= c1 < c2 <= 1, got c1={c1}, c2={c2}")
    ends = []
    for c, sigma in ((c1, -1), (c2, 1)):
        if abs(c) == 1.0:
            ends.append(FocalEndpoint(c, 0, (n - 2) / 2.0))
        else:
            ends.append(BoundaryComponent(c, sigma, -sigma * c / math.sqrt(1 - c * c)))
    if t_ref is None:
        t_ref = 0.5 * (c1 + c2)
    area = sphere_area(n - 1) * (1 - t_ref ** 2) ** ((n - 1) / 2)
    if c1 == 0.0 and c2 == 1.0:
        name = f"hemisphere:{n}"
    else:
        name = f"band:{n}:{c1:g}:{c2:g}"
    return IsoparametricProfile(
        name=name, dim=n, interval=(float(c1), float(c2)),
        a=Polynomial([0.0, n]), b=Polynomial([1.0, 0.0, -1.0]),
        s_g=Constant(n * (n - 1)), endpoints=tuple(ends),
        weight_norm=(float(t_ref), float(area)),
    )


def make_hemisphere(n: int) -> IsoparametricProfile:
    return make_spherical_band(n, 0.0, 1.0)


def make_cylinder_demo(z_min: float = math.pi / 6, z_max: float = 5 * math.pi / 6) -> IsoparametricProfile:
    """f = cos z on S^1 x [z_min, z_max], a monotone band where every level is one circle."""
    if not (0 < z_min < z_max < math.pi):
        raise ProfileError("cylinder band must satisfy 0 < z_min < z_max < pi")
    lo, hi = math.cos(z_max), math.cos(z_min)
    # circles of the flat cylinder are geodesics: zero boundary mean curvature
    return IsoparametricProfile(
        name="cylinder", dim=2, interval=(lo, hi),
        a=Polynomial([0.0, 1.0]), b=Polynomial([1.0, 0.0, -1.0]), s_g=Constant(0.0),
        endpoints=(BoundaryComponent(lo, -1, 0.0), BoundaryComponent(hi, 1, 0.0)),
        weight_norm=(0.5 * (lo + hi), 2 * math.pi),
    )


def make_product(p: IsoparametricProfile, n_factor: int, s_h: float, t: float,
                 factor_volume: float = 1.0) -> IsoparametricProfile:
    """Profile of (M x N, g + t h) with f pulled back from M.

    N is a closed n_factor-manifold of constant scalar curvature s_h and
    volume factor_volume (for h); a and b do not change.
    """
    if t <= 0:
        raise ProfileError("product scale t must be positive")
    if s_h <= 0:
        raise ProfileError("factor scalar curvature s_h must be positive")
    if not p.has_constant_scalar_curvature():
        raise ProfileError("product construction needs constant s_g on the base")
    dim = p.dim + n_factor
    ends = []
    for e in p.endpoints:
        if isinstance(e, FocalEndpoint):
            ends.append(FocalEndpoint(e.param, e.focal_dim + n_factor, e.vanishing_order))
        else:
            # same trace of the second fundamental form, averaged over more directions
            h = p.boundary_mean_curvature(e) * (p.dim - 1) / (dim - 1)
            ends.append(BoundaryComponent(e.param, e.orientation, h))
    s0 = float(p.s_g(p.weight_norm[0]))
    t_ref, area = p.weight_norm
    return IsoparametricProfile(
        name=f"{p.name}x(N{n_factor},{s_h:g},{t:g})", dim=dim, interval=p.interval,
        a=p.a, b=p.b, s_g=Constant(s0 + s_h / t), endpoints=tuple(ends),
        weight_norm=(t_ref, area * t ** (n_factor / 2) * factor_volume),
    )


# -- admissibility thresholds ------------------------------------------------


def codim_threshold(p: IsoparametricProfile, mode: str = "interior") -> Fraction | None:
    """Supremum of admissible exponents s; None when unrestricted (k(f) >= n - 2)."""
    n, k = p.dim, p.k_f
    if k >= n - 2:
        return None
    if mode == "interior":
        return Fraction(2 * (n - k), n - k - 2)
    if mode == "boundary":
        return Fraction(2 * (n - k - 1), n - k - 2)
    raise ValueError(f"mode must be 'interior' or 'boundary', got {mode!r}")


# -- JSON and names ----------------------------------------------------------


def profile_to_json(p: IsoparametricProfile) -> dict:
    ends = []
    for e in p.endpoints:
        if isinstance(e, BoundaryComponent):
            d = {"type": "boundary", "param": e.param, "orientation": e.orientation}
            if e.mean_curvature is not None:
                d["mean_curvature"] = e.mean_curvature
        else:
            d = {"type": "focal", "param": e.param, "focal_dim": e.focal_dim}
            if e.vanishing_order is not None:
                d["vanishing_order"] = e.vanishing_order
        ends.append(d)
    return {
        "name": p.name, "dim": p.dim, "interval": list(p.interval),
        "a": curve_to_json(p.a, p.interval), "b": curve_to_json(p.b, p.interval),
        "s_g": curve_to_json(p.s_g, p.interval), "endpoints": ends,
        "weight_norm": {"t_ref": p.weight_norm[0], "area": p.weight_norm[1]},
    }


def profile_from_json(data: dict) -> IsoparametricProfile:
    try:
        ends = []
        for d in data["endpoints"]:
            if d["type"] == "boundary":
                ends.append(BoundaryComponent(float(d["param"]), int(d["orientation"]),
                                              d.get("mean_curvature")))
            elif d["type"] == "focal":
                ends.append(FocalEndpoint(float(d["param"]), int(d["focal_dim"]),
                                          d.get("vanishing_order")))
            else:
                raise ProfileError(f"unknown endpoint type {d['type']!r}")
        wn = data["weight_norm"]
        return IsoparametricProfile(
            name=data.get("name", "custom"), dim=int(data["dim"]),
            interval=(float(data["interval"][0]), float(data["interval"][1])),
            a=curve_from_json(data["a"]), b=curve_from_json(data["b"]),
            s_g=curve_from_json(data["s_g"]), endpoints=tuple(ends),
            weight_norm=(float(wn["t_ref"]), float(wn["area"])),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ProfileError(f"malformed profile JSON: {exc!r}") from exc


def load_profile(path) -> IsoparametricProfile:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ProfileError(f"cannot read profile file {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ProfileError(f"malformed profile JSON: {exc}") from exc
    return profile_from_json(data)


def profile_by_name(spec: str) -> IsoparametricProfile:
    """Factory lookup: ``hemisphere:N``, ``band:N:C1:C2``, ``cap:N:C``, ``cylinder``.

    ``BASE/NF:SH:T`` is the product of BASE with a closed NF-manifold of scalar
    curvature SH scaled by T, e.g. ``hemisphere:2/2:2:1``.
    """
    if "/" in spec:
        base, _, rest = spec.rpartition("/")
        parts = rest.split(":")
        if len(parts) != 3:
            raise ProfileError(f"product suffix must be /NF:SH:T, got {rest!r}")
        try:
            nf, sh, t = int(parts[0]), float(parts[1]), float(parts[2])
        except ValueError as exc:
            raise ProfileError(f"bad product parameters in {spec!r}: {exc}") from exc
        return make_product(profile_by_name(base), nf, sh, t)
    head, *args = spec.split(":")
    try:
        if head == "hemisphere" and len(args) == 1:
            return make_hemisphere(int(args[0]))
        if head == "band" and len(args) == 3:
            return make_spherical_band(int(args[0]), float(args[1]), float(args[2]))
        if head == "cap" and len(args) == 2:
            return make_spherical_band(int(args[0]), float(args[1]), 1.0)
        if head == "cylinder" and len(args) in (0, 2):
            return make_cylinder_demo(*map(float, args))
    except ValueError as exc:
        if isinstance(exc, ProfileError):
            raise
        raise ProfileError(f"bad factory parameters in {spec!r}: {exc}") from exc
    raise ProfileError(f"unknown profile name {spec!r}")


__all__ = [
    "BoundaryComponent", "FocalEndpoint", "IsoparametricProfile", "ProfileError", "CurveError",
    "ValidationReport", "validate_profile", "require_usable", "make_spherical_band",
    "make_hemisphere", "make_cylinder_demo", "make_product", "codim_threshold",
    "profile_to_json", "profile_from_json", "load_profile", "profile_by_name", "sphere_area",
]
