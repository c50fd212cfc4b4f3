"""Cell-centered finite volumes for radial functions.

Unknowns are cell averages phi_j at cell centers plus one trace value per
boundary component.  The energy

    E(u) = int a_n |grad u|^2 + s_g u^2 dv + 2(n-1) int_{bdry} h_g u^2 dsigma

becomes E(x) = x^T A x with two-point fluxes b w (phi_{j+1} - phi_j)/dc at
interior nodes and half-cell fluxes between the last center and each boundary
trace.  No flux is ever evaluated at a focal endpoint, where b w vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline

from .curves import ScalarCurve
from .profile import BoundaryComponent, FocalEndpoint, IsoparametricProfile, ProfileError, require_usable

MIN_CELLS = 16


class DiscretizationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Grid:
    nodes: np.ndarray
    centers: np.ndarray
    graded: bool
    weights: np.ndarray  # per-cell integral of w for the profile the grid was built on
    grading_exponents: tuple[float, float] = (1.0, 1.0)

    @property
    def m_cells(self) -> int:
        return self.centers.size

    @property
    def interval(self):
        return float(self.nodes[0]), float(self.nodes[-1])

    @property
    def widths(self):
        return np.diff(self.nodes)


def default_grading(nu: float) -> float:
    """Node-clustering exponent restoring O(h^2) midpoint quadrature of |t - t_e|^nu."""
    return 2.0 / (1.0 + nu) if 0.0 < nu < 1.0 else 1.0


def build_grid(p: IsoparametricProfile, m_cells: int, grading=None) -> Grid:
    """Grid of ``m_cells`` cells on the profile interval.

    ``grading`` is None/False (uniform), True/"auto" (exponent from the
    vanishing order at each focal endpoint) or a number used at every focal
    endpoint.  Boundary ends are never graded.
    """
    if m_cells < MIN_CELLS:
        raise DiscretizationError(f"need at least {MIN_CELLS} cells, got {m_cells}")
    require_usable(p)
    gam = [1.0, 1.0]
    if grading not in (None, False):
        for side, e in enumerate(p.endpoints):
            if isinstance(e, FocalEndpoint):
                nu = p.vanishing_order(e)
                gam[side] = default_grading(nu) if grading in (True, "auto") else float(grading)
    xi = np.linspace(0.0, 1.0, m_cells + 1)
    gl, gr = gam
    if gl == 1.0 and gr == 1.0:
        frac = xi
    else:
        num = xi ** gl
        frac = num / (num + (1.0 - xi) ** gr)
    ta, tb = p.interval
    nodes = ta + (tb - ta) * frac
    nodes[0], nodes[-1] = ta, tb
    if np.any(np.diff(nodes) <= 0):
        raise DiscretizationError("grid nodes not strictly increasing")
    centers = 0.5 * (nodes[:-1] + nodes[1:])
    weights = p.weight.cell_integrals(nodes)
    if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
        raise DiscretizationError("cell weight integrals must be finite and positive")
    return Grid(nodes, centers, gam != [1.0, 1.0], weights, tuple(gam))


def coarsen(grid: Grid) -> Grid:
    """Grid with every other node removed (needs an even cell count)."""
    if grid.m_cells % 2:
        raise DiscretizationError("coarsening needs an even number of cells")
    nodes = grid.nodes[::2]
    return Grid(nodes, 0.5 * (nodes[:-1] + nodes[1:]), grid.graded,
                grid.weights[0::2] + grid.weights[1::2], grid.grading_exponents)


def midpoint_volume(p: IsoparametricProfile, grid: Grid) -> float:
    """Volume by the one-point midpoint rule on each cell (for grading studies)."""
    return float(np.sum(p.weight(grid.centers) * grid.widths))


@dataclass(eq=False)
class GridFunction:
    """Cell-center values plus the traces at both interval ends."""

    grid: Grid
    values: np.ndarray
    traces: tuple[float, float] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.m_cells,):
            raise DiscretizationError("grid function length does not match the grid")
        if self.traces is None:
            self.traces = extrapolate_traces(self.grid, self.values)
        self.traces = (float(self.traces[0]), float(self.traces[1]))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> GridFunction:
        lo, hi = grid.interval
        return cls(grid, fn(grid.centers), (float(fn(lo)), float(fn(hi))))

    def scaled(self, c: float) -> GridFunction:
        return GridFunction(self.grid, c * self.values, (c * self.traces[0], c * self.traces[1]))

    def abs(self) -> GridFunction:
        return GridFunction(self.grid, np.abs(self.values), tuple(abs(v) for v in self.traces))

    def min(self) -> float:
        return float(min(self.values.min(), *self.traces))

    def max(self) -> float:
        return float(max(self.values.max(), *self.traces))

    def sup_norm(self) -> float:
        return float(max(np.abs(self.values).max(), *map(abs, self.traces)))

    def samples(self):
        """(t, value) pairs including both endpoints."""
        lo, hi = self.grid.interval
        t = np.concatenate([[lo], self.grid.centers, [hi]])
        v = np.concatenate([[self.traces[0]], self.values, [self.traces[1]]])
        return t, v

    def to_curve(self) -> ScalarCurve:
        return SplineCurve(*self.samples())


class SplineCurve(ScalarCurve):
    """Not-a-knot cubic spline through a grid function, derivatives to third order."""

    kind = "table"

    def __init__(self, x, y):
        self.x, self.y = np.asarray(x, float), np.asarray(y, float)
        self._s = CubicSpline(self.x, self.y)

    def __call__(self, t, nu: int = 0):
        return self._s(np.asarray(t, dtype=float), nu)

    def to_json(self):
        return {"kind": "table", "x": self.x.tolist(), "y": self.y.tolist()}


def extrapolate_traces(grid: Grid, values: np.ndarray) -> tuple[float, float]:
    """Quadratic extrapolation of cell values to both interval ends."""
    out = []
    lo, hi = grid.interval
    for end, idx in ((lo, [0, 1, 2]), (hi, [-1, -2, -3])):
        c = grid.centers[idx]
        v = values[idx]
        out.append(float(np.polyval(np.polyfit(c - end, v, 2), 0.0)))
    return tuple(out)


@dataclass(eq=False)
class BoundaryTerm:
    side: int  # 0 left, 1 right
    comp: BoundaryComponent
    area: float
    h: float
    half_flux: float  # (b w)(r) / |c_end - r|
    cell: int  # adjacent cell index


@dataclass(eq=False)
class AssembledForms:
    profile: IsoparametricProfile
    grid: Grid
    flux: np.ndarray  # (b w)(node_i) / (c_{i+1} - c_i) at interior nodes
    mass: np.ndarray  # int_cell w
    curvature_mass: np.ndarray  # int_cell s_g w
    boundary: list[BoundaryTerm] = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.grid.m_cells

    @property
    def size(self) -> int:
        return self.m + len(self.boundary)

    @property
    def a_n(self) -> float:
        return self.profile.a_n

    @property
    def dim(self) -> int:
        return self.profile.dim

    def volume(self) -> float:
        return float(self.mass.sum())

    # -- Neumann gradient form (no a_n, no boundary coupling) -----------------

    def neumann_apply(self, phi):
        """Flux-difference form of -(b w phi')' integrated over cells; exact zero on constants."""
        q = self.flux * np.diff(phi)
        out = np.zeros_like(phi)
        out[:-1] -= q
        out[1:] += q
        return out

    def neumann_matrix(self):
        k = self.flux
        main = np.zeros(self.m)
        main[:-1] += k
        main[1:] += k
        return sp.diags([-k, main, -k], [-1, 0, 1], format="csr")

    def dirichlet_energy(self, phi) -> float:
        """int b w phi'^2 with Neumann ends."""
        return float(np.sum(self.flux * np.diff(phi) ** 2))

    # -- full energy on x = [cells, traces] ------------------------------------

    def vector(self, u) -> np.ndarray:
        """Unknown vector [cell values, boundary traces] from a GridFunction."""
        if isinstance(u, np.ndarray):
            if u.shape != (self.size,):
                raise DiscretizationError("vector length does not match the forms")
            return u
        tr = [u.traces[bt.side] for bt in self.boundary]
        return np.concatenate([u.values, tr])

    def grid_function(self, x) -> GridFunction:
        x = np.asarray(x, dtype=float)
        vals = x[:self.m]
        traces = list(extrapolate_traces(self.grid, vals))
        for j, bt in enumerate(self.boundary):
            traces[bt.side] = x[self.m + j]
        return GridFunction(self.grid, vals.copy(), tuple(traces))

    def energy_matrix(self, a_n: float | None = None):
        """Sparse symmetric A with E(x) = x^T A x."""
        a_n = self.a_n if a_n is None else a_n
        m, nb = self.m, len(self.boundary)
        a = sp.lil_matrix((m + nb, m + nb))
        a[:m, :m] = a_n * self.neumann_matrix() + sp.diags(self.curvature_mass)
        for j, bt in enumerate(self.boundary):
            r = m + j
            k = a_n * bt.half_flux
            a[bt.cell, bt.cell] += k
            a[r, r] += k + 2 * (self.dim - 1) * bt.h * bt.area
            a[bt.cell, r] -= k
            a[r, bt.cell] -= k
        return a.tocsr()

    def energy_apply(self, x):
        m = self.m
        phi = x[:m]
        out = np.empty_like(x)
        out[:m] = self.a_n * self.neumann_apply(phi) + self.curvature_mass * phi
        for j, bt in enumerate(self.boundary):
            r = m + j
            k = self.a_n * bt.half_flux
            diff = phi[bt.cell] - x[r]
            out[bt.cell] += k * diff
            out[r] = -k * diff + 2 * (self.dim - 1) * bt.h * bt.area * x[r]
        return out

    def energy(self, u) -> float:
        """Sum of squared differences (no cancellation, unlike x^T A x)."""
        x = self.vector(u)
        phi = x[:self.m]
        e = self.a_n * self.dirichlet_energy(phi) + float(np.sum(self.curvature_mass * phi * phi))
        for j, bt in enumerate(self.boundary):
            xr = x[self.m + j]
            e += self.a_n * bt.half_flux * (phi[bt.cell] - xr) ** 2 + 2 * (self.dim - 1) * bt.h * bt.area * xr * xr
        return float(e)

    def interior_power(self, x, s: float) -> float:
        return float(np.sum(self.mass * np.abs(x[:self.m]) ** s))

    def boundary_power(self, x, s: float) -> float:
        return float(sum(bt.area * abs(x[self.m + j]) ** s for j, bt in enumerate(self.boundary)))

    def boundary_areas(self) -> np.ndarray:
        return np.array([bt.area for bt in self.boundary])

    def lumped_mass_vector(self) -> np.ndarray:
        """Cell masses followed by boundary areas."""
        return np.concatenate([self.mass, self.boundary_areas()])


def assemble(p: IsoparametricProfile, grid: Grid) -> AssembledForms:
    if abs(grid.interval[0] - p.t_lo) > 1e-14 or abs(grid.interval[1] - p.t_hi) > 1e-14:
        raise DiscretizationError("grid does not span the profile interval")
    w = p.weight
    nodes, c = grid.nodes, grid.centers
    flux = w.flux_coefficient(nodes[1:-1]) / np.diff(c)
    if np.any(flux <= 0):
        raise DiscretizationError("non-positive interior flux coefficient")
    mass = w.cell_integrals(nodes)
    curv = w.cell_integrals(nodes, factor=p.s_g)
    terms = []
    for side, e in enumerate(p.endpoints):
        if isinstance(e, BoundaryComponent):
            cell = 0 if side == 0 else grid.m_cells - 1
            r = e.param
            bw = float(w.flux_coefficient(np.array([r]))[0])
            terms.append(BoundaryTerm(side, e, float(w.level_area(r)), p.boundary_mean_curvature(e),
                                      bw / abs(c[cell] - r), cell))
    return AssembledForms(p, grid, flux, mass, curv, terms)


def quotient(forms: AssembledForms, phi, s: float, mode: str = "interior") -> float:
    """J^s (interior) or Q^s (boundary): E(phi) over the L^s norm squared."""
    x = forms.vector(phi)
    e = forms.energy(x)
    if mode == "interior":
        den = forms.interior_power(x, s)
    elif mode == "boundary":
        if not forms.boundary:
            raise DiscretizationError("boundary quotient needs a boundary component")
        den = forms.boundary_power(x, s)
    else:
        raise ValueError(f"mode must be 'interior' or 'boundary', got {mode!r}")
    if not den > 0:
        raise DiscretizationError("zero denominator in quotient")
    return e / den ** (2.0 / s)
