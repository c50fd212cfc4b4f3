"""Radial spectra: the Neumann Laplacian on S_f and the conformal eigenvalue probes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
from scipy.linalg import eigh, eigh_tridiagonal

from .discretize import AssembledForms, Grid, GridFunction, assemble, coarsen
from .profile import IsoparametricProfile


class SpectrumError(ValueError):
    pass


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenfunctions: list[GridFunction]
    grid: Grid
    error_estimates: np.ndarray
    forms: AssembledForms = field(repr=False, default=None)

    def __len__(self):
        return self.eigenvalues.size


def _fix_sign(x):
    big = np.flatnonzero(np.abs(x) > 1e-8 * np.abs(x).max())
    return -x if x[big[0]] < 0 else x


def _neumann_pairs(forms: AssembledForms, count: int):
    """Eigenpairs of the pencil (K, diag(mass)) with the constant mode deflated exactly.

    K = G^T diag(flux) G with G the difference matrix, so the nonzero spectrum
    is that of the (M-1)x(M-1) tridiagonal B B^T, B = diag(sqrt(flux)) G D^{-1/2}.
    """
    k, m = forms.flux, forms.mass
    d = k * (1.0 / m[:-1] + 1.0 / m[1:])
    e = -np.sqrt(k[:-1] * k[1:]) / m[1:-1]
    vals = [0.0]
    vecs = [np.full(m.size, 1.0 / np.sqrt(m.sum()))]
    if count > 1:
        mu, y = eigh_tridiagonal(d, e, select="i", select_range=(0, count - 2))
        sk = np.sqrt(k)
        for j in range(mu.size):
            by = sk * y[:, j]
            z = np.zeros(m.size)
            z[:-1] -= by
            z[1:] += by
            z /= np.sqrt(mu[j]) * m  # x = M^{-1} G^T sqrt(k) y / sqrt(mu)
            vals.append(float(mu[j]))
            vecs.append(_fix_sign(z / np.sqrt(np.sum(m * z * z))))
    return np.array(vals), vecs


def neumann_spectrum(p: IsoparametricProfile, grid: Grid, count: int,
                     estimate_error: bool = True) -> SpectrumResult:
    """First ``count`` eigenpairs of -b phi'' + a phi' with zero flux at both ends."""
    if count < 1:
        raise SpectrumError("count must be >= 1")
    if count > grid.m_cells // 2:
        raise SpectrumError(f"count={count} exceeds the resolution of {grid.m_cells} cells")
    forms = assemble(p, grid)
    mu, vecs = _neumann_pairs(forms, count)
    err = np.full(count, np.nan)
    if estimate_error and grid.m_cells % 2 == 0 and count <= grid.m_cells // 4:
        mu_c, _ = _neumann_pairs(assemble(p, coarsen(grid)), count)
        err = np.abs(mu - mu_c) / 3.0
    funcs = [GridFunction(grid, v) for v in vecs]
    return SpectrumResult(mu, funcs, grid, err, forms)


def richardson(coarse: float, fine: float, order: float = 2.0) -> float:
    """Extrapolate two values on grids with spacing ratio 2."""
    r = 2.0 ** order
    return (r * fine - coarse) / (r - 1.0)


@dataclass
class ProbeResult:
    lambda_D: float
    lambda_B: float
    lambda_L: float
    signs: dict
    common_sign: int | None
    ytilde_finite: bool
    ytilde_possibly_minus_infinity: bool
    steklov_degenerate: bool
    notes: list[str] = field(default_factory=list)
    radial_restricted: bool = True

    def to_json(self):
        def clean(v):
            if isinstance(v, (float, np.floating)):
                return float(v) if np.isfinite(v) else None
            return v
        return {k: clean(v) for k, v in self.__dict__.items()}


def _smallest_tridiag(diag, off, mass) -> float:
    s = 1.0 / np.sqrt(mass)
    d = diag * s * s
    e = off * s[:-1] * s[1:]
    return float(eigh_tridiagonal(d, e, select="i", select_range=(0, 0), eigvals_only=True)[0])


def conformal_eigen_probe(p: IsoparametricProfile, grid: Grid, sign_tol: float = 1e-8) -> ProbeResult:
    """Radial first eigenvalues of L_g with Dirichlet, Steklov (B_g) and Robin (B_g = 0) ends."""
    forms = assemble(p, grid)
    a = forms.energy_matrix()
    m, nb = forms.m, len(forms.boundary)
    acc = a[:m, :m].tocsr()
    diag = acc.diagonal().copy()
    off = acc.diagonal(1).copy()
    notes = []
    lam_d = _smallest_tridiag(diag, off, forms.mass)

    robin = diag.copy()
    abb = a[m:, m:].diagonal()
    steklov_degenerate = False
    for j, bt in enumerate(forms.boundary):
        acb = a[bt.cell, m + j]
        if abb[j] == 0:
            steklov_degenerate = True
            notes.append("zero trace coefficient; Robin elimination skipped")
            continue
        robin[bt.cell] -= acb * acb / abb[j]
    lam_l = _smallest_tridiag(robin, off, forms.mass)

    lam_b = float("nan")
    if lam_d <= 0:
        steklov_degenerate = True
        notes.append("L_g with Dirichlet data is not positive; Steklov problem degenerate")
    try:
        acb = a[:m, m:].toarray()
        z = spla.spsolve(acc.tocsc(), acb).reshape(m, nb)
        schur = a[m:, m:].toarray() - acb.T @ z
        schur = 0.5 * (schur + schur.T)
        bmass = 2 * (p.dim - 1) * np.diag(forms.boundary_areas())
        if not steklov_degenerate:
            # with L_g indefinite the Steklov quotient is unbounded below; no first eigenvalue
            lam_b = float(eigh(schur, bmass, eigvals_only=True)[0])
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        steklov_degenerate = True
        notes.append(f"Steklov solve failed: {exc}")

    scale = 1.0 + max(abs(v) for v in (lam_d, lam_b, lam_l) if np.isfinite(v))
    zero = sign_tol * scale
    signs = {k: (0 if abs(v) <= zero else int(np.sign(v))) if np.isfinite(v) else None
             for k, v in (("D", lam_d), ("B", lam_b), ("L", lam_l))}
    vals = {s for s in signs.values() if s is not None}
    common = vals.pop() if len(vals) == 1 else None
    return ProbeResult(lam_d, lam_b, lam_l, signs, common,
                       ytilde_finite=lam_l >= -zero,
                       ytilde_possibly_minus_infinity=lam_d < 0,
                       steklov_degenerate=steklov_degenerate, notes=notes)
