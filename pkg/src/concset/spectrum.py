"""Jacobi operator of the base circles, its spectrum, and the family M_w."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .currents import DensityCurrent, PolylineCurrent, flat_distance_codim1
from .geometry import BaseSubmanifold, GeometryError, PeriodicGrid, curvature_at, region_fraction


class DegenerateError(ValueError):
    """The Jacobi operator has an eigenvalue within the non-degeneracy tolerance of 0."""


@dataclass(frozen=True, eq=False)
class JacobiOperator:
    """Block-diagonal discretization of f -> -f'' - K f in arclength, one block per circle."""

    blocks: tuple
    ds: np.ndarray  # arclength spacing per component
    lengths: np.ndarray
    curvature: np.ndarray  # K at each circle

    @property
    def matrix(self) -> np.ndarray:
        n = sum(b.shape[0] for b in self.blocks)
        A = np.zeros((n, n))
        k = 0
        for b in self.blocks:
            m = b.shape[0]
            A[k : k + m, k : k + m] = b
            k += m
        return A


def build_jacobi_operator(grid: PeriodicGrid, M: BaseSubmanifold) -> JacobiOperator:
    M.validate(grid)
    n = grid.nx
    eye = np.eye(n)
    lap = 2 * eye - np.roll(eye, 1, axis=1) - np.roll(eye, -1, axis=1)
    blocks, ds, Ks = [], [], []
    for yc in M.heights:
        h = float(np.exp(grid.metric(yc))) * grid.hx
        K = curvature_at(grid, yc)
        blocks.append(lap / h**2 - K * eye)
        ds.append(h)
        Ks.append(K)
    return JacobiOperator(tuple(blocks), np.asarray(ds), M.lengths(grid), np.asarray(Ks))


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Ascending eigenpairs of the Jacobi operator over all components.

    eigenfunctions[k] has shape (ncomp, nx) and vanishes off its component;
    normalization is sum f^2 ds = 1 (L^2 of M with the induced metric).
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    component: np.ndarray
    ell: int
    lam: float
    wbar: float
    ds: np.ndarray
    lengths: np.ndarray

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def unstable_functions(self) -> np.ndarray:
        return self.eigenfunctions[: self.ell]

    def gram(self) -> np.ndarray:
        F = self.eigenfunctions * np.sqrt(self.ds)[None, :, None]
        F = F.reshape(len(F), -1)
        return F @ F.T


def _fix_sign(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > tol * np.abs(v).max())
    return -v if v[nz[0]] < 0 else v


def eigendecompose(op: JacobiOperator, lam: float | None = None, wbar: float | None = None,
                   rho0: float = 0.15, tol_factor: float = 1e-6) -> SpectralBasis:
    """Symmetric eigensolve per block, merged ascending.

    lam defaults to |lambda_1| and wbar to 0.1 min(1, rho0 L^(1/2)) with L the
    length of the component carrying the first unstable mode.
    """
    vals, funcs, comp = [], [], []
    ncomp = len(op.blocks)
    for c, B in enumerate(op.blocks):
        if not np.allclose(B, B.T, atol=0, rtol=0):
            raise ValueError("Jacobi block is not symmetric")
        ev, V = np.linalg.eigh(B)
        for k in range(len(ev)):
            f = np.zeros((ncomp, B.shape[0]))
            f[c] = _fix_sign(V[:, k]) / np.sqrt(op.ds[c])
            vals.append(ev[k])
            funcs.append(f)
            comp.append(c)
    vals = np.asarray(vals)
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    funcs = np.asarray(funcs)[order]
    comp = np.asarray(comp)[order]
    L = op.lengths
    scale = max(abs(vals[0]), float((2 * np.pi / L.max()) ** 2))
    tol = tol_factor * scale
    near = np.abs(vals) < tol
    if near.any():
        raise DegenerateError(f"degenerate M: eigenvalue {vals[near][0]:.3e} within {tol:.1e} of zero")
    ell = int((vals < 0).sum())
    if lam is None:
        lam = abs(vals[0])
    if ell and not 0.5 * vals[0] + lam > 0:
        raise ValueError(f"penalty lambda={lam} must exceed -lambda_1/2={-0.5 * vals[0]}")
    if wbar is None:
        wbar = 0.1 * min(1.0, rho0 * np.sqrt(L[comp[0]])) if ell else 0.0
    return SpectralBasis(vals, funcs, comp, ell, float(lam), float(wbar), op.ds, L)


def spectral_basis(grid: PeriodicGrid, M: BaseSubmanifold, **kw) -> SpectralBasis:
    return eigendecompose(build_jacobi_operator(grid, M), rho0=M.rho0, **kw)


@dataclass(eq=False)
class PerturbedCurve:
    """M_w as per-component heights over the x-nodes, with its two current representations."""

    w: np.ndarray
    heights: list
    section: np.ndarray  # phi_w, shape (ncomp, nx), in g-length
    polyline: PolylineCurrent
    density: DensityCurrent
    checks: dict = field(default_factory=dict)

    @property
    def length(self) -> float:
        return self.polyline.mass()


def _as_w(w, ell: int) -> np.ndarray:
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if w.shape != (ell,):
        raise ValueError(f"w must have {ell} entries")
    return w


def perturbed_heights(basis: SpectralBasis, w, grid: PeriodicGrid, M: BaseSubmanifold):
    """Heights of M_w: each x on M moved inward by g-distance phi_w(x) along its vertical geodesic."""
    w = _as_w(w, basis.ell)
    if np.linalg.norm(w) > basis.wbar * (1 + 1e-12) + 1e-300:
        raise ValueError(f"|w| = {np.linalg.norm(w):.4g} exceeds wbar = {basis.wbar:.4g}")
    section = np.tensordot(w, basis.unstable_functions, axes=1) if basis.ell else np.zeros((M.ncomp, grid.nx))
    heights = []
    for c, (yc, o) in enumerate(zip(M.heights, M.orientations)):
        s = section[c]
        if not np.any(s):
            heights.append(np.full(grid.nx, float(yc)))
            continue
        # constant sections (the usual first mode) need a single root solve
        vals = {}
        hc = np.empty(grid.nx)
        for i, si in enumerate(s):
            key = round(float(si), 15)
            if key not in vals:
                vals[key] = grid.height_at_distance(float(yc), o * float(si))
            hc[i] = vals[key]
        heights.append(hc)
    return w, section, heights


def family_Mw(basis: SpectralBasis, w, grid: PeriodicGrid, M: BaseSubmanifold,
              delta1: float | None = None, validate: bool = True) -> PerturbedCurve:
    """The normal graph M_w over M, as a polyline current and as an indicator density.

    With validate, checks that M_w is shorter than M for w != 0 and, when
    delta1 is given, that F([[M_w]] - [[M]]) <= delta1/2.
    """
    w, section, heights = perturbed_heights(basis, w, grid, M)
    polys = [np.column_stack([grid.x, h]) for h in heights]
    poly = PolylineCurrent(grid, polys, list(M.orientations))
    dens = DensityCurrent(grid, region_fraction(grid, heights, M.orientations))
    curve = PerturbedCurve(w, heights, section, poly, dens)
    if validate:
        base = PolylineCurrent(grid, [np.column_stack([grid.x, np.full(grid.nx, float(y))]) for y in M.heights],
                               list(M.orientations))
        L0 = base.mass()
        Lw = poly.mass()
        curve.checks["length_drop"] = L0 - Lw
        if np.any(w) and not Lw < L0:
            raise GeometryError(f"M_w is not shorter than M (drop {L0 - Lw:.3e})")
        if delta1 is not None:
            ref = DensityCurrent(grid, region_fraction(grid, M.heights, M.orientations))
            F = flat_distance_codim1(dens, ref)
            curve.checks["flat_to_M"] = F
            if F > 0.5 * delta1:
                raise GeometryError(f"F([[M_w]] - [[M]]) = {F:.4g} exceeds delta1/2")
    return curve
