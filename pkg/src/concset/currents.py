"""Discrete currents on the periodic cubical complex, Jacobians and flat norms.

The complex used here is the dual of the node grid: 2-cells are centered at
nodes (so node samples are 2-chain coefficients), horizontal 1-cells H[j, i]
sit at height y_{j+1/2} and span [x_i - hx/2, x_i + hx/2], vertical 1-cells
V[j, i] sit at x_{i+1/2} and span [y_j - hy/2, y_j + hy/2], and 0-cells are
the points (x_{i+1/2}, y_{j+1/2}).  Cell boundaries are counter-clockwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .energy import Field, PlanarDisk
from .geometry import (
    BaseSubmanifold,
    PeriodicGrid,
    _component_distances,
    region_fraction,
    smooth_cutoff,
)


class CurrentError(ValueError):
    pass


@dataclass(eq=False)
class Chain:
    """Real (or integer) coefficients on oriented k-cells of the dual complex.

    dim 0 and dim 2 coefficients have shape (ny, nx); dim 1 is a pair (H, V).
    """

    grid: PeriodicGrid
    dim: int
    coeffs: object
    integer: bool = False

    def __post_init__(self):
        if self.dim not in (0, 1, 2):
            raise CurrentError("chain dimension must be 0, 1 or 2")
        if self.dim == 1:
            H, V = self.coeffs
            self.coeffs = (np.asarray(H, dtype=float), np.asarray(V, dtype=float))
            arrays = self.coeffs
        else:
            self.coeffs = np.asarray(self.coeffs, dtype=float)
            arrays = (self.coeffs,)
        for a in arrays:
            if a.shape != self.grid.shape:
                raise CurrentError(f"coefficient shape {a.shape} does not match grid {self.grid.shape}")
            if self.integer and not np.all(a == np.round(a)):
                raise CurrentError("integer chain has non-integer coefficients")

    def _arrays(self):
        return self.coeffs if self.dim == 1 else (self.coeffs,)

    def _combine(self, other: "Chain", sign: float) -> "Chain":
        if other.dim != self.dim or other.grid is not self.grid:
            raise CurrentError("chains live on different complexes")
        if self.dim == 1:
            c = tuple(a + sign * b for a, b in zip(self.coeffs, other.coeffs))
        else:
            c = self.coeffs + sign * other.coeffs
        return Chain(self.grid, self.dim, c, self.integer and other.integer)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, t: float):
        c = tuple(t * a for a in self.coeffs) if self.dim == 1 else t * self.coeffs
        return Chain(self.grid, self.dim, c, self.integer and float(t).is_integer())

    __rmul__ = __mul__

    def boundary(self) -> "Chain":
        if self.dim == 0:
            raise CurrentError("0-chains have no boundary")
        if self.dim == 2:
            rho = self.coeffs
            H = np.roll(rho, -1, axis=0) - rho
            V = rho - np.roll(rho, -1, axis=1)
            return Chain(self.grid, 1, (H, V), self.integer)
        H, V = self.coeffs
        c0 = H - np.roll(H, -1, axis=1) + V - np.roll(V, -1, axis=0)
        return Chain(self.grid, 0, c0, self.integer)

    def volumes(self):
        """Metric k-volumes of the cells, in the layout of coeffs."""
        g = self.grid
        if self.dim == 0:
            return np.ones(g.shape)
        if self.dim == 2:
            return g.node_weights()
        yh = g.y + 0.5 * g.hy
        lenH = np.broadcast_to((np.exp(g.metric(yh)) * g.hx)[:, None], g.shape)
        lenV = np.broadcast_to((np.exp(g.phi) * g.hy)[:, None], g.shape)
        return (lenH, lenV)

    def mass(self) -> float:
        vols = self.volumes()
        if self.dim == 1:
            return float(sum((np.abs(a) * v).sum() for a, v in zip(self.coeffs, vols)))
        return float((np.abs(self.coeffs) * vols).sum())

    def pair(self, cochain) -> float:
        """Evaluate a cochain (same layout as coeffs) on this chain."""
        if self.dim == 1:
            return float(sum((a * w).sum() for a, w in zip(self.coeffs, cochain)))
        return float((self.coeffs * np.asarray(cochain)).sum())

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(np.max(np.abs(a)) <= tol for a in self._arrays())


@dataclass(eq=False)
class DensityCurrent:
    """The 1-current d(rho): boundary of the 2-chain with node coefficients rho."""

    grid: PeriodicGrid
    density: np.ndarray

    def __post_init__(self):
        self.density = np.asarray(self.density, dtype=float)
        if self.density.shape != self.grid.shape:
            raise CurrentError("density shape does not match grid")

    def filling(self) -> Chain:
        return Chain(self.grid, 2, self.density)

    def boundary_chain(self) -> Chain:
        return self.filling().boundary()

    def mass(self) -> float:
        return self.boundary_chain().mass()

    def pair(self, cochain) -> float:
        return self.boundary_chain().pair(cochain)

    def _check(self, other):
        if other.grid is not self.grid:
            raise CurrentError("density currents live on different grids")

    def __add__(self, other):
        self._check(other)
        return DensityCurrent(self.grid, self.density + other.density)

    def __sub__(self, other):
        self._check(other)
        return DensityCurrent(self.grid, self.density - other.density)

    def __mul__(self, t: float):
        return DensityCurrent(self.grid, t * self.density)

    __rmul__ = __mul__


def density_from_boundary(chain: Chain, tol: float = 1e-10) -> DensityCurrent:
    """Recover rho with d(rho) = chain, or fault if the 1-chain is not exact."""
    if chain.dim != 1:
        raise CurrentError("only 1-chains can be boundaries of densities here")
    H, V = chain.coeffs
    ny, nx = chain.grid.shape
    rho = np.zeros((ny, nx))
    rho[0, 1:] = -np.cumsum(V[0, :-1])
    rho[1:, :] = rho[0, :] + np.cumsum(H[:-1, :], axis=0)
    rebuilt = DensityCurrent(chain.grid, rho).boundary_chain()
    scale = max(1.0, max(np.max(np.abs(a)) for a in chain.coeffs))
    err = max(np.max(np.abs(a - b)) for a, b in zip(rebuilt.coeffs, chain.coeffs))
    if err > tol * scale:
        raise CurrentError(f"1-chain is not a boundary (mismatch {err:.3e})")
    return DensityCurrent(chain.grid, rho)


@dataclass(eq=False)
class PolylineCurrent:
    """Integral 1-current given by closed oriented polylines on the torus.

    Each polyline is an (k, 2) array of vertices (x, y), implicitly closed by
    a periodic wrap in x (a graph over the horizontal circle).
    """

    grid: PeriodicGrid
    polylines: list
    multiplicities: list = field(default_factory=list)

    def __post_init__(self):
        self.polylines = [np.asarray(p, dtype=float) for p in self.polylines]
        if not self.multiplicities:
            self.multiplicities = [1] * len(self.polylines)

    def _segments(self, p):
        q = np.roll(p, -1, axis=0).copy()
        dx = q[:, 0] - p[:, 0]
        q[:, 0] = np.where(dx < -0.5 * self.grid.Lx, q[:, 0] + self.grid.Lx, q[:, 0])
        q[:, 0] = np.where(dx > 0.5 * self.grid.Lx, q[:, 0] - self.grid.Lx, q[:, 0])
        dy = self.grid.wrap_dy(q[:, 1] - p[:, 1])
        q[:, 1] = p[:, 1] + dy
        return p, q

    def mass(self) -> float:
        total = 0.0
        for p, m in zip(self.polylines, self.multiplicities):
            a, b = self._segments(p)
            mid = 0.5 * (a[:, 1] + b[:, 1])
            total += abs(m) * float((np.exp(self.grid.metric(mid)) * np.hypot(*(b - a).T)).sum())
        return total

    def pair_form(self, gx: Callable, gy: Callable | None = None) -> float:
        """Integrate gx dx + gy dy along the curves (trapezoid rule per segment)."""
        total = 0.0
        for p, m in zip(self.polylines, self.multiplicities):
            a, b = self._segments(p)
            d = b - a
            s = 0.5 * (gx(a[:, 0], a[:, 1]) + gx(b[:, 0], b[:, 1])) * d[:, 0]
            if gy is not None:
                s = s + 0.5 * (gy(a[:, 0], a[:, 1]) + gy(b[:, 0], b[:, 1])) * d[:, 1]
            total += m * float(s.sum())
        return total


@dataclass(eq=False)
class PointChain:
    """0-current: real coefficients at points of the plane (or torus)."""

    points: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.coeffs = np.asarray(self.coeffs, dtype=float).ravel()
        if len(self.points) != len(self.coeffs):
            raise CurrentError("one coefficient per point")

    def total(self) -> float:
        return float(self.coeffs.sum())

    def mass(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def positive_mass(self) -> float:
        return float(self.coeffs[self.coeffs > 0].sum())

    def __sub__(self, other: "PointChain") -> "PointChain":
        return PointChain(np.vstack([self.points, other.points]), np.concatenate([self.coeffs, -other.coeffs]))

    def __add__(self, other: "PointChain") -> "PointChain":
        return PointChain(np.vstack([self.points, other.points]), np.concatenate([self.coeffs, other.coeffs]))


# -- Jacobians -------------------------------------------------------------

def ac_density(u):
    """F(u)/F(1) with F(t) = int_{-1}^t sqrt(W): 0 at u=-1, 1 at u=+1."""
    u = np.asarray(u, dtype=float)
    return 0.75 * (u - u**3 / 3.0 + 2.0 / 3.0)


def jacobian_ac(field: Field, grid: PeriodicGrid) -> DensityCurrent:
    """J(u) = (3/4)(1-u^2) du, stored as d of the density F(u)/F(1)."""
    if field.kind != "AC":
        raise CurrentError("jacobian_ac needs an AC field")
    return DensityCurrent(grid, ac_density(field.samples))


def jacobian_gl(field: Field, domain) -> PointChain:
    """(1/pi) du1 ^ du2 per grid cell, as a 0-current at cell centers.

    On each cell the value is the signed area of the image quadrilateral
    (shoelace with diagonals) over pi, so sums over unions of cells telescope
    to the area enclosed by the image of the boundary.
    """
    if field.kind != "GL":
        raise CurrentError("jacobian_gl needs a GL field")
    u1, u2 = field.samples
    if isinstance(domain, PeriodicGrid):
        n1 = lambda a: np.roll(a, -1, axis=1)
        n2 = lambda a: np.roll(a, -1, axis=0)
        p1 = (u1, u2)
        p2 = (n1(u1), n1(u2))
        p3 = (n2(n1(u1)), n2(n1(u2)))
        p4 = (n2(u1), n2(u2))
        X, Y = np.meshgrid(domain.x + 0.5 * domain.hx, domain.y + 0.5 * domain.hy)
        keep = np.ones(domain.shape, bool)
    else:
        sl = lambda a, dj, di: a[dj : a.shape[0] - 1 + dj, di : a.shape[1] - 1 + di]
        p1 = (sl(u1, 0, 0), sl(u2, 0, 0))
        p2 = (sl(u1, 0, 1), sl(u2, 0, 1))
        p3 = (sl(u1, 1, 1), sl(u2, 1, 1))
        p4 = (sl(u1, 1, 0), sl(u2, 1, 0))
        d = domain.domain
        keep = sl(d, 0, 0) & sl(d, 0, 1) & sl(d, 1, 1) & sl(d, 1, 0)
        X = sl(domain.X, 0, 0) + 0.5 * domain.h
        Y = sl(domain.Y, 0, 0) + 0.5 * domain.h
    a = (p3[0] - p1[0], p3[1] - p1[1])
    b = (p4[0] - p2[0], p4[1] - p2[1])
    area = 0.5 * (a[0] * b[1] - a[1] * b[0])
    vals = np.where(keep, area / np.pi, 0.0)
    pc = PointChain(np.column_stack([X[keep], Y[keep]]), vals[keep])
    pc.array = vals
    return pc


# -- flat norms ------------------------------------------------------------

def _weighted_median(v: np.ndarray, w: np.ndarray) -> float:
    order = np.argsort(v, kind="stable")
    vs, ws = v[order], w[order]
    cw = np.cumsum(ws)
    k = int(np.searchsorted(cw, 0.5 * cw[-1]))
    return float(vs[min(k, len(vs) - 1)])


def _as_density(T) -> DensityCurrent:
    if isinstance(T, DensityCurrent):
        return T
    if isinstance(T, Chain):
        return density_from_boundary(T)
    raise CurrentError(f"cannot take a codimension-one flat norm of {type(T).__name__}")


def flat_distance_codim1(A, B, grid: PeriodicGrid | None = None) -> float:
    """F(A - B) = min_c sum |rho_A - rho_B + c| exp(2 phi) hx hy.

    Every 2-chain filling A - B on the connected torus differs from
    rho_A - rho_B by a constant, so the infimum is a weighted-median problem.
    """
    A, B = _as_density(A), _as_density(B)
    if A.grid is not B.grid and (A.grid.shape != B.grid.shape):
        raise CurrentError("currents live on different grids")
    g = grid or A.grid
    v = (A.density - B.density).ravel()
    w = g.node_weights().ravel()
    m = _weighted_median(v, w)
    return float((np.abs(v - m) * w).sum())


def flat_distance_dim0(A: PointChain, B: PointChain, quantum: float | None = None,
                       max_quanta: int = 2000, metric: Callable | None = None) -> float:
    """F(A - B) for 0-currents of equal total: optimal transport of the positive
    onto the negative part of A - B, solved as an assignment problem on mass quanta.

    With integer masses (or masses that are multiples of `quantum`) the value
    is exact; otherwise masses are split into at most `max_quanta` quanta per side.
    """
    S = A - B
    c = S.coeffs
    imbalance = float(c.sum())
    scale = max(1.0, float(np.abs(c).sum()))
    if abs(imbalance) > 1e-9 * scale:
        raise CurrentError(f"0-currents have unequal totals (imbalance {imbalance:.6g})")
    pos = c > 0
    neg = c < 0
    if not pos.any():
        return 0.0
    if quantum is None:
        if np.allclose(c, np.round(c), atol=1e-12):
            quantum = 1.0
        else:
            quantum = float(c[pos].sum()) / max_quanta
    qp = _quantize(c[pos] / quantum)
    qn = _quantize(-c[neg] / quantum)
    diff = int(qp.sum() - qn.sum())
    if diff > 0:
        qn[np.argmax(-c[neg])] += diff
    elif diff < 0:
        qp[np.argmax(c[pos])] -= diff
    P = np.repeat(S.points[pos], qp, axis=0)
    N = np.repeat(S.points[neg], qn, axis=0)
    if metric is None:
        cost = np.hypot(P[:, None, 0] - N[None, :, 0], P[:, None, 1] - N[None, :, 1])
    else:
        cost = metric(P, N)
    r, k = linear_sum_assignment(cost)
    return float(cost[r, k].sum() * quantum)


def _quantize(m: np.ndarray) -> np.ndarray:
    """Largest-remainder rounding preserving the rounded total."""
    fl = np.floor(m).astype(int)
    target = int(round(float(m.sum())))
    rem = m - fl
    extra = target - int(fl.sum())
    if extra > 0:
        fl[np.argsort(-rem, kind="stable")[:extra]] += 1
    return fl


# -- sharp currents of M and the perturbed mass ----------------------------

def boundary_density(grid: PeriodicGrid, M: BaseSubmanifold, heights=None) -> DensityCurrent:
    """[[M]] (or a graph perturbation of it) as d of the region's cell-fraction indicator."""
    hts = M.heights if heights is None else heights
    return DensityCurrent(grid, region_fraction(grid, hts, M.orientations))


def sharp_current(grid: PeriodicGrid, M: BaseSubmanifold, heights=None) -> PolylineCurrent:
    """[[M]] as oriented polylines through the x-nodes (boundary orientation)."""
    hts = M.heights if heights is None else heights
    polys, mult = [], []
    for yc, o in zip(hts, M.orientations):
        y = np.broadcast_to(np.asarray(yc, dtype=float), (grid.nx,))
        polys.append(np.column_stack([grid.x, y]))
        mult.append(o)
    return PolylineCurrent(grid, polys, mult)


def _omega_profile(grid: PeriodicGrid, M: BaseSubmanifold, basis, y):
    """Per (mode, component) factor d_c(y) cutoff(|d_c|/rho0) exp(phi(y_c)) at heights y."""
    dist = _component_distances(grid, M, y)
    cut = smooth_cutoff(np.abs(dist), 0.5 * M.rho0, M.rho0)
    ephi = np.exp(grid.metric(np.asarray(M.heights)))
    return dist * cut * ephi.reshape((-1,) + (1,) * (dist.ndim - 1))


def omega_cochains(grid: PeriodicGrid, M: BaseSubmanifold, basis):
    """Discrete 1-forms omega_j = s d_M phi_j(x) exp(phi(y_c)) cutoff dx on the dual edges."""
    yh = grid.y + 0.5 * grid.hy
    prof = _omega_profile(grid, M, basis, yh)  # (ncomp, ny)
    out = []
    for j in range(basis.ell):
        fj = basis.unstable_functions[j]  # (ncomp, nx)
        H = np.einsum("cy,cx->yx", prof, fj) * grid.hx
        out.append((H, np.zeros(grid.shape)))
    return out


def projection_P(T, basis, grid: PeriodicGrid, M: BaseSubmanifold) -> np.ndarray:
    """P(T)_j = <T, omega_j> for j = 1..ell."""
    if basis.ell == 0:
        return np.zeros(0)
    if isinstance(T, Field):
        T = jacobian_ac(T, grid)
    if isinstance(T, PolylineCurrent):
        vals = []
        for j in range(basis.ell):
            fj = basis.unstable_functions[j]

            def gx(x, y, fj=fj):
                prof = _omega_profile(grid, M, basis, y)
                xi = np.mod(x, grid.Lx) / grid.hx
                i0 = np.floor(xi).astype(int) % grid.nx
                t = xi - np.floor(xi)
                i1 = (i0 + 1) % grid.nx
                phi_x = (1 - t) * fj[:, i0] + t * fj[:, i1]
                return (prof * phi_x).sum(axis=0)

            vals.append(T.pair_form(gx))
        return np.asarray(vals)
    if isinstance(T, DensityCurrent):
        T = T.boundary_chain()
    if isinstance(T, Chain) and T.dim == 1:
        return np.asarray([T.pair(w) for w in omega_cochains(grid, M, basis)])
    raise CurrentError(f"cannot project {type(T).__name__}")


def current_mass(T) -> float:
    if isinstance(T, (Chain, DensityCurrent, PolylineCurrent, PointChain)):
        return T.mass()
    raise CurrentError(f"{type(T).__name__} has no mass")


def perturbed_mass(T, basis, grid: PeriodicGrid, M: BaseSubmanifold, lam: float | None = None) -> float:
    """Mass(T) + lambda |P(T)|^2."""
    lam = basis.lam if lam is None else lam
    p = projection_P(T, basis, grid, M)
    return current_mass(T) + lam * float(p @ p)
