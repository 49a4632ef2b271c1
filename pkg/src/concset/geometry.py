"""Conformally flat 2-tori, horizontal geodesic circles and their tubes.

The ambient metric is g = exp(2 phi(y)) (dx^2 + dy^2) with phi depending on y
only.  Vertical lines are then geodesics meeting every horizontal circle
orthogonally, so the distance to a horizontal geodesic is the vertical
integral of exp(phi).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq


class GeometryError(ValueError):
    pass


class TubularNeighborhoodError(GeometryError):
    """A point lies outside every tube around M."""


def smoothstep5(t):
    """Quintic bridge 6t^5 - 15t^4 + 10t^3, clamped to [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def smooth_cutoff(r, r_in, r_out):
    """1 for r <= r_in, 0 for r >= r_out, C^2 quintic in between."""
    return 1.0 - smoothstep5((np.asarray(r, dtype=float) - r_in) / (r_out - r_in))


@dataclass(frozen=True)
class ConformalFactor:
    """phi(y) = a cos(2 pi m y / Ly)."""

    a: float = 0.5
    mode: int = 1
    Ly: float = 1.0

    def __call__(self, y):
        return self.a * np.cos(2.0 * np.pi * self.mode * np.asarray(y, dtype=float) / self.Ly)

    def derivative(self, y):
        k = 2.0 * np.pi * self.mode / self.Ly
        return -self.a * k * np.sin(k * np.asarray(y, dtype=float))

    def second_derivative(self, y):
        k = 2.0 * np.pi * self.mode / self.Ly
        return -self.a * k * k * np.cos(k * np.asarray(y, dtype=float))


@dataclass(frozen=True, eq=False)
class PeriodicGrid:
    """Node grid on [0, Lx) x [0, Ly) with a y-only conformal factor.

    Field samples are stored as arrays of shape (ny, nx): row j is the
    horizontal line y = j * hy.
    """

    nx: int
    ny: int
    metric: ConformalFactor = field(default_factory=ConformalFactor)
    Lx: float = 1.0
    Ly: float = 1.0

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise GeometryError(f"grid needs nx, ny >= 8, got {self.nx}x{self.ny}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise GeometryError("side lengths must be positive")
        if abs(self.metric.Ly - self.Ly) > 1e-14 * self.Ly:
            raise GeometryError("conformal factor period does not match Ly")
        phi = np.asarray(self.metric(self.y), dtype=float)
        if phi.shape != (self.ny,):
            raise GeometryError("conformal exponent must depend on y only")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "row_weights", np.exp(2.0 * phi) * self.hx * self.hy)
        object.__setattr__(self, "inv_conformal", np.exp(-2.0 * phi))
        e = np.exp(phi)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (e[:-1] + e[1:]) * self.hy)])
        period = cum[-1] + 0.5 * (e[-1] + e[0]) * self.hy
        object.__setattr__(self, "_primitive_nodes", cum)
        object.__setattr__(self, "_primitive_period", period)

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.ny) * self.hy

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def node_weights(self) -> np.ndarray:
        """Lumped area weights exp(2 phi) hx hy, shape (ny, nx)."""
        return np.broadcast_to(self.row_weights[:, None], self.shape)

    def area(self) -> float:
        return float(self.row_weights.sum() * self.nx)

    def primitive(self, y):
        """Vertical metric length D(y) = int_0^y exp(phi) by the trapezoid rule on the y-line.

        Between nodes D is the exact integral of the piecewise-linear
        interpolant of exp(phi), so D agrees with the trapezoid sums at nodes
        and inherits every reflection symmetry of the node samples.
        """
        y = np.asarray(y, dtype=float)
        k = np.floor(y / self.hy).astype(int)
        j = np.mod(k, self.ny)
        wraps = np.floor_divide(k, self.ny)
        t = y / self.hy - k
        e = np.exp(self.phi)
        e0, e1 = e[j], e[(j + 1) % self.ny]
        tail = self.hy * t * (e0 + 0.5 * t * (e1 - e0))
        return wraps * self._primitive_period + self._primitive_nodes[j] + tail

    def height_at_distance(self, y0: float, d: float) -> float:
        """Height y with D(y) - D(y0) = d (vertical geodesic shooting)."""
        if d == 0.0:
            return float(y0)
        target = float(self.primitive(y0)) + d
        emin = float(np.exp(self.phi.min()))
        span = abs(d) / emin + 2 * self.hy
        lo, hi = (y0, y0 + span) if d > 0 else (y0 - span, y0)
        return brentq(lambda s: float(self.primitive(s)) - target, lo, hi, xtol=1e-15, rtol=1e-15)

    def wrap_dy(self, dy):
        """Periodic difference in [-Ly/2, Ly/2)."""
        return np.mod(np.asarray(dy, dtype=float) + 0.5 * self.Ly, self.Ly) - 0.5 * self.Ly


@dataclass(frozen=True)
class BaseSubmanifold:
    """Union of horizontal geodesic circles y = y_c with boundary orientations.

    orientation +1 means the enclosed region lies above the circle (y > y_c
    locally), -1 below.  Going around the torus vertically the orientations
    must alternate so that the circles bound a region.
    """

    heights: tuple[float, ...] = (0.0, 0.5)
    orientations: tuple[int, ...] = (1, -1)
    rho0: float = 0.15

    def __post_init__(self):
        if len(self.heights) != len(self.orientations):
            raise GeometryError("one orientation per component")
        if any(o not in (1, -1) for o in self.orientations):
            raise GeometryError("orientations must be +1 or -1")
        if self.rho0 <= 0:
            raise GeometryError("rho0 must be positive")

    @property
    def ncomp(self) -> int:
        return len(self.heights)

    def lengths(self, grid: PeriodicGrid) -> np.ndarray:
        """Metric length exp(phi(y_c)) Lx of each circle."""
        return np.exp(grid.metric(np.asarray(self.heights))) * grid.Lx

    def total_length(self, grid: PeriodicGrid) -> float:
        return float(self.lengths(grid).sum())

    def validate(self, grid: PeriodicGrid, geodesic_tol: float | None = None) -> None:
        if self.ncomp < 2:
            raise GeometryError("a single horizontal circle does not bound a region on the torus")
        order = np.argsort(np.mod(self.heights, grid.Ly))
        orient = np.asarray(self.orientations)[order]
        if np.any(orient == np.roll(orient, -1)):
            raise GeometryError("orientations must alternate around the torus so that M bounds a region")
        if geodesic_tol is None:
            geodesic_tol = 1e-6 * max(1.0, 2 * np.pi * grid.metric.mode * abs(grid.metric.a))
        h = grid.hy
        for yc in self.heights:
            slope = (grid.metric(yc + h) - grid.metric(yc - h)) / (2 * h)
            if abs(slope) > geodesic_tol:
                raise GeometryError(f"circle y={yc} is not a geodesic (phi'={slope:.3e})")
        hs = np.sort(np.mod(self.heights, grid.Ly))
        gaps_lo = np.concatenate([hs, [hs[0] + grid.Ly]])
        for a, b in zip(gaps_lo[:-1], gaps_lo[1:]):
            gap = float(grid.primitive(b) - grid.primitive(a))
            if gap <= 2 * self.rho0:
                raise GeometryError(f"tubes of radius {self.rho0} around y={a} and y={b % grid.Ly} overlap")


def _component_distances(grid: PeriodicGrid, M: BaseSubmanifold, y, heights=None):
    """Signed distances (ncomp, ...) from heights y to every component."""
    y = np.asarray(y, dtype=float)
    hts = M.heights if heights is None else heights
    out = []
    for yc, o in zip(hts, M.orientations):
        yc = np.asarray(yc, dtype=float)
        dy = grid.wrap_dy(y - yc)
        out.append(o * (grid.primitive(yc + dy) - grid.primitive(yc)))
    return np.stack(out)


def signed_distance_field(grid: PeriodicGrid, M: BaseSubmanifold, y):
    """Vectorized signed distance to M along vertical geodesics.

    Returns (d, component, valid): d is positive inside the enclosed region,
    component is the index of the nearest circle and valid flags |d| <= rho0.
    Outside every tube d is clamped to +-rho0.
    """
    dist = _component_distances(grid, M, y)
    comp = np.argmin(np.abs(dist), axis=0)
    d = np.take_along_axis(dist, comp[None], axis=0)[0]
    valid = np.abs(d) <= M.rho0
    d = np.where(valid, d, np.sign(d) * M.rho0)
    return d, comp, valid


def signed_distance(grid: PeriodicGrid, M: BaseSubmanifold, node):
    """Signed g-distance from a point (x, y) to M and a tube-validity flag."""
    _, yv = node
    d, _, valid = signed_distance_field(grid, M, np.asarray([yv]))
    return float(d[0]), bool(valid[0])


def project_to_M(grid: PeriodicGrid, M: BaseSubmanifold, node):
    """Nearest-point projection (x, y) -> (x, y_c) inside the tube of y_c."""
    xv, yv = node
    _, comp, valid = signed_distance_field(grid, M, np.asarray([yv]))
    if not valid[0]:
        raise TubularNeighborhoodError(f"point {node} lies outside every tube of radius {M.rho0}")
    return (float(xv), float(M.heights[int(comp[0])]))


def gauss_curvature(grid: PeriodicGrid, node=None):
    """K = -exp(-2 phi) phi'' from centered second differences of the node exponent.

    With node=None returns the per-row array (ny,); otherwise node is a row
    index j or an (i, j) pair.
    """
    phi = grid.phi
    d2 = (np.roll(phi, -1) - 2.0 * phi + np.roll(phi, 1)) / grid.hy**2
    K = -np.exp(-2.0 * phi) * d2
    if node is None:
        return K
    j = node[1] if isinstance(node, (tuple, list)) else node
    return float(K[int(j) % grid.ny])


def curvature_at(grid: PeriodicGrid, y: float) -> float:
    """Same centered stencil as gauss_curvature evaluated at an arbitrary height."""
    h = grid.hy
    p = grid.metric
    d2 = (p(y + h) - 2.0 * p(y) + p(y - h)) / h**2
    return float(-np.exp(-2.0 * p(y)) * d2)


def inside_intervals(grid: PeriodicGrid, heights: Sequence, orientations: Sequence[int]):
    """Per-column intervals (lo, hi) of the enclosed region, hi > lo, possibly wrapping.

    heights holds one entry per component, each a scalar or an (nx,) array.
    Returns an array of shape (nx, nint, 2).
    """
    H = np.stack([np.broadcast_to(np.asarray(h, dtype=float), (grid.nx,)) for h in heights])
    O = np.asarray(orientations)
    Hm = np.mod(H, grid.Ly)
    order = np.argsort(Hm[:, 0])
    Hm, O = Hm[order], O[order]
    ints = []
    n = len(O)
    for k in range(n):
        if O[k] == 1:
            lo = Hm[k]
            hi = Hm[(k + 1) % n] + (grid.Ly if k + 1 == n else 0.0)
            hi = np.where(hi <= lo, hi + grid.Ly, hi)
            ints.append(np.stack([lo, hi], axis=-1))
    return np.stack(ints, axis=1)


def region_fraction(grid: PeriodicGrid, heights, orientations) -> np.ndarray:
    """Coordinate fraction of each node's dual cell [y - hy/2, y + hy/2] inside the region.

    Shape (ny, nx).  Nodes lying exactly on a boundary circle get 1/2.
    """
    ints = inside_intervals(grid, heights, orientations)
    lo = ints[..., 0][..., None]
    hi = ints[..., 1][..., None]
    h = grid.hy
    ylo = grid.y - 0.5 * h
    yhi = grid.y + 0.5 * h
    frac = np.zeros((grid.nx, grid.ny))
    for shift in (-grid.Ly, 0.0, grid.Ly):
        ov = np.minimum(hi + shift, yhi) - np.maximum(lo + shift, ylo)
        frac += np.clip(ov, 0.0, None).sum(axis=1)
    return np.clip(frac / h, 0.0, 1.0).T


def default_instance(nx: int = 256, ny: int = 256, a: float = 0.5, rho0: float = 0.15):
    """The two-circle instance on phi = a cos(2 pi y): y=0 (unstable for a>0) and y=1/2."""
    grid = PeriodicGrid(nx, ny, ConformalFactor(a=a))
    M = BaseSubmanifold((0.0, 0.5), (1, -1), rho0)
    M.validate(grid)
    return grid, M
