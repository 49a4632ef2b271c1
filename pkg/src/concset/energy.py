"""Allen-Cahn and Ginzburg-Landau energies on the torus grid or a planar disk.

The Dirichlet term uses forward differences on grid edges.  In two
dimensions |du|_g^2 dA_g = (u_x^2 + u_y^2) dx dy, so that term carries no
conformal weight; the potential is lumped at nodes with weight
exp(2 phi) hx hy.  The exact weighted-L2 gradient of this discrete energy is
exp(-2 phi) times the 5-point Laplacian plus the reaction term, which is
what the flow integrates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import PeriodicGrid

AC_CONSTANT = 3.0 / (2.0 * math.sqrt(2.0))


class EnergyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PlanarDisk:
    """Disk of given radius embedded in a square node grid on [-R, R]^2.

    Nodes with r <= R form the domain; domain nodes with a neighbour outside
    it are held fixed (Dirichlet ring) by the flow.
    """

    radius: float = 1.0
    n: int = 400

    def __post_init__(self):
        if self.n < 8:
            raise EnergyError("disk grid needs n >= 8")
        h = 2.0 * self.radius / self.n
        c = -self.radius + h * np.arange(self.n + 1)
        X, Y = np.meshgrid(c, c)
        R = np.hypot(X, Y)
        dom = R <= self.radius * (1.0 + 1e-12)
        free = dom.copy()
        free[0, :] = free[-1, :] = free[:, 0] = free[:, -1] = False
        free[1:-1, 1:-1] &= dom[2:, 1:-1] & dom[:-2, 1:-1] & dom[1:-1, 2:] & dom[1:-1, :-2]
        for k, v in dict(h=h, X=X, Y=Y, R=R, domain=dom, free=free).items():
            object.__setattr__(self, k, v)

    @property
    def hx(self) -> float:
        return self.h

    @property
    def hy(self) -> float:
        return self.h

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape

    def node_weights(self) -> np.ndarray:
        return np.where(self.domain, self.h * self.h, 0.0)


@dataclass
class Field:
    """Node samples of an AC (real) or GL (two real components) field.

    AC samples have shape (ny, nx), or (n,) on a line; GL samples (2, ny, nx).
    """

    kind: str
    samples: np.ndarray
    epsilon: float

    def __post_init__(self):
        if self.kind not in ("AC", "GL"):
            raise EnergyError(f"unknown field kind {self.kind!r}")
        self.samples = np.asarray(self.samples, dtype=float)
        ndims = (1, 2) if self.kind == "AC" else (3,)
        if self.samples.ndim not in ndims or (self.kind == "GL" and self.samples.shape[0] != 2):
            raise EnergyError(f"{self.kind} samples have shape {self.samples.shape}")
        if self.epsilon <= 0:
            raise EnergyError("epsilon must be positive")

    @property
    def components(self) -> np.ndarray:
        """Samples as (ncomp, ny, nx)."""
        return self.samples[None] if self.kind == "AC" else self.samples

    def copy(self) -> "Field":
        return Field(self.kind, self.samples.copy(), self.epsilon)


@dataclass(frozen=True)
class EnergyBreakdown:
    total: float
    dirichlet: float
    potential: float
    density: np.ndarray
    scale: float  # normalized = scale * unnormalized

    @property
    def unnormalized(self) -> float:
        return self.total / self.scale


def _edge_terms(c: np.ndarray, domain):
    """Per-edge squared differences along x and y, as (ncomp, ny, nx) arrays on the left/bottom node."""
    if isinstance(domain, PeriodicGrid):
        dx2 = ((np.roll(c, -1, axis=-1) - c) ** 2).sum(axis=0)
        dy2 = ((np.roll(c, -1, axis=-2) - c) ** 2).sum(axis=0)
        return dx2, dy2, None, None
    dom = domain.domain
    ex = dom[:, :-1] & dom[:, 1:]
    ey = dom[:-1, :] & dom[1:, :]
    dx2 = np.where(ex, ((c[..., :, 1:] - c[..., :, :-1]) ** 2).sum(axis=0), 0.0)
    dy2 = np.where(ey, ((c[..., 1:, :] - c[..., :-1, :]) ** 2).sum(axis=0), 0.0)
    return dx2, dy2, ex, ey


def _dirichlet_density(c: np.ndarray, domain) -> np.ndarray:
    """Unnormalized Dirichlet energy per node (each edge split between its endpoints)."""
    hx, hy = domain.hx, domain.hy
    dx2, dy2, _, _ = _edge_terms(c, domain)
    ex = 0.5 * dx2 * (hy / hx)
    ey = 0.5 * dy2 * (hx / hy)
    if isinstance(domain, PeriodicGrid):
        return 0.5 * (ex + np.roll(ex, 1, axis=-1) + ey + np.roll(ey, 1, axis=-2))
    dens = np.zeros(domain.shape)
    dens[:, :-1] += 0.5 * ex
    dens[:, 1:] += 0.5 * ex
    dens[:-1, :] += 0.5 * ey
    dens[1:, :] += 0.5 * ey
    return dens


def _check(field: Field, domain, kind: str):
    if field.kind != kind:
        raise EnergyError(f"expected a {kind} field, got {field.kind}")
    if field.components.shape[1:] != domain.shape:
        raise EnergyError(f"field shape {field.components.shape[1:]} does not match domain {domain.shape}")
    if not np.all(np.isfinite(field.samples)):
        raise EnergyError("non-finite field samples")


def _breakdown(field: Field, domain, scale: float) -> EnergyBreakdown:
    c = field.components
    eps = field.epsilon
    mod2 = (c * c).sum(axis=0)
    wts = domain.node_weights()
    pot = (1.0 - mod2) ** 2 / (4.0 * eps * eps) * wts
    dirich = _dirichlet_density(c, domain)
    dens = scale * (dirich + pot)
    D = scale * float(dirich.sum())
    P = scale * float(pot.sum())
    return EnergyBreakdown(total=D + P, dirichlet=D, potential=P, density=dens, scale=scale)


def ac_scale(eps: float) -> float:
    return AC_CONSTANT * eps


def gl_scale(eps: float) -> float:
    if not eps < 1.0:
        raise EnergyError("Ginzburg-Landau normalization needs epsilon < 1")
    return 1.0 / (math.pi * math.log(1.0 / eps))


def energy_ac(field: Field, grid) -> EnergyBreakdown:
    """Normalized Allen-Cahn energy c eps int (|du|^2/2 + (1-u^2)^2/(4 eps^2)), c = 3/(2 sqrt 2)."""
    _check(field, grid, "AC")
    return _breakdown(field, grid, ac_scale(field.epsilon))


def energy_gl(field: Field, domain) -> EnergyBreakdown:
    """Ginzburg-Landau energy normalized by 1/(pi log(1/eps))."""
    _check(field, domain, "GL")
    return _breakdown(field, domain, gl_scale(field.epsilon))


def energy(field: Field, domain) -> EnergyBreakdown:
    return energy_ac(field, domain) if field.kind == "AC" else energy_gl(field, domain)


def unnormalized_energy(field: Field, domain) -> float:
    """Energy before normalization: (2 sqrt2 / 3) eps^-1 E for AC, pi log(1/eps) E for GL."""
    return energy(field, domain).unnormalized


def el_residual(field: Field, domain) -> np.ndarray:
    """Euler-Lagrange residual exp(-2phi) Lap_h u + (1-|u|^2) u / eps^2 (zero on fixed disk nodes)."""
    c = field.components
    eps = field.epsilon
    mod2 = (c * c).sum(axis=0)
    if isinstance(domain, PeriodicGrid):
        lap = (np.roll(c, -1, -1) + np.roll(c, 1, -1) - 2 * c) / domain.hx**2 + (
            np.roll(c, -1, -2) + np.roll(c, 1, -2) - 2 * c
        ) / domain.hy**2
        r = domain.inv_conformal[:, None] * lap + (1.0 - mod2) * c / eps**2
    else:
        lap = np.zeros_like(c)
        lap[..., 1:-1, 1:-1] = (
            c[..., 1:-1, 2:] + c[..., 1:-1, :-2] + c[..., 2:, 1:-1] + c[..., :-2, 1:-1] - 4 * c[..., 1:-1, 1:-1]
        ) / domain.h**2
        r = np.where(domain.free, lap + (1.0 - mod2) * c / eps**2, 0.0)
    return r[0] if field.kind == "AC" else r


def weighted_l2(values: np.ndarray, domain) -> float:
    """sqrt(sum |v|^2 w) with the lumped node weights."""
    v = np.asarray(values)
    sq = v * v if v.ndim == 2 else (v * v).sum(axis=0)
    return float(np.sqrt((sq * domain.node_weights()).sum()))


def energy_ac_1d(u, h: float, eps: float, periodic: bool = True, weights=None) -> float:
    """Normalized 1-D Allen-Cahn energy with forward differences.

    periodic=False treats u as samples on a segment (no wrap-around edge).
    `weights` are optional node weights replacing h in the potential.
    """
    u = np.asarray(u, dtype=float)
    du = np.roll(u, -1) - u if periodic else np.diff(u)
    w = h if weights is None else np.asarray(weights)
    return ac_scale(eps) * float(0.5 * (du * du).sum() / h + ((1 - u * u) ** 2 * w).sum() / (4 * eps**2))
