"""Recovery data: layered tanh profiles around M_w and the planar vortex ansatz."""
from __future__ import annotations

import math
import warnings

import numpy as np

from .energy import Field, PlanarDisk
from .geometry import BaseSubmanifold, GeometryError, PeriodicGrid, _component_distances, smooth_cutoff
from .spectrum import SpectralBasis, perturbed_heights


def profile(d, eps: float, rho0: float):
    """chi tanh(d / (sqrt2 eps)) + (1 - chi) sgn(d), chi = 1 on |d| <= rho0/2 and 0 past rho0."""
    d = np.asarray(d, dtype=float)
    chi = smooth_cutoff(np.abs(d), 0.5 * rho0, rho0)
    return chi * np.tanh(d / (math.sqrt(2.0) * eps)) + (1.0 - chi) * np.sign(d)


def signed_distance_to_curve(grid: PeriodicGrid, M: BaseSubmanifold, heights) -> np.ndarray:
    """Signed g-distance of every node to the graph curves y = heights[c](x), shape (ny, nx).

    Vertical lines are geodesics, so for graphs over x the distance is the
    vertical metric length; the nearest component wins.
    """
    y = grid.y[:, None]
    hts = [np.broadcast_to(np.asarray(h, dtype=float), (grid.nx,))[None, :] for h in heights]
    dist = _component_distances(grid, M, y, heights=hts)
    k = np.argmin(np.abs(dist), axis=0)
    return np.take_along_axis(dist, k[None], axis=0)[0]


def check_eps(eps: float, rho0: float) -> None:
    if not eps < rho0 / 4:
        warnings.warn(f"eps={eps} is not below rho0/4={rho0 / 4}: interface not resolved inside the tube",
                      RuntimeWarning, stacklevel=3)


def ac_recovery(grid: PeriodicGrid, M: BaseSubmanifold, basis: SpectralBasis | None, w, eps: float) -> Field:
    """u = profile(signed distance to M_w); smooth in w, |u| <= 1."""
    check_eps(eps, M.rho0)
    if basis is None or basis.ell == 0:
        if np.any(w):
            raise ValueError("w must vanish when the Morse index is 0")
        heights = [float(y) for y in M.heights]
    else:
        _, _, heights = perturbed_heights(basis, w, grid, M)
    return layered_field(grid, M, heights, eps)


def layered_field(grid: PeriodicGrid, M: BaseSubmanifold, heights, eps: float) -> Field:
    """tanh layers around arbitrary graph curves y = heights[c](x) carrying M's orientations."""
    _check_tubes(grid, M, heights)
    d = signed_distance_to_curve(grid, M, heights)
    return Field("AC", profile(d, eps, M.rho0), eps)


def _check_tubes(grid: PeriodicGrid, M: BaseSubmanifold, heights) -> None:
    mid = np.array([np.mean(h) for h in heights])
    lo = np.array([np.min(h) for h in heights]) - mid
    hi = np.array([np.max(h) for h in heights]) - mid
    mid = np.mod(mid, grid.Ly)
    order = np.argsort(mid)
    for a, b in zip(order, np.roll(order, -1)):
        top = mid[a] + hi[a]
        bot = mid[b] + lo[b] + (grid.Ly if mid[b] <= mid[a] else 0.0)
        if float(grid.primitive(bot) - grid.primitive(top)) <= 2 * M.rho0:
            raise GeometryError("tubes around the components of M_w overlap")


def gl_vortex_ansatz(disk: PlanarDisk, eps: float) -> Field:
    """u = min(r/eps, 1) e^{i theta} on the disk grid (zero outside the disk)."""
    if not eps < disk.radius / 4:
        raise ValueError("vortex ansatz needs eps < radius/4")
    R = disk.R
    with np.errstate(invalid="ignore", divide="ignore"):
        amp = np.where(R > 0, np.minimum(R / eps, 1.0) / R, 0.0)
    u = np.stack([amp * disk.X, amp * disk.Y])
    u = np.where(disk.domain[None], u, 0.0)
    return Field("GL", u, eps)
