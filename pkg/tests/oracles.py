"""Independent reference computations used by the currents and acceptance tests."""
import itertools

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from concset.currents import Chain, PointChain
from concset.geometry import ConformalFactor, PeriodicGrid


def random_exact_pair(rng, n=8):
    # grids need at least 8 nodes per side, so "at most 8x8" means exactly 8x8
    grid = PeriodicGrid(n, n, ConformalFactor(float(rng.uniform(-0.8, 0.8)), int(rng.integers(1, 3))))
    if rng.random() < 0.5:
        ra = rng.integers(-2, 3, size=grid.shape).astype(float)
        rb = rng.integers(-2, 3, size=grid.shape).astype(float)
    else:
        ra = rng.uniform(-1, 1, grid.shape)
        rb = rng.uniform(-1, 1, grid.shape)
    return grid, Chain(grid, 2, ra).boundary(), Chain(grid, 2, rb).boundary()


def _boundary_matrix(grid):
    """Sparse matrix of the 2 -> 1 boundary acting on raveled node coefficients."""
    n = grid.nx * grid.ny
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        H, V = Chain(grid, 2, e.reshape(grid.shape)).boundary().coeffs
        cols.append(np.concatenate([H.ravel(), V.ravel()]))
    return sp.csr_matrix(np.array(cols).T)


def flat_lp(A: Chain, B: Chain) -> float:
    """min mass(R) over 2-chains R with boundary A - B, as a linear program."""
    grid = A.grid
    S = A - B
    rhs = np.concatenate([S.coeffs[0].ravel(), S.coeffs[1].ravel()])
    D = _boundary_matrix(grid)
    w = grid.node_weights().ravel()
    n = len(w)
    res = linprog(np.concatenate([w, w]), A_eq=sp.hstack([D, -D]), b_eq=rhs, bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return float(res.fun)


def flat_shift(rho: np.ndarray, w: np.ndarray) -> float:
    """Exhaustive search over constant shifts; the optimum sits at a data value."""
    v, w = rho.ravel(), w.ravel()
    return float(min((np.abs(v - c) * w).sum() for c in v))


def random_point_pair(rng, max_pts=4, n=8):
    """Unit masses at random nodes of an n x n grid on the unit square."""
    k = int(rng.integers(1, max_pts + 1))
    pts = lambda: rng.integers(0, n, (k, 2)) / n
    return PointChain(pts(), np.ones(k)), PointChain(pts(), np.ones(k))


def dim0_brute(A: PointChain, B: PointChain) -> float:
    best = np.inf
    for perm in itertools.permutations(range(len(B.points))):
        d = np.hypot(*(A.points - B.points[list(perm)]).T).sum()
        best = min(best, d)
    return float(best)
