import math

import numpy as np
import pytest

from concset.currents import projection_P
from concset.geometry import BaseSubmanifold, ConformalFactor, GeometryError, PeriodicGrid
from concset.spectrum import DegenerateError, build_jacobi_operator, eigendecompose, family_Mw, spectral_basis


def _discrete_symbol(grid, yc):
    """Eigenvalues of the periodic second-difference Jacobi block by Fourier diagonalization."""
    ds = math.exp(grid.metric(yc)) * grid.hx
    k = np.arange(grid.nx)
    d2 = 2 * grid.hy**2
    phi = grid.metric
    K = -math.exp(-2 * phi(yc)) * (phi(yc + grid.hy) - 2 * phi(yc) + phi(yc - grid.hy)) / grid.hy**2
    return np.sort((2 - 2 * np.cos(2 * np.pi * k / grid.nx)) / ds**2 - K)


def test_eigenvalues_match_fourier_oracle(inst256):
    grid, M, basis = inst256
    oracle = np.sort(np.concatenate([_discrete_symbol(grid, y) for y in M.heights]))
    assert np.allclose(basis.eigenvalues, oracle, rtol=1e-10, atol=1e-8)


def test_low_modes_near_continuum(inst256):
    _, _, basis = inst256
    lam1 = 4 * math.pi**2 * math.exp(-1) * (0 - 0.5)
    assert basis.lambda1 == pytest.approx(lam1, rel=1e-3)
    assert basis.ell == 1
    assert basis.eigenvalues[1] == pytest.approx(-lam1, rel=1e-3)
    assert basis.eigenvalues[2] == pytest.approx(basis.eigenvalues[1], rel=1e-10)
    assert basis.component[0] == 0


def test_basis_is_orthonormal(inst256):
    _, _, basis = inst256
    G = basis.gram()
    assert np.abs(G - np.eye(len(G))).max() < 1e-12


def test_defaults_for_lambda_and_wbar(inst256):
    grid, M, basis = inst256
    assert basis.lam == pytest.approx(abs(basis.lambda1))
    L0 = math.exp(0.5)
    assert basis.wbar == pytest.approx(0.1 * min(1.0, 0.15 * math.sqrt(L0)), rel=1e-12)


def test_lambda_must_dominate_half_lambda1(inst64):
    grid, M, _ = inst64
    op = build_jacobi_operator(grid, M)
    with pytest.raises(ValueError):
        eigendecompose(op, lam=0.4 * abs(op.curvature[0]))


def test_flat_metric_is_degenerate():
    grid = PeriodicGrid(32, 32, ConformalFactor(0.0))
    with pytest.raises(DegenerateError):
        spectral_basis(grid, BaseSubmanifold((0.0, 0.5), (1, -1)))


def test_stable_configuration_has_index_zero():
    grid = PeriodicGrid(64, 64, ConformalFactor(-0.5, 2))
    basis = spectral_basis(grid, BaseSubmanifold((0.0, 0.5), (1, -1)))
    assert basis.ell == 0 and basis.wbar == 0.0
    assert basis.lambda1 > 0


def test_family_projection_and_second_variation(inst256):
    grid, M, basis = inst256
    H1 = M.total_length(grid)
    for w in (-basis.wbar, -0.3 * basis.wbar, 0.5 * basis.wbar, basis.wbar):
        c = family_Mw(basis, [w], grid, M)
        assert projection_P(c.polyline, basis, grid, M)[0] == pytest.approx(w, rel=1e-9)
        drop = c.length - H1
        assert drop < 0
        assert drop == pytest.approx(0.5 * basis.lambda1 * w * w, rel=2e-2)


def test_family_rejects_large_w(inst64):
    grid, M, basis = inst64
    with pytest.raises(ValueError):
        family_Mw(basis, [1.01 * basis.wbar], grid, M)


def test_operator_needs_valid_manifold():
    grid = PeriodicGrid(32, 32, ConformalFactor(0.5))
    with pytest.raises(GeometryError):
        build_jacobi_operator(grid, BaseSubmanifold((0.2, 0.5), (1, -1)))
