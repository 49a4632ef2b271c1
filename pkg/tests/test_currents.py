import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from concset.currents import (
    Chain,
    CurrentError,
    DensityCurrent,
    PointChain,
    PolylineCurrent,
    boundary_density,
    density_from_boundary,
    flat_distance_codim1,
    flat_distance_dim0,
    jacobian_ac,
    jacobian_gl,
    perturbed_mass,
    projection_P,
    sharp_current,
)
from concset.energy import Field, PlanarDisk
from concset.geometry import ConformalFactor, PeriodicGrid
from concset.recovery import gl_vortex_ansatz

from oracles import dim0_brute, flat_lp, flat_shift, random_exact_pair, random_point_pair


@settings(max_examples=30, deadline=None)
@given(st.integers(8, 20), st.integers(8, 20), st.integers(0, 2**31 - 1))
def test_boundary_of_boundary_vanishes(nx, ny, seed):
    g = PeriodicGrid(nx, ny, ConformalFactor(0.3))
    rho = np.random.default_rng(seed).normal(size=g.shape)
    c = Chain(g, 2, rho).boundary().boundary()
    assert c.is_zero(1e-12)


def test_unit_cell_boundary_is_counterclockwise():
    g = PeriodicGrid(8, 8, ConformalFactor(0.0))
    rho = np.zeros(g.shape)
    rho[1, 1] = 1.0
    H, V = Chain(g, 2, rho).boundary().coeffs
    # bottom edge at y_{1/2} runs +x, top edge at y_{3/2} runs -x
    assert H[0, 1] == 1.0 and H[1, 1] == -1.0
    # right edge at x_{3/2} runs +y, left edge at x_{1/2} runs -y
    assert V[1, 1] == 1.0 and V[1, 0] == -1.0
    assert abs(H).sum() + abs(V).sum() == 4


def test_density_from_boundary_recovers_up_to_constant(rng):
    g = PeriodicGrid(12, 9, ConformalFactor(0.4))
    rho = rng.normal(size=g.shape)
    D = density_from_boundary(Chain(g, 2, rho).boundary())
    diff = D.density - rho
    assert np.ptp(diff) < 1e-12


def test_non_exact_chain_faults():
    g = PeriodicGrid(8, 8, ConformalFactor(0.0))
    H = np.zeros(g.shape)
    H[2, :] = 1.0  # a horizontal loop: closed but not a boundary
    with pytest.raises(CurrentError):
        density_from_boundary(Chain(g, 1, (H, np.zeros(g.shape))))


def test_flat_codim1_matches_lp_and_shift(rng):
    for _ in range(25):
        g, A, B = random_exact_pair(rng)
        F = flat_distance_codim1(A, B)
        assert F == pytest.approx(flat_lp(A, B), rel=1e-9, abs=1e-12)
        rho = density_from_boundary(A - B).density
        assert F == pytest.approx(flat_shift(rho, g.node_weights()), rel=1e-9, abs=1e-12)


def test_flat_codim1_metric_properties(rng):
    g = PeriodicGrid(8, 8, ConformalFactor(0.5))
    a, b, c = (DensityCurrent(g, rng.normal(size=g.shape)) for _ in range(3))
    assert flat_distance_codim1(a, a) == 0.0
    assert flat_distance_codim1(a, b) == pytest.approx(flat_distance_codim1(b, a), rel=1e-12)
    assert flat_distance_codim1(a, c) <= flat_distance_codim1(a, b) + flat_distance_codim1(b, c) + 1e-12
    # adding a constant changes the filling, not the current
    shifted = DensityCurrent(g, a.density + 3.0)
    assert flat_distance_codim1(shifted, b) == pytest.approx(flat_distance_codim1(a, b), rel=1e-12)


def test_flat_of_shifted_circle_is_band_area():
    g = PeriodicGrid(64, 64, ConformalFactor(0.0))
    from concset.geometry import BaseSubmanifold

    M = BaseSubmanifold((0.0, 0.5), (1, -1))
    M2 = BaseSubmanifold((0.125, 0.5), (1, -1))
    F = flat_distance_codim1(boundary_density(g, M), boundary_density(g, M2))
    assert F == pytest.approx(0.125, rel=1e-12)


def test_flat_dim0_brute_force(rng):
    for _ in range(50):
        A, B = random_point_pair(rng)
        assert flat_distance_dim0(A, B) == pytest.approx(dim0_brute(A, B), rel=1e-9, abs=1e-12)


def test_flat_dim0_rejects_imbalance():
    with pytest.raises(CurrentError):
        flat_distance_dim0(PointChain(np.zeros((1, 2)), [1.0]), PointChain(np.zeros((0, 2)), []))


def test_flat_dim0_fractional_masses():
    A = PointChain(np.array([[0.0, 0.0]]), [0.5])
    B = PointChain(np.array([[1.0, 0.0]]), [0.5])
    assert flat_distance_dim0(A, B) == pytest.approx(0.5, rel=1e-12)


def test_sharp_and_density_masses_agree(inst256):
    grid, M, _ = inst256
    H1 = M.total_length(grid)
    assert sharp_current(grid, M).mass() == pytest.approx(H1, rel=1e-12)
    # circles on node rows split into two half-weight edges at y +- h/2
    assert boundary_density(grid, M).boundary_chain().mass() == pytest.approx(H1, rel=1e-4)


def test_jacobian_ac_of_sign_field_is_boundary(inst64):
    grid, M, _ = inst64
    ref = boundary_density(grid, M)
    u = 2.0 * ref.density - 1.0
    J = jacobian_ac(Field("AC", u, 0.05), grid)
    assert flat_distance_codim1(J, ref) < 1e-12


def test_projection_is_linear_and_vanishes_on_M(inst64):
    grid, M, basis = inst64
    ref = boundary_density(grid, M)
    assert abs(projection_P(ref, basis, grid, M)[0]) < 1e-14
    rng = np.random.default_rng(3)
    a, b = (DensityCurrent(grid, rng.normal(size=grid.shape)) for _ in range(2))
    pa, pb = projection_P(a, basis, grid, M), projection_P(b, basis, grid, M)
    assert projection_P(a + b * 2.0, basis, grid, M) == pytest.approx(pa + 2 * pb, rel=1e-10, abs=1e-14)


def test_perturbed_mass_of_M_is_area(inst64):
    grid, M, basis = inst64
    assert perturbed_mass(sharp_current(grid, M), basis, grid, M) == pytest.approx(M.total_length(grid), rel=1e-12)


def test_polyline_mass_of_horizontal_circle():
    g = PeriodicGrid(64, 64, ConformalFactor(0.5))
    x = np.linspace(0, 1, 10, endpoint=False)
    P = PolylineCurrent(g, [np.column_stack([x, np.full(10, 0.3)])], [-2])
    assert P.mass() == pytest.approx(2 * math.exp(0.5 * math.cos(0.6 * math.pi)), rel=1e-12)


def test_gl_jacobian_of_vortex_is_unit_point():
    disk = PlanarDisk(1.0, 200)
    u = gl_vortex_ansatz(disk, 0.05)
    J = jacobian_gl(u, disk)
    assert J.total() == pytest.approx(1.0, abs=1e-4)
    # concentrated near the origin
    assert flat_distance_dim0(J, PointChain(np.zeros((1, 2)), [J.total()])) < 0.05
