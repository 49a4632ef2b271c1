import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from concset.geometry import (
    BaseSubmanifold,
    ConformalFactor,
    GeometryError,
    PeriodicGrid,
    TubularNeighborhoodError,
    curvature_at,
    default_instance,
    gauss_curvature,
    project_to_M,
    region_fraction,
    signed_distance,
    smooth_cutoff,
)


def _exact_primitive(y, a=0.5):
    return quad(lambda s: math.exp(a * math.cos(2 * math.pi * s)), 0.0, y, epsabs=1e-13, epsrel=1e-13)[0]


def test_primitive_matches_quadrature():
    grid, _ = default_instance(256, 256)
    # node values are trapezoid sums: second order in h
    for y in (0.1, 0.25, 0.5, 0.9):
        assert abs(float(grid.primitive(y)) - _exact_primitive(y)) < 2e-5


def test_primitive_converges_second_order():
    errs = []
    for n in (64, 128, 256):
        g = PeriodicGrid(n, n, ConformalFactor(0.5))
        errs.append(abs(float(g.primitive(0.1)) - _exact_primitive(0.1)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


def test_primitive_odd_and_periodic():
    grid, _ = default_instance(64, 64)
    y = np.linspace(-0.37, 0.41, 13)
    assert np.allclose(grid.primitive(-y), -grid.primitive(y), atol=1e-15, rtol=0)
    per = float(grid.primitive(1.0))
    assert np.allclose(grid.primitive(y + 1.0) - grid.primitive(y), per, atol=1e-14)


def test_signed_distance_example():
    grid, M = default_instance(256, 256)
    d, valid = signed_distance(grid, M, (0.3, 0.05))
    assert valid
    assert d > 0  # y=0 has orientation +1: the region lies above it
    assert abs(d - _exact_primitive(0.05)) < 2e-5
    assert project_to_M(grid, M, (0.3, 0.05)) == (0.3, 0.0)
    # 0.1 is about 0.157 away in the metric, past rho0
    d, valid = signed_distance(grid, M, (0.3, 0.1))
    assert not valid and d == M.rho0


def test_projection_outside_tube_faults():
    grid, M = default_instance(64, 64)
    with pytest.raises(TubularNeighborhoodError):
        project_to_M(grid, M, (0.0, 0.25))


def test_gauss_curvature_values():
    grid, _ = default_instance(256, 256)
    k0 = gauss_curvature(grid, (0, 0))
    k_half = gauss_curvature(grid, 128)
    # K = -exp(-2 phi) phi'' with phi'' = -4 pi^2 a cos(2 pi y)
    assert k0 == pytest.approx(2 * math.pi**2 * math.exp(-1.0), rel=1e-3)
    assert k_half == pytest.approx(-2 * math.pi**2 * math.exp(1.0), rel=1e-3)
    assert curvature_at(grid, 0.0) == pytest.approx(k0, rel=1e-12)


def test_curvature_stencil_second_order():
    exact = 2 * math.pi**2 * math.exp(-1.0)
    errs = [abs(gauss_curvature(PeriodicGrid(8, n, ConformalFactor(0.5)), 0) - exact) for n in (64, 128, 256)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_validate_rejects_bad_manifolds():
    grid = PeriodicGrid(32, 32, ConformalFactor(0.5))
    with pytest.raises(GeometryError):
        BaseSubmanifold((0.0, 0.5), (1, 1)).validate(grid)
    with pytest.raises(GeometryError):
        BaseSubmanifold((0.1, 0.5), (1, -1)).validate(grid)  # y = 0.1 is not a geodesic
    with pytest.raises(GeometryError):
        BaseSubmanifold((0.0, 0.5), (1, -1), rho0=0.6).validate(grid)
    with pytest.raises(GeometryError):
        BaseSubmanifold((0.0,), (1,)).validate(grid)


def test_region_fraction_counts_area():
    grid, M = default_instance(32, 32)
    frac = region_fraction(grid, M.heights, M.orientations)
    # rows strictly inside (0, 1/2) are 1, boundary rows 1/2, the rest 0
    col = frac[:, 0]
    assert col[0] == 0.5 and col[16] == 0.5
    assert np.all(col[1:16] == 1.0) and np.all(col[17:] == 0.0)


def test_smooth_cutoff_limits():
    r = np.linspace(0, 1, 101)
    c = smooth_cutoff(r, 0.3, 0.6)
    assert np.all(c[r <= 0.3] == 1.0) and np.all(c[r >= 0.6] == 0.0)
    assert np.all(np.diff(c) <= 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.49, 0.49), st.floats(-0.12, 0.12))
def test_height_at_distance_inverts_primitive(y0, d):
    grid = PeriodicGrid(64, 64, ConformalFactor(0.5))
    y = grid.height_at_distance(y0, d)
    assert abs(float(grid.primitive(y) - grid.primitive(y0)) - d) < 1e-12
