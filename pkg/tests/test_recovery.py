import math

import numpy as np
import pytest

from concset.currents import boundary_density, flat_distance_codim1, jacobian_ac
from concset.energy import PlanarDisk, energy_ac
from concset.geometry import GeometryError
from concset.recovery import ac_recovery, gl_vortex_ansatz, layered_field, profile


def test_profile_limits():
    d = np.array([-1.0, -0.15, 0.0, 0.15, 1.0])
    p = profile(d, 0.02, 0.15)
    assert np.all(p[[0, 1]] == -1.0) and np.all(p[[3, 4]] == 1.0) and p[2] == 0.0
    # tanh regime inside half the tube
    assert profile(0.01, 0.02, 0.15) == pytest.approx(math.tanh(0.01 / (math.sqrt(2) * 0.02)))


def test_recovery_bounded_and_odd(inst256):
    grid, M, basis = inst256
    u = ac_recovery(grid, M, basis, [0.0], 0.025).samples
    assert np.abs(u).max() <= 1.0
    # y -> -y maps the field to minus itself about the unstable circle
    assert np.allclose(u[::-1][np.r_[-1, 0:grid.ny - 1]], -u, atol=1e-14)


def test_recovery_energy_and_flat(inst256):
    grid, M, basis = inst256
    H1 = M.total_length(grid)
    u = ac_recovery(grid, M, basis, [0.0], 0.025)
    E = energy_ac(u, grid).total
    assert 0 < E - H1 < 0.05
    F = flat_distance_codim1(jacobian_ac(u, grid), boundary_density(grid, M))
    assert F < 0.03 * H1


def test_recovery_continuous_in_w(inst64):
    grid, M, basis = inst64
    a = ac_recovery(grid, M, basis, [0.3 * basis.wbar], 0.03).samples
    b = ac_recovery(grid, M, basis, [0.3 * basis.wbar + 1e-7], 0.03).samples
    assert np.abs(a - b).max() < 1e-4


def test_large_eps_warns(inst64):
    grid, M, basis = inst64
    with pytest.warns(RuntimeWarning):
        ac_recovery(grid, M, basis, [0.0], 0.05)


def test_overlapping_tubes_fault(inst64):
    grid, M, _ = inst64
    with pytest.raises(GeometryError):
        layered_field(grid, M, [0.0, 0.15], 0.02)


def test_w_requires_unstable_mode(inst64):
    grid, M, _ = inst64
    with pytest.raises(ValueError):
        ac_recovery(grid, M, None, [0.01], 0.03)


def test_gl_ansatz():
    disk = PlanarDisk(1.0, 100)
    u = gl_vortex_ansatz(disk, 0.05).samples
    mod = np.hypot(u[0], u[1])
    assert mod.max() <= 1.0 + 1e-15
    assert np.allclose(mod[disk.domain & (disk.R >= 0.05)], 1.0)
    assert np.all(u[:, ~disk.domain] == 0)
    with pytest.raises(ValueError):
        gl_vortex_ansatz(disk, 0.3)
