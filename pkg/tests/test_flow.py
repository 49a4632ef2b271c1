import numpy as np
import pytest

from concset.energy import Field, PlanarDisk, energy_gl
from concset.flow import (
    FlowConfig,
    FlowError,
    FlowState,
    Line,
    criticality_residual,
    dissipation_identity_check,
    domain_tau,
    extract_near_critical,
    reference_step_1d,
    run_flow,
    step,
)
from concset.geometry import ConformalFactor, PeriodicGrid
from concset.recovery import gl_vortex_ansatz


def test_line_step_matches_numpy_reference(rng):
    line = Line(8)
    u = rng.uniform(-1, 1, 8)
    tau = 0.4 * domain_tau(line)
    st = step(FlowState(Field("AC", u, 0.2)), FlowConfig(T=1.0), line, tau=tau)
    assert np.allclose(st.field.samples, reference_step_1d(u, line.h, 0.2, tau), rtol=0, atol=1e-14)


def test_x_constant_data_reduces_to_weighted_line(rng):
    grid = PeriodicGrid(8, 16, ConformalFactor(0.5))
    col = rng.uniform(-1, 1, grid.ny)
    u = np.repeat(col[:, None], grid.nx, axis=1)
    tau = 0.4 * domain_tau(grid)
    st = step(FlowState(Field("AC", u, 0.2)), FlowConfig(T=1.0), grid, tau=tau)
    ref = reference_step_1d(col, grid.hy, 0.2, tau, inv_conformal=grid.inv_conformal)
    assert np.allclose(st.field.samples, ref[:, None], rtol=0, atol=1e-13)


def test_energy_is_lyapunov_and_ledger_closes(rng):
    grid = PeriodicGrid(32, 32, ConformalFactor(0.5))
    u = Field("AC", rng.uniform(-1, 1, grid.shape), 0.1)
    res = run_flow(u, grid, FlowConfig(T=0.01, trace_every=1))
    E = np.array([r[3] for r in res.trace])
    assert np.all(np.diff(E) <= 1e-12 * abs(E[0]))
    assert res.state.t == 0.01


def test_ledger_closes_for_smooth_data():
    grid = PeriodicGrid(64, 64, ConformalFactor(0.5))
    X, Y = np.meshgrid(grid.x, grid.y)
    u = Field("AC", 0.5 * np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y), 0.1)
    res = run_flow(u, grid, FlowConfig(T=0.02))
    rep = dissipation_identity_check(res.trace)
    assert rep.ok, rep


def test_ledger_residual_scales_with_tau():
    grid = PeriodicGrid(32, 32, ConformalFactor(0.5))
    X, Y = np.meshgrid(grid.x, grid.y)
    u = Field("AC", 0.5 * np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y), 0.1)
    r = [dissipation_identity_check(run_flow(u, grid, FlowConfig(T=0.005, sigma=s)).trace).relative
         for s in (0.4, 0.2)]
    assert r[1] / r[0] == pytest.approx(0.5, abs=0.15)


def test_odd_symmetry_preserved(inst64):
    grid, M, basis = inst64
    from concset.recovery import ac_recovery

    u = ac_recovery(grid, M, basis, [0.0], 0.03)
    res = run_flow(u, grid, FlowConfig(T=0.002))
    s = res.state.field.samples
    mirror = s[::-1][np.r_[-1, 0:grid.ny - 1]]
    assert np.abs(mirror + s).max() < 1e-12


def test_criticality_extraction(rng):
    line = Line(64)
    x = line.x
    u = Field("AC", np.tanh((0.25 - np.abs(x - 0.5)) / (np.sqrt(2) * 0.05)) + 0.1 * rng.normal(size=64), 0.05)
    res = run_flow(u, line, FlowConfig(T=0.02, snapshot_every=50))
    t, s, r = extract_near_critical(res, u, line)
    assert r < criticality_residual(res.snapshots[0][2], u, line)


def test_gl_flow_decreases_energy():
    disk = PlanarDisk(1.0, 40)
    u = gl_vortex_ansatz(disk, 0.2)
    res = run_flow(u, disk, FlowConfig(T=0.002))
    assert energy_gl(res.state.field, disk).total <= energy_gl(u, disk).total
    fixed = disk.domain & ~disk.free
    assert np.array_equal(res.state.field.samples[:, fixed], u.samples[:, fixed])


def test_config_validation():
    with pytest.raises(FlowError):
        FlowConfig(T=-1.0)
    with pytest.raises(FlowError):
        FlowConfig(T=1.0, sigma=1.5)
    with pytest.raises(FlowError):
        run_flow(Field("GL", np.zeros((2, 8, 8)), 0.1), PeriodicGrid(8, 8), FlowConfig(T=0.1))
