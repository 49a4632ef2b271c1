"""Explicit Euler integration of the L2 gradient flow of the unnormalized energy.

Each accepted step records its dissipation sum |du/tau|^2 w tau, and the
unnormalized energy is monitored so that a step raising it is rejected and
retried with half the step size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np

from .energy import EnergyError, Field, PlanarDisk, ac_scale, el_residual, gl_scale, weighted_l2
from .geometry import PeriodicGrid


class FlowError(RuntimeError):
    pass


# -- kernels ---------------------------------------------------------------

@numba.njit(cache=True)
def _ac_step(u, out, inv_conf, wrow, hx, hy, eps, tau):
    ny, nx = u.shape
    cx = 1.0 / (hx * hx)
    cy = 1.0 / (hy * hy)
    ie2 = 1.0 / (eps * eps)
    diss = 0.0
    for j in range(ny):
        jp = j + 1 if j + 1 < ny else 0
        jm = j - 1 if j > 0 else ny - 1
        rowd = 0.0
        for i in range(nx):
            ip = i + 1 if i + 1 < nx else 0
            im = i - 1 if i > 0 else nx - 1
            c = u[j, i]
            lap = (u[j, ip] + u[j, im] - 2.0 * c) * cx + (u[jp, i] + u[jm, i] - 2.0 * c) * cy
            v = inv_conf[j] * lap + (1.0 - c * c) * c * ie2
            nv = c + tau * v
            out[j, i] = nv
            d = (nv - c) / tau
            rowd += d * d
        diss += rowd * wrow[j]
    return diss * tau


@numba.njit(cache=True)
def _ac_energy(u, wrow, hx, hy, eps):
    ny, nx = u.shape
    rx = hy / hx
    ry = hx / hy
    q = 1.0 / (4.0 * eps * eps)
    dsum = 0.0
    psum = 0.0
    for j in range(ny):
        jp = j + 1 if j + 1 < ny else 0
        rd = 0.0
        rp = 0.0
        for i in range(nx):
            ip = i + 1 if i + 1 < nx else 0
            c = u[j, i]
            a = u[j, ip] - c
            b = u[jp, i] - c
            rd += a * a * rx + b * b * ry
            m = 1.0 - c * c
            rp += m * m
        dsum += 0.5 * rd
        psum += rp * q * wrow[j]
    return dsum + psum


@numba.njit(cache=True)
def _ac_step_1d(u, out, inv_conf, h, eps, tau):
    n = u.shape[0]
    ch = 1.0 / (h * h)
    ie2 = 1.0 / (eps * eps)
    diss = 0.0
    for j in range(n):
        jp = j + 1 if j + 1 < n else 0
        jm = j - 1 if j > 0 else n - 1
        c = u[j]
        v = inv_conf[j] * (u[jp] + u[jm] - 2.0 * c) * ch + (1.0 - c * c) * c * ie2
        nv = c + tau * v
        out[j] = nv
        d = (nv - c) / tau
        diss += d * d / inv_conf[j]
    return diss * h * tau


@numba.njit(cache=True)
def _ac_energy_1d(u, inv_conf, h, eps):
    n = u.shape[0]
    q = 1.0 / (4.0 * eps * eps)
    s = 0.0
    for j in range(n):
        jp = j + 1 if j + 1 < n else 0
        a = u[jp] - u[j]
        m = 1.0 - u[j] * u[j]
        s += 0.5 * a * a / (h * h) + m * m * q / inv_conf[j]
    return s * h


@numba.njit(cache=True)
def _gl_step(u, out, free, h, eps, tau):
    _, ny, nx = u.shape
    ch = 1.0 / (h * h)
    ie2 = 1.0 / (eps * eps)
    diss = 0.0
    for j in range(ny):
        for i in range(nx):
            a = u[0, j, i]
            b = u[1, j, i]
            if not free[j, i]:
                out[0, j, i] = a
                out[1, j, i] = b
                continue
            m = (1.0 - a * a - b * b) * ie2
            la = (u[0, j, i + 1] + u[0, j, i - 1] - 2.0 * a) * ch + (u[0, j + 1, i] + u[0, j - 1, i] - 2.0 * a) * ch
            lb = (u[1, j, i + 1] + u[1, j, i - 1] - 2.0 * b) * ch + (u[1, j + 1, i] + u[1, j - 1, i] - 2.0 * b) * ch
            na = a + tau * (la + m * a)
            nb = b + tau * (lb + m * b)
            out[0, j, i] = na
            out[1, j, i] = nb
            da = (na - a) / tau
            db = (nb - b) / tau
            diss += da * da + db * db
    return diss * h * h * tau


@numba.njit(cache=True)
def _gl_energy(u, dom, h, eps):
    _, ny, nx = u.shape
    q = 1.0 / (4.0 * eps * eps)
    s = 0.0
    for j in range(ny):
        for i in range(nx):
            if not dom[j, i]:
                continue
            a = u[0, j, i]
            b = u[1, j, i]
            m = 1.0 - a * a - b * b
            s += m * m * q * h * h
            if i + 1 < nx and dom[j, i + 1]:
                s += 0.5 * ((u[0, j, i + 1] - a) ** 2 + (u[1, j, i + 1] - b) ** 2)
            if j + 1 < ny and dom[j + 1, i]:
                s += 0.5 * ((u[0, j + 1, i] - a) ** 2 + (u[1, j + 1, i] - b) ** 2)
    return s


# -- state and configuration ------------------------------------------------

@dataclass
class FlowConfig:
    T: float
    sigma: float = 0.3
    trace_every: int = 50
    snapshot_every: int | None = None  # accepted steps; None disables
    max_halvings: int = 20
    slack: float = 1e-10

    def __post_init__(self):
        if not self.T >= 0:
            raise FlowError("end time must be nonnegative")
        if not 0 < self.sigma <= 1:
            raise FlowError("CFL safety factor must lie in (0, 1]")


@dataclass
class FlowState:
    field: Field
    t: float = 0.0
    steps: int = 0
    last_dissipation: float = 0.0
    cumulative_dissipation: float = 0.0
    energy: float = float("nan")  # unnormalized


@dataclass
class FlowResult:
    state: FlowState
    trace: list  # rows (step, t, E, E_unnormalized, step dissipation, cumulative dissipation)
    snapshots: list  # (step, t, samples copy)
    tau: float
    rejections: int = 0

    TRACE_COLUMNS = ("step", "t", "E", "E_unnorm", "step_dissipation", "cumulative_dissipation")

    @property
    def energy_drop(self) -> float:
        return self.trace[0][3] - self.trace[-1][3]


class _Stepper:
    """Uniform interface over the torus, 1-D and disk kernels."""

    def __init__(self, field: Field, domain):
        self.eps = field.epsilon
        self.domain = domain
        if isinstance(domain, PeriodicGrid):
            if field.kind != "AC":
                raise FlowError("the torus flow is implemented for Allen-Cahn fields")
            self.kind = "ac2"
            self.inv = np.ascontiguousarray(domain.inv_conformal)
            self.wrow = np.ascontiguousarray(domain.row_weights)
            self.scale = ac_scale(self.eps)
            self.tau0 = domain_tau(domain)
        elif isinstance(domain, Line):
            self.kind = "ac1"
            self.inv = np.ascontiguousarray(domain.inv_conformal)
            self.scale = ac_scale(self.eps)
            self.tau0 = domain_tau(domain)
        elif isinstance(domain, PlanarDisk):
            if field.kind != "GL":
                raise FlowError("the disk flow is implemented for Ginzburg-Landau fields")
            self.kind = "gl"
            self.free = np.ascontiguousarray(domain.free)
            self.dom = np.ascontiguousarray(domain.domain)
            self.scale = gl_scale(self.eps)
            self.tau0 = domain_tau(domain)
        else:
            raise FlowError(f"unsupported domain {type(domain).__name__}")

    def energy(self, u) -> float:
        d = self.domain
        if self.kind == "ac2":
            return _ac_energy(u, self.wrow, d.hx, d.hy, self.eps)
        if self.kind == "ac1":
            return _ac_energy_1d(u, self.inv, d.h, self.eps)
        return _gl_energy(u, self.dom, d.h, self.eps)

    def step(self, u, out, tau) -> float:
        d = self.domain
        if self.kind == "ac2":
            return _ac_step(u, out, self.inv, self.wrow, d.hx, d.hy, self.eps, tau)
        if self.kind == "ac1":
            return _ac_step_1d(u, out, self.inv, d.h, self.eps, tau)
        return _gl_step(u, out, self.free, d.h, self.eps, tau)


@dataclass(frozen=True, eq=False)
class Line:
    """Periodic 1-D grid of n nodes on a circle of length L with optional conformal weights."""

    n: int
    L: float = 1.0
    phi: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 8:
            raise FlowError("line grid needs n >= 8")
        phi = np.zeros(self.n) if self.phi is None else np.asarray(self.phi, dtype=float)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "inv_conformal", np.exp(-2.0 * phi))

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    def node_weights(self) -> np.ndarray:
        return np.exp(2.0 * self.phi) * self.h


def domain_tau(domain) -> float:
    """Base explicit step for sigma = 1: h_min^2 exp(2 min phi) / 4 (2-D), / 2 on a line."""
    if isinstance(domain, PeriodicGrid):
        return min(domain.hx, domain.hy) ** 2 * math.exp(2.0 * float(domain.phi.min())) / 4.0
    if isinstance(domain, Line):
        return domain.h**2 * math.exp(2.0 * float(domain.phi.min())) / 2.0
    return domain.h**2 / 4.0


def stable_tau(domain, sigma: float) -> float:
    return sigma * domain_tau(domain)


def run_flow(field: Field, domain, config: FlowConfig,
             on_trace: Callable[[FlowState], None] | None = None) -> FlowResult:
    """Integrate to t = config.T; the last step is shortened to land on T exactly."""
    st = _Stepper(field, domain)
    u = np.ascontiguousarray(field.samples, dtype=float).copy()
    if not np.all(np.isfinite(u)):
        raise FlowError("non-finite initial data")
    out = np.empty_like(u)
    tau = config.sigma * st.tau0
    E = st.energy(u)
    state = FlowState(Field(field.kind, u, field.epsilon), 0.0, 0, 0.0, 0.0, E)
    trace = [(0, 0.0, st.scale * E, E, 0.0, 0.0)]
    snaps = [(0, 0.0, u.copy())] if config.snapshot_every else []
    if on_trace:
        on_trace(state)
    rejections = 0
    t = 0.0
    steps = 0
    cum = 0.0
    T = config.T
    while t < T * (1 - 1e-14):
        dt = min(tau, T - t)
        for k in range(config.max_halvings + 1):
            diss = st.step(u, out, dt)
            En = st.energy(out)
            if En <= E + config.slack * abs(E) + 1e-300:
                break
            rejections += 1
            dt *= 0.5
        else:
            raise FlowError(f"energy increase persists after {config.max_halvings} halvings at t={t:.6g}")
        u, out = out, u
        t = t + dt if t + dt < T else T
        steps += 1
        cum += diss
        E = En
        last = steps and (t >= T)
        if steps % config.trace_every == 0 or last:
            trace.append((steps, t, st.scale * E, E, diss, cum))
            state = FlowState(Field(field.kind, u, field.epsilon), t, steps, diss, cum, E)
            if on_trace:
                on_trace(state)
        if config.snapshot_every and (steps % config.snapshot_every == 0 or last):
            snaps.append((steps, t, u.copy()))
    state = FlowState(Field(field.kind, u.copy(), field.epsilon), t, steps,
                      trace[-1][4] if steps else 0.0, cum, E)
    return FlowResult(state, trace, snaps, config.sigma * st.tau0, rejections)


def step(state: FlowState, config: FlowConfig, domain, tau: float | None = None) -> FlowState:
    """One accepted forward-Euler step (with the same rejection policy as run_flow)."""
    st = _Stepper(state.field, domain)
    u = np.ascontiguousarray(state.field.samples, dtype=float)
    out = np.empty_like(u)
    E = st.energy(u)
    dt = config.sigma * st.tau0 if tau is None else tau
    for _ in range(config.max_halvings + 1):
        diss = st.step(u, out, dt)
        En = st.energy(out)
        if En <= E + config.slack * abs(E) + 1e-300:
            return FlowState(Field(state.field.kind, out, state.field.epsilon), state.t + dt, state.steps + 1,
                             diss, state.cumulative_dissipation + diss, En)
        dt *= 0.5
    raise FlowError(f"energy increase persists after {config.max_halvings} halvings")


def reference_step_1d(u: np.ndarray, h: float, eps: float, tau: float, inv_conformal=None) -> np.ndarray:
    """Plain numpy forward-Euler step for the 1-D periodic equation (test reference)."""
    inv = np.ones_like(u) if inv_conformal is None else inv_conformal
    lap = (np.roll(u, -1) + np.roll(u, 1) - 2.0 * u) / h**2
    return u + tau * (inv * lap + (1.0 - u * u) * u / eps**2)


@dataclass(frozen=True)
class DissipationReport:
    energy_drop: float
    dissipation: float
    residual: float
    relative: float
    tolerance: float
    ok: bool


def dissipation_identity_check(trace, tol_relative: float = 1e-3) -> DissipationReport:
    """Compare cumulative dissipation with the drop in unnormalized energy."""
    if len(trace) < 2:
        return DissipationReport(0.0, 0.0, 0.0, 0.0, tol_relative, True)
    drop = trace[0][3] - trace[-1][3]
    diss = trace[-1][5]
    res = abs(diss - drop)
    rel = res / abs(drop) if drop != 0 else (0.0 if res == 0 else math.inf)
    return DissipationReport(drop, diss, res, rel, tol_relative, rel <= tol_relative)


def criticality_residual(samples: np.ndarray, field: Field, domain) -> float:
    f = Field(field.kind, samples, field.epsilon)
    if isinstance(domain, Line):
        u = samples
        r = domain.inv_conformal * (np.roll(u, -1) + np.roll(u, 1) - 2 * u) / domain.h**2 + (1 - u * u) * u / field.epsilon**2
        return float(np.sqrt((r * r * domain.node_weights()).sum()))
    return weighted_l2(el_residual(f, domain), domain)


def extract_near_critical(result: FlowResult, field: Field, domain):
    """Snapshot minimizing the weighted L2 Euler-Lagrange residual: (t, samples, residual)."""
    if len(result.snapshots) < 2:
        raise FlowError("need at least two snapshots")
    best = None
    for _, t, s in result.snapshots:
        r = criticality_residual(s, field, domain)
        if best is None or r < best[2]:
            best = (t, s, r)
    return best
