"""Min-max driver: flow the w-family, find the root of P(J(u_T)), verify the trajectory."""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .currents import boundary_density, flat_distance_codim1, jacobian_ac, projection_P
from .energy import Field, energy_ac, energy_ac_1d
from .flow import (
    FlowConfig,
    FlowResult,
    Line,
    criticality_residual,
    dissipation_identity_check,
    domain_tau,
    extract_near_critical,
    run_flow,
)
from .geometry import (
    BaseSubmanifold,
    ConformalFactor,
    PeriodicGrid,
    signed_distance_field,
    smoothstep5,
)
from .io import ConfigError, write_snapshot, write_trace
from .recovery import ac_recovery
from .spectrum import SpectralBasis, spectral_basis

log = logging.getLogger(__name__)


class MinmaxError(RuntimeError):
    pass


class DegreeError(MinmaxError):
    """f(-wbar, T) and f(wbar, T) have the same sign."""


class InterfaceError(ValueError):
    pass


def _floats(s: str) -> tuple:
    return tuple(float(v) for v in s.replace(",", " ").split())


def _ints(s: str) -> tuple:
    return tuple(int(v) for v in s.replace(",", " ").split())


def _opt_float(s: str):
    return None if s.strip().lower() in ("", "none", "auto") else float(s)


@dataclass(frozen=True)
class RunConfig:
    nx: int = 256
    ny: int = 256
    a: float = 0.5
    mode: int = 1
    components: tuple = (0.0, 0.5)
    orientations: tuple = (1, -1)
    rho0: float = 0.15
    eps: float = 0.05
    wbar: float | None = None
    lam: float | None = None
    delta1: float | None = None
    T: float = 0.5
    tol: float = 1e-3
    trace_every: int = 50
    flat_every: int = 20000
    snapshot_every: int = 0
    sigma: float = 0.3
    output_dir: str | None = None
    flat_fraction: float = 0.1
    energy_tol: float = 0.15
    root_fraction: float = 0.2
    stable_fraction: float = 0.02

    KEYS = {
        "grid.nx": ("nx", int),
        "grid.ny": ("ny", int),
        "metric.a": ("a", float),
        "metric.mode": ("mode", int),
        "manifold.components": ("components", _floats),
        "manifold.orientations": ("orientations", _ints),
        "manifold.rho0": ("rho0", float),
        "eps": ("eps", float),
        "wbar": ("wbar", _opt_float),
        "lambda": ("lam", _opt_float),
        "delta1": ("delta1", _opt_float),
        "T": ("T", float),
        "bisection.tol": ("tol", float),
        "trace.every": ("trace_every", int),
        "flat.every": ("flat_every", int),
        "snapshot.every": ("snapshot_every", int),
        "flow.sigma": ("sigma", float),
        "output.dir": ("output_dir", str),
        "verdict.flat_fraction": ("flat_fraction", float),
        "verdict.energy_tol": ("energy_tol", float),
        "verdict.root_fraction": ("root_fraction", float),
        "verdict.stable_fraction": ("stable_fraction", float),
    }

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError("bisection tolerance must be positive")
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        if self.trace_every < 1 or self.flat_every < 1 or self.snapshot_every < 0:
            raise ConfigError("cadences must be positive")

    @classmethod
    def from_mapping(cls, kv: dict) -> "RunConfig":
        args = {}
        for k, v in kv.items():
            if k not in cls.KEYS:
                raise ConfigError(f"unknown key {k!r}")
            name, conv = cls.KEYS[k]
            try:
                args[name] = conv(v)
            except ValueError as e:
                raise ConfigError(f"bad value for {k}: {v!r}") from e
        return cls(**args)

    def to_mapping(self) -> dict:
        out = {}
        for k, (name, _) in self.KEYS.items():
            v = getattr(self, name)
            if v is None:
                continue
            out[k] = " ".join(str(x) for x in v) if isinstance(v, tuple) else str(v)
        return out


@dataclass
class Probe:
    w: float
    t_end: float
    t_eff: float
    f: np.ndarray
    initial: Field
    flow: FlowResult


@dataclass
class RootResult:
    w: float
    f: float
    probes: list  # (w, f) in evaluation order
    energy_change: float  # |E(u_0) - E(u_T)| at w*
    in_half_ball: bool


@dataclass
class RunReport:
    config: RunConfig
    H1: float
    root: RootResult
    max_flat: float
    max_energy_dev: float
    flat0: float
    t_critical: float
    residual_critical: float
    residual_initial: float
    dissipation: object
    samples: list  # rows (step, t, E, F, P, Exc, Dis, residual)
    verdicts: dict = field(default_factory=dict)

    SAMPLE_COLUMNS = ("step", "t", "E", "flat", "P", "Exc", "Dis", "residual")

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())


def chi_time(w: np.ndarray, wbar: float) -> float:
    """1 on the half ball, 0 on its boundary sphere, quintic bridge in between."""
    if wbar == 0:
        return 1.0
    r = float(np.linalg.norm(w)) / wbar
    return float(1.0 - smoothstep5((r - 0.5) / 0.5))


class Experiment:
    """Grid, base manifold and spectral data for one RunConfig, plus cached probe flows."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.grid = PeriodicGrid(config.nx, config.ny, ConformalFactor(config.a, config.mode))
        self.M = BaseSubmanifold(tuple(config.components), tuple(config.orientations), config.rho0)
        self.basis: SpectralBasis = spectral_basis(self.grid, self.M, lam=config.lam, wbar=config.wbar)
        if self.basis.ell > 1:
            raise MinmaxError(f"Morse index {self.basis.ell} >= 2 is not implemented (degree needs l = 1)")
        self.H1 = self.M.total_length(self.grid)
        self.delta1 = 0.1 * self.H1 if config.delta1 is None else config.delta1
        self.reference = boundary_density(self.grid, self.M)
        self._probes: dict = {}

    @property
    def wbar(self) -> float:
        return self.basis.wbar

    def flat_to_M(self, u: Field) -> float:
        return flat_distance_codim1(jacobian_ac(u, self.grid), self.reference)

    def P(self, u: Field) -> np.ndarray:
        return projection_P(jacobian_ac(u, self.grid), self.basis, self.grid, self.M)

    def initial(self, w) -> Field:
        return ac_recovery(self.grid, self.M, self.basis, np.atleast_1d(w)[: self.basis.ell], self.config.eps)

    def probe(self, w: float, t_end: float) -> Probe:
        """Flow u_0^{eps,w} for time chi(w) t_end (deterministic, so cached)."""
        key = (float(w), float(t_end))
        if key in self._probes:
            return self._probes[key]
        c = self.config
        wv = np.atleast_1d(float(w))[: self.basis.ell]
        u0 = self.initial(wv)
        t_eff = chi_time(wv, self.wbar) * t_end
        fc = FlowConfig(T=t_eff, sigma=c.sigma, trace_every=c.trace_every, snapshot_every=c.flat_every)
        res = run_flow(u0, self.grid, fc)
        f = self.P(res.state.field)
        log.info("probe w=%.6g t=%.4g f=%s", w, t_eff, f)
        p = Probe(float(w), float(t_end), t_eff, f, u0, res)
        self._probes[key] = p
        return p


@functools.lru_cache(maxsize=8)
def experiment(config: RunConfig) -> Experiment:
    return Experiment(config)


def evaluate_f(w, t_end: float, config: RunConfig) -> np.ndarray:
    """f(w, t) = P(J(u^{eps,w}_{chi(w) t}))."""
    ex = experiment(config)
    w = float(np.atleast_1d(w)[0]) if ex.basis.ell else 0.0
    if abs(w) > ex.wbar * (1 + 1e-12):
        raise MinmaxError(f"|w|={abs(w):.4g} exceeds wbar={ex.wbar:.4g}")
    return ex.probe(w, t_end).f


def find_root_w(config: RunConfig, t_end: float | None = None, max_probes: int = 60) -> RootResult:
    """Bisection on [-wbar, wbar] for f(w, T) = 0 after checking the endpoint sign change."""
    ex = experiment(config)
    T = config.T if t_end is None else t_end
    if ex.basis.ell == 0:
        p = ex.probe(0.0, T)
        return RootResult(0.0, 0.0, [], _energy_change(ex, p), True)
    lo, hi = -ex.wbar, ex.wbar
    flo = float(evaluate_f(lo, T, config)[0])
    fhi = float(evaluate_f(hi, T, config)[0])
    probes = [(lo, flo), (hi, fhi)]
    if not flo < 0 < fhi and not fhi < 0 < flo:
        raise DegreeError(f"degree-1 hypothesis failed at this eps/T: f(-wbar)={flo:.4g}, f(wbar)={fhi:.4g}")
    w, fw = (lo, flo) if abs(flo) <= abs(fhi) else (hi, fhi)
    for _ in range(max_probes):
        if abs(fw) <= config.tol:
            break
        mid = 0.5 * (lo + hi)
        fm = float(evaluate_f(mid, T, config)[0])
        probes.append((mid, fm))
        w, fw = mid, fm
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    else:
        raise MinmaxError(f"bisection did not reach |f| <= {config.tol} in {max_probes} probes")
    p = ex.probe(w, T)
    return RootResult(w, fw, probes, _energy_change(ex, p), abs(w) <= 0.5 * ex.wbar)


def _energy_change(ex: Experiment, p: Probe) -> float:
    tr = p.flow.trace
    return abs(tr[0][2] - tr[-1][2])


def excess_displacement(u, grid: PeriodicGrid, M: BaseSubmanifold):
    """(Exc, Dis) of the zero level set of u, extracted by marching squares.

    Exc^2 = sum w sin^2(theta), Dis^2 = sum w d_M(mid)^2, with w the g-length
    of each segment and theta its angle to the horizontal (angles are
    conformally invariant).
    """
    s = u.samples if isinstance(u, Field) else np.asarray(u)
    segs = zero_level_segments(s, grid)
    if len(segs) == 0:
        raise InterfaceError("no interface: u has no zero crossings")
    p, q = segs[:, 0], segs[:, 1]
    d = q - p
    ln = np.hypot(d[:, 0], d[:, 1])
    ymid = np.mod(0.5 * (p[:, 1] + q[:, 1]), grid.Ly)
    wgt = np.exp(grid.metric(ymid)) * ln
    keep = ln > 0
    sin2 = np.where(keep, d[:, 1] ** 2 / np.where(keep, ln, 1.0) ** 2, 0.0)
    dist, _, _ = signed_distance_field(grid, M, ymid)
    return float(np.sqrt((wgt * sin2).sum())), float(np.sqrt((wgt * dist**2).sum()))


def zero_level_segments(u: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Segments (k, 2, 2) of {u = 0} on the periodic node grid; nodes with u >= 0 count as positive."""
    v00 = u
    v10 = np.roll(u, -1, axis=1)
    v01 = np.roll(u, -1, axis=0)
    v11 = np.roll(v10, -1, axis=0)
    ny, nx = u.shape
    J, I = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    X0, Y0 = I * grid.hx, J * grid.hy
    hx, hy = grid.hx, grid.hy

    def cross(a, b):
        with np.errstate(invalid="ignore", divide="ignore"):
            return a / (a - b)

    pos = [v >= 0 for v in (v00, v10, v11, v01)]
    # edge points: bottom, right, top, left
    e_has = [pos[0] != pos[1], pos[1] != pos[2], pos[3] != pos[2], pos[0] != pos[3]]
    e_pt = [
        (X0 + cross(v00, v10) * hx, Y0),
        (X0 + hx, Y0 + cross(v10, v11) * hy),
        (X0 + cross(v01, v11) * hx, Y0 + hy),
        (X0, Y0 + cross(v00, v01) * hy),
    ]
    n = sum(e.astype(int) for e in e_has)
    segs = []
    two = n == 2
    if two.any():
        pts = []
        for e, (x, y) in zip(e_has, e_pt):
            pts.append((e & two, x, y))
        first = np.full(u.shape, -1)
        second = np.full(u.shape, -1)
        for k, (m, _, _) in enumerate(pts):
            second = np.where(m & (first >= 0) & (second < 0), k, second)
            first = np.where(m & (first < 0), k, first)
        jj, ii = np.nonzero(two)
        for a_idx, b_idx in ((first, second),):
            A = np.array([[e_pt[k][0][j, i], e_pt[k][1][j, i]] for k, j, i in zip(a_idx[jj, ii], jj, ii)])
            B = np.array([[e_pt[k][0][j, i], e_pt[k][1][j, i]] for k, j, i in zip(b_idx[jj, ii], jj, ii)])
            segs.append(np.stack([A, B], axis=1))
    for j, i in zip(*np.nonzero(n == 4)):
        c = 0.25 * (v00[j, i] + v10[j, i] + v11[j, i] + v01[j, i])
        P = [np.array([e_pt[k][0][j, i], e_pt[k][1][j, i]]) for k in range(4)]
        if (c >= 0) == pos[0][j, i]:
            pairs = ((0, 1), (3, 2))  # isolate corners 10 and 01
        else:
            pairs = ((0, 3), (1, 2))  # isolate corners 00 and 11
        segs.append(np.array([[P[a], P[b]] for a, b in pairs]))
    if not segs:
        return np.zeros((0, 2, 2))
    return np.concatenate(segs, axis=0)


def verify_trajectory(w_star, config: RunConfig, root: RootResult | None = None) -> RunReport:
    """Re-run (or reuse) the flow at w*, sample diagnostics at the flat cadence, and grade it."""
    ex = experiment(config)
    w = float(np.atleast_1d(w_star)[0]) if ex.basis.ell else 0.0
    p = ex.probe(w, config.T)
    g, M = ex.grid, ex.M
    eps = config.eps
    samples = []
    for step_no, t, s in p.flow.snapshots:
        u = Field("AC", s, eps)
        E = energy_ac(u, g).total
        F = ex.flat_to_M(u)
        P = ex.P(u)
        try:
            exc, dis = excess_displacement(u, g, M)
        except InterfaceError:
            exc = dis = math.nan
        res = criticality_residual(s, u, g)
        samples.append((step_no, t, E, F, float(P[0]) if len(P) else 0.0, exc, dis, res))
    Es = np.array([row[2] for row in p.flow.trace] + [row[2] for row in samples])
    max_dev = float(np.max(np.abs(Es - ex.H1)))
    Fs = np.array([row[3] for row in samples])
    resid = np.array([row[7] for row in samples])
    k = int(np.argmin(resid))
    diss = dissipation_identity_check(p.flow.trace)
    if root is None:
        f0 = float(p.f[0]) if len(p.f) else 0.0
        root = RootResult(w, f0, [(w, f0)], _energy_change(ex, p), abs(w) <= 0.5 * ex.wbar)
    rep = RunReport(config, ex.H1, root, float(Fs.max()), max_dev, float(Fs[0]), float(samples[k][1]),
                    float(resid[k]), float(resid[0]), diss, samples)
    if ex.basis.ell == 0:
        # stable M: the flat distance may not grow past its start by more than a fraction of H1
        rep.verdicts = {
            "flat_stable": rep.max_flat <= rep.flat0 + config.stable_fraction * ex.H1,
            "dissipation": diss.ok,
        }
    else:
        rep.verdicts = {
            "root": abs(root.f) <= config.tol and abs(root.w) <= config.root_fraction * ex.wbar + 1e-300,
            "flat": rep.max_flat <= config.flat_fraction * ex.H1,
            "energy": rep.max_energy_dev <= config.energy_tol,
            "dissipation": diss.ok,
        }
    if config.output_dir:
        _write_outputs(rep, p, config)
    return rep


def _write_outputs(rep: RunReport, p: Probe, config: RunConfig) -> None:
    out = Path(config.output_dir)
    write_trace(out / "trace.tsv", FlowResult.TRACE_COLUMNS, p.flow.trace)
    write_trace(out / "diagnostics.tsv", RunReport.SAMPLE_COLUMNS, rep.samples)
    write_trace(out / "probes.tsv", ("w", "f"), rep.root.probes)
    snaps = p.flow.snapshots
    for n, (step_no, t, s) in enumerate(snaps):
        last = n == len(snaps) - 1
        if last or (config.snapshot_every and step_no % config.snapshot_every == 0):
            write_snapshot(out / f"snap_{step_no:09d}.bin", Field("AC", s, config.eps), t)


def run_minmax(config: RunConfig) -> RunReport:
    root = find_root_w(config)
    return verify_trajectory(root.w, config, root)


# -- two-transition experiment on a circle ------------------------------------

@dataclass
class AntipodalReport:
    d0: float
    n: int
    eps: float
    extracted_distance: float
    extracted_time: float
    extracted_residual: float
    initial_residual: float
    critical_distance: float | None
    critical_energy: float | None
    critical_residual: float | None
    newton_history: list
    collapsed: bool
    ok: bool


def two_kink_data(line: Line, d0: float, eps: float) -> np.ndarray:
    """Even data (about x = 0) with +1 on |x| < d0/2 and tanh transitions at x = +-d0/2."""
    k = np.arange(line.n)
    dist = np.minimum(k, line.n - k) * line.h
    return np.tanh((0.5 * d0 - dist) / (math.sqrt(2.0) * eps))


def transitions(u: np.ndarray, line: Line) -> np.ndarray:
    """Zero crossings (linear interpolation) of a periodic 1-D sample array."""
    v = np.roll(u, -1)
    idx = np.nonzero((u >= 0) != (v >= 0))[0]
    return (idx + u[idx] / (u[idx] - v[idx])) * line.h


def _pair_distance(xs: np.ndarray, L: float) -> float:
    if len(xs) != 2:
        return math.nan
    d = abs(xs[1] - xs[0]) % L
    return min(d, L - d)


def energy_1d(u: np.ndarray, line: Line, eps: float) -> float:
    return energy_ac_1d(u, line.h, eps, weights=line.node_weights())


def _half_residual(v: np.ndarray, h2: float, eps: float) -> np.ndarray:
    """u'' + (1 - u^2) u / eps^2 on nodes 0..m of a field even about x = 0 (and about x = 1/2)."""
    w = np.concatenate([v[1:2], v, v[-2:-1]])
    return (w[2:] + w[:-2] - 2 * v) / h2 + (1 - v * v) * v / eps**2


def _pinned_solve(line: Line, eps: float, k: int, guess: np.ndarray, tol: float = 1e-10, max_iter: int = 50):
    """Even critical point with its transition pinned at node k.

    Solves u'' + (1 - u^2) u / eps^2 = c psi, u_k = 0 for (u, c), where psi is
    the kink translation profile centred at node k.  The multiplier c measures
    the force on the transition; c = 0 means u is a genuine critical point.
    Bordered Newton: the constraint removes the exponentially soft separation mode.
    """
    m = line.n // 2
    h2 = line.h**2
    x = np.arange(m + 1) * line.h
    psi = 1 / np.cosh((x - k * line.h) / (math.sqrt(2) * eps)) ** 2
    v = guess.copy()
    v[k] = 0.0
    c = 0.0
    ek = np.zeros(m + 1)
    ek[k] = 1.0

    def F(v, c):
        return np.concatenate([_half_residual(v, h2, eps) - c * psi, [v[k]]])

    r = F(v, c)
    nrm = float(np.abs(r).max())
    for _ in range(max_iter):
        if nrm <= tol / eps**2:
            return v, c, nrm
        main = -2 / h2 + (1 - 3 * v * v) / eps**2
        lower = np.full(m, 1 / h2)
        upper = np.full(m, 1 / h2)
        upper[0] = 2 / h2
        lower[-1] = 2 / h2
        A = sp.diags([lower, main, upper], [-1, 0, 1], format="csc")
        B = sp.bmat([[A, sp.csc_matrix(-psi[:, None])], [sp.csc_matrix(ek[None, :]), None]], format="csc")
        d = spsolve(B, -r)
        t = 1.0
        while t > 1e-10:
            vn, cn = v + t * d[:-1], c + t * d[-1]
            rn = F(vn, cn)
            if np.abs(rn).max() < (1 - 1e-4 * t) * nrm:
                break
            t *= 0.5
        else:
            raise MinmaxError(f"pinned Newton stagnated at node {k} (residual {nrm:.3e})")
        v, c, r = vn, cn, rn
        nrm = float(np.abs(r).max())
    raise MinmaxError(f"pinned Newton did not converge at node {k} (residual {nrm:.3e})")


def critical_two_kink(line: Line, eps: float, u_start: np.ndarray):
    """Locate the even two-transition critical point near u_start.

    The pinned force c(k) is odd under k -> m - k (d -> 1 - d), so the
    transition position is bracketed between the start and its mirror and
    bisected on nodes.  Returns (u, history of (k, c)).
    """
    n, m = line.n, line.n // 2
    if n % 4:
        raise MinmaxError("two-kink search needs n divisible by 4")
    xs = transitions(u_start, line)
    xs = xs[xs <= 0.5 + 1e-12]
    if len(xs) != 1:
        raise MinmaxError("start state does not have one transition in [0, 1/2]")
    k0 = int(round(xs[0] / line.h))
    k1 = m - k0
    sols = {}

    def solve(k, guess=None):
        if k not in sols:
            g = two_kink_data(line, 2 * k * line.h, eps)[: m + 1] if guess is None else guess
            sols[k] = _pinned_solve(line, eps, k, g)
        return sols[k]

    lo, hi = sorted((k0, k1))
    clo = solve(k0, u_start[: m + 1])[1] if lo == k0 else solve(lo)[1]
    chi = solve(hi)[1] if lo == k0 else solve(k0, u_start[: m + 1])[1]
    hist = [(lo, clo), (hi, chi)]
    if lo != hi and (clo > 0) == (chi > 0) and clo != 0 and chi != 0:
        raise MinmaxError("transition force does not change sign between the start and its mirror")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        cm = solve(mid)[1]
        hist.append((mid, cm))
        if (cm > 0) == (clo > 0):
            lo, clo = mid, cm
        else:
            hi, chi = mid, cm
    k = lo if abs(clo) <= abs(chi) else hi
    v = sols[k][0]
    return np.concatenate([v, v[-2:0:-1]]), hist


def antipodal_experiment(n1d: int = 1024, eps: float = 0.03, d0: float = 0.4, T: float = 0.2,
                         sigma: float = 0.4, snapshots: int = 20, polish: bool = True) -> AntipodalReport:
    """1-D periodic flow from even two-transition data and near-critical extraction.

    The separation mode relaxes on a time scale ~ exp(sqrt2 d / eps), far
    beyond any affordable T, so with polish the nearby critical point is then
    located by a pinned Newton search over the transition position.
    """
    if eps > 0.05:
        raise MinmaxError("antipodal experiment expects eps <= 0.05")
    line = Line(n1d)
    u0 = Field("AC", two_kink_data(line, d0, eps), eps)
    every = max(1, int(T / (sigma * domain_tau(line)) / snapshots))
    res = run_flow(u0, line, FlowConfig(T=T, sigma=sigma, trace_every=every, snapshot_every=every))
    t_c, s_c, r_c = extract_near_critical(res, u0, line)
    r_init = criticality_residual(res.snapshots[0][2], u0, line)
    d_ext = _pair_distance(transitions(s_c, line), line.L)
    crit_d = crit_E = crit_r = None
    hist: list = []
    collapsed = energy_1d(s_c, line, eps) < 1.0
    if polish and not collapsed:
        uc, hist = critical_two_kink(line, eps, s_c)
        crit_E = energy_1d(uc, line, eps)
        crit_r = criticality_residual(uc, u0, line)
        crit_d = _pair_distance(transitions(uc, line), line.L)
        collapsed = crit_E < 1.0
    ok = (not collapsed) and crit_d is not None and abs(crit_d - 0.5) <= 2.0 / n1d
    return AntipodalReport(d0, n1d, eps, d_ext, t_c, r_c, r_init, crit_d, crit_E, crit_r, hist, collapsed, ok)
