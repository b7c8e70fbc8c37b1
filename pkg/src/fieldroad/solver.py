"""Newton iteration, linear solves, the time loop and the single-cell ODE reference."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from . import diagnostics as dg
from .discretization import coupling_block, exchange_terms, jacobian, linear_part, residual
from .mesh import Mesh, State, build_mesh, project_initial, total_mass, weighted_mass
from .model import Geometry, InitialData, Params, initial_mass, initial_weighted_mass

log = logging.getLogger(__name__)

NEGATIVE_THRESHOLD = -1e-10
MAX_RETRIES = 10


class StepFailure(RuntimeError):
    pass


class LinearSolveError(StepFailure):
    pass


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 25
    damping: bool = True
    max_halvings: int = 10

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"Newton tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class StepReport:
    newton_iters: int = 0
    final_residual: float = np.inf
    history: list[float] = field(default_factory=list)
    linear_residuals: list[float] = field(default_factory=list)
    negative: bool = False
    min_value: float = 0.0
    rounding_limited: bool = False


LINEAR_RTOL = 1e-10
STAGNATION_EPS = 64 * np.finfo(float).eps


def solve_linear(J, rhs: np.ndarray) -> np.ndarray:
    """Sparse direct solve with an a-posteriori residual check."""
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    if J.shape != (n, n):
        raise LinearSolveError(f"matrix shape {J.shape} does not match right-hand side of length {n}")
    bnorm = np.max(np.abs(rhs)) if n else 0.0
    if bnorm == 0:
        return np.zeros_like(rhs)
    try:
        lu = spla.splu(sparse.csc_matrix(J))
        x = lu.solve(rhs)
    except RuntimeError as exc:  # singular factor
        raise LinearSolveError(str(exc)) from exc
    res = np.max(np.abs(J @ x - rhs))
    if not np.all(np.isfinite(x)) or res > LINEAR_RTOL * bnorm:
        # one step of iterative refinement before giving up
        x = x + lu.solve(rhs - J @ x)
        res = np.max(np.abs(J @ x - rhs))
        if not np.all(np.isfinite(x)) or res > LINEAR_RTOL * bnorm:
            raise LinearSolveError(f"linear solve residual {res:.3e} exceeds {LINEAR_RTOL:g} * {bnorm:.3e}")
    return x


class CoupledSolver:
    """Solves ``(A + P C P^T) x = b`` where ``A`` is the constant part of the
    Jacobian and ``C`` the small coupling block.

    ``A`` is factored once; each solve costs one sparse back-substitution and
    a dense ``2 nx`` system (capacitance form of the Woodbury identity).
    """

    def __init__(self, mesh: Mesh, params: Params, dt: float):
        self.mesh, self.params, self.dt = mesh, params, dt
        self.A = linear_part(mesh, params.d, params.D, float(dt))
        self.lu = spla.splu(sparse.csc_matrix(self.A))
        self.idx = np.concatenate([np.arange(mesh.nx) * mesh.ny, mesh.n_field + np.arange(mesh.nx)])
        E = np.zeros((mesh.n_unknowns, self.idx.size))
        E[self.idx, np.arange(self.idx.size)] = 1.0
        self.W = self.lu.solve(E)  # A^{-1} P
        self.G = self.W[self.idx, :]  # P^T A^{-1} P

    def matches(self, mesh: Mesh, params: Params, dt: float) -> bool:
        return (self.mesh, self.params.d, self.params.D, self.dt) == (mesh, params.d, params.D, dt)

    def solve(self, state: State, rhs: np.ndarray) -> np.ndarray:
        idx, C = coupling_block(state, self.mesh, self.params)
        bnorm = np.max(np.abs(rhs))
        if bnorm == 0:
            return np.zeros_like(rhs)
        z = self.lu.solve(rhs)
        nx = self.mesh.nx
        k = np.arange(nx)
        G1, G2 = self.G[:nx], self.G[nx:]
        CG = np.vstack([
            C[k, k][:, None] * G1 + C[k, nx + k][:, None] * G2,
            C[nx + k, k][:, None] * G1 + C[nx + k, nx + k][:, None] * G2,
        ])
        M = np.eye(idx.size) + CG
        try:
            y = np.linalg.solve(M, C @ z[idx])
        except np.linalg.LinAlgError:
            return solve_linear(jacobian(state, self.dt, self.mesh, self.params), rhs)
        x = z - self.W @ y
        J = jacobian(state, self.dt, self.mesh, self.params)
        if not np.all(np.isfinite(x)) or np.max(np.abs(J @ x - rhs)) > LINEAR_RTOL * bnorm:
            return solve_linear(J, rhs)
        return x


def scaled_norm(R: np.ndarray, x: np.ndarray) -> float:
    return float(np.max(np.abs(R)) / max(1.0, np.max(np.abs(x))))


def newton_step(old: State, dt: float, mesh: Mesh, params: Params, cfg: NewtonConfig = NewtonConfig(),
                linear: CoupledSolver | None = None):
    """One backward-Euler step; returns ``(new_state, StepReport)`` or raises :class:`StepFailure`.

    ``linear`` optionally supplies a prefactored :class:`CoupledSolver` for
    this ``(mesh, params, dt)``; otherwise each iteration factors the full
    Jacobian.
    """
    if not (np.all(np.isfinite(old.V)) and np.all(np.isfinite(old.U))):
        raise StepFailure("old state is not finite")
    x_old = old.pack()
    x = x_old.copy()
    report = StepReport()

    def res(xv):
        return residual(State.unpack(xv, mesh), old, dt, mesh, params)

    R = res(x)
    norm = scaled_norm(R, x)
    report.history.append(norm)
    while norm > cfg.tol:
        if report.newton_iters >= cfg.max_iter:
            raise StepFailure(f"Newton did not converge in {cfg.max_iter} iterations (residual {norm:.3e})")
        current = State.unpack(x, mesh)
        if linear is not None:
            delta = linear.solve(current, -R)
        else:
            delta = solve_linear(jacobian(current, dt, mesh, params), -R)
        if np.max(np.abs(delta)) <= STAGNATION_EPS * max(1.0, np.max(np.abs(x))):
            # The residual carries a 1/dt factor, so for small dt its rounding
            # floor can sit above tol; a full Newton update below rounding
            # level means no further digits are available.
            report.rounding_limited = True
            break
        step = 1.0
        x_try = x + delta
        R_try = res(x_try)
        norm_try = scaled_norm(R_try, x_try)
        if cfg.damping:
            halvings = 0
            while not norm_try < norm and halvings < cfg.max_halvings:
                step *= 0.5
                halvings += 1
                x_try = x + step * delta
                R_try = res(x_try)
                norm_try = scaled_norm(R_try, x_try)
        if not np.isfinite(norm_try):
            raise StepFailure("Newton iterate became non-finite")
        x, R, norm = x_try, R_try, norm_try
        report.newton_iters += 1
        report.history.append(norm)
    report.final_residual = norm
    new = State.unpack(x, mesh, old.t + dt)
    report.min_value = float(min(new.V.min(), new.U.min()))
    report.negative = report.min_value < NEGATIVE_THRESHOLD
    return new, report


def advance(old: State, dt: float, mesh: Mesh, params: Params, cfg: NewtonConfig, depth: int = 0,
            linear: CoupledSolver | None = None):
    """Step by ``dt``, splitting into halves on Newton failure (at most ``MAX_RETRIES`` levels).

    Returns ``(new_state, newton_iterations, halvings)``.
    """
    try:
        new, rep = newton_step(old, dt, mesh, params, cfg, linear if depth == 0 else None)
        return new, rep.newton_iters, 0
    except StepFailure as exc:
        if depth >= MAX_RETRIES:
            raise
        log.warning("step at t=%.6g with dt=%.3g failed (%s); halving", old.t, dt, exc)
        mid, it1, h1 = advance(old, dt / 2, mesh, params, cfg, depth + 1)
        new, it2, h2 = advance(mid, dt / 2, mesh, params, cfg, depth + 1)
        return new, it1 + it2, 1 + h1 + h2


def _record(state: State, eq: dg.Equilibrium, mesh: Mesh, params: Params, iters: int) -> dg.Record:
    clamped = State(state.t, np.maximum(state.V, 0.0), np.maximum(state.U, 0.0))
    lv, lu = dg.linf_distance(state, eq)
    return dg.Record(
        t=state.t,
        H=dg.entropy(clamped, eq, mesh, params),
        D=dg.dissipation(clamped, mesh, params),
        mass=total_mass(state, mesh),
        weighted_mass=weighted_mass(state, mesh, params.alpha, params.beta),
        linf_v=lv,
        linf_u=lu,
        lp_gap=dg.lp_gap(state, eq, mesh, params),
        newton_iters=iters,
    )


def simulate(
    geom: Geometry,
    params: Params,
    data: InitialData,
    nx: int,
    ny: int,
    dt: float,
    t_end: float,
    newton: NewtonConfig = NewtonConfig(),
    stride: int = 1,
    stop_ratio: float | None = None,
    keep_states: bool = False,
    on_record=None,
) -> dg.RunSeries:
    """Integrate from the projected initial data up to ``t_end``.

    With ``stop_ratio`` set, the run also stops at the first step where
    ``H <= stop_ratio * H(0)``. A persistent step failure ends the run early
    with ``series.failed`` set; earlier records are kept. ``on_record(state,
    record, eq, mesh)`` is called for every stored record.
    """
    if not dt > 0 or not t_end >= 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    if stride < 1:
        raise ValueError("record stride must be >= 1")
    mesh = build_mesh(geom, nx, ny)
    state = project_initial(data, mesh)
    if params.symmetric:
        eq = dg.steady_state(params, geom, initial_mass(data, geom))
    else:
        eq = dg.steady_state(params, geom, initial_weighted_mass(data, geom, params))

    series = dg.RunSeries(eq=eq)
    series.append(_record(state, eq, mesh, params, 0))
    if on_record is not None:
        on_record(state, series.records[-1], eq, mesh)
    if keep_states:
        series.states.append(state.copy())
    H0 = series.records[0].H
    n_steps = int(round(t_end / dt))
    series.min_value = float(min(state.V.min(), state.U.min()))
    linear = CoupledSolver(mesh, params, dt) if n_steps else None
    for n in range(1, n_steps + 1):
        try:
            new, iters, halvings = advance(state, dt, mesh, params, newton, linear=linear)
        except StepFailure as exc:
            series.failed = True
            series.message = f"step {n} (t={state.t:.6g}) failed: {exc}"
            log.error(series.message)
            break
        new.t = n * dt  # avoid accumulated rounding in t
        series.halvings += halvings
        series.min_value = min(series.min_value, float(new.V.min()), float(new.U.min()))
        state = new
        done = n == n_steps
        rec = None
        if n % stride == 0 or done or stop_ratio is not None:
            rec = _record(state, eq, mesh, params, iters)
            if stop_ratio is not None and rec.H <= stop_ratio * H0:
                done = True
        if rec is not None and (n % stride == 0 or done):
            series.append(rec)
            if on_record is not None:
                on_record(state, rec, eq, mesh)
            if keep_states:
                series.states.append(state.copy())
        if done:
            break
    series.final_state = state
    series.mesh = mesh
    return series


def ode_rhs(params: Params, L: float, v: float, u: float) -> tuple[float, float]:
    """Spatially constant reduction: ``dv/dt = field_gain / L``, ``du/dt = road_gain``."""
    fg, rg = exchange_terms(u, v, params)
    return float(fg) / L, float(rg)


def reference_ode_solve(params: Params, geom: Geometry, v0: float, u0: float, t_end: float, dt_fine: float):
    """Classical RK4 trajectory of the single-cell system; returns ``(t, v, u)`` arrays."""
    n = max(1, int(np.ceil(t_end / dt_fine - 1e-9)))
    h = t_end / n
    t = np.linspace(0.0, t_end, n + 1)
    v = np.empty(n + 1)
    u = np.empty(n + 1)
    v[0], u[0] = v0, u0
    L = geom.L
    for k in range(n):
        a1 = ode_rhs(params, L, v[k], u[k])
        a2 = ode_rhs(params, L, v[k] + 0.5 * h * a1[0], u[k] + 0.5 * h * a1[1])
        a3 = ode_rhs(params, L, v[k] + 0.5 * h * a2[0], u[k] + 0.5 * h * a2[1])
        a4 = ode_rhs(params, L, v[k] + h * a3[0], u[k] + h * a3[1])
        v[k + 1] = v[k] + h / 6 * (a1[0] + 2 * a2[0] + 2 * a3[0] + a4[0])
        u[k + 1] = u[k] + h / 6 * (a1[1] + 2 * a2[1] + 2 * a3[1] + a4[1])
    return t, v, u


def run(cfg) -> dg.RunSeries:
    """Run the configuration ``cfg`` (a :class:`fieldroad.config.RunConfig`)."""
    return simulate(
        cfg.geometry,
        cfg.params,
        cfg.initial,
        cfg.nx,
        cfg.ny,
        cfg.dt,
        cfg.t_end,
        newton=cfg.newton,
        stride=cfg.record_stride,
        stop_ratio=cfg.stop_ratio,
    )


@dataclass
class OracleStudy:
    dts: list[float]
    errors: list[float]
    ratios: list[float]
    warnings: list[str] = field(default_factory=list)


def backward_euler_single_cell(params: Params, geom: Geometry, v0: float, u0: float, t_end: float, dt: float,
                               cfg: NewtonConfig = NewtonConfig()):
    """The scheme on a 1x1 mesh; returns ``(t, v, u)`` arrays."""
    mesh = build_mesh(geom, 1, 1)
    n = int(round(t_end / dt))
    state = State(0.0, np.array([[v0]], dtype=float), np.array([u0], dtype=float))
    v, u = [v0], [u0]
    for k in range(n):
        state, _ = newton_step(state, dt, mesh, params, cfg)
        v.append(state.V[0, 0])
        u.append(state.U[0])
    return dt * np.arange(n + 1), np.array(v), np.array(u)


def oracle_study(params: Params, geom: Geometry, v0: float, u0: float, t_end: float, dts, dt_fine: float) -> OracleStudy:
    """Sup-in-time error of the single-cell scheme against RK4, for each ``dt``.

    The error is ``max(|v - v_ref|, |u - u_ref|)`` over the coarse time grid,
    relative to the largest reference value. ``ratios[k] = errors[k] / errors[k+1]``.
    """
    warnings = []
    if dt_fine > 1e-2 * min(dts):
        warnings.append(f"dtFine={dt_fine:g} is not much smaller than the smallest dt={min(dts):g}")
    tr, vr, ur = reference_ode_solve(params, geom, v0, u0, t_end, dt_fine)
    h = tr[1] - tr[0]
    scale = max(np.max(np.abs(vr)), np.max(np.abs(ur)))
    errors = []
    for dt in dts:
        ratio = dt / h
        if abs(ratio - round(ratio)) > 1e-6 * ratio:
            warnings.append(f"dt={dt:g} is not a multiple of the reference step {h:g}")
        t, v, u = backward_euler_single_cell(params, geom, v0, u0, t_end, dt)
        idx = np.clip(np.rint(t / h).astype(int), 0, len(tr) - 1)
        err = max(np.max(np.abs(v - vr[idx])), np.max(np.abs(u - ur[idx])))
        errors.append(float(err / scale))
    ratios = [e0 / e1 if e1 > 0 else float("nan") for e0, e1 in zip(errors, errors[1:])]
    return OracleStudy(list(dts), errors, ratios, warnings)
