"""Steady state, relative entropy, dissipation, norms and decay-rate fits."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .discretization import pow_plus
from .mesh import Mesh, State
from .model import ConfigurationError, DomainError, Geometry, Params


@dataclass(frozen=True)
class Equilibrium:
    v_inf: float
    u_inf: float
    mass: float  # total mass (alpha == beta) or weighted mass otherwise
    weighted: bool = False


def steady_state(params: Params, geom: Geometry, mass: float) -> Equilibrium:
    """Constant steady state carrying the conserved quantity ``mass``.

    For ``alpha == beta`` ``mass`` is the total mass and the closed form is
    used. Otherwise ``mass`` is the weighted mass
    ``(|field|/alpha) v + (|road|/beta) u`` and the balance
    ``nu0 v^alpha = mu0 u^beta`` is solved by bracketing on ``u``.
    """
    if not mass > 0:
        raise ConfigurationError(f"steady state needs positive mass, got {mass}")
    a, b = params.alpha, params.beta
    area, length = geom.field_area, geom.road_length
    if a == b:
        ratio = (params.mu0 / params.nu0) ** (1.0 / a)
        u_inf = mass / (area * ratio + length)
        return Equilibrium(ratio * u_inf, u_inf, mass)

    def v_of(u):
        return (params.mu0 / params.nu0 * u**b) ** (1.0 / a)

    def g(u):
        return (area / a) * v_of(u) + (length / b) * u - mass

    u_hi = b * mass / length  # g(u_hi) >= 0 since the field term is nonnegative
    u_inf = optimize.brentq(g, 0.0, u_hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return Equilibrium(v_of(u_inf), u_inf, mass, weighted=True)


def phi(s, alpha: float):
    """``(s^(alpha+1) - (alpha+1) s) / alpha + 1``; convex, zero only at ``s = 1``."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("phi is defined for s >= 0 only")
    # s^(a+1) - 1 - (a+1)(s-1), written to limit cancellation near s = 1
    e = s - 1.0
    with np.errstate(divide="ignore"):
        out = (np.expm1((alpha + 1) * np.log1p(e)) - (alpha + 1) * e) / alpha
    return out if out.ndim else float(out)


def _check_nonneg(state: State):
    if np.any(state.V < 0) or np.any(state.U < 0):
        raise DomainError(
            f"state has negative entries (min V {state.V.min():.3e}, min U {state.U.min():.3e})"
        )


def entropy(state: State, eq: Equilibrium, mesh: Mesh, params: Params) -> float:
    """Relative entropy with respect to ``eq`` (exponent alpha on the field, beta on the road)."""
    _check_nonneg(state)
    hv = eq.v_inf * np.sum(phi(state.V / eq.v_inf, params.alpha)) * mesh.cell_area
    hu = eq.u_inf * np.sum(phi(state.U / eq.u_inf, params.beta)) * mesh.hx
    return float(hv + hu)


def entropy_recast(state: State, eq: Equilibrium, mesh: Mesh, params: Params) -> float:
    """Power-integral form of the entropy; equals :func:`entropy` when the mass matches (alpha == beta)."""
    a = params.alpha
    hv = np.sum(state.V ** (a + 1) - eq.v_inf ** (a + 1)) * mesh.cell_area / (a * eq.v_inf**a)
    hu = np.sum(state.U ** (a + 1) - eq.u_inf ** (a + 1)) * mesh.hx / (a * eq.u_inf**a)
    return float(hv + hu)


def dissipation(state: State, mesh: Mesh, params: Params) -> float:
    """Gradient-plus-mismatch functional with bare geometric transmissibilities.

    Uses the exponent alpha throughout, as in the symmetric analysis.
    """
    a = params.alpha
    w = pow_plus(state.V, (a + 1) / 2)
    z = pow_plus(state.U, (a + 1) / 2)
    grad = mesh.trans_x * np.sum(np.diff(w, axis=0) ** 2) + mesh.trans_y * np.sum(np.diff(w, axis=1) ** 2)
    grad += mesh.trans_road * np.sum(np.diff(z) ** 2)
    mismatch = a * params.nu0 * pow_plus(state.V[:, 0], a) - a * params.mu0 * pow_plus(state.U, a)
    return float(grad + mesh.hx * np.sum(mismatch**2))


def lp_gap(state: State, eq: Equilibrium, mesh: Mesh, params: Params) -> float:
    """``||V - v_inf||^(a+1)_(a+1) + ||U - u_inf||^(a+1)_(a+1)`` with ``a = alpha``."""
    p = params.alpha + 1
    return float(
        np.sum(np.abs(state.V - eq.v_inf) ** p) * mesh.cell_area + np.sum(np.abs(state.U - eq.u_inf) ** p) * mesh.hx
    )


def linf_distance(state: State, eq: Equilibrium) -> tuple[float, float]:
    return float(np.max(np.abs(state.V - eq.v_inf))), float(np.max(np.abs(state.U - eq.u_inf)))


class FitError(ValueError):
    pass


@dataclass
class Record:
    t: float
    H: float
    D: float
    mass: float
    weighted_mass: float
    linf_v: float
    linf_u: float
    lp_gap: float
    newton_iters: int


COLUMNS = ("t", "H", "D", "mass", "weighted_mass", "linf_v", "linf_u", "lp_gap", "newton_iters")


@dataclass
class RunSeries:
    records: list[Record] = field(default_factory=list)
    eq: Equilibrium | None = None
    failed: bool = False
    message: str = ""
    min_value: float = 0.0  # most negative cell value seen
    halvings: int = 0
    final_state: State | None = None
    mesh: Mesh | None = None
    states: list[State] = field(default_factory=list)  # only filled when requested

    def append(self, rec: Record) -> None:
        if self.records and not rec.t > self.records[-1].t:
            raise ValueError("record times must increase strictly")
        self.records.append(rec)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def __len__(self) -> int:
        return len(self.records)


def fit_log_slope(t, y, lo: float, hi: float, reference: float | None = None):
    """Least-squares rate of ``ln y`` vs ``t`` over ``lo <= y/reference <= hi``.

    Returns ``(rate, r_squared, n_points)`` with ``rate = -slope``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    ref = y[0] if reference is None else reference
    sel = (y > 0) & (y >= lo * ref) & (y <= hi * ref)
    n = int(sel.sum())
    if n < 10:
        raise FitError(f"only {n} points inside the fit window [{lo:g}, {hi:g}]; need at least 10")
    ts, ly = t[sel], np.log(y[sel])
    slope, intercept = np.polyfit(ts, ly, 1)
    ss_res = np.sum((ly - (slope * ts + intercept)) ** 2)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(-slope), float(r2), n


def fit_decay_rate(series, window: tuple[float, float] = (1e-6, 1e-2)) -> tuple[float, float]:
    """Exponential rate of the entropy over ``H/H(0)`` in ``window``; returns ``(rate, R^2)``.

    ``series`` is a :class:`RunSeries` or a ``(t, H)`` pair of arrays.
    """
    if isinstance(series, RunSeries):
        t, H = series.column("t"), series.column("H")
    else:
        t, H = (np.asarray(a, dtype=float) for a in series)
    if len(H) == 0 or not H[0] > 0:
        raise FitError("entropy series is empty or starts at zero")
    rate, r2, _ = fit_log_slope(t, H, *window)
    return rate, r2
