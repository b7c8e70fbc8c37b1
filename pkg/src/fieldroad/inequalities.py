"""Discrete checks of the functional inequalities behind the entropy decay.

The probability measure lives on the field plus a thickened copy of the road.
Because the test function is constant across the thickness, the thickness
drops out of every integral and road cells simply carry weight
``(u_inf / M0) * hx``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import Equilibrium, RunSeries
from .discretization import pow_plus
from .mesh import Mesh, State
from .model import Params


@dataclass(frozen=True)
class RhoWeights:
    field: np.ndarray  # (nx, ny)
    road: np.ndarray  # (nx,)

    def total(self) -> float:
        return float(self.field.sum() + self.road.sum())


def rho_weights(eq: Equilibrium, mesh: Mesh) -> RhoWeights:
    m = eq.mass
    return RhoWeights(
        np.full((mesh.nx, mesh.ny), eq.v_inf / m * mesh.cell_area),
        np.full(mesh.nx, eq.u_inf / m * mesh.hx),
    )


@dataclass(frozen=True)
class FState:
    field: np.ndarray
    road: np.ndarray

    def integrate(self, rho: RhoWeights, power: float = 1.0) -> float:
        return float(np.sum(self.field**power * rho.field) + np.sum(self.road**power * rho.road))


def build_f(state: State, eq: Equilibrium, alpha: float) -> FState:
    return FState((state.V / eq.v_inf) ** alpha, (state.U / eq.u_inf) ** alpha)


def mean_f(f: FState, rho: RhoWeights) -> float:
    return f.integrate(rho)


def pw_ratio(state: State, eq: Equilibrium, mesh: Mesh, params: Params):
    """Both sides of the adapted Poincare-Wirtinger inequality and their ratio.

    Returns ``(lhs, rhs, ratio)``; ``ratio`` is ``None`` when ``rhs`` is zero
    up to rounding, measured against the squared equilibrium exchange flux.
    """
    a = params.alpha
    rho = rho_weights(eq, mesh)
    f = build_f(state, eq, a)
    m = mean_f(f, rho)
    lhs = float(np.sum((f.field - m) ** 2 * rho.field) + np.sum((f.road - m) ** 2 * rho.road))

    w = pow_plus(state.V, a)
    z = pow_plus(state.U, a)
    rhs = mesh.trans_x * np.sum(np.diff(w, axis=0) ** 2) + mesh.trans_y * np.sum(np.diff(w, axis=1) ** 2)
    rhs += mesh.trans_road * np.sum(np.diff(z) ** 2)
    rhs += mesh.hx * np.sum((a * params.nu0 * w[:, 0] - a * params.mu0 * z) ** 2)
    rhs = float(rhs)
    floor = 1e-24 * mesh.geom.road_length * (a * params.mu0 * eq.u_inf**a) ** 2
    return lhs, rhs, (lhs / rhs if rhs > floor else None)


def beckner_gap(state: State, eq: Equilibrium, mesh: Mesh, alpha: float) -> float:
    """``int f^((a+1)/a) drho - (int f^(1/a) drho)^(a+1)``."""
    rho = rho_weights(eq, mesh)
    f = build_f(state, eq, alpha)
    return f.integrate(rho, (alpha + 1) / alpha) - f.integrate(rho, 1 / alpha) ** (alpha + 1)


def jensen_sides(state: State, eq: Equilibrium, mesh: Mesh, alpha: float) -> tuple[float, float]:
    """``(int f^(1/a) drho, ||f||_{L^((a+1)/a)}^(1/a))``; the first never exceeds the second."""
    rho = rho_weights(eq, mesh)
    f = build_f(state, eq, alpha)
    return f.integrate(rho, 1 / alpha), f.integrate(rho, (alpha + 1) / alpha) ** (1 / (alpha + 1))


def gap_identity_error(state: State, eq: Equilibrium, mesh: Mesh, params: Params, entropy_value: float) -> float:
    """Relative mismatch between the Beckner gap and ``alpha * H / M0``."""
    gap = beckner_gap(state, eq, mesh, params.alpha)
    target = params.alpha * entropy_value / eq.mass
    return abs(gap - target) / max(abs(gap), 1e-30)


def entropy_dissipation_ratio(series: RunSeries) -> float:
    """Minimum of ``D/H`` over records with ``H > 1e-20``."""
    H = series.column("H")
    D = series.column("D")
    keep = H > 1e-20
    if not np.any(keep):
        raise ValueError("no records with positive entropy")
    return float(np.min(D[keep] / H[keep]))


def random_states(mesh: Mesh, n: int, rng: np.random.Generator, scale: float = 1.0):
    """Random nonnegative states; a mix of smooth, rough and sparse profiles."""
    x = mesh.x_centers[:, None]
    y = mesh.y_centers[None, :]
    lx = mesh.geom.road_length
    for k in range(n):
        kind = k % 3
        if kind == 0:
            V = rng.uniform(0, 2, (mesh.nx, mesh.ny))
            U = rng.uniform(0, 2, mesh.nx)
        elif kind == 1:
            kx, ky = rng.integers(0, 4, 2)
            amp = rng.uniform(0, 1, 2)
            V = 1 + amp[0] * np.cos(kx * np.pi * (x - mesh.geom.x_min) / lx) * np.cos(ky * np.pi * y / mesh.geom.L)
            U = 1 + amp[1] * np.cos(rng.integers(0, 4) * np.pi * (mesh.x_centers - mesh.geom.x_min) / lx)
            V = V * rng.uniform(0.2, 5)
            U = U * rng.uniform(0.2, 5)
        else:
            V = rng.exponential(1.0, (mesh.nx, mesh.ny)) * (rng.uniform(size=(mesh.nx, mesh.ny)) < 0.3)
            U = rng.exponential(1.0, mesh.nx) * (rng.uniform(size=mesh.nx) < 0.5)
            if V.sum() + U.sum() == 0:
                U[0] = 1.0
        yield State(0.0, scale * np.asarray(V, dtype=float), scale * np.asarray(U, dtype=float))
