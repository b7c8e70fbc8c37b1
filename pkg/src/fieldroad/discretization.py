"""Backward-Euler two-point flux finite-volume scheme for the field-road system.

The field trace at the road is the bottom-row cell value ``V[i, 0]`` and the
exchange is integrated with the one-point rule over each road cell, so the
scheme conserves ``(1/alpha) * field mass + (1/beta) * road mass`` exactly.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import sparse

from .mesh import Mesh, State, weighted_mass
from .model import Params


def pow_plus(s, p: float):
    """``max(s, 0) ** p``."""
    return np.maximum(s, 0.0) ** p


def dpow_plus(s, p: float):
    """Derivative of :func:`pow_plus`; identically 1 for the linear map."""
    s = np.asarray(s, dtype=float)
    if p == 1:
        return np.ones_like(s)
    return p * np.maximum(s, 0.0) ** (p - 1)


def exchange_terms(u, v0, params: Params):
    """Field and road gains per unit road length.

    ``field_gain / alpha + road_gain / beta == 0`` holds identically.
    """
    flux = params.mu0 * pow_plus(u, params.beta) - params.nu0 * pow_plus(v0, params.alpha)
    return params.alpha * flux, -params.beta * flux


def _exchange_derivatives(u, v0, params: Params):
    """Partial derivatives of ``mu0 u^beta - nu0 v0^alpha`` w.r.t. ``u`` and ``v0``."""
    return params.mu0 * dpow_plus(u, params.beta), -params.nu0 * dpow_plus(v0, params.alpha)


def field_diffusion(V: np.ndarray, mesh: Mesh) -> np.ndarray:
    """``sum over interior faces of T_f (V_nbr - V_c)`` per field cell (Neumann faces add nothing)."""
    out = np.zeros_like(V)
    fx = mesh.trans_x * (V[1:, :] - V[:-1, :])
    out[:-1, :] += fx
    out[1:, :] -= fx
    fy = mesh.trans_y * (V[:, 1:] - V[:, :-1])
    out[:, :-1] += fy
    out[:, 1:] -= fy
    return out


def road_diffusion(U: np.ndarray, mesh: Mesh) -> np.ndarray:
    out = np.zeros_like(U)
    f = mesh.trans_road * (U[1:] - U[:-1])
    out[:-1] += f
    out[1:] -= f
    return out


def _check(new: State, old: State, dt: float, mesh: Mesh):
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    new.check_shape(mesh)
    old.check_shape(mesh)


def residual(new: State, old: State, dt: float, mesh: Mesh, params: Params) -> np.ndarray:
    """Scheme residual, field cells first then road cells."""
    _check(new, old, dt, mesh)
    V, U = new.V, new.U
    field_gain, road_gain = exchange_terms(U, V[:, 0], params)

    RV = mesh.cell_area * (V - old.V) / dt - params.d * field_diffusion(V, mesh)
    RV[:, 0] -= mesh.hx * field_gain
    RU = mesh.hx * (U - old.U) / dt - params.D * road_diffusion(U, mesh) - mesh.hx * road_gain
    return np.concatenate([RV.ravel(), RU])


def _graph_laplacian(n: int) -> sparse.csr_matrix:
    """Path-graph Laplacian: degree on the diagonal, -1 for each neighbour."""
    if n == 1:
        return sparse.csr_matrix((1, 1))
    deg = np.full(n, 2.0)
    deg[0] = deg[-1] = 1.0
    off = -np.ones(n - 1)
    return sparse.diags([off, deg, off], [-1, 0, 1], format="csr")


@lru_cache(maxsize=32)
def linear_part(mesh: Mesh, d: float, D: float, dt: float) -> sparse.csr_matrix:
    """Constant part of the Jacobian: accumulation plus diffusion."""
    Ix, Iy = sparse.identity(mesh.nx), sparse.identity(mesh.ny)
    field = mesh.trans_x * sparse.kron(_graph_laplacian(mesh.nx), Iy) + mesh.trans_y * sparse.kron(
        Ix, _graph_laplacian(mesh.ny)
    )
    field = d * field + (mesh.cell_area / dt) * sparse.identity(mesh.n_field)
    road = D * mesh.trans_road * _graph_laplacian(mesh.nx) + (mesh.hx / dt) * Ix
    return sparse.block_diag([field, road], format="csr")


def coupling_block(new: State, mesh: Mesh, params: Params) -> tuple[np.ndarray, np.ndarray]:
    """State-dependent part of the Jacobian restricted to the coupled unknowns.

    Returns ``(idx, C)``: ``idx`` lists the bottom-row field unknowns then the
    road unknowns, and ``C`` is the dense ``(2 nx, 2 nx)`` block added to the
    constant part at ``(idx, idx)``.
    """
    du, dv = _exchange_derivatives(new.U, new.V[:, 0], params)
    a, b, h, nx = params.alpha, params.beta, mesh.hx, mesh.nx
    idx = np.concatenate([np.arange(nx) * mesh.ny, mesh.n_field + np.arange(nx)])
    k = np.arange(nx)
    C = np.zeros((2 * nx, 2 * nx))
    C[k, k] = -h * a * dv
    C[k, nx + k] = -h * a * du
    C[nx + k, k] = h * b * dv
    C[nx + k, nx + k] = h * b * du
    return idx, C


def jacobian(new: State, dt: float, mesh: Mesh, params: Params) -> sparse.csr_matrix:
    """Exact derivative of :func:`residual` with respect to the new state."""
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    new.check_shape(mesh)
    idx, C = coupling_block(new, mesh, params)
    nx = mesh.nx
    k = np.arange(nx)
    rows = np.concatenate([k, k, nx + k, nx + k])
    cols = np.concatenate([k, nx + k, k, nx + k])
    n = mesh.n_unknowns
    coupling = sparse.csr_matrix((C[rows, cols], (idx[rows], idx[cols])), shape=(n, n))
    return linear_part(mesh, params.d, params.D, float(dt)) + coupling


def conservation_defect(new: State, old: State, dt: float, mesh: Mesh, params: Params) -> float:
    """``sum R_field / alpha + sum R_road / beta`` minus the weighted-mass rate; zero up to rounding."""
    R = residual(new, old, dt, mesh, params)
    lhs = R[: mesh.n_field].sum() / params.alpha + R[mesh.n_field :].sum() / params.beta
    rhs = (weighted_mass(new, mesh, params.alpha, params.beta) - weighted_mass(old, mesh, params.alpha, params.beta)) / dt
    return float(lhs - rhs)
