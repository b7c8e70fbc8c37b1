"""Uniform Cartesian field mesh with the matching road mesh.

Unknown layout: field cell ``(i, j)`` has flat index ``i * ny + j`` (``j``
varies fastest, ``j = 0`` is the bottom row touching the road); road cell
``i`` follows all field cells at index ``nx * ny + i``. Cell arrays are
stored as ``V`` of shape ``(nx, ny)`` and ``U`` of shape ``(nx,)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ConfigurationError, Geometry, InitialData


@dataclass(frozen=True)
class Mesh:
    geom: Geometry
    nx: int
    ny: int

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 1 or self.ny < 1:
            raise ConfigurationError(f"mesh counts must be positive integers, got nx={self.nx}, ny={self.ny}")

    @property
    def hx(self) -> float:
        return self.geom.road_length / self.nx

    @property
    def hy(self) -> float:
        return self.geom.L / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def n_field(self) -> int:
        return self.nx * self.ny

    @property
    def n_unknowns(self) -> int:
        return self.nx * self.ny + self.nx

    @property
    def x_edges(self) -> np.ndarray:
        return self.geom.x_min + self.hx * np.arange(self.nx + 1)

    @property
    def y_edges(self) -> np.ndarray:
        return self.hy * np.arange(self.ny + 1)

    @property
    def x_centers(self) -> np.ndarray:
        return self.geom.x_min + self.hx * (np.arange(self.nx) + 0.5)

    @property
    def y_centers(self) -> np.ndarray:
        return self.hy * (np.arange(self.ny) + 0.5)

    def field_index(self, i: int, j: int) -> int:
        return i * self.ny + j

    def road_index(self, i: int) -> int:
        return self.n_field + i

    # Geometric TPFA factors (face length / centre distance); diffusivities are applied at assembly.
    @property
    def trans_x(self) -> float:
        return self.hy / self.hx

    @property
    def trans_y(self) -> float:
        return self.hx / self.hy

    @property
    def trans_road(self) -> float:
        return 1.0 / self.hx


def build_mesh(geom: Geometry, nx: int, ny: int) -> Mesh:
    return Mesh(geom, nx, ny)


def transmissibility(mesh: Mesh, face: tuple) -> float:
    """Geometric transmissibility of an interior face.

    ``face`` is one of ``("field", (i, j), (k, l))`` for two field cells or
    ``("road", i, k)`` for two road cells. Boundary faces carry no flux and
    requesting them raises ``ValueError``.
    """
    kind, a, b = face
    if kind == "field":
        (i, j), (k, l) = a, b
        for ci, cj in (a, b):
            if not (0 <= ci < mesh.nx and 0 <= cj < mesh.ny):
                raise ValueError(f"cell ({ci}, {cj}) is not in the mesh; boundary faces have no transmissibility")
        if abs(i - k) == 1 and j == l:
            return mesh.trans_x
        if abs(j - l) == 1 and i == k:
            return mesh.trans_y
        raise ValueError(f"cells {a} and {b} do not share a face")
    if kind == "road":
        for c in (a, b):
            if not 0 <= c < mesh.nx:
                raise ValueError(f"road cell {c} is not in the mesh; boundary faces have no transmissibility")
        if abs(a - b) == 1:
            return mesh.trans_road
        raise ValueError(f"road cells {a} and {b} do not share a face")
    raise ValueError(f"unknown face kind {kind!r}")


@dataclass
class State:
    t: float
    V: np.ndarray
    U: np.ndarray

    def copy(self) -> "State":
        return State(self.t, self.V.copy(), self.U.copy())

    def pack(self) -> np.ndarray:
        return np.concatenate([self.V.ravel(), self.U])

    @classmethod
    def unpack(cls, vec: np.ndarray, mesh: Mesh, t: float = 0.0) -> "State":
        if vec.shape != (mesh.n_unknowns,):
            raise ValueError(f"vector of length {vec.shape} does not match mesh with {mesh.n_unknowns} unknowns")
        return cls(t, vec[: mesh.n_field].reshape(mesh.nx, mesh.ny).copy(), vec[mesh.n_field :].copy())

    def check_shape(self, mesh: Mesh) -> None:
        if self.V.shape != (mesh.nx, mesh.ny) or self.U.shape != (mesh.nx,):
            raise ValueError(
                f"state shapes V{self.V.shape}, U{self.U.shape} do not match mesh {mesh.nx}x{mesh.ny}"
            )


def _overlap(edges: np.ndarray, a: float, b: float) -> np.ndarray:
    return np.clip(np.minimum(edges[1:], b) - np.maximum(edges[:-1], a), 0.0, None)


def project_initial(data: InitialData, mesh: Mesh) -> State:
    """Exact cell averages of the initial data (interval-intersection arithmetic)."""
    xe, ye = mesh.x_edges, mesh.y_edges
    V = np.zeros((mesh.nx, mesh.ny))
    U = np.zeros(mesh.nx)
    for p in data.v_pieces:
        wx = sum((_overlap(xe, a, b) for a, b in p.x_intervals), np.zeros(mesh.nx))
        wy = _overlap(ye, *p.y_interval)
        V += p.value * np.outer(wx, wy)
    for p in data.u_pieces:
        U += p.value * sum((_overlap(xe, a, b) for a, b in p.x_intervals), np.zeros(mesh.nx))
    return State(0.0, V / mesh.cell_area, U / mesh.hx)


def field_mass(V: np.ndarray, mesh: Mesh) -> float:
    return float(np.sum(V) * mesh.cell_area)


def road_mass(U: np.ndarray, mesh: Mesh) -> float:
    return float(np.sum(U) * mesh.hx)


def total_mass(state: State, mesh: Mesh) -> float:
    return field_mass(state.V, mesh) + road_mass(state.U, mesh)


def weighted_mass(state: State, mesh: Mesh, alpha: float, beta: float) -> float:
    return field_mass(state.V, mesh) / alpha + road_mass(state.U, mesh) / beta
