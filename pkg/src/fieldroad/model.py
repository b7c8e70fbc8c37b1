"""Problem definition: geometry, physical parameters and indicator-sum initial data."""
from __future__ import annotations

from dataclasses import dataclass, field


class ConfigurationError(ValueError):
    """Invalid problem or run configuration."""


class DomainError(ValueError):
    """Argument outside the domain of a function."""


@dataclass(frozen=True)
class Geometry:
    """Field ``(x_min, x_max) x (0, L)`` sitting on the road ``(x_min, x_max)``."""

    L: float
    x_min: float
    x_max: float

    def __post_init__(self):
        if not self.L > 0:
            raise ConfigurationError(f"field height L must be positive, got {self.L}")
        if not self.x_max > self.x_min:
            raise ConfigurationError(
                f"road endpoints must satisfy x_max > x_min, got ({self.x_min}, {self.x_max})"
            )

    @property
    def road_length(self) -> float:
        return self.x_max - self.x_min

    @property
    def field_area(self) -> float:
        return self.road_length * self.L

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and 0.0 <= y <= self.L


@dataclass(frozen=True)
class Params:
    """Diffusivities ``d`` (field), ``D`` (road), transfer coefficients and exchange exponents."""

    d: float = 1.0
    D: float = 1.0
    mu0: float = 1.0
    nu0: float = 5.0
    alpha: float = 2.0
    beta: float = 2.0

    def __post_init__(self):
        for name in ("d", "D", "mu0", "nu0"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("alpha", "beta"):
            if not getattr(self, name) >= 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def symmetric(self) -> bool:
        return self.alpha == self.beta


Interval = tuple[float, float]


@dataclass(frozen=True)
class FieldPiece:
    """``value * 1_{union of x_intervals}(x) * 1_{y_interval}(y)``."""

    x_intervals: tuple[Interval, ...]
    y_interval: Interval
    value: float


@dataclass(frozen=True)
class RoadPiece:
    """``value * 1_{union of x_intervals}(x)``."""

    x_intervals: tuple[Interval, ...]
    value: float


def _measure(intervals) -> float:
    return sum(b - a for a, b in intervals)


def _check_intervals(intervals, lo, hi, what):
    for a, b in intervals:
        if not (lo <= a <= b <= hi):
            raise ConfigurationError(f"{what} interval [{a}, {b}] not inside [{lo}, {hi}]")
    ordered = sorted(intervals)
    for (_, b0), (a1, _) in zip(ordered, ordered[1:]):
        if a1 < b0:
            raise ConfigurationError(f"{what} intervals overlap: {ordered}")


@dataclass(frozen=True)
class InitialData:
    """Nonnegative piecewise-constant initial data ``(v0, u0)``.

    Each function is a finite sum of ``value * indicator`` terms; pieces may
    overlap each other (their values add up), but the x intervals inside a
    single piece must be disjoint.
    """

    v_pieces: tuple[FieldPiece, ...] = ()
    u_pieces: tuple[RoadPiece, ...] = ()

    def validate(self, geom: Geometry) -> None:
        for p in self.v_pieces:
            if p.value < 0:
                raise ConfigurationError(f"negative field value {p.value}")
            _check_intervals(p.x_intervals, geom.x_min, geom.x_max, "field x")
            _check_intervals([p.y_interval], 0.0, geom.L, "field y")
        for p in self.u_pieces:
            if p.value < 0:
                raise ConfigurationError(f"negative road value {p.value}")
            _check_intervals(p.x_intervals, geom.x_min, geom.x_max, "road x")
        if initial_mass(self, geom, check=False) <= 0:
            raise ConfigurationError("initial data are simultaneously trivial (zero total mass)")


def _in_union(x, intervals) -> bool:
    return any(a <= x <= b for a, b in intervals)


def eval_initial(data: InitialData, geom: Geometry, x: float, y: float) -> tuple[float, float]:
    """Pointwise values ``(v0(x, y), u0(x))``; intervals are closed and overlapping pieces add."""
    if not geom.contains(x, y):
        raise DomainError(f"point ({x}, {y}) lies outside the field")
    v = sum(
        p.value
        for p in data.v_pieces
        if _in_union(x, p.x_intervals) and p.y_interval[0] <= y <= p.y_interval[1]
    )
    u = sum(p.value for p in data.u_pieces if _in_union(x, p.x_intervals))
    return float(v), float(u)


def initial_mass(data: InitialData, geom: Geometry, check: bool = True) -> float:
    """Exact integral of ``v0`` over the field plus that of ``u0`` over the road."""
    m = sum(p.value * _measure(p.x_intervals) * (p.y_interval[1] - p.y_interval[0]) for p in data.v_pieces)
    m += sum(p.value * _measure(p.x_intervals) for p in data.u_pieces)
    if check and m <= 0:
        raise ConfigurationError("initial data are simultaneously trivial (zero total mass)")
    return m


def initial_weighted_mass(data: InitialData, geom: Geometry, params: Params) -> float:
    """Exact ``(1/alpha) * field mass + (1/beta) * road mass`` of the initial data."""
    field_part = initial_mass(InitialData(v_pieces=data.v_pieces), geom, check=False)
    road_part = initial_mass(InitialData(u_pieces=data.u_pieces), geom, check=False)
    return field_part / params.alpha + road_part / params.beta


_STRIPS = ((-10.0, -7.5), (-5.0, -2.5), (2.5, 5.0), (7.5, 10.0))


def preset_test_case(case: int) -> tuple[Geometry, Params, InitialData]:
    """The two benchmark configurations (road ``(-2L, 2L)``, ``L = 20``).

    The returned ``Params`` carry the default exponents ``alpha = beta = 2``;
    callers pick the exponents with :func:`dataclasses.replace`.
    """
    geom = Geometry(L=20.0, x_min=-40.0, x_max=40.0)
    params = Params(d=1.0, D=1.0, mu0=1.0, nu0=5.0)
    if case == 1:
        data = InitialData(v_pieces=(FieldPiece(_STRIPS, (7.5, 10.0), 100.0),))
    elif case == 2:
        data = InitialData(
            v_pieces=(FieldPiece(_STRIPS, (8.75, 10.0), 150.0),),
            u_pieces=(RoadPiece(_STRIPS, 62.5),),
        )
    else:
        raise ConfigurationError(f"unknown test case {case!r}; expected 1 or 2")
    return geom, params, data


def constant_data(geom: Geometry, v: float, u: float) -> InitialData:
    """Spatially constant initial data (used for equilibrium starts)."""
    pieces_v = (FieldPiece(((geom.x_min, geom.x_max),), (0.0, geom.L), v),) if v else ()
    pieces_u = (RoadPiece(((geom.x_min, geom.x_max),), u),) if u else ()
    return InitialData(v_pieces=pieces_v, u_pieces=pieces_u)
