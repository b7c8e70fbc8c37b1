"""JSON run configuration.

Top-level keys (all optional unless noted; defaults in brackets)::

    preset        1 or 2; mutually exclusive with "initial" and "geometry"
    initial       {"vPieces": [{"xIntervals": [[a, b], ...], "yInterval": [c, e], "value": v}],
                   "uPieces": [{"xIntervals": [[a, b], ...], "value": u}]}
    geometry      {"L": 20, "xMin": -40, "xMax": 40}        [preset geometry]
    d, D, mu0, nu0                                           [1, 1, 1, 5]
    alpha, beta   exchange exponents, >= 1                   [2, 2]
    nx, ny        mesh cells                                 [160, 40]
    dt, tEnd      time step and final time                   [0.1, 1200]
    stopRatio     stop once H <= stopRatio * H(0); null disables   [null]
    newton        {"tol": 1e-10, "maxIter": 25, "damping": true, "maxHalvings": 10}
    output        {"csvPath": "run.csv", "svgPath": null, "recordStride": 1}
    fitWindow     [lo, hi] bounds on H/H(0) for the rate fit [[1e-6, 1e-2]]
    seed          seed for the randomized checks             [12345]
    check         {"samples": 500, "nx": 8, "ny": 4, "jacobianStates": 20}
    oracle        {"tEnd": 1.0, "dts": [0.01, 0.005, 0.0025], "dtFine": 1e-5}

Either ``preset`` or ``initial`` must be given.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any

from .model import (
    ConfigurationError,
    FieldPiece,
    Geometry,
    InitialData,
    Params,
    RoadPiece,
    preset_test_case,
)
from .solver import NewtonConfig


@dataclass(frozen=True)
class CheckConfig:
    samples: int = 500
    nx: int = 8
    ny: int = 4
    jacobian_states: int = 20


@dataclass(frozen=True)
class OracleConfig:
    t_end: float = 1.0
    dts: tuple[float, ...] = (0.01, 0.005, 0.0025)
    dt_fine: float = 1e-5


@dataclass(frozen=True)
class RunConfig:
    geometry: Geometry
    params: Params
    initial: InitialData
    preset: int | None = None
    nx: int = 160
    ny: int = 40
    dt: float = 0.1
    t_end: float = 1200.0
    stop_ratio: float | None = None
    newton: NewtonConfig = NewtonConfig()
    csv_path: str | None = "run.csv"
    svg_path: str | None = None
    record_stride: int = 1
    fit_window: tuple[float, float] = (1e-6, 1e-2)
    seed: int = 12345
    check: CheckConfig = CheckConfig()
    oracle: OracleConfig = OracleConfig()


_TOP = {
    "preset", "initial", "geometry", "d", "D", "mu0", "nu0", "alpha", "beta", "nx", "ny", "dt", "tEnd",
    "stopRatio", "newton", "output", "fitWindow", "seed", "check", "oracle",
}
_SUB = {
    "geometry": {"L", "xMin", "xMax"},
    "initial": {"vPieces", "uPieces"},
    "newton": {"tol", "maxIter", "damping", "maxHalvings"},
    "output": {"csvPath", "svgPath", "recordStride"},
    "check": {"samples", "nx", "ny", "jacobianStates"},
    "oracle": {"tEnd", "dts", "dtFine"},
}


def _reject_unknown(obj: dict, allowed: set, where: str):
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigurationError(f"{where}: unknown key(s) {', '.join(extra)}")


def _num(obj: dict, key: str, default, where: str, kind=float):
    val = obj.get(key, default)
    if val is None:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigurationError(f"{where}{key}: expected a number, got {val!r}")
    if kind is int:
        if int(val) != val:
            raise ConfigurationError(f"{where}{key}: expected an integer, got {val!r}")
        return int(val)
    return float(val)


def _intervals(raw, where):
    if not isinstance(raw, list) or not all(isinstance(i, list) and len(i) == 2 for i in raw):
        raise ConfigurationError(f"{where}: expected a list of [a, b] pairs")
    return tuple((float(a), float(b)) for a, b in raw)


def _initial(raw: Any) -> InitialData:
    if not isinstance(raw, dict):
        raise ConfigurationError("initial: expected an object")
    _reject_unknown(raw, _SUB["initial"], "initial")
    vp, up = [], []
    for k, p in enumerate(raw.get("vPieces", [])):
        where = f"initial.vPieces[{k}]"
        _reject_unknown(p, {"xIntervals", "yInterval", "value"}, where)
        try:
            y = _intervals([p["yInterval"]], where + ".yInterval")[0]
            vp.append(FieldPiece(_intervals(p["xIntervals"], where + ".xIntervals"), y, float(p["value"])))
        except KeyError as exc:
            raise ConfigurationError(f"{where}: missing key {exc}") from None
    for k, p in enumerate(raw.get("uPieces", [])):
        where = f"initial.uPieces[{k}]"
        _reject_unknown(p, {"xIntervals", "value"}, where)
        try:
            up.append(RoadPiece(_intervals(p["xIntervals"], where + ".xIntervals"), float(p["value"])))
        except KeyError as exc:
            raise ConfigurationError(f"{where}: missing key {exc}") from None
    return InitialData(tuple(vp), tuple(up))


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration; raises :class:`ConfigurationError`."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigurationError("configuration must be a JSON object")
    _reject_unknown(raw, _TOP, "config")
    for key, allowed in _SUB.items():
        if key in raw and key != "initial":
            if not isinstance(raw[key], dict):
                raise ConfigurationError(f"{key}: expected an object")
            _reject_unknown(raw[key], allowed, key)

    preset = raw.get("preset")
    if preset is not None:
        if "initial" in raw:
            raise ConfigurationError("preset and initial are mutually exclusive")
        if "geometry" in raw:
            raise ConfigurationError("preset fixes the geometry; remove the geometry block")
        if preset not in (1, 2) or isinstance(preset, bool):
            raise ConfigurationError(f"preset: unknown test case {preset!r}; expected 1 or 2")
        geom, base, data = preset_test_case(preset)
    else:
        if "initial" not in raw:
            raise ConfigurationError("either preset or initial must be given")
        g = raw.get("geometry", {})
        geom = Geometry(
            L=_num(g, "L", 20.0, "geometry."),
            x_min=_num(g, "xMin", -40.0, "geometry."),
            x_max=_num(g, "xMax", 40.0, "geometry."),
        )
        base = Params()
        data = _initial(raw["initial"])

    params = replace(base, **{k: _num(raw, k, getattr(base, k), "") for k in ("d", "D", "mu0", "nu0", "alpha", "beta")})
    data.validate(geom)

    nw = raw.get("newton", {})
    damping = nw.get("damping", True)
    if not isinstance(damping, bool):
        raise ConfigurationError("newton.damping: expected true or false")
    try:
        newton = NewtonConfig(
            tol=_num(nw, "tol", 1e-10, "newton."),
            max_iter=_num(nw, "maxIter", 25, "newton.", int),
            damping=damping,
            max_halvings=_num(nw, "maxHalvings", 10, "newton.", int),
        )
    except ValueError as exc:
        raise ConfigurationError(f"newton: {exc}") from None

    out = raw.get("output", {})
    stride = _num(out, "recordStride", 1, "output.", int)
    if stride < 1:
        raise ConfigurationError("output.recordStride must be >= 1")
    for key in ("csvPath", "svgPath"):
        if out.get(key) is not None and not isinstance(out[key], str):
            raise ConfigurationError(f"output.{key}: expected a string path")

    nx = _num(raw, "nx", 160, "", int)
    ny = _num(raw, "ny", 40, "", int)
    if nx < 1 or ny < 1:
        raise ConfigurationError(f"nx and ny must be >= 1, got {nx}, {ny}")
    dt = _num(raw, "dt", 0.1, "")
    t_end = _num(raw, "tEnd", 1200.0, "")
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if not t_end >= 0:
        raise ConfigurationError(f"tEnd must be nonnegative, got {t_end}")
    stop_ratio = _num(raw, "stopRatio", None, "")
    if stop_ratio is not None and not stop_ratio > 0:
        raise ConfigurationError("stopRatio must be positive")

    window = raw.get("fitWindow", [1e-6, 1e-2])
    if (
        not isinstance(window, list)
        or len(window) != 2
        or not all(isinstance(w, (int, float)) and not isinstance(w, bool) for w in window)
        or not 0 < window[0] < window[1]
    ):
        raise ConfigurationError(f"fitWindow: expected [lo, hi] with 0 < lo < hi, got {window!r}")

    seed = _num(raw, "seed", 12345, "", int)

    ch = raw.get("check", {})
    check = CheckConfig(
        samples=_num(ch, "samples", 500, "check.", int),
        nx=_num(ch, "nx", 8, "check.", int),
        ny=_num(ch, "ny", 4, "check.", int),
        jacobian_states=_num(ch, "jacobianStates", 20, "check.", int),
    )
    if min(check.samples, check.nx, check.ny, check.jacobian_states) < 1:
        raise ConfigurationError("check: all counts must be >= 1")

    oc = raw.get("oracle", {})
    dts = oc.get("dts", [0.01, 0.005, 0.0025])
    if not isinstance(dts, list) or len(dts) < 2 or not all(isinstance(x, (int, float)) and x > 0 for x in dts):
        raise ConfigurationError("oracle.dts: expected a list of at least two positive numbers")
    oracle = OracleConfig(
        t_end=_num(oc, "tEnd", 1.0, "oracle."),
        dts=tuple(float(x) for x in dts),
        dt_fine=_num(oc, "dtFine", 1e-5, "oracle."),
    )
    if not (oracle.t_end > 0 and oracle.dt_fine > 0):
        raise ConfigurationError("oracle: tEnd and dtFine must be positive")

    return RunConfig(
        geometry=geom,
        params=params,
        initial=data,
        preset=preset,
        nx=nx,
        ny=ny,
        dt=dt,
        t_end=t_end,
        stop_ratio=stop_ratio,
        newton=newton,
        csv_path=out.get("csvPath", "run.csv"),
        svg_path=out.get("svgPath"),
        record_stride=stride,
        fit_window=(float(window[0]), float(window[1])),
        seed=seed,
        check=check,
        oracle=oracle,
    )


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
