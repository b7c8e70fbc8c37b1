"""Command line: ``fieldroad run|steady|check|oracle --config <path>``.

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 invariant or check failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import diagnostics as dg
from . import inequalities as iq
from .config import RunConfig, load_config
from .discretization import jacobian, residual
from .mesh import State, build_mesh, project_initial
from .model import ConfigurationError, initial_mass, initial_weighted_mass
from .output import write_csv, write_svg
from .solver import oracle_study, run

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3

MASS_RTOL = 1e-8
MONOTONE_SLACK = 1e-12
NEGATIVE_THRESHOLD = -1e-10
GAP_RTOL = 1e-10
JACOBIAN_RTOL = 1e-6
ORDER_BAND = (1.5, 2.5)


def conserved_quantity(cfg: RunConfig) -> float:
    if cfg.params.symmetric:
        return initial_mass(cfg.initial, cfg.geometry)
    return initial_weighted_mass(cfg.initial, cfg.geometry, cfg.params)


def invariant_violations(series: dg.RunSeries, symmetric: bool) -> list[str]:
    """Mass drift, entropy growth and negativity along a run, as messages."""
    out = []
    col = series.column("mass" if symmetric else "weighted_mass")
    drift = float(np.max(np.abs(col - col[0])) / abs(col[0]))
    if drift > MASS_RTOL:
        out.append(f"{'mass' if symmetric else 'weighted mass'} drift {drift:.3e} exceeds {MASS_RTOL:g}")
    H = series.column("H")
    grow = np.nonzero(H[1:] > H[:-1] * (1 + MONOTONE_SLACK))[0]
    if grow.size:
        out.append(f"entropy increased at {grow.size} record(s), first at t={series.records[grow[0] + 1].t:g}")
    if series.min_value < NEGATIVE_THRESHOLD:
        out.append(f"negative cell value {series.min_value:.3e}")
    return out


def cmd_run(cfg: RunConfig, strict: bool = False, svg: str | None = None, out=None) -> int:
    out = out or sys.stdout
    series = run(cfg)
    if cfg.csv_path:
        write_csv(series, cfg.csv_path)
    svg = svg or cfg.svg_path
    if svg:
        write_svg(series, svg)
    eq = series.eq
    print(f"steady state: v_inf={eq.v_inf!r} u_inf={eq.u_inf!r}", file=out)
    print(f"records: {len(series)}  final t={series.records[-1].t:g}  H/H0="
          f"{series.records[-1].H / series.records[0].H if series.records[0].H > 0 else 0.0:.3e}", file=out)
    try:
        rate, r2 = dg.fit_decay_rate(series, cfg.fit_window)
        print(f"decay rate: lambda={rate!r} R2={r2!r}", file=out)
    except dg.FitError as exc:
        print(f"decay rate: not fit ({exc})", file=out)
    if series.failed:
        print(f"solver failure: {series.message}", file=out)
        return EXIT_SOLVER
    problems = invariant_violations(series, cfg.params.symmetric)
    for p in problems:
        print(f"invariant violated: {p}", file=out)
    if strict and problems:
        return EXIT_CHECK
    return EXIT_OK


def cmd_steady(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    mass = conserved_quantity(cfg)
    eq = dg.steady_state(cfg.params, cfg.geometry, mass)
    p, g = cfg.params, cfg.geometry
    balance = p.nu0 * eq.v_inf**p.alpha - p.mu0 * eq.u_inf**p.beta
    balance_rel = abs(balance) / (p.nu0 * eq.v_inf**p.alpha)
    if p.symmetric:
        carried = g.field_area * eq.v_inf + g.road_length * eq.u_inf
    else:
        carried = g.field_area / p.alpha * eq.v_inf + g.road_length / p.beta * eq.u_inf
    mass_rel = abs(carried - mass) / mass
    print(f"v_inf={eq.v_inf!r}", file=out)
    print(f"u_inf={eq.u_inf!r}", file=out)
    print(f"{'mass' if p.symmetric else 'weighted_mass'}={mass!r}", file=out)
    print(f"balance_residual={balance_rel!r}", file=out)
    print(f"mass_residual={mass_rel!r}", file=out)
    return EXIT_OK


def jacobian_fd_error(mesh, params, rng, n_states: int, dt: float = 0.1, eps: float = 1e-6) -> float:
    """Worst relative mismatch between the Jacobian and central differences of the residual."""
    worst = 0.0
    n = mesh.n_unknowns
    for _ in range(n_states):
        x = rng.uniform(0.5, 2.0, n)
        old = State.unpack(rng.uniform(0.5, 2.0, n), mesh)
        J = jacobian(State.unpack(x, mesh), dt, mesh, params).toarray()
        fd = np.empty((n, n))
        for k in range(n):
            h = eps * max(1.0, abs(x[k]))
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            rp = residual(State.unpack(xp, mesh), old, dt, mesh, params)
            rm = residual(State.unpack(xm, mesh), old, dt, mesh, params)
            fd[:, k] = (rp - rm) / (2 * h)
        worst = max(worst, float(np.max(np.abs(J - fd)) / np.max(np.abs(J))))
    return worst


@dataclass
class CheckReport:
    pw_max_ratio: float = 0.0
    pw_finite: bool = True
    gap_max_error: float = 0.0
    gap_min: float = np.inf
    jensen_ok: bool = True
    jacobian_error: float = 0.0
    lines: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.gap_max_error <= GAP_RTOL and self.jacobian_error <= JACOBIAN_RTOL


def run_checks(cfg: RunConfig) -> CheckReport:
    rng = np.random.default_rng(cfg.seed)
    mesh = build_mesh(cfg.geometry, cfg.check.nx, cfg.check.ny)
    p = cfg.params
    # the gap identity is a statement about the symmetric entropy
    sym = replace(p, beta=p.alpha)
    rep = CheckReport()
    for state in iq.random_states(mesh, cfg.check.samples, rng):
        mass = float(np.sum(state.V) * mesh.cell_area + np.sum(state.U) * mesh.hx)
        eq = dg.steady_state(sym, cfg.geometry, mass)
        lhs, rhs, ratio = iq.pw_ratio(state, eq, mesh, p)
        if ratio is not None:
            if not np.isfinite(ratio):
                rep.pw_finite = False
            rep.pw_max_ratio = max(rep.pw_max_ratio, ratio)
        elif lhs > 0:
            rep.pw_finite = False
        H = dg.entropy(state, eq, mesh, sym)
        gap = iq.beckner_gap(state, eq, mesh, p.alpha)
        rep.gap_min = min(rep.gap_min, gap)
        rep.gap_max_error = max(rep.gap_max_error, iq.gap_identity_error(state, eq, mesh, sym, H))
        mean_root, norm = iq.jensen_sides(state, eq, mesh, p.alpha)
        if mean_root > norm * (1 + 1e-12):
            rep.jensen_ok = False
    rep.jacobian_error = jacobian_fd_error(mesh, p, rng, cfg.check.jacobian_states)
    rep.lines = [
        f"samples={cfg.check.samples} mesh={cfg.check.nx}x{cfg.check.ny} seed={cfg.seed}",
        f"pw_max_ratio={rep.pw_max_ratio!r} finite={rep.pw_finite}",
        f"beckner_gap_min={rep.gap_min!r}",
        f"gap_identity_max_error={rep.gap_max_error!r} (tol {GAP_RTOL:g})",
        f"jensen_bound_holds={rep.jensen_ok}",
        f"jacobian_fd_max_error={rep.jacobian_error!r} (tol {JACOBIAN_RTOL:g})",
    ]
    return rep


def cmd_check(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    rep = run_checks(cfg)
    for line in rep.lines:
        print(line, file=out)
    return EXIT_OK if rep.passed else EXIT_CHECK


def single_cell_values(cfg: RunConfig) -> tuple[float, float]:
    state = project_initial(cfg.initial, build_mesh(cfg.geometry, 1, 1))
    return float(state.V[0, 0]), float(state.U[0])


def cmd_oracle(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    v0, u0 = single_cell_values(cfg)
    oc = cfg.oracle
    study = oracle_study(cfg.params, cfg.geometry, v0, u0, oc.t_end, oc.dts, oc.dt_fine)
    for w in study.warnings:
        print(f"warning: {w}", file=out)
        logging.getLogger(__name__).warning(w)
    for dt, err in zip(study.dts, study.errors):
        print(f"dt={dt!r} error={err!r}", file=out)
    bad = False
    for r in study.ratios:
        if np.isnan(r):
            print("ratio=undefined (zero error)", file=out)
            continue
        print(f"ratio={r!r} order={float(np.log2(r))!r}", file=out)
        if not ORDER_BAND[0] <= r <= ORDER_BAND[1]:
            bad = True
    return EXIT_CHECK if bad else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fieldroad", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=["run", "steady", "check", "oracle"])
    ap.add_argument("--config", required=True, help="JSON configuration file (see fieldroad.config)")
    ap.add_argument("--strict", action="store_true", help="exit 3 when a run invariant is violated")
    ap.add_argument("--svg", help="write an SVG chart of H against t (run only)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
    except (ConfigurationError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "run":
            return cmd_run(cfg, strict=args.strict, svg=args.svg)
        if args.command == "steady":
            return cmd_steady(cfg)
        if args.command == "check":
            return cmd_check(cfg)
        return cmd_oracle(cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
