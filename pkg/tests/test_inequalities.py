import dataclasses

import numpy as np
import pytest

from fieldroad import diagnostics as dg
from fieldroad import inequalities as iq
from fieldroad.mesh import State, build_mesh, project_initial, total_mass
from fieldroad.model import constant_data
from fieldroad.solver import simulate


def mass_consistent_eq(state, mesh, params):
    return dg.steady_state(params, mesh.geom, total_mass(state, mesh))


def test_rho_is_probability(case1, params22, rng):
    mesh = build_mesh(case1[0], 8, 4)
    for m in (1.0, 2500.0, 1e5):
        eq = dg.steady_state(params22, case1[0], m)
        assert iq.rho_weights(eq, mesh).total() == pytest.approx(1.0, abs=1e-12)


def test_f_at_equilibrium(case1, params22):
    mesh = build_mesh(case1[0], 8, 4)
    eq = dg.steady_state(params22, case1[0], 2500.0)
    st_ = State(0, np.full((8, 4), eq.v_inf), np.full(8, eq.u_inf))
    f = iq.build_f(st_, eq, 2.0)
    assert np.allclose(f.field, 1, rtol=0, atol=1e-15) and np.allclose(f.road, 1, rtol=0, atol=1e-15)
    assert iq.mean_f(f, iq.rho_weights(eq, mesh)) == pytest.approx(1.0, abs=1e-13)
    assert iq.pw_ratio(st_, eq, mesh, params22)[2] is None
    lhs, rhs, _ = iq.pw_ratio(st_, eq, mesh, params22)
    assert lhs == pytest.approx(0, abs=1e-25) and rhs == pytest.approx(0, abs=1e-20)
    assert iq.beckner_gap(st_, eq, mesh, 2.0) == pytest.approx(0, abs=1e-14)


def test_f_single_cell_bump(case1, params22):
    mesh = build_mesh(case1[0], 4, 2)
    eq = dg.steady_state(params22, case1[0], 2500.0)
    V = np.full((4, 2), eq.v_inf)
    V[2, 1] = 2 ** 0.5 * eq.v_inf
    f = iq.build_f(State(0, V, np.full(4, eq.u_inf)), eq, 2.0)
    assert f.field[2, 1] == pytest.approx(2.0, rel=1e-14)


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_root_mean_is_relative_mass(case1, rng, alpha):
    p = dataclasses.replace(case1[1], alpha=alpha, beta=alpha)
    mesh = build_mesh(case1[0], 8, 4)
    eq = dg.steady_state(p, case1[0], 2500.0)
    for st_ in iq.random_states(mesh, 30, rng):
        f = iq.build_f(st_, eq, alpha)
        assert f.integrate(iq.rho_weights(eq, mesh), 1 / alpha) == pytest.approx(total_mass(st_, mesh) / 2500.0, rel=1e-12)


def test_pw_constant_in_x_only_mismatch(case1, params22):
    mesh = build_mesh(case1[0], 6, 1)
    V = np.full((6, 1), 2.0)
    U = np.full(6, 0.5)
    st_ = State(0, V, U)
    eq = mass_consistent_eq(st_, mesh, params22)
    lhs, rhs, ratio = iq.pw_ratio(st_, eq, mesh, params22)
    a = 2.0
    mismatch = mesh.hx * 6 * (a * 5 * 4.0 - a * 1 * 0.25) ** 2
    assert rhs == pytest.approx(mismatch, rel=1e-14)
    assert lhs > 0 and ratio == pytest.approx(lhs / rhs)


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_gap_identity_random_states(case1, rng, alpha):
    p = dataclasses.replace(case1[1], alpha=alpha, beta=alpha)
    mesh = build_mesh(case1[0], 8, 4)
    for st_ in iq.random_states(mesh, 60, rng):
        eq = mass_consistent_eq(st_, mesh, p)
        H = dg.entropy(st_, eq, mesh, p)
        assert iq.gap_identity_error(st_, eq, mesh, p, H) <= 1e-10


def test_gap_and_jensen_on_random_states(case1, params22, rng):
    mesh = build_mesh(case1[0], 8, 4)
    eq = dg.steady_state(params22, case1[0], 2500.0)  # deliberately not mass-consistent
    for st_ in iq.random_states(mesh, 500, rng, scale=3.0):
        assert iq.beckner_gap(st_, eq, mesh, 2.0) >= -1e-12
        mean_root, norm = iq.jensen_sides(st_, eq, mesh, 2.0)
        assert mean_root <= norm * (1 + 1e-12)


def test_pw_ratio_bounded_on_samples(case1, params22, rng):
    mesh = build_mesh(case1[0], 8, 4)
    ratios = []
    for st_ in iq.random_states(mesh, 200, rng):
        eq = mass_consistent_eq(st_, mesh, params22)
        lhs, rhs, r = iq.pw_ratio(st_, eq, mesh, params22)
        assert lhs >= 0 and rhs >= 0
        if r is not None:
            ratios.append(r)
    assert ratios and np.all(np.isfinite(ratios))


def test_entropy_dissipation_ratio(case1, params22):
    geom, _, data = case1
    s = simulate(geom, params22, data, 16, 4, 0.5, 50.0)
    r = iq.entropy_dissipation_ratio(s)
    assert r > 0
    for rec in s.records:
        rec.H *= 7.0
        rec.D *= 7.0
    assert iq.entropy_dissipation_ratio(s) == pytest.approx(r, rel=1e-14)


def test_entropy_dissipation_ratio_at_equilibrium(case1, params22):
    geom = case1[0]
    eq = dg.steady_state(params22, geom, 2500.0)
    s = simulate(geom, params22, constant_data(geom, eq.v_inf, eq.u_inf), 4, 2, 0.5, 2.0)
    with pytest.raises(ValueError):
        iq.entropy_dissipation_ratio(s)
