import math

import numpy as np
import pytest

from resexplore import model, solver
from resexplore.errors import DomainError, FrontierNotBracketed, GridError, NoRoot

import oracles
from conftest import SET_A, SET_B


# --- frontier anchor ------------------------------------------------------------

@pytest.mark.parametrize("d", [SET_A, SET_B], ids=["A", "B"])
def test_frontier_at_zero_matches_oracle(d):
    p = model.validate(d["alpha"], d["r"], d["a"], d["lam"], d["k"])
    ref = oracles.anchor_root(d["alpha"], d["r"], d["a"], d["lam"], d["k"])
    assert solver.frontier_at_zero(p) == pytest.approx(ref, rel=1e-9)


def test_anchor_values_are_stable(params_a, params_b):
    # frozen regression values (derived from the bisection oracle)
    assert solver.frontier_at_zero(params_a) == pytest.approx(1.870327, rel=1e-6)
    assert solver.frontier_at_zero(params_b) == pytest.approx(3.064925, rel=1e-6)


def test_anchor_root_sign_convention(params_a):
    # the left side minus one is negative for small y = a/R0 and positive for large y
    assert solver._anchor_equation(params_a, 1e-6) < 0
    assert solver._anchor_equation(params_a, 1e6) > 0


def test_anchor_decreases_with_epsilon():
    a, lam, r = 1.0, 1.0, 0.02
    u_a = oracles.hotelling_value(0.5, r, a)
    roots = []
    for eps in (0.01, 0.5, 0.99):
        p = model.validate(0.5, r, a, lam, eps * lam * u_a)
        roots.append(solver.frontier_at_zero(p))
    assert roots[0] > roots[1] > roots[2]


def test_anchor_needs_interior_epsilon():
    with pytest.raises(NoRoot):
        solver.frontier_at_zero(model.validate(0.5, 0.02, 1.0, 1.0, 0.0))


# --- grid -----------------------------------------------------------------------

def test_default_grid_steps(params_a, params_b):
    ga = solver.default_grid(params_a)
    gb = solver.default_grid(params_b)
    assert ga.x_step == pytest.approx(0.01)
    assert gb.x_step == pytest.approx(0.01)
    assert gb.r_step == pytest.approx(0.01)
    assert ga.r_step == pytest.approx(0.01)
    assert ga.x_max == pytest.approx(1.0)
    # first cell split geometrically
    assert np.allclose(ga.x_nodes[:6], [0, 0.000625, 0.00125, 0.0025, 0.005, 0.01])


def test_default_grid_aligns_r_step_with_find_size():
    p = model.validate(0.5, 0.02, 0.37, 3.0, 0.5)
    g = solver.default_grid(p)
    assert (p.a / g.r_step) == pytest.approx(round(p.a / g.r_step), abs=1e-9)


def test_grid_validation():
    with pytest.raises(GridError):
        solver.SolverGrid(np.array([0.1, 0.2]), np.arange(5) * 0.1, 0.1, 0.1)
    with pytest.raises(GridError):
        solver.SolverGrid(np.array([0.0, 0.2, 0.1]), np.arange(5) * 0.1, 0.1, 0.1)
    with pytest.raises(GridError):
        solver.SolverGrid(np.array([0.0, 0.1]), np.array([0, 0.1, 0.3]), 0.1, 0.1)


def test_refined_grid_halves_steps(params_b):
    g = solver.default_grid(params_b)
    f = g.refined()
    assert len(f.x_nodes) == 2 * len(g.x_nodes) - 1
    assert f.r_step == pytest.approx(g.r_step / 2)
    assert np.allclose(f.x_nodes[::2], g.x_nodes)


def test_solve_rejects_k_zero():
    p = model.validate(0.5, 0.02, 1.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        solver.solve(p, solver.SolverGrid.uniform(0.1, 3.0, 0.01, 0.01))


def test_solve_rejects_short_r_grid(params_b):
    g = solver.SolverGrid.uniform(0.2, 1.0, 0.01, 0.01)
    with pytest.raises(GridError):
        solver.solve(params_b, g)


def test_solve_rejects_grid_below_anchor(params_b):
    r0 = solver.frontier_at_zero(params_b)
    g = solver.SolverGrid(np.array([0.0, 0.01]), 0.01 * np.arange(int(r0 / 0.01) - 3), 0.01, 0.01)
    with pytest.raises(GridError):
        solver.solve(params_b, g)


def test_locate_frontier_unbracketed_rows():
    R = 0.1 * np.arange(20)
    # slope stays above c everywhere
    with pytest.raises(FrontierNotBracketed):
        solver._locate_frontier(5.0 * R**2 + 3.0 * R, R, 0.1, 1.0)
    # slope already below c at R = 0
    with pytest.raises(FrontierNotBracketed):
        solver._locate_frontier(0.5 * R, R, 0.1, 1.0)


def test_locate_frontier_on_quadratic():
    # G = 2R - R^2 / 2 has slope 2 - R, crossing c = 1.25 at R = 0.75
    R = 0.05 * np.arange(60)
    rs, Gs = solver._locate_frontier(2 * R - R**2 / 2, R, 0.05, 1.25)
    assert rs == pytest.approx(0.75, abs=1e-9)
    assert Gs == pytest.approx(2 * 0.75 - 0.75**2 / 2, rel=1e-9)


def test_misaligned_find_size(params_b):
    g = solver.SolverGrid.uniform(0.1, 4.0, 0.01, 0.03)
    with pytest.raises(GridError):
        solver.solve(params_b, g)


def test_single_x_node(params_a):
    g = solver.SolverGrid(np.array([0.0]), 0.01 * np.arange(300), 0.01, 0.01)
    s = solver.solve(params_a, g)
    assert np.allclose(s.v[0], model.hotelling_value(params_a, g.r_nodes))
    assert len(s.frontier.r_star) == 1


# --- surface structure -------------------------------------------------------------

def test_boundary_row_is_hotelling(surface_a):
    R = surface_a.grid.r_nodes
    assert np.array_equal(surface_a.v[0], model.hotelling_value(surface_a.params, R))


def test_frontier_anchored(surface_a, surface_b):
    for s in (surface_a, surface_b):
        fr = s.frontier
        assert fr.r_star[0] == fr.r0
        assert fr.p_star[0] == pytest.approx(model.hotelling_price(s.params, fr.r0))
        assert abs(fr.r_star[1] / fr.r0 - 1) < 1e-3


def test_frontier_strictly_decreasing(surface_a, surface_b, surface_s):
    for s in (surface_a, surface_b, surface_s):
        assert np.all(np.diff(s.frontier.r_star) < 0)
        assert np.all(s.frontier.r_star > 0)


def test_frontier_between_bounds(surface_a, surface_b):
    for s in (surface_a, surface_b):
        p = s.params
        upper = solver.upper_bound_reserve(p, s.grid.x_max)
        for x, rs in zip(s.frontier.x_nodes, s.frontier.r_star):
            assert solver.lower_bound_curve(p, float(x)) <= rs <= upper


def test_lower_bound_curve_continuous_at_zero(params_a):
    assert solver.lower_bound_curve(params_a, 1e-9) == pytest.approx(solver.lower_bound_curve(params_a, 0.0), rel=1e-6)
    assert solver.lower_bound_curve(params_a, 0.0) < solver.frontier_at_zero(params_a)


def test_upper_bound_closed_form(params_b):
    x = 1.0
    Rc = solver.upper_bound_reserve(params_b, x)
    # at Rc the sufficient condition holds with equality
    lam, a, k = params_b.lam, params_b.a, params_b.k
    lhs = a * model.hotelling_price(params_b, Rc) * lam * x
    assert lhs == pytest.approx(k / lam * (1 - math.exp(-lam * x)), rel=1e-12)


def test_v_equals_mv_in_exploration_and_exceeds_it_above(surface_a, surface_b):
    for s in (surface_a, surface_b):
        mask = s.exploration_mask
        # identical up to round-off in the final re-evaluation of M V
        assert np.allclose(s.v[mask], s.mv[mask], rtol=1e-14, atol=0)
        cons = ~mask
        cons[0] = False
        assert np.all(s.v[cons] >= s.mv[cons] * (1 - 1e-12))
        # strictly above, away from the frontier
        far = cons & (s.grid.r_nodes[None, :] > s.frontier.r_star[:, None] + 5 * s.grid.r_step)
        assert np.all(s.v[far] > s.mv[far])


def test_value_monotone_in_r_and_x(surface_a, surface_b):
    for s in (surface_a, surface_b):
        assert np.all(np.diff(s.v, axis=1) >= 0)
        assert np.all(np.diff(s.v, axis=0) >= -1e-12 * s.v[1:])


def test_surface_is_read_only(surface_a):
    with pytest.raises(ValueError):
        surface_a.v[1, 1] = 0.0


# --- exploration operator -------------------------------------------------------------

def test_operator_at_zero_area(surface_b):
    R = np.array([0.0, 0.3, 2.0])
    assert np.allclose(solver.apply_exploration_operator(surface_b, 0.0, R), model.hotelling_value(surface_b.params, R))


def test_operator_reproduces_full_information_recursion():
    # with k = 0 and V = E[U(. + a N_x)], M V is the one-step Poisson recursion of the same function
    p = model.validate(0.5, 0.02, 0.5, 10.0, 0.0)
    fi = lambda y, Rq: model.full_information_value(p, y, Rq)  # noqa: E731
    x_nodes = np.linspace(0, 0.4, 4001)
    for x, R in ((0.1, 0.5), (0.4, 1.0)):
        got = float(solver.exploration_operator(p, fi, x, R, x_nodes)[0])
        assert got == pytest.approx(model.full_information_value(p, x, R), rel=1e-6)
        ref = oracles.trapezoid_exploration(0.5, 0.02, 0.5, 10.0, 0.0, lambda y, q: fi(y, q), x, R, n=40000)
        assert got == pytest.approx(ref, rel=1e-6)


def test_operator_on_surface_matches_trapezoid(surface_b):
    p = surface_b.params
    x, R = 0.1, 0.5
    got = solver.apply_exploration_operator(surface_b, x, R)
    ref = oracles.trapezoid_exploration(p.alpha, p.r, p.a, p.lam, p.k,
                                        lambda y, q: surface_b.value_at(y, q), x, R, n=4000)
    assert got == pytest.approx(ref, rel=1e-6)


def test_operator_outside_solved_range(surface_b):
    with pytest.raises(GridError):
        solver.apply_exploration_operator(surface_b, 1.5, 0.3)


# --- frontier indicator -------------------------------------------------------------------

def test_indicator_marginal_at_zero(surface_b):
    c = surface_b.params.c_star
    for R in (0.5, 1.0, 2.5):
        assert solver.frontier_indicator(surface_b, 0.0, R) == pytest.approx(c, rel=1e-6)


def test_indicator_signs(surface_b):
    c = surface_b.params.c_star
    far = solver.upper_bound_reserve(surface_b.params, surface_b.grid.x_max) + 1.0
    assert solver.frontier_indicator(surface_b, 0.5, far) < c
    assert solver.frontier_indicator(surface_b, 0.5, 1e-3) > c


# --- consumption extension ---------------------------------------------------------------

def test_consumption_extension_identities(params_a, rng):
    r0 = solver.frontier_at_zero(params_a)
    u0 = model.hotelling_value(params_a, r0)
    assert solver.consumption_extension(params_a, u0, r0, r0) == pytest.approx(u0)
    R = r0 + rng.uniform(0, 50, 10)
    assert np.allclose(solver.consumption_extension(params_a, u0, r0, R), model.hotelling_value(params_a, R))


def test_consumption_extension_solves_ode(params_b, rng):
    al, c = params_b.alpha, params_b.c_star
    for _ in range(10):
        anchor, rs = rng.uniform(1, 30), rng.uniform(0.1, 3)
        R = rs + rng.uniform(0, 10)
        v = solver.consumption_extension(params_b, anchor, rs, R)
        deriv = al * c * (anchor ** (1 / al) + c * (R - rs)) ** (al - 1)
        assert deriv == pytest.approx(model.conjugate_inverse(params_b, params_b.r * v), rel=1e-10)


# --- value and price lookup -----------------------------------------------------------------

def test_value_at_nodes_and_above_grid(surface_a):
    g = surface_a.grid
    i, j = 40, 50
    assert surface_a.value_at(g.x_nodes[i], g.r_nodes[j]) == pytest.approx(surface_a.v[i, j], rel=1e-13)
    big = g.r_max + 10
    b = surface_a.frontier.intercept[i]
    assert surface_a.value_at(g.x_nodes[i], big) == pytest.approx((b + surface_a.params.c_star * big) ** 0.5)


def test_price_at_zero_area_is_hotelling(surface_a):
    R = np.array([0.3, 1.0, 5.0])
    assert np.allclose(surface_a.price_at(0.0, R), model.hotelling_price(surface_a.params, R))
    # and continuous as x -> 0+
    assert surface_a.price_at(1e-7, 5.0) == pytest.approx(model.hotelling_price(surface_a.params, 5.0), rel=1e-5)


def test_price_decreasing_in_reserves(surface_a, surface_b):
    for s in (surface_a, surface_b):
        P = s.price_table()[1:, 1:]
        assert np.all(np.diff(P, axis=1) < 0)


def test_price_in_exploration_region_follows_x_identity(surface_b):
    # dp/dx = lam (p(x, R + a) - p(x, R)) inside the exploration region; the right side is negative,
    # so the price falls with unexplored area (rises as exploration proceeds)
    p = surface_b.params
    x, h = 0.46, 1e-4
    R = surface_b.grid.r_nodes[5:40]
    assert np.all(R < surface_b.frontier.r_star_at(x))
    dpdx = (surface_b.price_at(x + h, R) - surface_b.price_at(x - h, R)) / (2 * h)
    rhs = p.lam * (surface_b.price_at(x, R + p.a) - surface_b.price_at(x, R))
    assert np.allclose(dpdx, rhs, rtol=5e-3)
    assert np.all(rhs < 0)


def test_price_matches_closed_form_in_consumption_region(surface_b):
    p = surface_b.params
    x = 0.5
    R = np.linspace(2.0, 3.5, 7)
    assert np.all(R > surface_b.frontier.r_star_at(x))
    h = 1e-6
    fd = (surface_b.value_at(x, R + h) - surface_b.value_at(x, R - h)) / (2 * h)
    assert np.allclose(surface_b.price_at(x, R), fd, rtol=1e-7)


def test_surface_a_b_frontiers_cross(surface_a, surface_b):
    d = surface_a.frontier.r_star - surface_b.frontier.r_star
    assert d[0] < 0 and d[-1] > 0
