"""Property-based checks over randomly drawn parameters."""

import math

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from resexplore import config, dpp, model, solver
from resexplore.export import format_value
from resexplore.quadrature import segment_weights

import oracles

alphas = st.floats(0.05, 0.95)
rates = st.floats(0.005, 0.2)
positive = st.floats(0.05, 20.0)
eps_in = st.floats(0.01, 0.99)


@st.composite
def admissible(draw):
    al, r, a, lam, eps = draw(alphas), draw(rates), draw(positive), draw(positive), draw(eps_in)
    k = eps * lam * oracles.hotelling_value(al, r, a)
    return model.validate(al, r, a, lam, k)


@given(alphas, rates, st.floats(1e-3, 1e3))
def test_conjugate_round_trip(al, r, p):
    params = model.validate(al, r, 1.0, 1.0, 0.0)
    q = model.conjugate_inverse(params, model.conjugate(params, p))
    assert math.isclose(q, p, rel_tol=1e-9)


@given(alphas, rates, st.floats(1e-3, 1e4))
def test_hotelling_identity(al, r, R):
    params = model.validate(al, r, 1.0, 1.0, 0.0)
    lhs = model.conjugate(params, model.hotelling_price(params, R))
    assert math.isclose(lhs, r * model.hotelling_value(params, R), rel_tol=1e-10)


@given(st.floats(1e-8, 50.0), st.floats(1e-3, 100.0))
def test_segment_weights_positive_and_sum(h, lam):
    decay, w0, w1 = segment_weights(h, lam)
    # decay underflows to 0 for lam h beyond ~745
    assert 0 <= decay <= 1 and w0 >= 0 and w1 >= 0
    assert math.isclose(w0 + w1, -math.expm1(-lam * h), rel_tol=1e-10, abs_tol=1e-300)
    # the near end carries at least as much weight as the far end
    assert w1 >= w0 * (1 - 1e-12)


@given(admissible())
def test_anchor_root_solves_equation(params):
    r0 = solver.frontier_at_zero(params)
    y = params.a / r0
    assert abs(oracles.anchor_lhs_minus_one(params.alpha, params.epsilon, y)) < 1e-8 * max(1.0, y)
    assert r0 > 0


@given(admissible())
def test_anchor_above_lower_bound(params):
    assert solver.lower_bound_curve(params, 0.0) <= solver.frontier_at_zero(params) * (1 + 1e-9)


@given(admissible(), st.floats(0.0, 5.0), st.floats(0.0, 50.0))
def test_full_information_dominates_hotelling(params, x, R):
    fi = model.full_information_value(params, x, R)
    assert fi >= model.hotelling_value(params, R) * (1 - 1e-12)


@given(st.floats(0.05, 0.95), st.floats(0, 50), st.floats(0, 50))
def test_inner_sup_closed_form(al, A, B):
    params = model.validate(al, 0.02, 1.0, 1.0, 0.0)
    exact = (A ** (1 / al) + B ** (1 / al)) ** al
    got = float(dpp.inner_sup(params, A, B))
    assert math.isclose(got, exact, rel_tol=1e-9, abs_tol=1e-12)
    assert got >= max(A, B) * (1 - 1e-12)


@given(st.floats(-10, 10), st.floats(0.01, 5))
def test_golden_max_finds_vertex(c, w):
    lo, hi = np.array([c - w]), np.array([c + 2 * w])
    arg, val = dpp.golden_max(lambda s: -(s - c) ** 2, lo, hi)
    assert abs(arg[0] - c) < 1e-7 * max(1.0, w)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_value_round_trip(v):
    assert float(format_value(v)) == v


@settings(suppress_health_check=[HealthCheck.too_slow], max_examples=50)
@given(admissible(), st.floats(0.1, 5.0), st.integers(0, 2**62), st.integers(1, 10**6))
def test_config_round_trip(params, x_max, seed, n):
    cfg = config.RunConfig(params, config.GridConfig(x_max, None, 0.01),
                           config.SimulationConfig(x0=x_max / 2, R0=1.5, n_paths=n, base_seed=seed))
    assert config.parse_config(config.serialize_config(cfg)) == cfg


@settings(max_examples=40, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(x=st.floats(0.001, 1.0), dR=st.floats(1e-3, 5.0), frac=st.floats(0.0, 1.0))
def test_consumption_segment_price_rule(surface_b, x, dR, frac):
    from resexplore.simulate import consumption_segment

    rs = float(surface_b.frontier.r_star_at(x))
    seg = consumption_segment(x, rs + dR, surface_b)
    assume(math.isfinite(seg.duration))
    t = frac * seg.duration
    R = float(seg.reserves(t))
    assert rs * (1 - 1e-9) <= R <= rs + dR
    assert math.isclose(surface_b.price_at(x, R), seg.price0 * math.exp(0.02 * t), rel_tol=1e-6)


@settings(max_examples=40, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(x=st.floats(0.0, 1.0), R1=st.floats(0.0, 10.0), R2=st.floats(0.0, 10.0))
def test_value_monotone_and_sandwiched(surface_a, x, R1, R2):
    lo, hi = sorted((R1, R2))
    v_lo, v_hi = surface_a.value_at(x, lo), surface_a.value_at(x, hi)
    assert v_lo <= v_hi * (1 + 1e-12)
    p = surface_a.params
    assert v_hi >= model.hotelling_value(p, hi) * (1 - 1e-9)
    assert v_hi <= model.full_information_value(p, x, hi) * (1 + 1e-9)
