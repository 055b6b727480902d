import math

import numpy as np
import pytest

from resexplore import model
from resexplore.errors import AdmissibilityError, DomainError

import oracles


def test_set_epsilons(params_a, params_b, params_s):
    assert params_a.epsilon == pytest.approx(0.158114, rel=1e-5)
    assert params_b.epsilon == pytest.approx(0.0141421, rel=1e-5)
    assert params_s.epsilon == pytest.approx(0.1, rel=1e-12)


def test_closed_forms_at_reference_values(params_b):
    # alpha = 1/2, r = 0.02: U(R) = 10 sqrt(R), slope constant c_star = 100
    assert model.hotelling_value(params_b, 4.0) == pytest.approx(20.0, rel=1e-14)
    assert model.hotelling_price(params_b, 4.0) == pytest.approx(2.5, rel=1e-14)
    assert params_b.c_star == pytest.approx(100.0, rel=1e-14)


def test_utility_and_conjugate_definitions(params_a):
    c = np.linspace(0.1, 5, 50)
    p = 0.7
    # brute-force sup over a fine consumption grid
    grid = np.linspace(1e-6, 50, 400001)
    brute = np.max(model.utility(params_a, grid) - grid * p)
    assert model.conjugate(params_a, p) == pytest.approx(brute, rel=1e-8)
    assert np.allclose(model.utility(params_a, c), c**0.5 / 0.5)


def test_conjugate_inverse_round_trip(params_a):
    p = np.geomspace(1e-3, 1e3, 40)
    back = model.conjugate_inverse(params_a, model.conjugate(params_a, p))
    assert np.allclose(back, p, rtol=1e-12)


def test_hotelling_identity_u_star(params_a):
    R = np.geomspace(1e-4, 1e4, 30)
    lhs = model.conjugate(params_a, model.hotelling_price(params_a, R))
    assert np.allclose(lhs, params_a.r * model.hotelling_value(params_a, R), rtol=1e-12)


def test_hotelling_against_oracle():
    p = model.validate(0.3, 0.05, 1.0, 2.0, 0.1)
    for R in (0.01, 1.0, 17.0):
        assert model.hotelling_value(p, R) == pytest.approx(oracles.hotelling_value(0.3, 0.05, R), rel=1e-13)
        assert model.hotelling_price(p, R) == pytest.approx(oracles.hotelling_price(0.3, 0.05, R), rel=1e-13)


def test_reserves_from_price_inverse(params_b):
    R = np.geomspace(1e-3, 1e3, 25)
    assert np.allclose(model.hotelling_reserves_from_price(params_b, model.hotelling_price(params_b, R)), R)


def test_scalar_in_scalar_out(params_a):
    assert isinstance(model.hotelling_value(params_a, 1.0), float)
    assert isinstance(model.hotelling_price(params_a, np.float64(2.0)), float)
    assert model.hotelling_value(params_a, np.array([1.0, 2.0])).shape == (2,)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(alpha=0.0, r=0.02, a=1, lam=1, k=1),
        dict(alpha=1.0, r=0.02, a=1, lam=1, k=1),
        dict(alpha=0.5, r=0.0, a=1, lam=1, k=1),
        dict(alpha=0.5, r=0.02, a=-1, lam=1, k=1),
        dict(alpha=0.5, r=0.02, a=1, lam=0, k=1),
        dict(alpha=0.5, r=0.02, a=1, lam=1, k=-0.1),
        dict(alpha=0.5, r=0.02, a=1, lam=1, k=float("nan")),
        dict(alpha=0.5, r=0.02, a=1, lam=1, k=True),
    ],
)
def test_validate_rejects_domain(kwargs):
    with pytest.raises(DomainError):
        model.validate(**kwargs)


def test_validate_admissibility():
    # U(0.01) = 1, so k / lam = 2 is inadmissible
    with pytest.raises(AdmissibilityError):
        model.validate(0.5, 0.02, 0.01, 1.0, 2.0)
    p = model.validate(0.5, 0.02, 0.01, 1.0, 1.0)
    assert p.epsilon == pytest.approx(1.0)


def test_k_zero_accepted():
    p = model.validate(0.5, 0.02, 1.0, 1.0, 0.0)
    assert p.epsilon == 0.0


def test_price_domain(params_a):
    with pytest.raises(DomainError):
        model.hotelling_price(params_a, 0.0)
    with pytest.raises(DomainError):
        model.hotelling_value(params_a, -1.0)
    with pytest.raises(DomainError):
        model.conjugate(params_a, 0.0)


def test_params_are_frozen(params_a):
    with pytest.raises(Exception):
        params_a.alpha = 0.3
    assert params_a.as_dict() == {"alpha": 0.5, "r": 0.02, "a": 2.5, "lambda": 2.0, "k": 5.0}


def test_full_information_value_matches_poisson_sum(params_a):
    for x in (0.0, 0.3, 1.0, 4.0):
        for R in (0.0, 0.5, 3.0):
            ref = oracles.poisson_expectation(
                lambda n: oracles.hotelling_value(0.5, 0.02, R + 2.5 * n), params_a.lam * x
            )
            assert model.full_information_value(params_a, x, R) == pytest.approx(ref, rel=1e-11, abs=1e-13)


def test_full_information_value_at_zero_area(params_b):
    R = np.linspace(0, 3, 7)
    assert np.allclose(model.full_information_value(params_b, 0.0, R), model.hotelling_value(params_b, R))


def test_full_information_value_large_mean(params_b):
    # lam x = 500: many terms, still converges to the Poisson oracle
    x = 50.0
    ref = oracles.poisson_expectation(lambda n: oracles.hotelling_value(0.5, 0.02, 1.0 + 0.5 * n), 500.0, n_max=1200)
    assert model.full_information_value(params_b, x, 1.0) == pytest.approx(ref, rel=1e-10)


def test_full_information_value_exceeds_hotelling(params_a):
    R = np.linspace(0.1, 5, 11)
    assert np.all(model.full_information_value(params_a, 0.5, R) > model.hotelling_value(params_a, R))
    assert math.isclose(model.full_information_value(params_a, 0.5, 1.0),
                        float(model.full_information_value(params_a, 0.5, np.array([1.0]))[0]))
