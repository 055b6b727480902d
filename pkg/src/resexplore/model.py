"""Model primitives: parameters, CRRA utility, Hotelling closed forms.

Utility is u(c) = c**alpha / alpha with 0 < alpha < 1.  Every function here is a
pure function of an immutable :class:`ModelParams`, vectorised over its
array argument where that makes sense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, DomainError

__all__ = [
    "DerivedConstants",
    "ModelParams",
    "validate",
    "utility",
    "conjugate",
    "conjugate_inverse",
    "hotelling_value",
    "hotelling_price",
    "hotelling_reserves_from_price",
    "full_information_value",
]


@dataclass(frozen=True)
class DerivedConstants:
    """Constants that depend only on the primitives.

    Attributes
    ----------
    epsilon : float
        Dimensionless cost ratio k / (lambda * U(a)), in [0, 1].
    c_star : float
        Slope of U(R)**(1/alpha) in R; the threshold of the frontier test.
    u_prefactor : float
        ((1 - alpha) / r)**(1 - alpha) / alpha, so that U(R) = u_prefactor * R**alpha.
    """

    epsilon: float
    c_star: float
    u_prefactor: float


def _derive(alpha, r, a, lam, k):
    u_prefactor = ((1.0 - alpha) / r) ** (1.0 - alpha) / alpha
    c_star = (1.0 / alpha) * (alpha * r / (1.0 - alpha)) ** (1.0 - 1.0 / alpha)
    u_a = u_prefactor * a**alpha
    return DerivedConstants(epsilon=k / (lam * u_a), c_star=c_star, u_prefactor=u_prefactor)


@dataclass(frozen=True)
class ModelParams:
    """The five model primitives.

    ``lam`` is the discovery intensity per unit of explored area (``lambda``
    in configuration files).  Construct through :func:`validate` to get the
    domain and admissibility checks.
    """

    alpha: float
    r: float
    a: float
    lam: float
    k: float
    derived: DerivedConstants = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("alpha", "r", "a", "lam", "k"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "derived", _derive(self.alpha, self.r, self.a, self.lam, self.k))

    @property
    def epsilon(self) -> float:
        return self.derived.epsilon

    @property
    def c_star(self) -> float:
        return self.derived.c_star

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "r": self.r, "a": self.a, "lambda": self.lam, "k": self.k}


def validate(alpha, r, a, lam, k) -> ModelParams:
    """Check the primitives and return a :class:`ModelParams`.

    Raises :class:`DomainError` for values outside the model domain and
    :class:`AdmissibilityError` when U(a) < k / lambda.
    """
    values = {"alpha": alpha, "r": r, "a": a, "lambda": lam, "k": k}
    for name, v in values.items():
        if not isinstance(v, (int, float, np.floating, np.integer)) or isinstance(v, bool):
            raise DomainError(f"{name} must be a real number, got {v!r}")
        if not math.isfinite(v):
            raise DomainError(f"{name} must be finite, got {v!r}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    for name in ("r", "a", "lambda"):
        if values[name] <= 0.0:
            raise DomainError(f"{name} must be positive, got {values[name]}")
    if k < 0.0:
        raise DomainError(f"k must be non-negative, got {k}")
    params = ModelParams(alpha, r, a, lam, k)
    u_a = params.derived.u_prefactor * params.a**params.alpha
    if u_a < params.k / params.lam:
        raise AdmissibilityError(
            f"U(a) = {u_a:.6g} < k/lambda = {params.k / params.lam:.6g}; "
            "exploration is never worthwhile at zero reserves"
        )
    return params


def _as_array(v):
    arr = np.asarray(v, dtype=float)
    return arr, arr.ndim == 0


def _out(arr, scalar):
    return float(arr) if scalar else arr


def utility(params: ModelParams, c):
    """Flow utility c**alpha / alpha."""
    c, scalar = _as_array(c)
    if np.any(c < 0):
        raise DomainError("consumption must be non-negative")
    return _out(c**params.alpha / params.alpha, scalar)


def conjugate(params: ModelParams, p):
    """Convex conjugate u*(p) = sup_c {u(c) - c p} = ((1-alpha)/alpha) p**(alpha/(alpha-1))."""
    p, scalar = _as_array(p)
    if np.any(p <= 0):
        raise DomainError("price must be positive")
    al = params.alpha
    return _out((1.0 - al) / al * p ** (al / (al - 1.0)), scalar)


def conjugate_inverse(params: ModelParams, y):
    """Inverse of :func:`conjugate`: (alpha y / (1-alpha))**(1 - 1/alpha)."""
    y, scalar = _as_array(y)
    if np.any(y <= 0):
        raise DomainError("value must be positive")
    al = params.alpha
    return _out((al * y / (1.0 - al)) ** (1.0 - 1.0 / al), scalar)


def hotelling_value(params: ModelParams, R):
    """Present value of consuming reserves R optimally with no exploration."""
    R, scalar = _as_array(R)
    if np.any(R < 0):
        raise DomainError("reserves must be non-negative")
    return _out(params.derived.u_prefactor * R**params.alpha, scalar)


def hotelling_price(params: ModelParams, R):
    """Marginal value dU/dR; diverges at R = 0."""
    R, scalar = _as_array(R)
    if np.any(R <= 0):
        raise DomainError("reserves must be positive for a finite price")
    al = params.alpha
    return _out(al * params.derived.u_prefactor * R ** (al - 1.0), scalar)


def hotelling_reserves_from_price(params: ModelParams, p):
    """Inverse of :func:`hotelling_price`."""
    p, scalar = _as_array(p)
    if np.any(p <= 0):
        raise DomainError("price must be positive")
    al = params.alpha
    return _out((p / (al * params.derived.u_prefactor)) ** (1.0 / (al - 1.0)), scalar)


def full_information_value(params: ModelParams, x: float, R, truncation_tol: float = 1e-12):
    """E[U(R + a N_x)] with N_x ~ Poisson(lambda x).

    This is the value when exploration is free: the whole area is explored at
    once.  The series is summed until the cumulative Poisson mass exceeds
    1 - 1e-12 and the current term drops below ``truncation_tol`` (times the
    scale of the sum).
    """
    if x < 0:
        raise DomainError("unexplored area must be non-negative")
    R, scalar = _as_array(R)
    if np.any(R < 0):
        raise DomainError("reserves must be non-negative")
    mu = params.lam * x
    if mu == 0.0:
        return hotelling_value(params, R if not scalar else float(R))
    total = np.zeros_like(R)
    log_pmf = -mu
    cum = 0.0
    n = 0
    # Start the stopping test only past the mode so the terms are decreasing.
    mode = int(math.floor(mu))
    while True:
        pmf = math.exp(log_pmf)
        term = pmf * hotelling_value(params, R + params.a * n)
        total = total + term
        cum += pmf
        scale = max(float(np.max(total)), 1.0)
        if n > mode and cum > 1.0 - 1e-12 and float(np.max(term)) < truncation_tol * scale:
            break
        n += 1
        log_pmf += math.log(mu) - math.log(n)
        if n > 100_000:  # pragma: no cover - guards pathological inputs
            break
    return _out(total, scalar)
