"""Bracketing and bisection for monotone scalar equations."""

from __future__ import annotations

import math

from .errors import NoRoot


def bisect(f, lo: float, hi: float, *, xtol: float = 0.0, rtol: float = 1e-12, maxiter: int = 200) -> float:
    """Root of ``f`` on [lo, hi] given a sign change between the endpoints."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise NoRoot(f"no sign change on [{lo}, {hi}]")
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
        if hi - lo <= max(xtol, rtol * abs(mid)):
            break
    return 0.5 * (lo + hi)


def geometric_bracket(f, lo: float, hi: float, factor: float = 2.0):
    """Walk a geometric grid on [lo, hi] and return the first sign-changing pair."""
    if lo <= 0 or hi <= lo:
        raise ValueError("geometric_bracket needs 0 < lo < hi")
    a, fa = lo, f(lo)
    while a < hi:
        b = min(a * factor, hi)
        fb = f(b)
        if fa == 0.0 or (fa > 0) != (fb > 0):
            return a, b
        a, fa = b, fb
    raise NoRoot(f"no sign change on [{lo:g}, {hi:g}]")


def log_bisect(f, lo: float, hi: float, rtol: float = 1e-12) -> float:
    """Bisection in log-space; suited to roots spanning many decades."""
    root = bisect(lambda t: f(math.exp(t)), math.log(lo), math.log(hi), xtol=rtol / 4.0, rtol=0.0)
    return math.exp(root)
