"""
Shared numerical plumbing: monotone inversion, bracketed roots and checked quadrature.

All helpers work on scalar callables and raise lab.errors types instead of
returning sentinel values.
"""

import math
import warnings
from typing import Callable, Tuple

import numpy as np
from scipy import integrate

from lab.errors import NumericalFailure

BISECTION_STEPS = 80
MAX_EXPANSIONS = 1000


def safe_power(x, p):
    """x**p elementwise with 0**0 == 1 and 0**p == 0 for p > 0."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.power(np.abs(x), p)
    out = np.where((x == 0) & (p == 0), 1.0, out)
    return out if out.ndim else float(out)


def x_and_p_bounds(x: float, p: float, q: float) -> Tuple[Tuple[float, float, float], Tuple[float, float, float]]:
    """
    Evaluate both two-sided power inequalities for x, p, q >= 0.

    Returns:
        Tuple of (lower, middle, upper) triples for
        2^{-1}(1+x^p) <= (1+x)^p <= 2^p(1+x^p) and
        1+x^{p+q} <= (1+x^p)(1+x^q) <= 4(1+x^{p+q}).
    """
    xp = safe_power(x, p)
    xq = safe_power(x, q)
    xpq = safe_power(x, p + q)
    first = (0.5 * (1.0 + xp), (1.0 + x) ** p, 2.0 ** p * (1.0 + xp))
    second = (1.0 + xpq, (1.0 + xp) * (1.0 + xq), 4.0 * (1.0 + xpq))
    return first, second


def min_of_inverses(f_inv: Callable[[float], float], g_inv: Callable[[float], float], s: float) -> float:
    """Invert s = max{f(t), g(t)} for increasing f, g vanishing at 0."""
    return min(f_inv(s), g_inv(s))


def expand_bracket(pred: Callable[[float], bool], lo: float, hi: float) -> Tuple[float, float]:
    """
    Widen [lo, hi] geometrically until pred(lo) is False and pred(hi) is True.

    pred must be monotone: False below some threshold, True above it.
    """
    width = max(hi - lo, 1.0)
    for _ in range(MAX_EXPANSIONS):
        if not pred(lo):
            break
        lo -= width
        width *= 2.0
    else:
        raise NumericalFailure("lower bracket expansion failed", {"lo": lo})
    width = max(hi - lo, 1.0)
    for _ in range(MAX_EXPANSIONS):
        if pred(hi):
            break
        hi += width
        width *= 2.0
        if not math.isfinite(hi):
            break
    else:
        raise NumericalFailure("upper bracket expansion failed", {"hi": hi})
    if not math.isfinite(hi) or not pred(hi):
        raise NumericalFailure("upper bracket expansion overflowed", {"hi": hi})
    return lo, hi


def threshold_bisect(pred: Callable[[float], bool], lo: float = -1.0, hi: float = 1.0,
                     steps: int = BISECTION_STEPS) -> float:
    """
    Return inf{t : pred(t)} for a monotone predicate by bisection.

    Args:
        pred (Callable[[float], bool]): False below the threshold, True at and above it
        lo (float): Initial lower end of the bracket
        hi (float): Initial upper end of the bracket
        steps (int): Number of halvings after bracketing

    Returns:
        float: Upper end of the final bracket, so pred(result) holds
    """
    lo, hi = expand_bracket(pred, lo, hi)
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def increasing_root(fn: Callable[[float], float], target: float, lo: float, hi: float,
                    xtol: float = 1e-12, steps: int = 400) -> float:
    """
    Solve fn(x) = target for nondecreasing fn on [lo, hi] by bisection.

    The returned point is the smallest x in the final bracket with fn(x) >= target.
    """
    f_lo = fn(lo) - target
    f_hi = fn(hi) - target
    if f_lo > 0 or f_hi < 0:
        raise NumericalFailure(
            "no sign change in bracket",
            {"lo": lo, "hi": hi, "f_lo": f_lo, "f_hi": f_hi},
        )
    for _ in range(steps):
        if hi - lo <= xtol * max(1.0, abs(lo)):
            break
        mid = 0.5 * (lo + hi)
        if fn(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def checked_quad(fn: Callable[[float], float], a: float, b: float, rel_tol: float = 1e-6,
                 **kwargs) -> float:
    """
    scipy.integrate.quad that raises NumericalFailure when the error estimate is poor.

    Integration warnings are tolerated as long as the reported absolute error stays
    within rel_tol of max(1, |value|).
    """
    kwargs.setdefault("limit", 200)
    kwargs.setdefault("epsabs", 1e-13)
    kwargs.setdefault("epsrel", 1e-11)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, abserr = integrate.quad(fn, a, b, **kwargs)
    if not math.isfinite(value) or abserr > rel_tol * max(1.0, abs(value)):
        raise NumericalFailure(
            "quadrature did not converge",
            {"a": a, "b": b, "value": value, "abserr": abserr},
        )
    return value
