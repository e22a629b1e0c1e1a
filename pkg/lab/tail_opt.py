"""
Optimal convex Markov bounds and the gradient-to-tail pipeline.

Features:
- optimal_markov: the hinge phi_a(x) = max{0, a(x - t) + 1} minimizing
  E phi(Y) / phi(t) over nondecreasing convex phi
- regularity_constants: a_{p,b}, a-hat_{p,b}, R-flat and R-sharp from their integral equations
- tail_from_gradient: 4(A + 1/2) R-sharp exp(-eta(t)^2 / 2) from a gradient quantile map xi,
  with the differential condition checked on a grid
- surrogate tails dominating a given envelope, and the refined tail estimator

Usage:
    witness = optimal_markov(exponential(), 2.0)
    constants = regularity_constants(10.0, 0.5)
    bound = tail_from_gradient(1.0, lambda s: 2 / math.pi, 10.0, 0.16, 3.0, 4.0)
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Optional

import numpy as np
from scipy import optimize, special, stats

from lab.distributions import Distribution1D, from_scipy
from lab.errors import DifferentialConditionError, DomainError, NumericalFailure, PreconditionError
from lab.numerics import checked_quad, increasing_root, threshold_bisect

logger = logging.getLogger(__name__)

ROOT_XTOL = 1e-12
FD_SLACK = 1e-3
CONDITION_GRID = 200


@dataclass(frozen=True)
class ConvexWitness:
    """
    Minimizing hinge for the tail at t.

    Attributes:
        t (float): Threshold
        a (float): Slope of phi_a
        bound_value (float): E phi_a(Y) / phi_a(t) = P{Y > t - 1/a}
    """

    t: float
    a: float
    bound_value: float

    @property
    def kink(self) -> float:
        return self.t - 1.0 / self.a


@dataclass(frozen=True)
class RegularityConstants:
    """
    Solutions of the four defining equations for (p, b).

    a_pb and a_hat_pb are slopes: the inner integration limits are -1/a_pb and
    -1/a_hat_pb. `reach` and `reach_hat` expose those limits directly. The
    orderings a_pb <= a_hat_pb and R_flat <= R_sharp hold for the slopes; the
    boundary value p/(p-1) at b = -1/p is attained by the reaches.
    """

    p: float
    b: float
    a_pb: float
    a_hat_pb: float
    R_flat: float
    R_sharp: float

    @property
    def reach(self) -> float:
        return 1.0 / self.a_pb

    @property
    def reach_hat(self) -> float:
        return 1.0 / self.a_hat_pb

    def residuals(self) -> Dict[str, float]:
        """Re-quadrature residuals of each defining equation."""
        p, b = self.p, self.b
        u, v = _u_b(b), _v_p(p)
        sharp = 1.0 + checked_quad(v, -self.reach, 0.0) / _integral_u_plus(b)
        flat = 1.0 + checked_quad(u, -self.reach_hat, 0.0) / (p / (p - 1.0))
        return {
            "a_pb": checked_quad(lambda x: -x * u(x), -self.reach, 0.0) / _first_moment_v(p) - 1.0,
            "a_hat_pb": checked_quad(lambda x: -x * v(x), -self.reach_hat, 0.0) / _first_moment_u_plus(b) - 1.0,
            "R_sharp": sharp - self.R_sharp,
            "R_flat": flat - self.R_flat,
        }


# --- Optimal Markov witness ---

def integrated_tail(dist: Distribution1D, c: float) -> float:
    """E (Y - c)_+ = integral of P{Y > x} over (c, inf)."""
    if dist.atoms is not None:
        return float(sum(p * max(0.0, x - c) for x, p in dist.atoms))
    upper = dist.support[1]
    if c >= upper:
        return 0.0
    lower = max(c, dist.support[0])
    head = lower - c if lower > c else 0.0
    return head + checked_quad(lambda x: float(dist.survival(x)), lower, upper)


def hinge_expectation(dist: Distribution1D, a: float, t: float) -> float:
    """E max{0, a(Y - t) + 1}."""
    return a * integrated_tail(dist, t - 1.0 / a)


def optimal_markov(dist: Distribution1D, t: float) -> ConvexWitness:
    """
    Optimal hinge witness for P{Y > t}.

    Solves the stationarity equation integral_{c}^{inf} (x - t) dmu(x) = 0 for
    c = t - 1/a. The left side is nondecreasing in c, so the smallest root is
    found by bisection after bracketing geometrically from a = 1.

    Args:
        dist (Distribution1D): Law of Y with a finite first moment
        t (float): Threshold, strictly above the mean

    Returns:
        ConvexWitness: slope a and bound_value = P{Y > t - 1/a}

    Raises:
        PreconditionError: If t <= E Y
        NumericalFailure: If no sign change is found after bracket expansion
    """
    mean = dist.first_moment()
    if not t > mean:
        raise PreconditionError(f"optimal_markov needs t > mean (t={t}, mean={mean})")

    def stationarity(c: float) -> float:
        return integrated_tail(dist, c) + (c - t) * float(dist.survival(c))

    a_hi = 1.0
    for _ in range(200):
        if stationarity(t - 1.0 / a_hi) >= 0:
            break
        a_hi *= 2.0
    else:
        raise NumericalFailure("no sign change while increasing a", {"t": t, "a": a_hi})
    a_lo = a_hi
    for _ in range(200):
        if stationarity(t - 1.0 / a_lo) < 0:
            break
        a_lo /= 2.0
    else:
        raise NumericalFailure("no sign change while decreasing a", {"t": t, "a": a_lo})

    c = increasing_root(stationarity, 0.0, t - 1.0 / a_lo, t - 1.0 / a_hi, xtol=ROOT_XTOL)
    a = 1.0 / (t - c)
    bound = float(dist.survival(c))
    logger.debug(f"optimal_markov({dist.name}, t={t:g}): a={a:.12g}, bound={bound:.12g}")
    return ConvexWitness(t=t, a=a, bound_value=bound)


# --- Regularity constants ---

def _u_b(b: float) -> Callable[[float], float]:
    """(1 - b x)^{1/b} on I = {b x < 1}, zero outside."""
    def u(x: float) -> float:
        base = 1.0 - b * x
        return base ** (1.0 / b) if base > 0 else 0.0
    return u


def _v_p(p: float) -> Callable[[float], float]:
    """(1 + x/p)^{-p} on J = (-p, inf)."""
    def v(x: float) -> float:
        base = 1.0 + x / p
        return base ** (-p) if base > 0 else math.inf
    return v


def _first_moment_v(p: float) -> float:
    return checked_quad(lambda x: x * _v_p(p)(x), 0.0, math.inf)


def _integral_u_plus(b: float) -> float:
    upper = 1.0 / b if b > 0 else math.inf
    return checked_quad(_u_b(b), 0.0, upper)


def _first_moment_u_plus(b: float) -> float:
    u = _u_b(b)
    upper = 1.0 / b if b > 0 else math.inf
    return checked_quad(lambda x: x * u(x), 0.0, upper)


def _solve_reach(weight: Callable[[float], float], target: float, limit: float) -> float:
    """Find r with integral_{-r}^{0} -x weight(x) dx = target; r < limit (possibly inf)."""
    def moment(r: float) -> float:
        return checked_quad(lambda x: -x * weight(x), -r, 0.0)

    hi = 1.0 if not math.isfinite(limit) else 0.5 * limit
    for step in range(1, 200):
        if moment(hi) >= target:
            break
        hi = 2.0 * hi if not math.isfinite(limit) else limit * (1.0 - 2.0 ** -(step + 1))
    else:
        raise NumericalFailure("inner limit bracket failed", {"target": target, "limit": limit})
    return optimize.brentq(lambda r: moment(r) - target, 0.0, hi, xtol=1e-14, rtol=1e-14)


@lru_cache(maxsize=256)
def regularity_constants(p: float, b: float) -> RegularityConstants:
    """
    Solve for a_{p,b}, a-hat_{p,b}, R-flat and R-sharp.

    With u_b(x) = (1 - b x)^{1/b} and v_p(x) = (1 + x/p)^{-p}:
        integral_{-1/a}^{0} -x u_b = integral_0^inf x v_p
        integral_{-1/a-hat}^{0} -x v_p = integral_{I+} x u_b
        R-sharp = 1 + integral_{-1/a}^{0} v_p / integral_{I+} u_b
        R-flat  = 1 + integral_{-1/a-hat}^{0} u_b / integral_0^inf v_p

    Args:
        p (float): p > 2
        b (float): b >= -1/p, b != 0; at b = -1/p, u_b coincides with v_p

    Returns:
        RegularityConstants: The four constants

    Raises:
        DomainError: If (p, b) is outside the admissible range
        NumericalFailure: If a quadrature or root bracket fails
    """
    if not p > 2 or b < -(1.0 + 1e-12) / p or b == 0:
        raise DomainError(f"regularity constants need p > 2, b >= -1/p, b != 0 (p={p}, b={b})")
    u, v = _u_b(b), _v_p(p)
    u_limit = 1.0 / abs(b) if b < 0 else math.inf
    reach = _solve_reach(u, _first_moment_v(p), u_limit)
    reach_hat = _solve_reach(v, _first_moment_u_plus(b), p)
    R_sharp = 1.0 + checked_quad(v, -reach, 0.0) / _integral_u_plus(b)
    R_flat = 1.0 + checked_quad(u, -reach_hat, 0.0) / checked_quad(v, 0.0, math.inf)
    constants = RegularityConstants(p, b, 1.0 / reach, 1.0 / reach_hat, R_flat, R_sharp)
    logger.info(
        f"regularity constants p={p:g} b={b:g}: a={constants.a_pb:.8g} a_hat={constants.a_hat_pb:.8g} "
        f"R_flat={R_flat:.8g} R_sharp={R_sharp:.8g}"
    )
    return constants


def refined_tail_estimate(dist: Distribution1D, t: float, p: float) -> float:
    """
    Estimate P{Y > t} as E phi_a(Y) / (R-flat_{p,-1/p} phi_a(t)).

    For densities whose g''/(g')^2 tends to -1/p this recovers the tail up to a
    factor 1 + o(1).
    """
    witness = optimal_markov(dist, t)
    return witness.bound_value / regularity_constants(p, -1.0 / p).R_flat


# --- Surrogate tails ---

def surrogate_tail(p: float) -> Distribution1D:
    """Variable with P{W > t} = exp(-t^p) for t > 0."""
    if p <= 0:
        raise DomainError("surrogate tail needs p > 0")
    return from_scipy(f"surrogate:p={p:g}", stats.weibull_min(p), False, (0.0, math.inf),
                      float(special.gamma(1.0 + 1.0 / p)))


def surrogate_from_tail(tail: Callable[[float], float], name: str = "surrogate") -> Distribution1D:
    """
    Nonnegative variable whose survival function equals `tail` on (0, inf).

    tail must be nonincreasing with tail(0) <= 1 and tail(t) -> 0.
    """
    def sf(t):
        t = np.asarray(t, dtype=float)
        out = np.where(t < 0, 1.0, np.vectorize(tail, otypes=[float])(np.maximum(t, 0.0)))
        return out if out.ndim else float(out)

    def cdf(t):
        return 1.0 - sf(t)

    def scalar_quantile(s: float) -> float:
        return threshold_bisect(lambda x: float(cdf(x)) > s, 0.0, 1.0)

    def quantile(s):
        out = np.vectorize(scalar_quantile, otypes=[float])(np.asarray(s, dtype=float))
        return out if out.ndim else float(out)

    return Distribution1D(
        name=name,
        cdf=cdf,
        quantile=quantile,
        sampler=lambda rng, size: quantile(rng.random(size)),
        sf=sf,
        support=(0.0, math.inf),
    )


# --- Gradient to tail ---

def eta_from_xi(xi: Callable[[float], float]) -> Callable[[float], float]:
    """Inverse of s -> (pi/2) s xi(s) on [0, inf)."""
    def m(s: float) -> float:
        return 0.5 * math.pi * s * xi(s)

    def eta(y: float) -> float:
        if y <= 0:
            return 0.0
        hi = 1.0
        for _ in range(200):
            if m(hi) >= y:
                break
            hi *= 2.0
        else:
            raise NumericalFailure("cannot invert (pi/2) s xi(s)", {"y": y, "hi": hi})
        return optimize.brentq(lambda s: m(s) - y, 0.0, hi, xtol=1e-15, rtol=1e-15)

    return eta


def _derivative(fn: Callable[[float], float], x: float) -> float:
    h = 1e-4 * max(1.0, abs(x))
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def gradient_tail_exponent(A: float, xi: Callable[[float], float]) -> Callable[[float], float]:
    """
    g = -log of the density of W on its regular range:
    g(x) = eta(x)^2 / 2 - log((A + 1/2) eta(x) eta'(x)).
    """
    eta = eta_from_xi(xi)

    def eta_prime(y: float) -> float:
        s = eta(y)
        slope = 0.5 * math.pi * (xi(s) + s * _derivative(xi, s))
        return 1.0 / slope

    def g(x: float) -> float:
        e = eta(x)
        return 0.5 * e * e - math.log((A + 0.5) * e * eta_prime(x))

    return g


def check_differential_condition(g: Callable[[float], float], p: float, b: float, lo: float,
                                 hi: float, points: int = CONDITION_GRID) -> np.ndarray:
    """
    Check -1/p <= g''/(g')^2 <= b on a grid over [lo, hi] by centered differences.

    Returns:
        np.ndarray: The ratio at each grid point

    Raises:
        DifferentialConditionError: Naming the first failing grid point
    """
    grid = np.linspace(lo, hi, points) if hi > lo else np.array([lo])
    ratios = np.empty_like(grid)
    for i, x in enumerate(grid):
        h = 1e-4 * max(1.0, abs(x))
        g0, gp, gm = g(x), g(x + h), g(x - h)
        first = (gp - gm) / (2.0 * h)
        second = (gp - 2.0 * g0 + gm) / (h * h)
        ratio = second / (first * first)
        ratios[i] = ratio
        if ratio < -1.0 / p - FD_SLACK:
            raise DifferentialConditionError(float(x), float(ratio), "lower", p, b)
        if ratio > b + FD_SLACK:
            raise DifferentialConditionError(float(x), float(ratio), "upper", p, b)
    return ratios


def positive_mean_W(A: float, xi: Callable[[float], float]) -> float:
    """E W_+ = integral_0^inf min{1/2, (A + 1/2) exp(-eta(t)^2 / 2)} dt."""
    eta = eta_from_xi(xi)
    # the minimum switches branches where eta = sqrt(2 log(2A + 1))
    eta_kink = math.sqrt(2.0 * math.log(2.0 * A + 1.0))
    kink = 0.5 * math.pi * eta_kink * xi(eta_kink)
    try:
        tail = checked_quad(lambda s: (A + 0.5) * math.exp(-0.5 * eta(s) ** 2), kink, math.inf)
        return 0.5 * kink + tail
    except NumericalFailure as e:
        raise PreconditionError(f"cannot verify t > E W: {e}") from e


def tail_from_gradient(A: float, xi: Callable[[float], float], p: float, b: float, T0: float,
                       t: float, points: int = CONDITION_GRID) -> float:
    """
    Tail bound from a gradient quantile map.

    Given P{|grad f(X)| >= xi(s)} <= A exp(-s^2/2) for a standard normal X, returns
    the bound 4(A + 1/2) R-sharp_{p,b} exp(-eta(t)^2 / 2) on P{|f(X) - M f(X)| > t}.

    Args:
        A (float): Multiplicative constant of the gradient tail, A > 0
        xi (Callable): Nondecreasing map [0, inf) -> [0, inf)
        p (float): p > 2
        b (float): Upper limit of g''/(g')^2
        T0 (float): Start of the range where the differential condition must hold
        t (float): Deviation

    Returns:
        float: The probability bound (not clipped)

    Raises:
        PreconditionError: If t <= max{E W, T0}, the W density is not regular at T0,
            or t - reach/g'(t) < T0
        DifferentialConditionError: If the condition fails on the grid over [T0, t]
    """
    if A <= 0:
        raise DomainError("A must be positive")
    constants = regularity_constants(p, b)
    eta = eta_from_xi(xi)
    if not (A + 0.5) * math.exp(-0.5 * eta(T0) ** 2) < 0.5:
        raise PreconditionError(f"(A + 1/2) exp(-eta(T0)^2/2) must be below 1/2 at T0={T0}")
    mean_w = positive_mean_W(A, xi)
    if not t > max(mean_w, T0):
        raise PreconditionError(f"need t > max(E W, T0) = {max(mean_w, T0):.6g}, got t={t}")
    g = gradient_tail_exponent(A, xi)
    slope = _derivative(g, t)
    if slope <= 0:
        raise PreconditionError(f"g'(t) must be positive, got {slope:.6g}")
    reach = max(constants.reach, constants.reach_hat)
    if t - reach / slope < T0:
        raise PreconditionError(
            f"t - reach/g'(t) = {t - reach / slope:.6g} falls below T0={T0}"
        )
    check_differential_condition(g, p, b, T0, t, points)
    return 4.0 * (A + 0.5) * constants.R_sharp * math.exp(-0.5 * eta(t) ** 2)
