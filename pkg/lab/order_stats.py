"""
Order-statistic machinery: xi_1/xi_2 inversion, uniform order-statistic
envelopes, and bounds for sums of order statistics.

Features:
- xi_inverse with the closed-form upper bounds for both deviation functions
- uniform_order_envelope: per-k minimum of the top-order, bottom-order and Renyi bounds
- order_sum_bound: median, integral and top terms for sums of the n - k + 1 smallest values
- closed_form_sum_bounds for polynomial, Weibull and Gaussian-power tails
- Monte Carlo coverage helpers used by the CLI and the test-suite
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from lab.bounds import CalibrationSet
from lab.distributions import Distribution1D
from lab.errors import DomainError, NumericalFailure
from lab.numerics import checked_quad
from lab.streams import TAG_TRIAL, StreamPartition

logger = logging.getLogger(__name__)

COVERAGE_CHUNK = 2000


def xi_1(t):
    """e^t (1 - t) on [0, 1]."""
    t = np.asarray(t, dtype=float)
    return np.exp(t) * (1.0 - t)


def xi_2(t):
    """e^{-t} (1 + t) on [0, inf)."""
    t = np.asarray(t, dtype=float)
    return np.exp(-t) * (1.0 + t)


@dataclass(frozen=True)
class XiInverse:
    value: float
    analytic_bound: float


def _xi_1_bound(y: float) -> float:
    return min(math.sqrt(2.0 * (1.0 - y)), 1.0 - y / math.e)


def _xi_2_bound(y: float) -> float:
    log_inv = -math.log(y)
    if y <= 2.0 / math.e:
        return log_inv + math.log(1.0 + 4.0 * log_inv)
    return math.sqrt(2.0 * log_inv + 10.0 * log_inv ** 1.5)


def _decreasing_inverse(fn, y: float, lo: float, hi: float) -> float:
    """Largest bracket point lo with fn(lo) >= y for decreasing fn, by bisection."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if float(fn(mid)) >= y:
            lo = mid
        else:
            hi = mid
    return lo


def xi_inverse(which: int, y: float) -> XiInverse:
    """
    Numeric inverse of xi_1 or xi_2 with the closed-form upper bound.

    The numeric value never exceeds the true inverse, so it stays below the
    closed-form bound wherever the bound is valid.

    Args:
        which (int): 1 or 2
        y (float): Level in (0, 1]

    Returns:
        XiInverse: value and analytic_bound

    Raises:
        DomainError: If which is not 1 or 2, or y is outside (0, 1]
    """
    if which not in (1, 2):
        raise DomainError(f"which must be 1 or 2, got {which}")
    if not 0.0 < y <= 1.0:
        raise DomainError(f"xi inverse needs y in (0, 1], got {y}")
    if y == 1.0:
        return XiInverse(0.0, 0.0)
    if which == 1:
        return XiInverse(_decreasing_inverse(xi_1, y, 0.0, 1.0), _xi_1_bound(y))
    hi = 1.0
    while float(xi_2(hi)) >= y:
        hi *= 2.0
    return XiInverse(_decreasing_inverse(xi_2, y, 0.0, hi), _xi_2_bound(y))


def _xi_inv(which: int, y: float) -> float:
    # exp() of a very negative exponent can underflow to 0
    if y <= 0.0:
        return 1.0 if which == 1 else math.inf
    return xi_inverse(which, min(y, 1.0)).value


# --- Envelopes ---

@dataclass
class Envelope:
    """
    Upper bounds on the uniform order statistics gamma_(1), ..., gamma_(n).

    Attributes:
        n (int): Sample size
        t (float): Deviation parameter
        upper (np.ndarray): Nondecreasing bounds in (0, 1]
        source (List[str]): Formula that produced each entry: "top", "bottom" or "renyi"
        formulas (Dict[str, np.ndarray]): Raw values of each formula before the minimum
    """

    n: int
    t: float
    upper: np.ndarray
    source: List[str]
    formulas: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def failure_probability(self) -> float:
        """(pi^2 / 3) exp(-t^2 / 2), the probability the top/bottom event can fail."""
        return math.pi ** 2 / 3.0 * math.exp(-0.5 * self.t ** 2)


def top_order_bound(n: int, k: int, t: float) -> float:
    y = math.exp((-t * t - 4.0 * math.log(k)) / (2.0 * k))
    return k / (n + 1.0) * (1.0 + _xi_inv(2, y))


def bottom_order_bound(n: int, k: int, t: float) -> float:
    j = n - k + 1
    y = math.exp((-t * t - 4.0 * math.log(j)) / (2.0 * j))
    return 1.0 - j / (n + 1.0) * (1.0 - _xi_inv(1, y))


def _renyi_spread(n: int, k: int, t: float) -> float:
    log_k = math.log(k)
    first = (t + math.sqrt(log_k)) * math.sqrt(k) / math.sqrt(n * (n - k + 1.0))
    second = (t * t + log_k) / (n - k + 1.0)
    return max(first, second)


def renyi_log_complement(n: int, k: int, t: float, c: float = 1.0) -> float:
    """log(1 - renyi_bound) = log((n-k)/n) - c max{...}; finite for every t when k < n."""
    if k >= n:
        return -math.inf
    return math.log((n - k) / n) - c * _renyi_spread(n, k, t)


def renyi_bound(n: int, k: int, t: float, c: float = 1.0) -> float:
    return -math.expm1(renyi_log_complement(n, k, t, c))


def crude_renyi_bound(n: int, k: int, t: float, c: float = 1.0) -> float:
    """Linearized form k/n + c (n-k)/n max{...}, never smaller than renyi_bound."""
    return k / n + c * (n - k) / n * _renyi_spread(n, k, t)


def uniform_order_envelope(n: int, t: float, renyi_c: float = 1.0) -> Envelope:
    """
    Per-k envelope for the order statistics of n uniform variables.

    Each entry is the minimum of the three formulas, clipped to 1, followed by a
    running minimum from the right so the envelope is nondecreasing in k
    (gamma_(k) <= gamma_(j) for j >= k keeps every bound valid).

    Args:
        n (int): Sample size, n >= 1
        t (float): Deviation parameter, t >= 0
        renyi_c (float): Constant c of the Renyi formula

    Returns:
        Envelope: Bounds with per-entry provenance
    """
    if n < 1 or t < 0:
        raise DomainError("envelope needs n >= 1 and t >= 0")
    ks = range(1, n + 1)
    formulas = {
        "top": np.array([top_order_bound(n, k, t) for k in ks]),
        "bottom": np.array([bottom_order_bound(n, k, t) for k in ks]),
        "renyi": np.array([renyi_bound(n, k, t, renyi_c) for k in ks]),
    }
    names = list(formulas)
    stacked = np.vstack([formulas[name] for name in names])
    best = np.argmin(stacked, axis=0)
    raw = np.minimum(stacked.min(axis=0), 1.0)

    upper = raw.copy()
    origin = np.arange(n)
    for i in range(n - 2, -1, -1):
        if upper[i + 1] < upper[i]:
            upper[i] = upper[i + 1]
            origin[i] = origin[i + 1]
    source = [names[best[origin[i]]] for i in range(n)]
    return Envelope(n=n, t=t, upper=upper, source=source, formulas=formulas)


def renyi_representation(n: int, k: int, size: int, seed: int) -> np.ndarray:
    """Draws of sum_{j <= k} Z_j / (n - j + 1) with Z_j standard exponential."""
    rng = StreamPartition(seed=seed, tag=TAG_TRIAL, extra=(k,)).stream(n)
    z = rng.standard_exponential((size, k))
    weights = 1.0 / (n - np.arange(1, k + 1) + 1.0)
    return z @ weights


def envelope_coverage(n: int, t: float, trials: int, seed: int, renyi_c: float = 1.0) -> Tuple[float, float]:
    """
    Fraction of uniform samples whose order statistics all lie below the envelope.

    Returns:
        Tuple[float, float]: (coverage, binomial standard error)
    """
    upper = uniform_order_envelope(n, t, renyi_c).upper
    partition = StreamPartition(seed=seed, tag=TAG_TRIAL, kind="block", block=COVERAGE_CHUNK)
    covered = 0
    for number, start, stop in partition.blocks(trials):
        sample = np.sort(partition.stream(number).random((stop - start, n)), axis=1)
        covered += int(np.count_nonzero(np.all(sample <= upper, axis=1)))
    coverage = covered / trials
    return coverage, math.sqrt(max(coverage * (1.0 - coverage), 1e-12) / trials)


# --- Sums of order statistics ---

@dataclass(frozen=True)
class OrderSumBound:
    """Bound on sum_{i <= n-k+1} Y_(i) with its three terms."""

    value: float
    median_term: float
    integral_term: float
    top_term: float
    diverged: bool = False


def order_sum_bound(dist: Distribution1D, n: int, k: int, lam: float) -> OrderSumBound:
    """
    Bound on the sum of the n - k + 1 smallest of n i.i.d. nonnegative draws.

    Holds with probability at least 1 - (pi^2/3) exp(-lam^2/2). The integral term
    integrates F^{-1}(1 - u(t)) through the law's upper quantile, so arguments
    close to 1 are never formed explicitly.

    Args:
        dist (Distribution1D): Nonnegative law
        n (int): Sample size
        k (int): 1 <= k < (n + 1)/2
        lam (float): lam >= 2

    Returns:
        OrderSumBound: value is +inf with diverged=True when F^{-1} is not integrable near 1
    """
    if not 1 <= k < (n + 1) / 2.0:
        raise DomainError(f"order_sum_bound needs 1 <= k < (n+1)/2 (n={n}, k={k})")
    if lam < 2:
        raise DomainError(f"order_sum_bound needs lambda >= 2, got {lam}")
    if dist.support[0] < 0:
        raise DomainError(f"order_sum_bound needs a nonnegative law, got {dist.name}")

    m = (n + 1) // 2
    median_term = m * float(dist.upper_quantile(math.exp(-lam * lam / (n + 1.0)) / 12.0))
    top_term = float(dist.upper_quantile(math.exp(-0.5 * lam * lam) / (math.e * (n + 1.0))))

    def integrand(t: float) -> float:
        scaled = (n + 1.0) * t
        y = math.exp((-lam * lam - 4.0 * math.log(scaled)) / (2.0 * scaled))
        u = t * (1.0 - _xi_inv(1, y))
        if u <= 0.0:
            return float(dist.support[1])
        return float(dist.upper_quantile(u))

    diverged = False
    try:
        integral = (n + 1.0) * checked_quad(integrand, k / (n + 1.0), 0.5, rel_tol=1e-5)
    except NumericalFailure as e:
        logger.warning(f"order_sum_bound integral diverged for {dist.name}: {e}")
        integral, diverged = math.inf, True
    if not math.isfinite(integral) or not math.isfinite(top_term):
        diverged = True
    value = median_term + integral + top_term if not diverged else math.inf
    return OrderSumBound(value, median_term, integral, top_term, diverged)


def order_sum_coverage(dist: Distribution1D, n: int, k: int, lam: float, trials: int,
                       seed: int) -> Tuple[float, float]:
    """Fraction of trials where sum_{i <= n-k+1} Y_(i) stays below order_sum_bound."""
    bound = order_sum_bound(dist, n, k, lam).value
    partition = StreamPartition(seed=seed, tag=TAG_TRIAL, kind="block", block=COVERAGE_CHUNK)
    held = 0
    for number, start, stop in partition.blocks(trials):
        draws = np.sort(dist.sampler(partition.stream(number), (stop - start) * n).reshape(-1, n), axis=1)
        held += int(np.count_nonzero(draws[:, : n - k + 1].sum(axis=1) <= bound))
    coverage = held / trials
    return coverage, math.sqrt(max(coverage * (1.0 - coverage), 1e-12) / trials)


SUM_KINDS = ("poly", "weibull", "weibull_log", "normal_pow")


def closed_form_sum_bounds(kind: str, param: float, n: int, k: int, lam: float,
                           calib: Optional[CalibrationSet] = None) -> float:
    """
    Closed-form bounds on sum_{i <= n-k+1} Y_(i), each holding with probability
    at least 1 - C exp(-lam^2/2).

    kind:
        "poly" (param p > 1, 1 <= k <= (n+1)/4):
            C p n/(p-1) + C n^{1/p} k^{-1/p} (1 + p k^2 lam^{-2}) exp(lam^2/(2 p k))
        "weibull" (param q > 0): C_q (n + lam^{2/q}) for q <= 1,
            C_q (n + n^{1-1/q} lam^{2/q}) for q >= 1
        "weibull_log" (param ignored): C (n + lam^2 log n), the unimproved q = 1 form
        "normal_pow" (param p > 0): C_p (n + n^{1-p/2} lam^p) for p <= 2, C_p (n + lam^p) beyond

    Raises:
        DomainError: For an unknown kind or out-of-range parameters
    """
    calib = calib or CalibrationSet()
    if n < 1 or lam <= 0:
        raise DomainError("closed-form sum bounds need n >= 1 and lambda > 0")
    if kind == "poly":
        p = param
        if not p > 1 or not 1 <= k <= (n + 1) / 4.0:
            raise DomainError(f"poly sum bound needs p > 1 and 1 <= k <= (n+1)/4 (p={p}, k={k})")
        C = calib.get("order_stats.poly.C")
        tail = n ** (1.0 / p) * k ** (-1.0 / p) * (1.0 + p * k * k / (lam * lam)) * math.exp(lam * lam / (2.0 * p * k))
        return C * p * n / (p - 1.0) + C * tail
    if kind == "weibull":
        q = param
        if not q > 0:
            raise DomainError("weibull sum bound needs q > 0")
        C = calib.get("order_stats.weibull.C_q")
        if q <= 1:
            return C * (n + lam ** (2.0 / q))
        return C * (n + n ** (1.0 - 1.0 / q) * lam ** (2.0 / q))
    if kind == "weibull_log":
        return calib.get("order_stats.weibull.C_q") * (n + lam * lam * math.log(max(n, 2)))
    if kind == "normal_pow":
        p = param
        if not p > 0:
            raise DomainError("normal_pow sum bound needs p > 0")
        C = calib.get("order_stats.normal_pow.C_p")
        if p <= 2:
            return C * (n + n ** (1.0 - p / 2.0) * lam ** p)
        return C * (n + lam ** p)
    raise DomainError(f"unknown sum bound kind {kind!r}; expected one of {SUM_KINDS}")


def pareto_sums(p: float, n: int, trials: int, seed: int, split: int = 0) -> np.ndarray:
    """Row sums of n Pareto draws with P{Y > t} = t^{-p} on [1, inf), one sum per trial."""
    partition = StreamPartition(seed=seed, tag=TAG_TRIAL, kind="block", block=COVERAGE_CHUNK, extra=(split,))
    sums = np.empty(trials)
    for number, start, stop in partition.blocks(trials):
        u = 1.0 - partition.stream(number).random((stop - start, n))
        sums[start:stop] = np.power(u, -1.0 / p).sum(axis=1)
    return sums


def fit_poly_sum_constant(p: float, n: int, lam: float, trials: int, seed: int) -> float:
    """
    Smallest C for which the k = 1 poly bound is exceeded in at most half of
    exp(-lam^2/2) of the fitting trials (split 0).
    """
    sums = pareto_sums(p, n, trials, seed, split=0)
    unit = closed_form_sum_bounds("poly", p, n, 1, lam, CalibrationSet())
    level = 1.0 - 0.5 * math.exp(-0.5 * lam * lam)
    return float(np.quantile(sums, level)) / unit

