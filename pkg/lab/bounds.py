"""
Closed-form concentration bounds with calibratable constants.

Features:
- CalibrationSet: named positive constants (default 1) with provenance
- TailBoundCurve: a bound as a map t -> probability, with the deviation level
  at which the empirical tail must be measured
- Evaluators for linear and nonlinear Weibull-type tails, polynomial tails,
  sums of powers of Gaussians, l_p norms on l_q balls, Berry-Esseen forms and
  moment bounds
- make_curve: registry lookup used by the harness and the service

Usage:
    calib = CalibrationSet()
    p = weibull_linear_bound(0.5, np.ones(100) / 10, 3.0, calib)
    curve = make_curve("lpn_gauss", {"n": 1024, "p": 1.0}, calib)
    curve.evaluate(2.0), curve.threshold(2.0)
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from lab.errors import DomainError, UnresolvableIdError
from lab.functionals import lorentz_norm, lp_functional
from lab.numerics import min_of_inverses

logger = logging.getLogger(__name__)

PROBABILITY_CAP = 2.0


@dataclass
class CalibrationEntry:
    value: float
    provenance: str = "default"
    seed: Optional[int] = None
    trials: Optional[int] = None
    experiment: Optional[str] = None


@dataclass
class CalibrationSet:
    """
    Named positive constants for bounds stated up to universal constants.

    Unknown keys read as 1.0. Fitted entries record the seed, trial count and
    experiment that produced them.
    """

    entries: Dict[str, CalibrationEntry] = field(default_factory=dict)

    def get(self, key: str, default: float = 1.0) -> float:
        entry = self.entries.get(key)
        return entry.value if entry is not None else default

    def set(self, key: str, value: float, provenance: str = "default") -> None:
        if not (math.isfinite(value) and value > 0):
            raise DomainError(f"calibration constant {key} must be positive and finite, got {value}")
        self.entries[key] = CalibrationEntry(float(value), provenance)

    def set_fitted(self, key: str, value: float, seed: int, trials: int, experiment: str = "") -> None:
        self.set(key, value, provenance="fitted")
        entry = self.entries[key]
        entry.seed = int(seed)
        entry.trials = int(trials)
        entry.experiment = experiment or None
        logger.info(f"calibration {key} fitted to {value:.6g} (seed={seed}, trials={trials})")

    def copy(self) -> "CalibrationSet":
        return CalibrationSet.from_dict(self.to_dict())

    @property
    def identifier(self) -> str:
        """Short stable id of the current values; "default" when nothing is set."""
        if not self.entries:
            return "default"
        digest = hashlib.sha1(json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")).hexdigest()
        return f"calib-{digest[:10]}"

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        out = {}
        for key in sorted(self.entries):
            entry = self.entries[key]
            record = {"value": entry.value, "provenance": entry.provenance}
            if entry.provenance == "fitted":
                record.update({"seed": entry.seed, "trials": entry.trials, "experiment": entry.experiment})
            out[key] = record
        return out

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "CalibrationSet":
        """
        Build a set from {key: value} or {key: {"value": ..., "provenance": ...}}.

        Raises:
            DomainError: If a value is not a positive number
        """
        calib = cls()
        for key, raw in (data or {}).items():
            if isinstance(raw, dict):
                try:
                    value = float(raw["value"])
                except (KeyError, TypeError, ValueError):
                    raise DomainError(f"calibration entry {key} has no numeric value")
                calib.set(key, value, raw.get("provenance", "default"))
                entry = calib.entries[key]
                entry.seed = raw.get("seed")
                entry.trials = raw.get("trials")
                entry.experiment = raw.get("experiment")
            else:
                try:
                    calib.set(key, float(raw))
                except (TypeError, ValueError):
                    raise DomainError(f"calibration entry {key} is not numeric: {raw!r}")
        return calib


@dataclass
class TailBoundCurve:
    """
    A tail bound t -> probability.

    Attributes:
        source (str): Registry id of the bound
        params (Dict[str, Any]): Inputs the curve was built from
        probability (Callable[[float], float]): Raw bound value at t
        deviation (Optional[Callable[[float], float]]): Deviation level whose
            exceedance the bound controls; None means the level is t itself
        calib_id (str): CalibrationSet.identifier at construction
    """

    source: str
    params: Dict[str, Any]
    probability: Callable[[float], float]
    deviation: Optional[Callable[[float], float]] = None
    calib_id: str = "default"

    def evaluate(self, t: float) -> float:
        value = float(self.probability(float(t)))
        if math.isnan(value):
            return PROBABILITY_CAP
        return min(max(value, 0.0), PROBABILITY_CAP)

    def threshold(self, t: float) -> float:
        return float(t) if self.deviation is None else float(self.deviation(float(t)))

    def grid(self, t_grid: Iterable[float]) -> List[Tuple[float, float, float]]:
        """(t, deviation level, bound) rows over t_grid."""
        return [(float(t), self.threshold(t), self.evaluate(t)) for t in t_grid]

    def is_nonincreasing(self, t_grid: Sequence[float]) -> bool:
        values = [self.evaluate(t) for t in sorted(t_grid)]
        return all(b <= a + 1e-15 for a, b in zip(values, values[1:]))


def _cap(value: float) -> float:
    return min(value, PROBABILITY_CAP)


def _norm(a, p: float) -> float:
    a = np.asarray(a, dtype=float)
    if p == math.inf:
        return float(np.max(np.abs(a))) if a.size else 0.0
    return lp_functional(a, p)


def weibull_linear_exponent(q: float, a, t: float, calib: Optional[CalibrationSet] = None) -> float:
    """c_q times the min (or, for q > 2, max) of the two Weibull exponent shapes."""
    calib = calib or CalibrationSet()
    if not q > 0:
        raise DomainError(f"weibull exponent needs q > 0, got {q}")
    a = np.asarray(a, dtype=float)
    if not np.any(a):
        raise DomainError("weibull_linear_bound needs a nonzero coefficient vector")
    if t < 0:
        raise DomainError("weibull_linear_bound needs t >= 0")
    two = _norm(a, 2.0)
    if q <= 1:
        dual = _norm(a, math.inf)
    else:
        dual = _norm(a, q / (q - 1.0))
    gaussian = (t / two) ** 2
    heavy = math.inf if dual == 0 else (t / dual) ** q
    shape = max(gaussian, heavy) if q > 2 else min(gaussian, heavy)
    return calib.get("weibull.c_q") * shape


def weibull_linear_bound(q: float, a, t: float, calib: Optional[CalibrationSet] = None) -> float:
    """
    Tail bound for sum a_i X_i with Weibull-type coordinates.

    Args:
        q (float): Tail exponent, P{|X_i| > t} ~ exp(-t^q)
        a: Coefficient vector (nonzero)
        t (float): Deviation level
        calib (CalibrationSet): Supplies weibull.c_q

    Returns:
        float: 2 exp(-c_q min{(t/|a|_2)^2, (t/|a|_*)^q}) with |a|_* = |a|_inf for
        q <= 1 and |a|_{q/(q-1)} beyond; the min becomes a max for q > 2
    """
    return _cap(2.0 * math.exp(-weibull_linear_exponent(q, a, t, calib)))


@dataclass
class WeibullNonlinearBound:
    """
    Attributes:
        variation_probability (float): 2 exp(-c_q min{(t/Lip2#)^2, (t/Lipinf#)^q})
        deviation (float): Level exceeded with probability at most 2 exp(-t^2/2)
        log_clipped (bool): True when log(n t^{2-4/q}) was clipped at e
    """

    variation_probability: float
    deviation: float
    log_clipped: bool


def weibull_nonlinear_bound(q: float, lip2s: float, lipinfs: float, lip2: float, lipinf: float,
                            n: int, t: float, calib: Optional[CalibrationSet] = None) -> WeibullNonlinearBound:
    calib = calib or CalibrationSet()
    if not 0 < q < 1:
        raise DomainError(f"nonlinear Weibull bound needs 0 < q < 1, got {q}")
    if min(lip2s, lipinfs, lip2, lipinf) <= 0:
        raise DomainError("Lipschitz constants must be positive")
    if t <= 0 or n < 1:
        raise DomainError("nonlinear Weibull bound needs t > 0 and n >= 1")
    shape = min((t / lip2s) ** 2, (t / lipinfs) ** q)
    variation = _cap(2.0 * math.exp(-calib.get("weibull.c_q") * shape))

    argument = n * t ** (2.0 - 4.0 / q)
    clipped = argument < math.e
    if clipped:
        logger.warning(f"log factor clipped: n t^(2-4/q) = {argument:.4g} < e (n={n}, t={t}, q={q})")
        argument = math.e
    factor = 1.0 + math.log(argument) ** (1.0 / q - 0.5)
    deviation = calib.get("weibull.C_q") * factor * (t * lip2 + t ** (2.0 / q) * lipinf)
    return WeibullNonlinearBound(variation, deviation, clipped)


def weibull_inf_moment_bound(q: float, n: int, calib: Optional[CalibrationSet] = None) -> float:
    """Variance scale C_q (log n)^{-1+2/q} of the sup norm of n symmetric Weibull(q) variables."""
    calib = calib or CalibrationSet()
    if not 0 < q < 1 or n < 2:
        raise DomainError("weibull_inf_moment_bound needs 0 < q < 1 and n >= 2")
    return calib.get("weibull.C_q") * math.log(n) ** (-1.0 + 2.0 / q)


def hmso_moment_bound(a, p_moments, second_moments, p: float,
                      calib: Optional[CalibrationSet] = None) -> float:
    """
    Two-term upper bound on (E|sum a_i X_i|^p)^{1/p} for symmetric log-concave-tailed X_i.

    Args:
        a: Coefficients
        p_moments: E|X_i|^p per coordinate (scalar broadcasts)
        second_moments: E X_i^2 per coordinate (scalar broadcasts)
        p (float): Moment order, p >= 2
    """
    calib = calib or CalibrationSet()
    if p < 2:
        raise DomainError("hmso_moment_bound needs p >= 2")
    a = np.abs(np.asarray(a, dtype=float))
    mp = np.broadcast_to(np.asarray(p_moments, dtype=float), a.shape)
    m2 = np.broadcast_to(np.asarray(second_moments, dtype=float), a.shape)
    first = float(np.sum(a ** p * mp)) ** (1.0 / p)
    second = math.sqrt(p) * math.sqrt(float(np.sum(a * a * m2)))
    return calib.get("hmso.C") * (first + second)


def weibull_sum_moment_bound(q: float, a, p: float, calib: Optional[CalibrationSet] = None) -> float:
    """C_q (p^{1/q} |a|_inf + sqrt(p)) |a|_2 for i.i.d. symmetric Weibull(q), 0 < q <= 1."""
    calib = calib or CalibrationSet()
    if not 0 < q <= 1 or p < 2:
        raise DomainError("weibull_sum_moment_bound needs 0 < q <= 1 and p >= 2")
    a = np.asarray(a, dtype=float)
    scale = _norm(a, 2.0)
    if scale == 0:
        return 0.0
    return calib.get("weibull_moment.C_q") * scale * (p ** (1.0 / q) * _norm(a, math.inf) / scale + math.sqrt(p))


def poly_nonlinear_bound(q: float, p: float, grad_sups, n: int, t: float,
                         calib: Optional[CalibrationSet] = None,
                         lip_p: Optional[float] = None) -> Tuple[float, float]:
    """
    Deviation levels exceeded with probability at most C exp(-t^2/2) under
    polynomial tails of order q.

    Args:
        q (float): Tail order, 2 < q < inf
        p (float): Gradient norm index, 2q/(q-2) < p < inf
        grad_sups: sup_x |df/dx_i| per coordinate
        n (int): Dimension
        t (float): Gaussian scale parameter, t >= 0
        lip_p (float): sup_x |grad f|_p; defaults to the coordinatewise bound |grad_sups|_p

    Returns:
        Tuple[float, float]: (Lorentz-norm level, l_p level)

    Raises:
        DomainError: If (q, p) is outside the admissible range
    """
    calib = calib or CalibrationSet()
    if not 2 < q < math.inf:
        raise DomainError(f"poly_nonlinear_bound needs 2 < q < inf, got {q}")
    if not 2.0 * q / (q - 2.0) < p < math.inf:
        raise DomainError(f"poly_nonlinear_bound needs p > 2q/(q-2) = {2 * q / (q - 2):.4g}, got {p}")
    if t < 0:
        raise DomainError("poly_nonlinear_bound needs t >= 0")
    grads = np.abs(np.asarray(grad_sups, dtype=float))
    if grads.size != n:
        raise DomainError(f"expected {n} gradient bounds, got {grads.size}")
    if t == 0:
        return 0.0, 0.0
    r = max(1.0, calib.get("poly.C_r") * t * t * math.exp(t * t / q))
    lorentz = lorentz_norm(grads ** 2, r, q / 2.0)
    one = calib.get("poly.C_q") * t * math.sqrt(lorentz)
    lip = _norm(grads, p) if lip_p is None else lip_p
    two = calib.get("poly.C_pq") * lip * (n ** (0.5 - 1.0 / p) * t + n ** (1.0 / q) * t * math.exp(t * t / (2.0 * q)))
    return one, two


def gaussian_abs_moment(u: float) -> float:
    """E|Z|^u = 2^{u/2} Gamma((u+1)/2) / sqrt(pi) for u > -1."""
    if u <= -1:
        raise DomainError("Gaussian absolute moments need u > -1")
    return math.exp(0.5 * u * math.log(2.0) + special.gammaln(0.5 * (u + 1.0))) / math.sqrt(math.pi)


def lpn_gauss_mean(n: int, p: float) -> float:
    """E sum |Z_i|^p = pi^{-1/2} n 2^{p/2} Gamma((p+1)/2)."""
    return n * gaussian_abs_moment(p)


def _lpn_terms(n: int, p: float) -> Tuple[str, List[Tuple[float, float]]]:
    """Branch name and (coefficient, exponent) pairs of the deviation as a function of t."""
    if p <= 1:
        return "sum", [(math.sqrt(n), 1.0)]
    if p <= 1.5:
        return "sum", [(math.sqrt(n), 1.0), (n ** 0.25, 1.5)]
    if p <= 2:
        return "sum", [(math.sqrt(n), 1.0), (n ** (1.0 - p / 2.0), p)]
    scale = 2.0 ** p
    return "max", [(scale * math.sqrt(gaussian_abs_moment(2.0 * (p - 1.0))) * math.sqrt(n), 1.0), (scale, p)]


def lpn_gauss_bound(n: int, p: float, t: float, calib: Optional[CalibrationSet] = None) -> float:
    """
    Deviation of sum |Z_i|^p from its median exceeded with probability at most C exp(-t^2/2).

    Branches: C n^{1/2} t (p <= 1), C n^{1/2} t + C n^{1/4} t^{3/2} (1 <= p <= 3/2),
    C n^{1/2} t + C n^{1-p/2} t^p (3/2 <= p <= 2) and
    C 2^p max{(E|Z|^{2(p-1)})^{1/2} n^{1/2} t, t^p} (p >= 2).
    """
    calib = calib or CalibrationSet()
    if n < 1 or not p > 0:
        raise DomainError("lpn_gauss_bound needs n >= 1 and p > 0")
    if t < 0:
        raise DomainError("lpn_gauss_bound needs t >= 0")
    kind, terms = _lpn_terms(n, p)
    values = [c * t ** e for c, e in terms]
    total = max(values) if kind == "max" else sum(values)
    return calib.get("lpn_gauss.C") * total


def lpn_gauss_t_for_deviation(n: int, p: float, s: float, calib: Optional[CalibrationSet] = None) -> float:
    """
    A t with lpn_gauss_bound(n, p, t) <= s, so the deviation s has probability at
    most C exp(-t^2/2). Sums of two powers are inverted through the max of the
    doubled terms.
    """
    calib = calib or CalibrationSet()
    if s < 0:
        raise DomainError("deviation must be nonnegative")
    kind, terms = _lpn_terms(n, p)
    C = calib.get("lpn_gauss.C")
    weight = 1.0 if kind == "max" else float(len(terms))
    inverses = [lambda v, c=c, e=e: (v / (weight * C * c)) ** (1.0 / e) for c, e in terms]
    if len(inverses) == 1:
        return inverses[0](s)
    return min_of_inverses(inverses[0], inverses[1], s)


def lpn_gauss_rel_bound(n: int, p: float, eps: float, calib: Optional[CalibrationSet] = None) -> float:
    """
    Probability that |Z|_p leaves [(1-eps) E|Z|_p, (1+eps) E|Z|_p].

    C exp(-c n eps^2) for p <= 2, C exp(-c min{p 8^{-p} n eps^2, p n^{2/p} eps^{2/p}})
    for 2 <= p < c' log n and C n^{-c eps} beyond.
    """
    calib = calib or CalibrationSet()
    if n < 1 or p < 1:
        raise DomainError("lpn_gauss_rel_bound needs n >= 1 and p >= 1")
    if not 0 < eps < 1:
        raise DomainError("lpn_gauss_rel_bound needs 0 < eps < 1")
    C = calib.get("lpn_rel.C")
    c = calib.get("lpn_rel.c")
    if p <= 2:
        return _cap(C * math.exp(-c * n * eps * eps))
    if p < calib.get("lpn_rel.c_log") * math.log(max(n, 2)):
        shape = min(p * 8.0 ** (-p) * n * eps * eps, p * n ** (2.0 / p) * eps ** (2.0 / p))
        return _cap(C * math.exp(-c * shape))
    return _cap(C * n ** (-c * eps))


def lp_on_lq_ball_exponent(n: int, p: float, q: float, s: float, calib: Optional[CalibrationSet] = None) -> float:
    calib = calib or CalibrationSet()
    if n < 1 or not p > 0 or not q > 0:
        raise DomainError("lp_on_lq_ball_bound needs n >= 1, p > 0 and q > 0")
    s_max = n ** (1.0 / p - 1.0 / q)
    if not 0 <= s <= s_max * (1.0 + 1e-12):
        raise DomainError(f"s must lie in [0, n^(1/p-1/q)] = [0, {s_max:.6g}], got {s}")
    c = calib.get("lp_ball.c_q")
    power = n ** (-2.0 / p + 2.0 / q + 1.0)
    if p <= q:
        return c ** (1.0 / p) * power * s * s
    return min(c ** p * p ** (-2.0 * p / q) * power * s * s,
               c * n ** ((p - q + p * q) / (p * p)) * s ** (q / p))


def lp_on_lq_ball_bound(n: int, p: float, q: float, s: float, calib: Optional[CalibrationSet] = None) -> float:
    """
    Bound on P{| |X|_p - M|X|_p | > s} for X uniform in the unit l_q ball.

    Raises:
        DomainError: If s lies outside [0, n^{1/p - 1/q}]
    """
    return _cap(2.0 * math.exp(-lp_on_lq_ball_exponent(n, p, q, s, calib)))


@dataclass
class BerryEsseenBound:
    uniform: float
    nonuniform: float


def berry_esseen_bound(a, third_moments, r: float, r_moment: float, x: float,
                       calib: Optional[CalibrationSet] = None, n: Optional[int] = None) -> BerryEsseenBound:
    """
    Uniform and non-uniform Berry-Esseen distances |Phi(x) - P{sum a_i X_i <= x}|.

    Args:
        a: Unit coefficient vector
        third_moments: E|X_i|^3 (scalar or per coordinate)
        r (float): Moment order of the non-uniform bound, r >= 3
        r_moment (float): E|X_1|^r
        x (float): Evaluation point
        n (int): Number of i.i.d. summands for the non-uniform form; defaults to len(a)
    """
    calib = calib or CalibrationSet()
    if r < 3:
        raise DomainError("berry_esseen_bound needs r >= 3")
    a = np.abs(np.asarray(a, dtype=float))
    third = np.broadcast_to(np.asarray(third_moments, dtype=float), a.shape)
    n = int(n or a.size)
    uniform = calib.get("berry_esseen.C") * float(np.sum(a ** 3 * third))
    mean_third = float(np.mean(third))
    nonuniform = calib.get("berry_esseen.C_r") * (1.0 + abs(x)) ** (-r) * (
        n ** -0.5 * mean_third + n ** (-(r - 2.0) / 2.0) * r_moment)
    return BerryEsseenBound(uniform, nonuniform)


def berry_esseen_subgaussian_reach(r: float, n: int, calib: Optional[CalibrationSet] = None) -> float:
    """Probability scale C_r (log n)^{-r/2} n^{-1/2} down to which the non-uniform bound stays sub-Gaussian."""
    calib = calib or CalibrationSet()
    if r < 3 or n < 2:
        raise DomainError("berry_esseen_subgaussian_reach needs r >= 3 and n >= 2")
    return calib.get("berry_esseen.C_r") * math.log(n) ** (-r / 2.0) / math.sqrt(n)


def cusp_split(p: float, t):
    """
    Split |t|^p = u(t) + v(t) for 0 < p < 1.

    u equals |t|^p for |t| >= 1 and the quadratic cap p t^2/2 + 1 - p/2 inside;
    v carries the remainder and vanishes for |t| >= 1.
    """
    if not 0 < p < 1:
        raise DomainError("cusp_split needs 0 < p < 1")
    t = np.asarray(t, dtype=float)
    magnitude = np.abs(t)
    power = np.power(magnitude, p)
    cap = 0.5 * p * t * t + 1.0 - 0.5 * p
    inside = magnitude < 1.0
    u = np.where(inside, cap, power)
    v = np.where(inside, power - cap, 0.0)
    if u.ndim == 0:
        return float(u), float(v)
    return u, v


# Registry of curve factories: id -> (params, calib) -> TailBoundCurve

def _weibull_linear_curve(params: Dict[str, Any], calib: CalibrationSet) -> TailBoundCurve:
    q = float(params["q"])
    if params.get("a") is not None:
        a = np.asarray(params["a"], dtype=float)
    else:
        n = int(params.get("n", 1))
        a = np.full(n, n ** -0.5)
    return TailBoundCurve("weibull_linear", {"q": q, "a": a.tolist()},
                          lambda t: weibull_linear_bound(q, a, t, calib), calib_id=calib.identifier)


def _weibull_nonlinear_curve(params: Dict[str, Any], calib: CalibrationSet) -> TailBoundCurve:
    q = float(params["q"])
    n = int(params["n"])
    lips = [float(params.get(key, 1.0)) for key in ("lip2s", "lipinfs", "lip2", "lipinf")]

    return TailBoundCurve(
        "weibull_nonlinear", dict(params),
        lambda t: 2.0 * math.exp(-t * t / 2.0),
        deviation=lambda t: weibull_nonlinear_bound(q, *lips, n, t, calib).deviation,
        calib_id=calib.identifier,
    )


def _poly_nonlinear_curve(params: Dict[str, Any], calib: CalibrationSet) -> TailBoundCurve:
    q = float(params["q"])
    p = float(params["p"])
    n = int(params["n"])
    grads = params.get("grad_sups")
    if grads is None:
        grads = [n ** -0.5] * n

    def level(t: float) -> float:
        return min(poly_nonlinear_bound(q, p, grads, n, t, calib))

    return TailBoundCurve("poly_nonlinear", {"q": q, "p": p, "n": n},
                          lambda t: calib.get("poly.C_prob") * math.exp(-t * t / 2.0),
                          deviation=level, calib_id=calib.identifier)


def _lpn_gauss_curve(params: Dict[str, Any], calib: CalibrationSet) -> TailBoundCurve:
    n = int(params["n"])
    p = float(params["p"])
    return TailBoundCurve("lpn_gauss", {"n": n, "p": p},
                          lambda t: calib.get("lpn_gauss.C_prob") * math.exp(-t * t / 2.0),
                          deviation=lambda t: lpn_gauss_bound(n, p, t, calib),
                          calib_id=calib.identifier)


def _lpn_gauss_rel_curve(params: Dict[str, Any], calib: CalibrationSet) -> TailBoundCurve:
    n = int(params["n"])
    p = float(params["p"])
    return TailBoundCurve("lpn_gauss_rel", {"n": n, "p": p},
                          lambda eps: lpn_gauss_rel_bound(n, p, eps, calib), calib_id=calib.identifier)


def _lp_on_lq_ball_curve(params: Dict[str, Any], calib: CalibrationSet) -> TailBoundCurve:
    n = int(params["n"])
    p = float(params["p"])
    q = float(params["q"])
    return TailBoundCurve("lp_on_lq_ball", {"n": n, "p": p, "q": q},
                          lambda s: lp_on_lq_ball_bound(n, p, q, s, calib), calib_id=calib.identifier)


def _berry_esseen_curve(params: Dict[str, Any], calib: CalibrationSet) -> TailBoundCurve:
    n = int(params["n"])
    a = np.full(n, n ** -0.5)
    third = float(params.get("third_moment", 1.0))
    r = float(params.get("r", 3.0))
    r_moment = float(params.get("r_moment", third))

    def distance(x: float) -> float:
        bound = berry_esseen_bound(a, third, r, r_moment, x, calib)
        return min(bound.uniform, bound.nonuniform)

    return TailBoundCurve("berry_esseen", {"n": n, "r": r, "third_moment": third, "r_moment": r_moment},
                          distance, calib_id=calib.identifier)


BOUND_FACTORIES: Dict[str, Callable[[Dict[str, Any], CalibrationSet], TailBoundCurve]] = {
    "weibull_linear": _weibull_linear_curve,
    "weibull_nonlinear": _weibull_nonlinear_curve,
    "poly_nonlinear": _poly_nonlinear_curve,
    "lpn_gauss": _lpn_gauss_curve,
    "lpn_gauss_rel": _lpn_gauss_rel_curve,
    "lp_on_lq_ball": _lp_on_lq_ball_curve,
    "berry_esseen": _berry_esseen_curve,
}

# Calibration key each curve exposes to the harness fit.
FIT_KEYS = {
    "weibull_linear": "weibull.c_q",
    "weibull_nonlinear": "weibull.C_q",
    "poly_nonlinear": "poly.C_q",
    "lpn_gauss": "lpn_gauss.C",
    "lpn_gauss_rel": "lpn_rel.c",
    "lp_on_lq_ball": "lp_ball.c_q",
    "berry_esseen": "berry_esseen.C",
}


def make_curve(bound_id: str, params: Dict[str, Any], calib: Optional[CalibrationSet] = None) -> TailBoundCurve:
    """
    Build the TailBoundCurve registered under bound_id.

    Raises:
        UnresolvableIdError: If bound_id is unknown
        DomainError: If a required parameter is missing or malformed
    """
    factory = BOUND_FACTORIES.get(bound_id)
    if factory is None:
        raise UnresolvableIdError(f"unknown bound {bound_id!r}; expected one of {sorted(BOUND_FACTORIES)}")
    try:
        return factory(dict(params or {}), calib or CalibrationSet())
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, DomainError):
            raise
        raise DomainError(f"bad parameters for bound {bound_id!r}: {e}")
