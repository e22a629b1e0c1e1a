"""
One-dimensional laws, generalized quantiles, Gaussian transport and exact samplers.

Features:
- Distribution1D: CDF, generalized inverse, optional density, local Lipschitz
  constants of F^{-1} and of the transport F^{-1} o Phi
- Law identifiers such as "normal", "weibull_sym:q=0.5" or "poly_tail:q=3"
- h_q = Phi_q^{-1} o Phi and its derivative, with fitted two-sided envelopes
- Seeded column samplers and the exact uniform sampler on the l_q ball

Usage:
    law = resolve_law("weibull_sym:q=0.5")
    batch = sample(["normal", "exp"], n=1000, m=2, seed=7)
    ball = sample_ball_q(n=5, q=1.0, m=10000, seed=7)
"""

import logging
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, special, stats

from lab.errors import DomainError, UnresolvableIdError
from lab.numerics import checked_quad, threshold_bisect
from lab.streams import TAG_BALL, TAG_SAMPLE, StreamPartition

logger = logging.getLogger(__name__)

# h_q envelope fit grid; Phi(-t) stays a normal double up to t ~ 37
ENVELOPE_T_MIN = 1e-3
ENVELOPE_T_MAX = 30.0
ENVELOPE_POINTS = 2000

Sampler = Callable[[np.random.Generator, int], np.ndarray]


def normal_cdf(t):
    """Phi, evaluated through the complementary error function."""
    return special.ndtr(t)


def normal_sf(t):
    return special.ndtr(-np.asarray(t, dtype=float))


def normal_pdf(t):
    return np.exp(-0.5 * np.square(t)) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Distribution1D:
    """
    A one-dimensional law.

    All callables accept scalars or numpy arrays. `quantile` is the generalized
    inverse inf{t : F(t) > s}; `tail_quantile(u)` is F^{-1}(1-u) evaluated without
    forming 1-u, which keeps transport accurate far in the upper tail.

    Attributes:
        name (str): Law identifier
        cdf (Callable): Distribution function F
        quantile (Callable): Generalized inverse F^{-1} on (0, 1)
        sampler (Callable): (Generator, size) -> draws
        sf (Optional[Callable]): Survival function 1 - F
        tail_quantile (Optional[Callable]): u -> F^{-1}(1 - u)
        density (Optional[Callable]): Lebesgue density when it exists
        symmetric (bool): Whether X and -X have the same law
        support (Tuple[float, float]): Closed hull of the support
        atoms (Optional[Tuple]): ((value, probability), ...) for discrete laws
        mean (Optional[float]): First moment when known in closed form
    """

    name: str
    cdf: Callable
    quantile: Callable
    sampler: Sampler
    sf: Optional[Callable] = None
    tail_quantile: Optional[Callable] = None
    density: Optional[Callable] = None
    symmetric: bool = False
    support: Tuple[float, float] = (-math.inf, math.inf)
    atoms: Optional[Tuple[Tuple[float, float], ...]] = None
    mean: Optional[float] = None

    def survival(self, t):
        if self.sf is not None:
            return self.sf(t)
        return 1.0 - self.cdf(t)

    def upper_quantile(self, u):
        """F^{-1}(1 - u)."""
        if self.tail_quantile is not None:
            return self.tail_quantile(u)
        return self.quantile(1.0 - np.asarray(u, dtype=float))

    def transport(self, t):
        """F^{-1}(Phi(t)), the monotone map pushing N(0,1) to this law."""
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            lower = self.quantile(normal_cdf(np.minimum(t, 0.0)))
            upper = self.upper_quantile(normal_sf(np.maximum(t, 0.0)))
        out = np.where(t > 0, upper, lower)
        return out if out.ndim else float(out)

    def quantile_lip(self, s):
        """Local Lipschitz constant of F^{-1} at s; +inf where the density vanishes or is absent."""
        s = np.asarray(s, dtype=float)
        if self.density is None:
            out = np.full(s.shape, math.inf)
        else:
            with np.errstate(divide="ignore"):
                d = np.asarray(self.density(self.quantile(s)), dtype=float)
                out = np.where(d > 0, 1.0 / d, math.inf)
        return out if out.ndim else float(out)

    def transport_lip(self, t):
        """Local Lipschitz constant of F^{-1} o Phi at t."""
        t = np.asarray(t, dtype=float)
        if self.density is None:
            out = np.full(t.shape, math.inf)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                d = np.asarray(self.density(self.transport(t)), dtype=float)
                out = np.where(d > 0, normal_pdf(t) / d, math.inf)
        return out if out.ndim else float(out)

    def expect(self, fn: Callable[[float], float], lower: float = -math.inf,
               upper: float = math.inf) -> float:
        """E[fn(X); lower < X < upper], by enumeration or quadrature."""
        if self.atoms is not None:
            return float(sum(p * fn(x) for x, p in self.atoms if lower < x < upper))
        lo = max(lower, self.support[0])
        hi = min(upper, self.support[1])
        if lo >= hi:
            return 0.0
        if self.density is None:
            s_lo = float(self.cdf(lo)) if math.isfinite(lo) else 0.0
            s_hi = float(self.cdf(hi)) if math.isfinite(hi) else 1.0
            return checked_quad(lambda s: fn(float(self.quantile(s))), s_lo, s_hi)

        def integrand(x: float) -> float:
            d = float(self.density(x))
            return fn(x) * d if d > 0 else 0.0

        if lo < 0.0 < hi:
            return checked_quad(integrand, lo, 0.0) + checked_quad(integrand, 0.0, hi)
        return checked_quad(integrand, lo, hi)

    def first_moment(self) -> float:
        if self.mean is not None:
            return self.mean
        return self.expect(lambda x: x)

    def scaled(self, c: float) -> "Distribution1D":
        """Law of cX for c > 0."""
        if c <= 0:
            raise DomainError("scale must be positive")
        density = None
        if self.density is not None:
            base_density = self.density
            density = lambda t: base_density(np.asarray(t, dtype=float) / c) / c
        base_tail = self.tail_quantile
        base_sf = self.sf
        return Distribution1D(
            name=f"{self.name}*{c:g}",
            cdf=lambda t: self.cdf(np.asarray(t, dtype=float) / c),
            quantile=lambda s: c * np.asarray(self.quantile(s)),
            sampler=lambda rng, size: c * self.sampler(rng, size),
            sf=None if base_sf is None else (lambda t: base_sf(np.asarray(t, dtype=float) / c)),
            tail_quantile=None if base_tail is None else (lambda u: c * np.asarray(base_tail(u))),
            density=density,
            symmetric=self.symmetric,
            support=(c * self.support[0], c * self.support[1]),
            atoms=None if self.atoms is None else tuple((c * x, p) for x, p in self.atoms),
            mean=None if self.mean is None else c * self.mean,
        )


@dataclass
class SampleBatch:
    """
    A seeded matrix of draws.

    Attributes:
        values (np.ndarray): n x m matrix
        laws (List[str]): Law identifier per column (or a single descriptor)
        seed (int): Root seed
        streams (Dict[str, Any]): StreamPartition.describe() of the generation
    """

    values: np.ndarray
    laws: List[str]
    seed: int
    streams: Dict[str, Any]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


# --- Law factories ---

def from_scipy(name: str, frozen, symmetric: bool, support: Tuple[float, float],
               mean: Optional[float]) -> Distribution1D:
    """Wrap a frozen scipy.stats continuous distribution."""
    return Distribution1D(
        name=name,
        cdf=frozen.cdf,
        quantile=frozen.ppf,
        sampler=lambda rng, size: frozen.rvs(size=size, random_state=rng),
        sf=frozen.sf,
        tail_quantile=frozen.isf,
        density=frozen.pdf,
        symmetric=symmetric,
        support=support,
        mean=mean,
    )


def normal() -> Distribution1D:
    return from_scipy("normal", stats.norm(), True, (-math.inf, math.inf), 0.0)


def uniform01() -> Distribution1D:
    return from_scipy("uniform01", stats.uniform(), False, (0.0, 1.0), 0.5)


def laplace() -> Distribution1D:
    return from_scipy("laplace", stats.laplace(), True, (-math.inf, math.inf), 0.0)


def exponential() -> Distribution1D:
    return from_scipy("exp", stats.expon(), False, (0.0, math.inf), 1.0)


def weibull_sym(q: float, C: float = 1.0) -> Distribution1D:
    """Symmetric Weibull law with P{|X| > t} = exp(-(C t)^q)."""
    if q <= 0 or C <= 0:
        raise DomainError("weibull_sym needs q > 0 and C > 0")
    name = f"weibull_sym:q={q:g}" if C == 1.0 else f"weibull_sym:q={q:g},C={C:g}"
    return from_scipy(name, stats.dweibull(q, scale=1.0 / C), True, (-math.inf, math.inf), 0.0)


def poly_tail(q: float, C: float = 1.0) -> Distribution1D:
    """Symmetric law with density 2^{-1} q C (|C t| + 1)^{-q-1}, so P{|X| > t} = (C t + 1)^{-q}."""
    if q <= 0 or C <= 0:
        raise DomainError("poly_tail needs q > 0 and C > 0")

    def half_tail(t):
        return 0.5 * np.power(C * np.abs(np.asarray(t, dtype=float)) + 1.0, -q)

    def cdf(t):
        t = np.asarray(t, dtype=float)
        out = np.where(t < 0, half_tail(t), 1.0 - half_tail(t))
        return out if out.ndim else float(out)

    def sf(t):
        t = np.asarray(t, dtype=float)
        out = np.where(t < 0, 1.0 - half_tail(t), half_tail(t))
        return out if out.ndim else float(out)

    def magnitude(u):
        # |x| with P{X > |x|} = u for u <= 1/2
        with np.errstate(divide="ignore"):
            return (np.power(2.0 * u, -1.0 / q) - 1.0) / C

    def tail_quantile(u):
        u = np.asarray(u, dtype=float)
        out = np.where(u <= 0.5, magnitude(np.minimum(u, 0.5)), -magnitude(np.minimum(1.0 - u, 0.5)))
        return out if out.ndim else float(out)

    def quantile(s):
        s = np.asarray(s, dtype=float)
        out = np.where(s < 0.5, -magnitude(np.minimum(s, 0.5)), magnitude(np.minimum(1.0 - s, 0.5)))
        return out if out.ndim else float(out)

    def density(t):
        return 0.5 * q * C * np.power(C * np.abs(np.asarray(t, dtype=float)) + 1.0, -q - 1.0)

    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        u = 1.0 - rng.random(size)
        signs = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return signs * (np.power(u, -1.0 / q) - 1.0) / C

    name = f"poly_tail:q={q:g}" if C == 1.0 else f"poly_tail:q={q:g},C={C:g}"
    return Distribution1D(
        name=name, cdf=cdf, quantile=quantile, sampler=sampler, sf=sf,
        tail_quantile=tail_quantile, density=density, symmetric=True,
        support=(-math.inf, math.inf), mean=0.0 if q > 1 else None,
    )


def discrete(name: str, values: Sequence[float], probs: Sequence[float],
             symmetric: bool = False) -> Distribution1D:
    """Finitely supported law; values must be strictly increasing."""
    xs = np.asarray(values, dtype=float)
    ps = np.asarray(probs, dtype=float)
    if xs.ndim != 1 or xs.shape != ps.shape or np.any(np.diff(xs) <= 0):
        raise DomainError("discrete law needs strictly increasing values with matching probabilities")
    cum = np.cumsum(ps)
    cum[-1] = 1.0

    def cdf(t):
        idx = np.searchsorted(xs, np.asarray(t, dtype=float), side="right")
        out = np.where(idx == 0, 0.0, cum[np.maximum(idx - 1, 0)])
        return out if out.ndim else float(out)

    def quantile(s):
        idx = np.searchsorted(cum, np.asarray(s, dtype=float), side="right")
        out = xs[np.minimum(idx, len(xs) - 1)]
        return out if out.ndim else float(out)

    return Distribution1D(
        name=name,
        cdf=cdf,
        quantile=quantile,
        sampler=lambda rng, size: rng.choice(xs, size=size, p=ps),
        symmetric=symmetric,
        support=(float(xs[0]), float(xs[-1])),
        atoms=tuple(zip(xs.tolist(), ps.tolist())),
        mean=float(np.dot(xs, ps)),
    )


def point_mass(x: float = 0.0) -> Distribution1D:
    return discrete(f"point_mass:x={x:g}", [x], [1.0], symmetric=(x == 0.0))


def rademacher() -> Distribution1D:
    return discrete("rademacher", [-1.0, 1.0], [0.5, 0.5], symmetric=True)


def uniform_pm(k: int) -> Distribution1D:
    """Uniform law on {±1, ..., ±k}."""
    k = int(k)
    if k < 1:
        raise DomainError("uniform_pm needs k >= 1")
    values = [float(v) for v in range(-k, 0)] + [float(v) for v in range(1, k + 1)]
    return discrete(f"uniform_pm:k={k}", values, [1.0 / (2 * k)] * (2 * k), symmetric=True)


LAW_FAMILIES: Dict[str, Tuple[Callable[..., Distribution1D], Tuple[str, ...]]] = {
    "normal": (normal, ()),
    "uniform01": (uniform01, ()),
    "laplace": (laplace, ()),
    "exp": (exponential, ()),
    "weibull_sym": (weibull_sym, ("q", "C")),
    "poly_tail": (poly_tail, ("q", "C")),
    "point_mass": (point_mass, ("x",)),
    "rademacher": (rademacher, ()),
    "uniform_pm": (uniform_pm, ("k",)),
}

_LAW_ID = re.compile(r"^\s*(?P<family>[a-z_0-9]+)\s*(?::(?P<params>.*))?$")


def parse_law_id(law_id: str) -> Tuple[str, Dict[str, float]]:
    """Split "family:key=value,key=value" into its family and float parameters."""
    match = _LAW_ID.match(law_id)
    if not match or match.group("family") not in LAW_FAMILIES:
        raise UnresolvableIdError(f"unknown law identifier: {law_id!r}")
    family = match.group("family")
    names = LAW_FAMILIES[family][1]
    params: Dict[str, float] = {}
    raw = match.group("params")
    if raw:
        for position, item in enumerate(part.strip() for part in raw.split(",") if part.strip()):
            if "=" in item:
                key, value = (piece.strip() for piece in item.split("=", 1))
            elif position < len(names):
                key, value = names[position], item
            else:
                raise UnresolvableIdError(f"malformed parameter {item!r} in {law_id!r}")
            if key not in names:
                raise UnresolvableIdError(f"unknown parameter {key!r} for law family {family!r}")
            try:
                params[key] = float(value)
            except ValueError as e:
                raise UnresolvableIdError(f"non-numeric parameter {item!r} in {law_id!r}") from e
    return family, params


def resolve_law(law: Union[str, Distribution1D]) -> Distribution1D:
    """Return the Distribution1D for an identifier (Distribution1D instances pass through)."""
    if isinstance(law, Distribution1D):
        return law
    family, params = parse_law_id(law)
    factory = LAW_FAMILIES[family][0]
    try:
        return factory(**params)
    except TypeError as e:
        raise UnresolvableIdError(f"missing parameters for {law!r}: {e}") from e


# --- Operations ---

def generalized_inverse(dist: Distribution1D, s: float) -> float:
    """
    inf{t : F(t) > s}, computed by bisection on the CDF.

    Args:
        dist (Distribution1D): The law
        s (float): Probability level in (0, 1)

    Returns:
        float: The generalized quantile

    Raises:
        DomainError: If s is not in (0, 1)
    """
    if not 0.0 < s < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {s}")
    lo = dist.support[0] if math.isfinite(dist.support[0]) else -1.0
    hi = dist.support[1] if math.isfinite(dist.support[1]) else 1.0
    return threshold_bisect(lambda t: float(dist.cdf(t)) > s, lo, hi)


def h_q(q: float, t):
    """
    h_q = Phi_q^{-1} o Phi, where Phi_q has density (2 Gamma(1 + 1/q))^{-1} exp(-|t|^q).

    Uses P{|X_q| > x} = Q(1/q, x^q), inverted through the regularized upper
    incomplete gamma function, so the map stays finite as long as Phi(-|t|) > 0.
    """
    if q <= 0:
        raise DomainError("h_q needs q > 0")
    t = np.asarray(t, dtype=float)
    two_sided = 2.0 * normal_sf(np.abs(t))
    out = np.sign(t) * np.power(special.gammainccinv(1.0 / q, two_sided), 1.0 / q)
    return out if out.ndim else float(out)


def h_q_prime(q: float, t):
    """Derivative phi(t) / phi_q(h_q(t))."""
    t = np.asarray(t, dtype=float)
    out = np.exp(stats.norm.logpdf(t) - stats.gennorm.logpdf(h_q(q, t), q))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class HqEnvelope:
    """
    Fitted constants with c |t| <= |h_q(t)| <= C |t| on |t| <= 1 and
    c |t|^{2/q} <= |h_q(t)| <= C |t|^{2/q} beyond; likewise for h_q' with shapes
    1 and |t|^{-1+2/q}.
    """

    q: float
    c_q: float
    C_q: float
    c_prime: float
    C_prime: float

    def value_shape(self, t):
        a = np.abs(np.asarray(t, dtype=float))
        return np.where(a <= 1.0, a, np.power(a, 2.0 / self.q))

    def slope_shape(self, t):
        a = np.abs(np.asarray(t, dtype=float))
        return np.where(a <= 1.0, 1.0, np.power(np.maximum(a, 1.0), -1.0 + 2.0 / self.q))


def _ratio_extremes(ratio: Callable[[Any], Any], grid: np.ndarray, limits: Tuple[float, float]) -> Tuple[float, float]:
    """Infimum and supremum of ratio over (0, inf) from grid values, local polishing and the end limits."""
    values = np.asarray(ratio(grid), dtype=float)
    lo = min(float(values.min()), *limits)
    hi = max(float(values.max()), *limits)
    for sign, index in ((1.0, int(values.argmin())), (-1.0, int(values.argmax()))):
        if not 0 < index < grid.size - 1:
            continue
        polished = optimize.minimize_scalar(lambda s: sign * float(ratio(s)), method="bounded",
                                            bounds=(grid[index - 1], grid[index + 1]), options={"xatol": 1e-13})
        value = float(ratio(polished.x))
        lo, hi = min(lo, value), max(hi, value)
    return lo, hi


def fit_h_q_envelope(q: float, grid: Optional[np.ndarray] = None) -> HqEnvelope:
    """
    Sandwich constants for h_q and h_q' on t > 0 (both maps are odd or even).

    Both ratios to their shapes tend to 2 Gamma(1 + 1/q) / sqrt(2 pi) at 0; at
    infinity |h_q(t)|^q ~ t^2 / 2, so the value ratio tends to 2^{-1/q} and the
    slope ratio to 2^{1-1/q} / q. The constants combine these limits with a log
    grid containing the shape kink t = 1.
    """
    if q <= 0:
        raise DomainError("h_q envelope needs q > 0")
    if grid is None:
        grid = np.union1d(np.geomspace(ENVELOPE_T_MIN, ENVELOPE_T_MAX, ENVELOPE_POINTS), [1.0])
    grid = np.unique(np.abs(np.asarray(grid, dtype=float)))
    grid = grid[grid > 0]
    unit = HqEnvelope(q, 1.0, 1.0, 1.0, 1.0)
    at_zero = 2.0 * math.gamma(1.0 + 1.0 / q) / math.sqrt(2.0 * math.pi)
    c_q, C_q = _ratio_extremes(lambda s: np.abs(h_q(q, s)) / unit.value_shape(s), grid,
                               (at_zero, 2.0 ** (-1.0 / q)))
    c_prime, C_prime = _ratio_extremes(lambda s: np.abs(h_q_prime(q, s)) / unit.slope_shape(s), grid,
                                       (at_zero, 2.0 ** (1.0 - 1.0 / q) / q))
    return HqEnvelope(q, c_q, C_q, c_prime, C_prime)


@lru_cache(maxsize=64)
def h_q_envelope(q: float) -> HqEnvelope:
    """Frozen envelope constants for q, fitted once per process."""
    envelope = fit_h_q_envelope(q)
    logger.info(f"h_q envelope for q={q:g}: c_q={envelope.c_q:.6g}, C_q={envelope.C_q:.6g}")
    return envelope


def transport_map(laws: Sequence[Union[str, Distribution1D]], x) -> np.ndarray:
    """
    Coordinate-wise transport (F_i^{-1}(Phi(x_i)))_i.

    x may be a vector with one coordinate per law, or an n x m matrix whose
    columns are transported by the m laws.
    """
    resolved = [resolve_law(law) for law in laws]
    x = np.asarray(x, dtype=float)
    width = x.shape[-1] if x.ndim else 1
    if x.ndim == 0 or x.ndim > 2 or width != len(resolved):
        raise DomainError(f"need one law per coordinate: {len(resolved)} laws, shape {x.shape}")
    out = np.empty_like(x)
    for i, law in enumerate(resolved):
        out[..., i] = law.transport(x[..., i])
    return out


def sample(laws: Union[str, Distribution1D, Sequence[Union[str, Distribution1D]]], n: int, m: int,
           seed: int) -> SampleBatch:
    """
    Draw an n x m matrix with independent columns, column j from laws[j].

    Each column has its own stream keyed by (seed, column index), so any subset of
    columns can be regenerated independently.

    Raises:
        DomainError: If n or m is below 1 or the law list does not have m entries
        UnresolvableIdError: For an unknown law identifier
    """
    if n < 1 or m < 1:
        raise DomainError("sample needs n >= 1 and m >= 1")
    if isinstance(laws, (str, Distribution1D)):
        laws = [laws] * m
    if len(laws) != m:
        raise DomainError(f"expected {m} laws, got {len(laws)}")
    resolved = [resolve_law(law) for law in laws]
    partition = StreamPartition(seed=seed, tag=TAG_SAMPLE, kind="column")
    values = np.empty((n, m))
    for j, law in enumerate(resolved):
        values[:, j] = law.sampler(partition.stream(j), n)
    return SampleBatch(values, [law.name for law in resolved], seed, partition.describe())


def sample_ball_q(n: int, q: float, m: int, seed: int, block: int = 4096) -> SampleBatch:
    """
    m points uniform on the l_q ball B_q^n, one point per column.

    Built as X = Y / (W + sum |Y_i|^q)^{1/q} where Y has density proportional to
    exp(-|x|_q^q) and W is standard exponential.
    """
    if n < 1 or q <= 0 or m < 1:
        raise DomainError("sample_ball_q needs n >= 1, q > 0 and m >= 1")
    partition = StreamPartition(seed=seed, tag=TAG_BALL, kind="block", block=block)
    values = np.empty((n, m))
    for number, start, stop in partition.blocks(m):
        rng = partition.stream(number)
        width = stop - start
        gamma = rng.gamma(1.0 / q, 1.0, size=(n, width))
        signs = np.where(rng.random((n, width)) < 0.5, -1.0, 1.0)
        w = rng.standard_exponential(width)
        values[:, start:stop] = signs * np.power(gamma, 1.0 / q) / np.power(w + gamma.sum(axis=0), 1.0 / q)
    return SampleBatch(values, [f"ball_q:n={n},q={q:g}"], seed, partition.describe())


def radial_ks(values: np.ndarray, q: float) -> float:
    """sup_t |empirical CDF of |X|_q (t) - t^n| for the columns of values."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    norms = np.power(np.sum(np.power(np.abs(values), q), axis=0), 1.0 / q)
    return float(stats.kstest(norms, lambda t: np.power(np.clip(t, 0.0, 1.0), n)).statistic)
