"""
Minkowski functionals and their numerical evaluation.

Features:
- l_p quasi-norms and the Lorentz-type norm |.|_{r,q} with its dual
- Orlicz quantile functional built from log-moment generating functions
- Latala's moment functional |X|_(p)
- Poisson-hull functional E max_{0 <= j <= N} <a, X^(j)>
- McShane extension of Lipschitz functions
- Connectivity parameter of grid sets
- Monte Carlo checks of symmetrization and contraction

Usage:
    lorentz_norm(np.array([1.0, -1.0, 0.0]), r=2.0, q=2.0)
    orlicz_quantile(OrliczSpec.iid(gaussian_log_mgf, 10, 2.0), a)
    connectivity_param(GridSet.from_predicate(disk, -1, 1, 1 / 200), pairs=200, seed=1)
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, sparse, special
from scipy.sparse import csgraph
from scipy.spatial.distance import cdist

from lab.distributions import Distribution1D, normal_sf, resolve_law
from lab.errors import DomainError, NumericalFailure, PreconditionError
from lab.numerics import MAX_EXPANSIONS, checked_quad
from lab.streams import TAG_PAIRS, TAG_TRIAL, StreamPartition, generator

logger = logging.getLogger(__name__)

MGF_EXPONENT_CAP = 700.0
TRIAL_BLOCK = 4096
BRUTE_FORCE_MAX_DIM = 8
DIJKSTRA_BATCH = 16


def lp_functional(x, p: float) -> float:
    """(sum |x_i|^p)^{1/p}, or max |x_i| for p = inf. Quasi-norm for 0 < p < 1."""
    if not p > 0:
        raise DomainError(f"lp_functional needs p > 0, got {p}")
    x = np.abs(np.asarray(x, dtype=float)).ravel()
    if x.size == 0:
        return 0.0
    if p == math.inf:
        return float(x.max())
    top = x.max()
    if top == 0:
        return 0.0
    # scale out the max to keep large p from overflowing
    return float(top * np.sum((x / top) ** p) ** (1.0 / p))


# --- Lorentz-type norm ---

def _check_lorentz(r: float, q: float) -> None:
    if not r >= 1 or not q > 1:
        raise DomainError(f"Lorentz norm needs r >= 1 and q > 1 (r={r}, q={q})")


def _lorentz_weights(n: int, r: float, q: float) -> np.ndarray:
    k = np.arange(1, n + 1, dtype=float)
    return np.maximum(k, r * k ** (1.0 / q))


def lorentz_dual(y, r: float, q: float) -> float:
    """
    Exact dual norm sup{<x, y> : |x|_{r,q} <= 1}.

    The extreme points of the unit ball are sign vectors scaled by
    1 / max{|x|_1, r|x|_q}; for support size k the best one picks the k largest
    |y_i|, so the supremum is max_k S_k / max{k, r k^{1/q}} with S_k the sum of
    the k largest |y_i|.
    """
    _check_lorentz(r, q)
    y = np.sort(np.abs(np.asarray(y, dtype=float)).ravel())[::-1]
    if y.size == 0:
        return 0.0
    return float(np.max(np.cumsum(y) / _lorentz_weights(y.size, r, q)))


def lorentz_dual_sweep(y, r: float, q: float) -> float:
    """2 max{r^{-1} k^{-1/q} S_k : k <= min(r^{q/(q-1)}, n)}, within a factor 2 above the exact dual."""
    _check_lorentz(r, q)
    y = np.sort(np.abs(np.asarray(y, dtype=float)).ravel())[::-1]
    if y.size == 0:
        return 0.0
    k_max = max(1, min(y.size, int(math.floor(r ** (q / (q - 1.0)) * (1.0 + 1e-12)))))
    k = np.arange(1, k_max + 1, dtype=float)
    return float(2.0 * np.max(np.cumsum(y)[:k_max] / (r * k ** (1.0 / q))))


def lorentz_dual_brute(y, r: float, q: float) -> float:
    """Dual norm by enumerating every nonzero x in {0, +1, -1}^n (n <= 8)."""
    _check_lorentz(r, q)
    y = np.asarray(y, dtype=float).ravel()
    if y.size > BRUTE_FORCE_MAX_DIM:
        raise DomainError(f"brute force is limited to n <= {BRUTE_FORCE_MAX_DIM}")
    patterns = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=y.size)))
    patterns = patterns[np.any(patterns != 0, axis=1)]
    support = np.sum(patterns != 0, axis=1).astype(float)
    scale = np.maximum(support, r * support ** (1.0 / q))
    return float(np.max(patterns @ y / scale))


def lorentz_norm(x, r: float, q: float) -> float:
    """
    |x|_{r,q} = sup{<x, y> : |y|°_{r,q} <= 1}, solved as a linear program.

    With c the nonincreasing rearrangement of |x|, the optimal y may be taken
    nonincreasing and nonnegative, and the dual constraint becomes
    sum_{i <= k} y_i <= max{k, r k^{1/q}} for every k.

    Raises:
        NumericalFailure: If the solver does not reach optimality
    """
    _check_lorentz(r, q)
    c = np.sort(np.abs(np.asarray(x, dtype=float)).ravel())[::-1]
    n = c.size
    if n == 0 or c[0] == 0:
        return 0.0
    weights = _lorentz_weights(n, r, q)
    scale = c[0]
    # variables: y_1..y_n, then partial sums S_1..S_n
    eye = sparse.identity(n, format="csr")
    shift = sparse.eye(n, k=-1, format="csr")
    a_eq = sparse.hstack([-eye, eye - shift], format="csr")
    b_eq = np.zeros(n)
    a_ub = sparse.hstack([eye - shift, sparse.csr_matrix((n, n))], format="csr")[1:] if n > 1 else None
    b_ub = np.zeros(n - 1) if n > 1 else None
    bounds = [(0.0, None)] * n + [(0.0, w) for w in weights]
    objective = np.concatenate([-c / scale, np.zeros(n)])
    result = optimize.linprog(objective, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                              bounds=bounds, method="highs")
    if result.status != 0:
        raise NumericalFailure("Lorentz norm linear program failed",
                               {"status": result.status, "message": result.message, "n": n})
    return float(-result.fun * scale)


# --- Orlicz quantile functional ---

def gaussian_log_mgf(t):
    return 0.5 * np.square(t)


def rademacher_log_mgf(t):
    t = np.asarray(t, dtype=float)
    out = np.logaddexp(t, -t) - math.log(2.0)
    return out if out.ndim else float(out)


def log_mgf(law: Union[str, Distribution1D]) -> Callable[[float], float]:
    """
    t -> log E exp(tX) for a law, by enumeration or quadrature.

    Exponents are capped at 700; a capped or non-convergent integral reads as +inf.
    """
    dist = resolve_law(law)

    def xi(t: float) -> float:
        t = float(t)
        if t == 0.0:
            return 0.0
        if dist.atoms is not None:
            values = np.array([x for x, _ in dist.atoms])
            weights = np.array([p for _, p in dist.atoms])
            return float(special.logsumexp(t * values, b=weights))
        capped = [False]

        def integrand(x: float) -> float:
            exponent = t * x
            if exponent > MGF_EXPONENT_CAP:
                exponent = MGF_EXPONENT_CAP
                if dist.density is None or float(dist.density(x)) * math.exp(exponent) > 1e-300:
                    capped[0] = True
            return math.exp(exponent)

        try:
            value = dist.expect(integrand)
        except NumericalFailure:
            return math.inf
        if capped[0] or not value > 0 or not math.isfinite(value):
            return math.inf
        return math.log(value)

    return xi


@dataclass
class OrliczSpec:
    """
    Per-coordinate log-moment generating functions and the exponent level x.

    Attributes:
        xi_list (List[Callable]): xi_i(t) = log E exp(t X_i), convex with xi_i(0) = 0
        x_level (float): The target exponent; the functional controls P{...} <= e^{-x}
    """

    xi_list: List[Callable[[float], float]]
    x_level: float

    @classmethod
    def iid(cls, xi: Callable[[float], float], n: int, x_level: float) -> "OrliczSpec":
        return cls([xi] * n, x_level)

    def indicator(self, a) -> float:
        """sum_i x^{-1} xi_i(x a_i); the body is {a : indicator(a) <= 1}."""
        a = np.asarray(a, dtype=float).ravel()
        if a.size != len(self.xi_list):
            raise DomainError(f"expected {len(self.xi_list)} coefficients, got {a.size}")
        x = self.x_level
        total = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            for xi, ai in zip(self.xi_list, a):
                if ai == 0.0:
                    continue
                value = float(xi(x * ai))
                if not math.isfinite(value):
                    return math.inf
                total += value / x
        return total

    def validate(self, grid: Optional[np.ndarray] = None) -> None:
        """
        Check xi_i(0) = 0 and convexity on grid.

        Raises:
            DomainError: On the first violation
        """
        if not self.x_level > 0:
            raise DomainError("x_level must be positive")
        grid = np.linspace(-3.0, 3.0, 61) if grid is None else np.asarray(grid, dtype=float)
        for i, xi in enumerate(self.xi_list):
            if abs(float(xi(0.0))) > 1e-12:
                raise DomainError(f"xi_{i}(0) = {float(xi(0.0))} is not zero")
            values = np.array([float(xi(t)) for t in grid])
            finite = np.isfinite(values)
            second = values[2:] - 2.0 * values[1:-1] + values[:-2]
            mask = finite[2:] & finite[1:-1] & finite[:-2]
            if np.any(second[mask] < -1e-9):
                raise DomainError(f"xi_{i} is not convex on the validation grid")


def orlicz_quantile(spec: OrliczSpec, a) -> float:
    """
    |a|_phi = inf{y > 0 : sum_i x^{-1} xi_i(x a_i / y) <= 1}.

    The map y -> indicator(a / y) is nonincreasing, so the infimum is found by
    geometric bracketing and bisection. Overflowing evaluations count as lying
    outside the body.

    Raises:
        NumericalFailure: If no bracket is found
    """
    a = np.asarray(a, dtype=float).ravel()
    if not spec.x_level > 0:
        raise DomainError("x_level must be positive")
    if not np.any(a):
        return 0.0

    def inside(y: float) -> bool:
        return spec.indicator(a / y) <= 1.0

    hi = max(float(np.linalg.norm(a)), 1e-300)
    for _ in range(MAX_EXPANSIONS):
        if inside(hi):
            break
        hi *= 2.0
    else:
        raise NumericalFailure("orlicz_quantile: no upper bracket", {"hi": hi, "x": spec.x_level})
    lo = hi
    for _ in range(MAX_EXPANSIONS):
        lo *= 0.5
        if not inside(lo):
            break
        if lo < 1e-300:
            raise NumericalFailure("orlicz_quantile: no lower bracket", {"lo": lo, "x": spec.x_level})
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            break
        if inside(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-14 * hi:
            break
    return hi


# --- Latala functional ---

@dataclass
class LatalaValue:
    value: float
    diverged: bool = False


def _symmetric_power_mean(dist: Distribution1D, p: float, t: float) -> float:
    """E (|1 + X/t|^p + |1 - X/t|^p) / 2."""

    def fn(x: float) -> float:
        return 0.5 * (abs(1.0 + x / t) ** p + abs(1.0 - x / t) ** p)

    return dist.expect(fn)


def latala_functional(laws: Sequence[Union[str, Distribution1D]], p: float) -> LatalaValue:
    """
    |X|_(p) = inf{t > 0 : sum_i ln E (|1 + X_i/t|^p + |1 - X_i/t|^p)/2 <= p}.

    Args:
        laws: Symmetric coordinate laws (ids or Distribution1D)
        p (float): Moment order, p >= 2

    Returns:
        LatalaValue: The functional, or +inf with diverged=True when a p-th moment is infinite
    """
    if p < 2:
        raise DomainError(f"latala_functional needs p >= 2, got {p}")
    dists = [resolve_law(law) for law in laws]
    if not dists:
        raise DomainError("latala_functional needs at least one law")
    for dist in dists:
        if not dist.symmetric:
            raise DomainError(f"law {dist.name} is not symmetric")
    if all(dist.atoms is not None and all(x == 0 for x, _ in dist.atoms) for dist in dists):
        return LatalaValue(0.0)

    def excess(t: float) -> float:
        total = 0.0
        for dist in dists:
            mean = _symmetric_power_mean(dist, p, t)
            if not math.isfinite(mean):
                return math.inf
            total += math.log(mean)
        return total - p

    try:
        hi = 1.0
        for _ in range(MAX_EXPANSIONS):
            if excess(hi) <= 0:
                break
            hi *= 2.0
        else:
            raise NumericalFailure("latala_functional: no upper bracket", {"hi": hi})
        lo = hi
        for _ in range(MAX_EXPANSIONS):
            lo *= 0.5
            if excess(lo) > 0:
                break
        value = optimize.brentq(excess, lo, hi, xtol=1e-14, rtol=1e-13)
    except NumericalFailure as e:
        logger.warning(f"latala_functional diverged for p={p}: {e}")
        return LatalaValue(math.inf, diverged=True)
    return LatalaValue(float(value))


def exact_sum_moment(laws: Sequence[Union[str, Distribution1D]], p: float) -> float:
    """(E|sum X_i|^p)^{1/p} by enumerating every atom combination of discrete laws."""
    dists = [resolve_law(law) for law in laws]
    if any(dist.atoms is None for dist in dists):
        raise DomainError("exact_sum_moment needs discrete laws")
    total = 0.0
    for combo in itertools.product(*(dist.atoms for dist in dists)):
        weight = math.prod(prob for _, prob in combo)
        total += weight * abs(sum(value for value, _ in combo)) ** p
    return total ** (1.0 / p)


# --- Poisson hull functional ---

VectorSampler = Callable[[np.random.Generator, int], np.ndarray]


def product_sampler(laws: Sequence[Union[str, Distribution1D]]) -> VectorSampler:
    """Sampler of vectors with independent coordinates, one law per coordinate."""
    dists = [resolve_law(law) for law in laws]

    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        out = np.empty((size, len(dists)))
        for i, dist in enumerate(dists):
            out[:, i] = dist.sampler(rng, size)
        return out

    return draw


@dataclass
class PoissonHullEstimate:
    value: float
    standard_error: float
    trials: int


def poisson_hull_functional(sampler: VectorSampler, a, delta: float, m: int, seed: int) -> PoissonHullEstimate:
    """
    Monte Carlo estimate of E max_{0 <= j <= N} <a, X^(j)> with N ~ Poisson(1/delta)
    and X^(0) = 0, so every trial contributes a nonnegative maximum.
    """
    if not 0 < delta < 0.5:
        raise DomainError(f"delta must lie in (0, 1/2), got {delta}")
    if m < 2:
        raise DomainError("poisson_hull_functional needs at least 2 trials")
    a = np.asarray(a, dtype=float).ravel()
    if not np.any(a):
        return PoissonHullEstimate(0.0, 0.0, m)
    partition = StreamPartition(seed=seed, tag=TAG_TRIAL, kind="block", block=TRIAL_BLOCK)
    maxima = np.zeros(m)
    for number, start, stop in partition.blocks(m):
        rng = partition.stream(number)
        counts = rng.poisson(1.0 / delta, size=stop - start)
        total = int(counts.sum())
        if total == 0:
            continue
        points = sampler(rng, total)
        projections = points @ a
        owners = np.repeat(np.arange(stop - start), counts)
        block = np.zeros(stop - start)
        np.maximum.at(block, owners, projections)
        maxima[start:stop] = block
    return PoissonHullEstimate(float(maxima.mean()), float(maxima.std(ddof=1) / math.sqrt(m)), m)


def poisson_hull_oracle_1d(law: Union[str, Distribution1D], a: float, delta: float) -> float:
    """E max_{0 <= j <= N} a X^(j) in one dimension: integral of 1 - exp(-P{aX > t}/delta) over t > 0."""
    dist = resolve_law(law)
    if a == 0:
        return 0.0

    def exceed(t: float) -> float:
        if a > 0:
            return float(dist.survival(t / a))
        return float(dist.cdf(t / a))

    return checked_quad(lambda t: -math.expm1(-exceed(t) / delta), 0.0, math.inf)


# --- Lipschitz extension ---

def lipschitz_constant(points, values, metric: str = "euclidean") -> float:
    """max |f(z) - f(w)| / rho(z, w) over distinct pairs; 0 for a single point."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.asarray(values, dtype=float).ravel()
    if points.shape[0] < 2:
        return 0.0
    distances = cdist(points, points, metric=metric)
    gaps = np.abs(values[:, None] - values[None, :])
    off = distances > 0
    return float(np.max(gaps[off] / distances[off]))


def lipschitz_extension_eval(points, values, x, metric: str = "euclidean",
                             lip: Optional[float] = None):
    """
    f#(x) = min_{z in E} {f(z) + Lip(f) rho(x, z)}.

    Args:
        points: The set E, one point per row
        values: f on E
        x: A query point or a matrix of query points (one per row)
        metric (str): Any scipy.spatial.distance.cdist metric
        lip (float): Lipschitz constant to use; defaults to the max pairwise ratio on E

    Returns:
        float or np.ndarray: f# at the query point(s)
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.asarray(values, dtype=float).ravel()
    if points.shape[0] == 0 or points.shape[0] != values.size:
        raise DomainError("lipschitz_extension_eval needs a nonempty E with one value per point")
    lip = lipschitz_constant(points, values, metric) if lip is None else float(lip)
    query = np.asarray(x, dtype=float)
    single = query.ndim == 1
    out = np.min(values[None, :] + lip * cdist(np.atleast_2d(query), points, metric=metric), axis=1)
    return float(out[0]) if single else out


# --- Connectivity parameter ---

STENCIL_2D = tuple((i, j) for i in range(-2, 3) for j in range(-2, 3)
                   if (i, j) != (0, 0) and math.gcd(abs(i), abs(j)) == 1)
STENCIL_3D = tuple(d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0))


def stencil_inflation(stencil: Sequence[Tuple[int, ...]]) -> float:
    """Worst ratio of shortest stencil path length to Euclidean length over all directions."""
    vectors = np.array(stencil, dtype=float)
    if vectors.shape[1] == 3:
        # by symmetry it suffices to take d1 >= d2 >= d3 >= 0, covered by e1, e1+e2, e1+e2+e3
        grid = np.linspace(0.0, 1.0, 201)
        d2, d3 = np.meshgrid(grid, grid, indexing="ij")
        keep = d3 <= d2
        d1 = np.ones_like(d2)
        length = (d1 - d2) + math.sqrt(2.0) * (d2 - d3) + math.sqrt(3.0) * d3
        ratio = length / np.sqrt(d1 * d1 + d2 * d2 + d3 * d3)
        return float(ratio[keep].max())
    angles = np.arctan2(vectors[:, 1], vectors[:, 0])
    order = np.argsort(angles)
    worst = 1.0
    for i, j in zip(order, np.roll(order, -1)):
        u, v = vectors[i], vectors[j]
        basis = np.column_stack([u, v])
        if abs(np.linalg.det(basis)) < 1e-12:
            continue
        start, stop = angles[i], angles[j] if angles[j] > angles[i] else angles[j] + 2.0 * math.pi
        for phi in np.linspace(start, stop, 65):
            alpha, beta = np.linalg.solve(basis, [math.cos(phi), math.sin(phi)])
            worst = max(worst, alpha * np.linalg.norm(u) + beta * np.linalg.norm(v))
    return float(worst)


@dataclass
class GridSet:
    """
    A subset of R^2 or R^3 represented by a boolean mask on a regular grid.

    Attributes:
        mask (np.ndarray): Boolean array of dimension 2 or 3, mask[i, j, ...] for the
            point origin + h * (i, j, ...)
        h (float): Grid spacing
        origin (Tuple[float, ...]): Coordinates of mask[0, 0, ...]
    """

    mask: np.ndarray
    h: float
    origin: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim not in (2, 3):
            raise DomainError("GridSet supports dimension 2 or 3")
        if not self.mask.any():
            raise DomainError("GridSet mask is empty")
        if not self.h > 0:
            raise DomainError("grid spacing must be positive")
        if not self.origin:
            self.origin = (0.0,) * self.mask.ndim

    @property
    def dimension(self) -> int:
        return self.mask.ndim

    @classmethod
    def from_predicate(cls, predicate: Callable[..., np.ndarray], lo: float, hi: float, h: float,
                       dimension: int = 2) -> "GridSet":
        """Mask of predicate(*coordinates) on the cube [lo, hi]^dimension."""
        count = int(round((hi - lo) / h)) + 1
        axis = lo + h * np.arange(count)
        grids = np.meshgrid(*([axis] * dimension), indexing="ij")
        return cls(np.asarray(predicate(*grids), dtype=bool), h, (lo,) * dimension)

    @classmethod
    def from_bitmap(cls, text: str, h: float, origin: Tuple[float, float] = (0.0, 0.0)) -> "GridSet":
        """Parse a 2-D bitmap: one row per line, characters '0' and '1'."""
        rows = [line.strip() for line in text.splitlines() if line.strip()]
        if not rows or any(len(row) != len(rows[0]) for row in rows):
            raise DomainError("bitmap rows must be nonempty and of equal length")
        if any(ch not in "01" for row in rows for ch in row):
            raise DomainError("bitmap may only contain '0' and '1'")
        return cls(np.array([[ch == "1" for ch in row] for row in rows]), h, tuple(origin))

    def point(self, index: Sequence[int]) -> np.ndarray:
        return np.asarray(self.origin, dtype=float) + self.h * np.asarray(index, dtype=float)

    def nearest_index(self, x: Sequence[float]) -> Tuple[int, ...]:
        index = np.rint((np.asarray(x, dtype=float) - np.asarray(self.origin)) / self.h).astype(int)
        index = np.clip(index, 0, np.array(self.mask.shape) - 1)
        if not self.mask[tuple(index)]:
            raise DomainError(f"point {list(x)} is not in the set")
        return tuple(int(i) for i in index)

    @property
    def stencil(self) -> Tuple[Tuple[int, ...], ...]:
        return STENCIL_2D if self.dimension == 2 else STENCIL_3D

    def graph(self) -> Tuple[sparse.csr_matrix, np.ndarray]:
        """Weighted adjacency over mask cells and the flat indices of those cells."""
        shape = self.mask.shape
        cells = np.flatnonzero(self.mask)
        node_of = np.full(self.mask.size, -1, dtype=np.int64)
        node_of[cells] = np.arange(cells.size)
        rows, cols, weights = [], [], []
        flat = np.arange(self.mask.size).reshape(shape)
        for offset in self.stencil:
            src = tuple(slice(max(0, -d), s - max(0, d)) for d, s in zip(offset, shape))
            dst = tuple(slice(max(0, d), s - max(0, -d)) for d, s in zip(offset, shape))
            both = self.mask[src] & self.mask[dst]
            if not both.any():
                continue
            a = node_of[flat[src][both]]
            b = node_of[flat[dst][both]]
            rows.append(a)
            cols.append(b)
            weights.append(np.full(a.size, self.h * math.sqrt(sum(d * d for d in offset))))
        adjacency = sparse.csr_matrix(
            (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))),
            shape=(cells.size, cells.size),
        ) if rows else sparse.csr_matrix((cells.size, cells.size))
        return adjacency, cells


@dataclass
class ConnectivityEstimate:
    """
    Attributes:
        value (float): max over sampled pairs of path length / distance (+inf if disconnected)
        worst_pair (Optional[Tuple]): The two points realizing the max
        pairs (int): Number of pairs evaluated
        stencil_inflation (float): Bound on the factor by which stencil paths exceed straight segments
    """

    value: float
    worst_pair: Optional[Tuple[Tuple[float, ...], Tuple[float, ...]]]
    pairs: int
    stencil_inflation: float


def path_ratio(grid_set: GridSet, x: Sequence[float], y: Sequence[float]) -> float:
    """Grid shortest-path length between the cells nearest x and y, over their Euclidean distance."""
    adjacency, cells = grid_set.graph()
    flat_x = np.ravel_multi_index(grid_set.nearest_index(x), grid_set.mask.shape)
    flat_y = np.ravel_multi_index(grid_set.nearest_index(y), grid_set.mask.shape)
    source = int(np.searchsorted(cells, flat_x))
    target = int(np.searchsorted(cells, flat_y))
    if source == target:
        return 1.0
    distances = csgraph.dijkstra(adjacency, directed=False, indices=source)
    px = grid_set.point(np.unravel_index(flat_x, grid_set.mask.shape))
    py = grid_set.point(np.unravel_index(flat_y, grid_set.mask.shape))
    return float(distances[target] / np.linalg.norm(px - py))


def connectivity_param(grid_set: GridSet, pairs: int, seed: int) -> ConnectivityEstimate:
    """
    Estimate the connectivity parameter of a grid set.

    Samples `pairs` (source, target) cell pairs, computes grid-graph shortest
    paths with the 16-neighbour (2-D) or 26-neighbour (3-D) stencil and returns
    the largest path-to-distance ratio. Disconnected masks return +inf.
    """
    if pairs < 1:
        raise DomainError("connectivity_param needs at least one pair")
    adjacency, cells = grid_set.graph()
    inflation = stencil_inflation(grid_set.stencil)
    count, labels = csgraph.connected_components(adjacency, directed=False)
    if count > 1:
        logger.info(f"grid set has {count} components; connectivity parameter is infinite")
        return ConnectivityEstimate(math.inf, None, 0, inflation)
    if cells.size < 2:
        return ConnectivityEstimate(1.0, None, 0, inflation)

    rng = generator(seed, TAG_PAIRS)
    sources = rng.integers(0, cells.size, size=pairs)
    targets = rng.integers(0, cells.size - 1, size=pairs)
    targets = np.where(targets >= sources, targets + 1, targets)
    path_lengths = np.empty(pairs)
    for start in range(0, pairs, DIJKSTRA_BATCH):
        batch = slice(start, min(start + DIJKSTRA_BATCH, pairs))
        distances = csgraph.dijkstra(adjacency, directed=False, indices=sources[batch])
        path_lengths[batch] = distances[np.arange(distances.shape[0]), targets[batch]]
    shape = grid_set.mask.shape
    src_points = grid_set.point(np.stack(np.unravel_index(cells[sources], shape), axis=-1))
    dst_points = grid_set.point(np.stack(np.unravel_index(cells[targets], shape), axis=-1))
    euclid = np.linalg.norm(src_points - dst_points, axis=1)
    ratios = path_lengths / euclid
    worst = int(np.argmax(ratios))
    value = float(ratios[worst])
    logger.info(f"connectivity estimate {value:.4f} over {pairs} pairs (stencil inflation {inflation:.4f})")
    return ConnectivityEstimate(
        value,
        (tuple(src_points[worst].tolist()), tuple(dst_points[worst].tolist())),
        pairs,
        inflation,
    )


# --- Deviation/probability pair for Gaussian pushforwards ---

def main_zeroth_bound(A: float, L_Q: float, R: float, t: float) -> Tuple[float, float]:
    """
    (2 L(Q) R t, (A + 2)(1 - Phi(t))): psi(X) deviates from its median by more than
    the first entry with probability at most the second, once P{Q(Z) > R} <= A(1 - Phi(t)).

    Raises:
        PreconditionError: Unless Phi(t) > 1 - 1/(2A + 4)
    """
    if not A > 0 or not L_Q >= 1 or not R > 0:
        raise DomainError("main_zeroth_bound needs A > 0, L(Q) >= 1 and R > 0")
    if not float(normal_sf(t)) < 1.0 / (2.0 * A + 4.0):
        raise PreconditionError(f"t={t} must exceed Phi^{{-1}}(1 - 1/(2A+4)) for A={A}")
    return 2.0 * L_Q * R * t, (A + 2.0) * float(normal_sf(t))


# --- Symmetrization and contraction ---

@dataclass
class SymmetrizationRow:
    t: float
    lower: float
    middle: float
    upper: float
    standard_error: float
    ok: bool


def _abs_exceeds(dist: Distribution1D, x: float) -> float:
    """P{|X| > x} for x >= 0."""
    return float(dist.survival(x)) + float(dist.cdf(np.nextafter(-x, -math.inf)))


def symmetrization_check(law: Union[str, Distribution1D], a: float, t_grid: Sequence[float],
                         trials: int, seed: int) -> List[SymmetrizationRow]:
    """
    Compare 1/2 P{X > t + a} <= P{X - X' > t} <= P{|X| > t/2} on t_grid.

    The outer terms come from the law, the middle one from `trials` independent
    pairs; each side passes with a 3-SE slack.

    Raises:
        PreconditionError: If P{|X| > a} > 1/2
    """
    dist = resolve_law(law)
    if _abs_exceeds(dist, a) > 0.5:
        raise PreconditionError(f"symmetrization needs P{{|X| > a}} <= 1/2 (a={a})")
    rng = generator(seed, TAG_TRIAL)
    diff = dist.sampler(rng, trials) - dist.sampler(rng, trials)
    rows = []
    for t in t_grid:
        middle = float(np.mean(diff > t))
        se = math.sqrt(max(middle * (1.0 - middle), 1.0 / trials) / trials)
        lower = 0.5 * float(dist.survival(t + a))
        upper = _abs_exceeds(dist, t / 2.0)
        rows.append(SymmetrizationRow(float(t), lower, middle, upper, se,
                                      lower <= middle + 3 * se and middle <= upper + 3 * se))
    return rows


@dataclass
class ContractionReport:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    ok: bool


def contraction_check(x_law: Union[str, Distribution1D], y_law: Union[str, Distribution1D], K1: float,
                      K2: float, a, phi: Callable[[np.ndarray], np.ndarray], trials: int, seed: int,
                      tail_grid: Optional[Sequence[float]] = None) -> ContractionReport:
    """
    Monte Carlo comparison E phi(|sum a_i X_i|) <= E phi(K1 K2 |sum a_i Y_i|).

    The tail domination P{|X| > t} <= K1 P{K2 |Y| > t} is checked on tail_grid first.

    Raises:
        PreconditionError: If the laws are not symmetric or the domination fails
    """
    x_dist = resolve_law(x_law)
    y_dist = resolve_law(y_law)
    if not (x_dist.symmetric and y_dist.symmetric):
        raise PreconditionError("contraction principle needs symmetric laws")
    if K1 < 1 or K2 <= 0:
        raise DomainError("contraction principle needs K1 >= 1 and K2 > 0")
    grid = np.linspace(0.01, 10.0, 200) if tail_grid is None else np.asarray(tail_grid, dtype=float)
    x_tail = 2.0 * np.asarray(x_dist.survival(grid), dtype=float)
    y_tail = 2.0 * np.asarray(y_dist.survival(grid / K2), dtype=float)
    if np.any(x_tail > K1 * y_tail + 1e-12):
        raise PreconditionError("tail domination P{|X|>t} <= K1 P{K2|Y|>t} fails on the check grid")
    a = np.asarray(a, dtype=float).ravel()
    x_draws = product_sampler([x_dist] * a.size)(generator(seed, TAG_TRIAL, 0), trials) @ a
    y_draws = product_sampler([y_dist] * a.size)(generator(seed, TAG_TRIAL, 1), trials) @ a
    left = np.asarray(phi(np.abs(x_draws)), dtype=float)
    right = np.asarray(phi(K1 * K2 * np.abs(y_draws)), dtype=float)
    lhs, rhs = float(left.mean()), float(right.mean())
    lhs_se = float(left.std(ddof=1) / math.sqrt(trials))
    rhs_se = float(right.std(ddof=1) / math.sqrt(trials))
    return ContractionReport(lhs, lhs_se, rhs, rhs_se, lhs <= rhs + 3.0 * math.hypot(lhs_se, rhs_se))
