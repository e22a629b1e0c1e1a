"""
Random almost-isometric embeddings x -> Wx into a normed space.

Features:
- Norm oracles for l_p balls and polytopes given by facet normals
- epsilon_from_xi and the (epsilon, k) admissibility conditions
- Monte Carlo E|Wx|_K, epsilon-nets of the body {x : E|Wx|_K <= 1} and
  per-trial verification of (1 - eps) E|Wx|_K <= |Wx|_K <= (1 + eps) E|Wx|_K
- Gaussian Dvoretzky sections and the two-sided exponential recipe

Usage:
    spec = EmbeddingSpec(n=200, k=3, entry_law="normal", body=LpBody(200, 2.0), xi=lambda t: 0.1, T=3.0)
    report = verify_embedding(spec, trials=500, net_eps=0.1, seed=7, epsilon=0.25)
    report.success_rate, report.floor
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import special
from scipy.stats import qmc

from lab.bounds import CalibrationSet
from lab.distributions import Distribution1D, normal_sf, resolve_law
from lab.errors import DomainError, NetBudgetError
from lab.numerics import checked_quad
from lab.streams import TAG_NET, TAG_TRIAL, StreamPartition, generator

logger = logging.getLogger(__name__)

NET_BUDGET = 10 ** 6
EXPECTATION_DRAWS = 2000
PILOT_DIRECTIONS = 64
PILOT_DRAWS = 200
DRAW_BLOCK = 64
POINT_CELLS = 1 << 22
QUADRATURE_SPAN = 40.0


class LpBody:
    """Unit ball of l_p^n, 1 <= p <= inf."""

    def __init__(self, n: int, p: float):
        if n < 1 or not p >= 1:
            raise DomainError("LpBody needs n >= 1 and p >= 1")
        self.n = n
        self.p = float(p)

    @property
    def name(self) -> str:
        return "linf" if self.p == math.inf else f"lp:p={self.p:g}"

    @property
    def b(self) -> float:
        """sup of |theta|_p over the Euclidean unit sphere."""
        if self.p >= 2:
            return 1.0
        return self.n ** (1.0 / self.p - 0.5)

    def norm(self, y: np.ndarray) -> np.ndarray:
        """|y|_p along the last axis."""
        y = np.abs(np.asarray(y, dtype=float))
        if self.p == math.inf:
            return y.max(axis=-1)
        if self.p == 1.0:
            return y.sum(axis=-1)
        if self.p == 2.0:
            return np.sqrt(np.einsum("...i,...i->...", y, y))
        return np.power(np.power(y, self.p).sum(axis=-1), 1.0 / self.p)


class PolytopeBody:
    """K = {y : <f_j, y> <= 1 for all j}, with gauge max(0, max_j <f_j, y>)."""

    def __init__(self, facets):
        facets = np.atleast_2d(np.asarray(facets, dtype=float))
        if facets.shape[0] < facets.shape[1] + 1:
            raise DomainError("a bounded polytope needs at least n + 1 facets")
        self.facets = facets
        self.n = facets.shape[1]

    @property
    def name(self) -> str:
        return f"polytope:{self.facets.shape[0]}"

    @property
    def b(self) -> float:
        return float(np.max(np.linalg.norm(self.facets, axis=1)))

    def norm(self, y: np.ndarray) -> np.ndarray:
        return np.maximum(0.0, np.asarray(y, dtype=float) @ self.facets.T).max(axis=-1)


Body = Union[LpBody, PolytopeBody]


def body_from_id(body_id: str, n: int) -> Body:
    """"lp:p=<p>", "l1", "l2" or "linf"."""
    aliases = {"l1": 1.0, "l2": 2.0, "linf": math.inf}
    if body_id in aliases:
        return LpBody(n, aliases[body_id])
    if body_id.startswith("lp:p="):
        try:
            return LpBody(n, float(body_id.split("=", 1)[1]))
        except ValueError:
            pass
    raise DomainError(f"unknown body id {body_id!r}")


@dataclass
class EmbeddingSpec:
    """
    Attributes:
        n (int): Ambient dimension of the body
        k (int): Dimension of the embedded space
        entry_law: Law id or Distribution1D shared by all entries of W
        body (Body): Norm oracle on R^n
        xi (Callable): Nondecreasing gradient quantile map
        L_Q (float): Connectivity factor of the gradient functional
        T (float): Deviation parameter, T >= 2
    """

    n: int
    k: int
    entry_law: Union[str, Distribution1D]
    body: Body
    xi: Callable[[float], float]
    T: float
    L_Q: float = math.sqrt(2.0)

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise DomainError("embedding needs n >= 1 and k >= 1")
        if self.body.n != self.n:
            raise DomainError(f"body dimension {self.body.n} does not match n={self.n}")
        if self.T < 2:
            raise DomainError("embedding needs T >= 2")
        self.entry_law = resolve_law(self.entry_law)

    @property
    def b(self) -> float:
        return self.body.b

    def draw(self, rng: np.random.Generator, count: int = 1) -> np.ndarray:
        """count independent n x k matrices, shape (count, n, k)."""
        values = self.entry_law.sampler(rng, count * self.n * self.k)
        return np.asarray(values, dtype=float).reshape(count, self.n, self.k)


def epsilon_summands(L_Q: float, T: float, xi: Callable[[float], float]) -> Tuple[float, float]:
    """(8 L T xi(T), 28 L sqrt(int_2^inf xi(t)^2 t^3 exp(-t^2/2) dt))."""
    if T < 2:
        raise DomainError("epsilon_from_xi needs T >= 2")
    first = 8.0 * L_Q * T * float(xi(T))
    integral = checked_quad(lambda t: float(xi(t)) ** 2 * t ** 3 * math.exp(-0.5 * t * t),
                            2.0, T + QUADRATURE_SPAN, rel_tol=1e-8)
    return first, 28.0 * L_Q * math.sqrt(max(integral, 0.0))


def epsilon_from_xi(L_Q: float, T: float, xi: Callable[[float], float]) -> float:
    """
    The distortion epsilon guaranteed by the gradient quantile map xi.

    Raises:
        NumericalFailure: If the quadrature does not converge
    """
    first, second = epsilon_summands(L_Q, T, xi)
    return first + second


def embedding_conditions(epsilon: float, k: int, T: float) -> bool:
    """0 < eps <= 1/2 and k <= T^2 / (19 log(1/eps))."""
    if not 0 < epsilon <= 0.5:
        return False
    return k <= T * T / (19.0 * math.log(1.0 / epsilon))


def _expected_norms(spec: EmbeddingSpec, points: np.ndarray, draws: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Monte Carlo E|Wx|_K and its standard error for each row x of points, common draws of W."""
    points = np.atleast_2d(points)
    partition = StreamPartition(seed=seed, tag=TAG_NET, kind="block", block=DRAW_BLOCK)
    total = np.zeros(points.shape[0])
    square = np.zeros(points.shape[0])
    span = max(1, POINT_CELLS // (DRAW_BLOCK * spec.n))
    for number, start, stop in partition.blocks(draws):
        w = spec.draw(partition.stream(number), stop - start)
        for lo in range(0, points.shape[0], span):
            norms = spec.body.norm(np.einsum("snk,mk->smn", w, points[lo:lo + span]))
            total[lo:lo + span] += norms.sum(axis=0)
            square[lo:lo + span] += np.square(norms).sum(axis=0)
    mean = total / draws
    variance = np.maximum(square / draws - mean * mean, 0.0) * draws / max(draws - 1, 1)
    return mean, np.sqrt(variance / draws)


def estimate_Ebody(spec: EmbeddingSpec, m: int, x, seed: int) -> Tuple[float, float]:
    """Monte Carlo estimate of E|Wx|_K with its standard error."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != spec.k:
        raise DomainError(f"x must have {spec.k} coordinates")
    if m < 2:
        raise DomainError("estimate_Ebody needs m >= 2")
    if not np.any(x):
        return 0.0, 0.0
    mean, se = _expected_norms(spec, x[None, :], m, seed)
    return float(mean[0]), float(se[0])


def _sphere_candidates(k: int, count: int, seed: int) -> np.ndarray:
    if k == 1:
        return np.array([[1.0], [-1.0]])
    sobol = qmc.Sobol(d=k, scramble=True, seed=np.random.default_rng([seed, TAG_NET]))
    u = sobol.random_base2(int(math.ceil(math.log2(count))))
    z = special.ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def greedy_packing(points: np.ndarray, radius: float) -> np.ndarray:
    """Indices of a maximal radius-separated subset, scanning points in order."""
    chosen: List[int] = []
    kept = np.empty((0, points.shape[1]))
    for i, point in enumerate(points):
        if kept.shape[0] == 0 or np.min(np.linalg.norm(kept - point, axis=1)) >= radius:
            chosen.append(i)
            kept = np.vstack([kept, point])
    return np.array(chosen, dtype=int)


@dataclass
class EpsilonNet:
    """
    Attributes:
        points (np.ndarray): Net points on the boundary of {x : E|Wx|_K <= 1}, one per row
        expected (np.ndarray): E|W theta|_K for the underlying unit directions
        standard_errors (np.ndarray): Standard errors of `expected`
        sphere_radius (float): Euclidean packing radius used on the unit sphere
    """

    points: np.ndarray
    expected: np.ndarray
    standard_errors: np.ndarray
    sphere_radius: float

    @property
    def size(self) -> int:
        return int(self.points.shape[0])


def build_net(spec: EmbeddingSpec, net_eps: float, seed: int, draws: int = EXPECTATION_DRAWS) -> EpsilonNet:
    """
    Deterministic net of the boundary of K-flat at radius net_eps in its own gauge.

    Directions on the Euclidean sphere are packed at radius
    net_eps * min E / (2 max E), with the extremes of E|W theta|_K taken from a
    pilot set of directions, and then rescaled onto the boundary.

    Raises:
        NetBudgetError: If (12 / net_eps)^k exceeds the materialization budget
    """
    if not 0 < net_eps < 1:
        raise DomainError("net_eps must lie in (0, 1)")
    if spec.k * math.log(12.0 / net_eps) > math.log(NET_BUDGET):
        raise NetBudgetError(
            f"an epsilon-net with (12/{net_eps:g})^{spec.k} points exceeds the budget of {NET_BUDGET}; "
            f"use a larger net_eps or a smaller k"
        )
    pilot = _sphere_candidates(spec.k, PILOT_DIRECTIONS, seed + 1)
    pilot_means, _ = _expected_norms(spec, pilot, PILOT_DRAWS, seed + 1)
    radius = net_eps * float(pilot_means.min()) / (2.0 * float(pilot_means.max()))
    count = int(min(2 ** 17, max(64, 2.0 * (4.0 / radius) ** (spec.k - 1))))
    candidates = _sphere_candidates(spec.k, count, seed)
    directions = candidates[greedy_packing(candidates, radius)]
    means, errors = _expected_norms(spec, directions, draws, seed)
    logger.info(f"net of {directions.shape[0]} points at sphere radius {radius:.4g} (k={spec.k}, net_eps={net_eps:g})")
    return EpsilonNet(directions / means[:, None], means, errors, radius)


@dataclass
class EmbeddingReport:
    """
    Attributes:
        epsilon (float): Distortion tolerance the trials were judged against
        computed_epsilon (float): Epsilon from xi
        epsilon_terms (Tuple[float, float]): The two summands of computed_epsilon
        condition_ok (bool): Whether computed_epsilon and k satisfy the admissibility conditions
        trials (List[Tuple[float, float]]): Per-trial (min, max) ratio over the net
        success_rate (float): Fraction of trials with every ratio within [1 - eps, 1 + eps]
        floor (float): 1 - exp(-T^2/4)
        net_size (int): Number of net points
        ratios (np.ndarray): trials x net_size matrix of |Wx|_K / E|Wx|_K
    """

    epsilon: float
    computed_epsilon: float
    epsilon_terms: Tuple[float, float]
    condition_ok: bool
    trials: List[Tuple[float, float]]
    success_rate: float
    floor: float
    net_size: int
    n: int
    k: int
    T: float
    seed: int
    extras: Dict[str, float] = field(default_factory=dict)
    ratios: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> Dict:
        return {
            "epsilon": self.epsilon,
            "computed_epsilon": self.computed_epsilon,
            "epsilon_terms": list(self.epsilon_terms),
            "condition_ok": self.condition_ok,
            "success_rate": self.success_rate,
            "floor": self.floor,
            "net_size": self.net_size,
            "n": self.n,
            "k": self.k,
            "T": self.T,
            "seed": self.seed,
            "trials": [list(pair) for pair in self.trials],
            "extras": dict(self.extras),
        }


def verify_embedding(spec: EmbeddingSpec, trials: int, net_eps: float, seed: int,
                     epsilon: Optional[float] = None) -> EmbeddingReport:
    """
    Draw W per trial and check the two-sided distortion on an epsilon-net.

    Args:
        spec (EmbeddingSpec): Dimensions, entry law, body and xi
        trials (int): Number of independent matrices W
        net_eps (float): Packing radius of the net in the gauge of K-flat
        seed (int): Root seed
        epsilon (float): Tolerance to judge against; defaults to the epsilon computed from xi

    Returns:
        EmbeddingReport: Success rate against the floor 1 - exp(-T^2/4)
    """
    if trials < 1:
        raise DomainError("verify_embedding needs at least one trial")
    first, second = epsilon_summands(spec.L_Q, spec.T, spec.xi)
    computed = first + second
    condition_ok = embedding_conditions(computed, spec.k, spec.T)
    if not condition_ok:
        logger.warning(f"embedding conditions fail: epsilon={computed:.4g}, k={spec.k}, T={spec.T:g}")
    tolerance = computed if epsilon is None else float(epsilon)

    net = build_net(spec, net_eps, seed)
    ratios = np.empty((trials, net.size))
    extremes: List[Tuple[float, float]] = []
    successes = 0
    for trial in range(trials):
        w = spec.draw(generator(seed, TAG_TRIAL, trial))[0]
        row = spec.body.norm(net.points @ w.T)
        ratios[trial] = row
        low, high = float(row.min()), float(row.max())
        if spec.k > spec.n or np.linalg.matrix_rank(w) < spec.k:
            # a nonzero x with Wx = 0 exists
            low = 0.0
        extremes.append((low, high))
        if 1.0 - tolerance <= low and high <= 1.0 + tolerance:
            successes += 1
    success_rate = successes / trials
    floor = 1.0 - math.exp(-spec.T * spec.T / 4.0)
    logger.info(f"embedding success rate {success_rate:.4f} over {trials} trials (floor {floor:.4f})")
    return EmbeddingReport(tolerance, computed, (first, second), condition_ok, extremes, success_rate,
                           floor, net.size, spec.n, spec.k, spec.T, seed, ratios=ratios)


def trial_ratios(spec: EmbeddingSpec, x, trials: int, seed: int, m: int = EXPECTATION_DRAWS) -> np.ndarray:
    """|W_s x|_K / E|Wx|_K over `trials` independent W_s."""
    expected, _ = estimate_Ebody(spec, m, x, seed)
    x = np.asarray(x, dtype=float).ravel()
    out = np.empty(trials)
    for trial in range(trials):
        w = spec.draw(generator(seed, TAG_TRIAL, trial))[0]
        out[trial] = float(spec.body.norm(w @ x))
    return out / expected


def estimate_M(body: Body, samples: int, seed: int) -> Tuple[float, float]:
    """M = integral of |theta|_K over the unit sphere, with standard error."""
    rng = generator(seed, TAG_NET, 1)
    z = rng.standard_normal((samples, body.n))
    values = body.norm(z / np.linalg.norm(z, axis=1, keepdims=True))
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(samples))


def gaussian_dvoretzky(n: int, k: int, eps: float, body: Body, trials: int, seed: int,
                       calib: Optional[CalibrationSet] = None, net_eps: Optional[float] = None,
                       m_samples: int = 4000) -> EmbeddingReport:
    """
    Random k-sections of K by an n x k standard Gaussian matrix.

    Sets xi = 2 n^{-1/2} M^{-1} b (constant, so L(Q) = 1) and T = C eps n^{1/2} M / b,
    with C the calibration entry embed.T_scale, clamped to T >= 2.
    """
    calib = calib or CalibrationSet()
    if not 0 < eps < 0.5:
        raise DomainError("gaussian_dvoretzky needs 0 < eps < 1/2")
    M, M_se = estimate_M(body, m_samples, seed)
    b = body.b
    xi_value = 2.0 * b / (math.sqrt(n) * M)
    T = max(2.0, calib.get("embed.T_scale") * eps * math.sqrt(n) * M / b)
    spec = EmbeddingSpec(n=n, k=k, entry_law="normal", body=body, xi=lambda t: xi_value, T=T, L_Q=1.0)
    report = verify_embedding(spec, trials, net_eps or eps / 2.0, seed, epsilon=eps)
    report.extras.update({"M": M, "M_se": M_se, "b": b,
                          "dvoretzky_k": eps * eps * n * M * M / (b * b * math.log(1.0 / eps))})
    return report


@dataclass
class ExponentialRecipe:
    """
    Parameters for two-sided exponential entries and K = B_p^n.

    Attributes:
        k_max (float): c_p b^{-1} n^{1/p}
        T (float): c_p b^{-1/2} n^{1/(2p)}
        xi (Callable): t -> C_p b n^{-1/p} (sqrt(log n) + t)
        Q_scale (float): C_p b n^{-1/p}, the factor of max |A_ij| in Q(A)
    """

    k_max: float
    T: float
    xi: Callable[[float], float]
    Q_scale: float


def exponential_recipe(n: int, p: float, b: Optional[float] = None,
                       calib: Optional[CalibrationSet] = None) -> ExponentialRecipe:
    calib = calib or CalibrationSet()
    if n < 2 or not p >= 1:
        raise DomainError("exponential_recipe needs n >= 2 and p >= 1")
    b = LpBody(n, p).b if b is None else float(b)
    c_p = calib.get("embed.c_p")
    scale = calib.get("embed.C_p") * b * n ** (-1.0 / p)
    root_log = math.sqrt(math.log(n))
    return ExponentialRecipe(
        k_max=c_p * n ** (1.0 / p) / b,
        T=c_p * b ** -0.5 * n ** (1.0 / (2.0 * p)),
        xi=lambda t: scale * (root_log + t),
        Q_scale=scale,
    )


def gaussian_tail_check(xi: Callable[[float], float], Q_samples: np.ndarray, t_grid) -> bool:
    """Empirical P{Q(G) > xi(t)} <= 2(1 - Phi(t)) on t_grid, with a 3-SE slack."""
    Q_samples = np.asarray(Q_samples, dtype=float)
    size = Q_samples.size
    for t in t_grid:
        freq = float(np.mean(Q_samples > xi(t)))
        slack = 3.0 * math.sqrt(max(freq * (1.0 - freq), 1.0 / size) / size)
        if freq > 2.0 * float(normal_sf(t)) + slack:
            return False
    return True
