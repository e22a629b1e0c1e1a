"""
Monte Carlo verification of concentration bounds.

Features:
- ExperimentConfig parsed from JSON documents (sampler, statistic, bound, t_grid)
- verify_bound: chunked, worker-count independent trials, median centering,
  Wilson 99% intervals and split-seed calibration
- pisier_check: both sides of the Gaussian convex-order inequality
- experiment_random_rotation: deviation quantiles of g(UX) for Haar U
- emit_report: CSV, JSON and SVG files through utils.reports

Usage:
    config = ExperimentConfig.from_dict(json.load(open("experiment.json")))
    report = verify_bound(config, workers=4)
    emit_report(report, "csv", "reports")
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from lab.bounds import BOUND_FACTORIES, FIT_KEYS, CalibrationSet, TailBoundCurve, make_curve
from lab.distributions import normal_cdf, poly_tail, resolve_law, sample, sample_ball_q
from lab.errors import DomainError, UnresolvableIdError
from lab.streams import TAG_CALIBRATION, TAG_TRIAL, generator

logger = logging.getLogger(__name__)

MIN_TRIALS = 1000
CONFIDENCE = 0.99
FIT_STEPS = 60
FIT_RANGE = (1e-6, 1e6)
PASS_SLACK = 3.0

ProgressCallback = Callable[[int, int], None]


def wilson_interval(count: int, trials: int, confidence: float = CONFIDENCE) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    ci = stats.binomtest(int(count), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def chunk_seed(seed: int, *key: int) -> int:
    """Integer seed derived from (seed, *key) for samplers that take a plain seed."""
    state = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


# --- Samplers: (params, rows, seed) -> rows x n matrix ---

def _product_sampler(params: Dict[str, Any]) -> Callable[[int, int], np.ndarray]:
    n = int(params["n"])
    laws = params.get("laws", params.get("law", "normal"))
    if isinstance(laws, str):
        resolve_law(laws)
    elif len(laws) != n:
        raise DomainError(f"product sampler needs {n} laws, got {len(laws)}")

    def draw(rows: int, seed: int) -> np.ndarray:
        return sample(laws, rows, n, seed).values

    return draw


def _ball_sampler(params: Dict[str, Any]) -> Callable[[int, int], np.ndarray]:
    n = int(params["n"])
    q = float(params["q"])
    if n < 1 or q <= 0:
        raise DomainError("ball_q sampler needs n >= 1 and q > 0")

    def draw(rows: int, seed: int) -> np.ndarray:
        return sample_ball_q(n, q, rows, seed).values.T

    return draw


SAMPLERS: Dict[str, Callable[[Dict[str, Any]], Callable[[int, int], np.ndarray]]] = {
    "product": _product_sampler,
    "ball_q": _ball_sampler,
}


# --- Smooth functions with gradients, shared by statistics, pisier_check and rotations ---

@dataclass(frozen=True)
class SmoothFunction:
    """
    Attributes:
        value (Callable): rows x n -> values
        gradient (Callable): rows x n -> rows x n gradients
        lipschitz (float): Certified Euclidean Lipschitz constant
    """

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz: float


def _unit_diagonal(x: np.ndarray) -> np.ndarray:
    return np.full(x.shape[-1], x.shape[-1] ** -0.5)


def _euclidean_gradient(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def _soft_max(x: np.ndarray) -> np.ndarray:
    top = x.max(axis=-1, keepdims=True)
    return top[..., 0] + np.log(np.exp(x - top).sum(axis=-1))


def _soft_max_gradient(x: np.ndarray) -> np.ndarray:
    weights = np.exp(x - x.max(axis=-1, keepdims=True))
    return weights / weights.sum(axis=-1, keepdims=True)


SMOOTH_FUNCTIONS: Dict[str, SmoothFunction] = {
    "linear": SmoothFunction(lambda x: x @ _unit_diagonal(x),
                             lambda x: np.broadcast_to(_unit_diagonal(x), x.shape), 1.0),
    "first_coordinate": SmoothFunction(lambda x: x[..., 0],
                                       lambda x: np.broadcast_to(np.eye(1, x.shape[-1])[0], x.shape), 1.0),
    "euclidean": SmoothFunction(lambda x: np.linalg.norm(x, axis=-1), _euclidean_gradient, 1.0),
    "soft_max": SmoothFunction(_soft_max, _soft_max_gradient, 1.0),
    "constant": SmoothFunction(lambda x: np.zeros(x.shape[:-1]), np.zeros_like, 0.0),
}

CONVEX_FUNCTIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "square": np.square,
    "quartic": lambda t: np.power(t, 4),
    "abs": np.abs,
    "cosh": np.cosh,
}


def smooth_function(f_id: str) -> SmoothFunction:
    try:
        return SMOOTH_FUNCTIONS[f_id]
    except KeyError:
        raise UnresolvableIdError(f"no gradient registered for {f_id!r}; expected one of {sorted(SMOOTH_FUNCTIONS)}")


def convex_function(phi_id: str) -> Callable[[np.ndarray], np.ndarray]:
    try:
        return CONVEX_FUNCTIONS[phi_id]
    except KeyError:
        raise UnresolvableIdError(f"unknown convex function {phi_id!r}; expected one of {sorted(CONVEX_FUNCTIONS)}")


# --- Statistics: (params) -> rows x n -> values ---

def _linear_statistic(params: Dict[str, Any]) -> Callable[[np.ndarray], np.ndarray]:
    a = params.get("a")
    if a is None:
        return lambda x: x @ _unit_diagonal(x)
    a = np.asarray(a, dtype=float)
    return lambda x: x @ a


def _row_lp(x: np.ndarray, p: float) -> np.ndarray:
    """lp_functional of every row, max-scaled like the scalar version."""
    x = np.abs(x)
    top = x.max(axis=1)
    if p == math.inf:
        return top
    scale = np.where(top > 0, top, 1.0)
    return scale * np.power(np.power(x / scale[:, None], p).sum(axis=1), 1.0 / p)


def _lp_norm_statistic(params: Dict[str, Any]) -> Callable[[np.ndarray], np.ndarray]:
    p = float(params["p"])
    if p <= 0:
        raise DomainError("lp_norm statistic needs p > 0")
    return lambda x: _row_lp(x, p)


def _lp_sum_statistic(params: Dict[str, Any]) -> Callable[[np.ndarray], np.ndarray]:
    p = float(params["p"])
    if p <= 0:
        raise DomainError("lp_sum statistic needs p > 0")
    return lambda x: np.power(np.abs(x), p).sum(axis=1)


def _lp_of_transport_statistic(params: Dict[str, Any]) -> Callable[[np.ndarray], np.ndarray]:
    law = resolve_law(params["law"])
    norm = _lp_norm_statistic(params)
    return lambda x: norm(law.transport(x))


def _max_statistic(params: Dict[str, Any]) -> Callable[[np.ndarray], np.ndarray]:
    if params.get("absolute", False):
        return lambda x: np.abs(x).max(axis=1)
    return lambda x: x.max(axis=1)


def _custom_statistic(params: Dict[str, Any]) -> Callable[[np.ndarray], np.ndarray]:
    return smooth_function(params["f"]).value


STATISTICS: Dict[str, Callable[[Dict[str, Any]], Callable[[np.ndarray], np.ndarray]]] = {
    "linear": _linear_statistic,
    "lp_norm": _lp_norm_statistic,
    "lp_sum": _lp_sum_statistic,
    "lp_of_transport": _lp_of_transport_statistic,
    "max": _max_statistic,
    "custom": _custom_statistic,
}

# Event compared against each bound: |f - median| > level by default.
BOUND_EVENTS = {
    "lpn_gauss_rel": "relative",
    "berry_esseen": "cdf_distance",
}


def _split_spec(spec: Any, section: str) -> Tuple[str, Dict[str, Any]]:
    if isinstance(spec, str):
        return spec, {}
    if not isinstance(spec, dict) or "id" not in spec:
        raise DomainError(f"{section} must be an id or an object with an 'id' field")
    return str(spec["id"]), dict(spec.get("params", {k: v for k, v in spec.items() if k != "id"}))


@dataclass
class ExperimentConfig:
    """
    A single verification experiment.

    Attributes:
        name (str): Experiment label used in report file names
        sampler (Dict): {"id": "product" | "ball_q", "params": {...}}
        statistic (Dict): {"id": registered statistic, "params": {...}}
        bound (Dict): {"id": registered bound, "params": {...}}
        t_grid (List[float]): Strictly increasing evaluation points
        trials (int): Trials per split, at least 1000
        seed (int): Root seed
        calibration (str): "default" or "calibrated"
        fit_trials (int): Trials on the fitting split in calibrated mode
    """

    name: str
    sampler: Dict[str, Any]
    statistic: Dict[str, Any]
    bound: Dict[str, Any]
    t_grid: List[float]
    trials: int = 10000
    seed: int = 0
    calibration: str = "default"
    fit_trials: Optional[int] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """
        Validate and build a config.

        Raises:
            DomainError: On malformed fields, t_grid not strictly increasing or trials < 1000
            UnresolvableIdError: On unknown sampler, statistic or bound ids
        """
        if not isinstance(data, dict):
            raise DomainError("experiment config must be a JSON object")
        try:
            sampler_id, sampler_params = _split_spec(data["sampler"], "sampler")
            statistic_id, statistic_params = _split_spec(data["statistic"], "statistic")
            bound_id, bound_params = _split_spec(data["bound"], "bound")
            t_grid = [float(t) for t in data["t_grid"]]
            trials = int(data.get("trials", 10000))
            seed = int(data.get("seed", 0))
        except KeyError as e:
            raise DomainError(f"experiment config is missing {e}")
        except (TypeError, ValueError) as e:
            raise DomainError(f"malformed experiment config: {e}")

        if sampler_id not in SAMPLERS:
            raise UnresolvableIdError(f"unknown sampler {sampler_id!r}")
        if statistic_id not in STATISTICS:
            raise UnresolvableIdError(f"unknown statistic {statistic_id!r}")
        if bound_id not in BOUND_FACTORIES:
            raise UnresolvableIdError(f"unknown bound {bound_id!r}")
        if not t_grid:
            raise DomainError("t_grid must not be empty")
        if any(b <= a for a, b in zip(t_grid, t_grid[1:])):
            raise DomainError("t_grid must be strictly increasing")
        if trials < MIN_TRIALS:
            raise DomainError(f"trials must be at least {MIN_TRIALS}, got {trials}")
        if seed < 0:
            raise DomainError("seed must be nonnegative")

        calibration = data.get("calibration", "default")
        fit_trials = None
        if isinstance(calibration, dict):
            fit_trials = calibration.get("fit_trials")
            calibration = calibration.get("mode", "default")
        if calibration not in ("default", "calibrated"):
            raise DomainError(f"calibration mode must be 'default' or 'calibrated', got {calibration!r}")
        if fit_trials is not None and int(fit_trials) < MIN_TRIALS:
            raise DomainError(f"fit_trials must be at least {MIN_TRIALS}")

        return cls(
            name=str(data.get("name", bound_id)),
            sampler={"id": sampler_id, "params": sampler_params},
            statistic={"id": statistic_id, "params": statistic_params},
            bound={"id": bound_id, "params": bound_params},
            t_grid=t_grid,
            trials=trials,
            seed=seed,
            calibration=calibration,
            fit_trials=None if fit_trials is None else int(fit_trials),
        )

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "name": self.name,
            "sampler": self.sampler,
            "statistic": self.statistic,
            "bound": self.bound,
            "t_grid": list(self.t_grid),
            "trials": self.trials,
            "seed": self.seed,
            "calibration": self.calibration,
        }
        if self.fit_trials is not None:
            data["calibration"] = {"mode": self.calibration, "fit_trials": self.fit_trials}
        return data


@dataclass
class VerificationRow:
    t: float
    level: float
    exceedances: int
    trials: int
    empirical: float
    ci_lo: float
    ci_hi: float
    bound: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t, "level": self.level, "exceedances": self.exceedances, "trials": self.trials,
            "empirical": self.empirical, "ci_lo": self.ci_lo, "ci_hi": self.ci_hi,
            "bound": self.bound, "pass": self.passed,
        }


@dataclass
class VerificationReport:
    """
    Outcome of verify_bound.

    Attributes:
        rows (List[VerificationRow]): One row per grid point of the verification split
        calibration (Dict): Mode, CalibrationSet identifier and fitted entries
        center (float): Median (or mean, for relative events) of the statistic
        runtime (float): Wall-clock seconds; not part of the serialized report
    """

    name: str
    bound: str
    event: str
    rows: List[VerificationRow]
    calibration: Dict[str, Any]
    center: float
    seed: int
    trials: int
    config: Dict[str, Any] = field(default_factory=dict)
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "bound": self.bound,
            "event": self.event,
            "seed": self.seed,
            "trials": self.trials,
            "center": self.center,
            "passed": self.passed,
            "calibration": self.calibration,
            "config": self.config,
            "rows": [row.to_dict() for row in self.rows],
        }


def draw_statistic(config: ExperimentConfig, split: int, trials: int, workers: int = 1,
                   chunk_size: int = 4096, progress: Optional[ProgressCallback] = None) -> np.ndarray:
    """
    Statistic values for `trials` trials of one seed split.

    Chunk c draws from the stream keyed by (seed, TAG_TRIAL, split, c), so the
    result does not depend on `workers`. Chunks run in waves of `workers`.
    """
    draw = SAMPLERS[config.sampler["id"]](config.sampler["params"])
    statistic = STATISTICS[config.statistic["id"]](config.statistic["params"])
    chunk_size = max(1, int(chunk_size))
    bounds = [(start, min(start + chunk_size, trials)) for start in range(0, trials, chunk_size)]

    def run(index: int) -> np.ndarray:
        start, stop = bounds[index]
        rows = draw(stop - start, chunk_seed(config.seed, TAG_TRIAL, split, index))
        return np.asarray(statistic(rows), dtype=float)

    values: List[Optional[np.ndarray]] = [None] * len(bounds)
    workers = max(1, int(workers))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for wave in range(0, len(bounds), workers):
            indices = list(range(wave, min(wave + workers, len(bounds))))
            for index, result in zip(indices, pool.map(run, indices)):
                values[index] = result
                if progress is not None:
                    progress(index + 1, len(bounds))
    return np.concatenate(values)


class _EmpiricalTail:
    """Exceedance counts of one split against a curve's levels."""

    def __init__(self, values: np.ndarray, event: str):
        self.event = event
        self.trials = values.size
        if event == "relative":
            self.center = float(np.mean(values))
            self.sorted = np.sort(np.abs(values - self.center))
        elif event == "cdf_distance":
            self.center = float(np.median(values))
            self.sorted = np.sort(values)
        else:
            self.center = float(np.median(values))
            self.sorted = np.sort(np.abs(values - self.center))

    def count(self, level: float) -> int:
        if self.event == "cdf_distance":
            return int(np.searchsorted(self.sorted, level, side="right"))
        if self.event == "relative":
            level = level * abs(self.center)
        return int(self.trials - np.searchsorted(self.sorted, level, side="right"))

    def row(self, curve: TailBoundCurve, t: float) -> VerificationRow:
        level = curve.threshold(t)
        bound = curve.evaluate(t)
        count = self.count(level)
        empirical = count / self.trials
        lo, hi = wilson_interval(count, self.trials)
        if self.event == "cdf_distance":
            gaussian = float(normal_cdf(level))
            distance = abs(empirical - gaussian)
            lo, hi = max(0.0, lo - gaussian, gaussian - hi), max(abs(lo - gaussian), abs(hi - gaussian))
            empirical = distance
        return VerificationRow(float(t), float(level), count, self.trials, empirical, lo, hi, bound, bound >= lo)


def _rows(tail: _EmpiricalTail, curve: TailBoundCurve, t_grid: Sequence[float]) -> List[VerificationRow]:
    return [tail.row(curve, t) for t in t_grid]


def fit_calibration(config: ExperimentConfig, tail: _EmpiricalTail, calib: CalibrationSet,
                    fit_trials: int) -> CalibrationSet:
    """
    Least conservative value of the bound's fit key keeping bound >= Wilson upper CI
    at every grid point of the fitting split, by bisection in log scale.
    """
    bound_id = config.bound["id"]
    key = FIT_KEYS[bound_id]

    def ok(value: float) -> bool:
        trial = calib.copy()
        trial.set(key, value, "fit-candidate")
        curve = make_curve(bound_id, config.bound["params"], trial)
        return all(row.bound >= row.ci_hi for row in _rows(tail, curve, config.t_grid))

    lo, hi = math.log(FIT_RANGE[0]), math.log(FIT_RANGE[1])
    ok_lo, ok_hi = ok(math.exp(lo)), ok(math.exp(hi))
    if ok_lo == ok_hi:
        chosen = calib.get(key)
        logger.warning(f"calibration of {key} did not bracket a transition; keeping {chosen:g}")
    else:
        # conservative side is where ok holds
        for _ in range(FIT_STEPS):
            mid = 0.5 * (lo + hi)
            if ok(math.exp(mid)) == ok_hi:
                hi = mid
            else:
                lo = mid
        chosen = math.exp(hi if ok_hi else lo)
    fitted = calib.copy()
    fitted.set_fitted(key, chosen, seed=config.seed, trials=fit_trials, experiment=config.name)
    return fitted


def verify_bound(config: ExperimentConfig, calib: Optional[CalibrationSet] = None, workers: int = 1,
                 chunk_size: int = 4096, progress: Optional[ProgressCallback] = None) -> VerificationReport:
    """
    Compare the empirical tail of a statistic with a bound curve on config.t_grid.

    In calibrated mode the fit key of the bound is fitted on split 1 and the
    report rows come from split 0 only.

    Raises:
        UnresolvableIdError: If an id cannot be resolved
        DomainError: If a grid point lies outside the bound's domain
    """
    started = time.perf_counter()
    calib = (calib or CalibrationSet()).copy()
    bound_id = config.bound["id"]
    event = BOUND_EVENTS.get(bound_id, "deviation")
    make_curve(bound_id, config.bound["params"], calib)

    fit_trials = config.fit_trials or config.trials
    chunk_size = max(1, int(chunk_size))
    total_chunks = math.ceil(config.trials / chunk_size)
    if config.calibration == "calibrated":
        total_chunks += math.ceil(fit_trials / chunk_size)
    done = [0]

    def report_progress(_index: int, _total: int) -> None:
        done[0] += 1
        if progress is not None:
            progress(done[0], total_chunks)

    calibration: Dict[str, Any] = {"mode": config.calibration}
    if config.calibration == "calibrated":
        fit_values = draw_statistic(config, TAG_CALIBRATION, fit_trials, workers, chunk_size, report_progress)
        calib = fit_calibration(config, _EmpiricalTail(fit_values, event), calib, fit_trials)
        calibration["fit_split"] = {"tag": TAG_CALIBRATION, "trials": fit_trials}
        calibration["verify_split"] = {"tag": 0, "trials": config.trials}
        logger.info(f"calibration fitted for {config.name}: {calib.identifier}")

    values = draw_statistic(config, 0, config.trials, workers, chunk_size, report_progress)
    tail = _EmpiricalTail(values, event)
    curve = make_curve(bound_id, config.bound["params"], calib)
    rows = _rows(tail, curve, config.t_grid)
    calibration["identifier"] = calib.identifier
    calibration["entries"] = calib.to_dict()

    report = VerificationReport(config.name, bound_id, event, rows, calibration, tail.center,
                                config.seed, config.trials, config.to_dict(), time.perf_counter() - started)
    logger.info(f"verification of {config.name}: {'pass' if report.passed else 'FAIL'} "
                f"({sum(r.passed for r in rows)}/{len(rows)} grid points, {report.runtime:.2f}s)")
    return report


@dataclass
class PisierReport:
    """
    Attributes:
        lhs (float): Estimate of E phi(f(X) - f(Y))
        rhs (float): Estimate of E phi((pi/2) |grad f(X)| Z)
        holds (bool): lhs <= rhs + 3 SE of the difference
    """

    f: str
    phi: str
    n: int
    trials: int
    seed: int
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    holds: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"f": self.f, "phi": self.phi, "n": self.n, "trials": self.trials, "seed": self.seed,
                "lhs": self.lhs, "lhs_se": self.lhs_se, "rhs": self.rhs, "rhs_se": self.rhs_se,
                "holds": self.holds}


def pisier_check(f: str, phi: str, n: int, trials: int, seed: int, chunk_size: int = 65536) -> PisierReport:
    """
    Estimate both sides of E phi(f(X) - f(Y)) <= E phi((pi/2) |grad f(X)| Z).

    X, Y are independent standard Gaussian vectors in R^n and Z is a standard
    Gaussian scalar independent of X.

    Raises:
        UnresolvableIdError: If f has no registered gradient or phi is unknown
    """
    fn = smooth_function(f)
    convex = convex_function(phi)
    if n < 1 or trials < 2:
        raise DomainError("pisier_check needs n >= 1 and at least two trials")
    sums = np.zeros(4)
    for index, start in enumerate(range(0, trials, chunk_size)):
        rows = min(chunk_size, trials - start)
        rng = generator(seed, TAG_TRIAL, index)
        x = rng.standard_normal((rows, n))
        y = rng.standard_normal((rows, n))
        z = rng.standard_normal(rows)
        left = convex(fn.value(x) - fn.value(y))
        right = convex(0.5 * math.pi * np.linalg.norm(fn.gradient(x), axis=1) * z)
        sums += [left.sum(), np.square(left).sum(), right.sum(), np.square(right).sum()]
    lhs, rhs = sums[0] / trials, sums[2] / trials
    lhs_var = max(sums[1] / trials - lhs * lhs, 0.0) / (trials - 1)
    rhs_var = max(sums[3] / trials - rhs * rhs, 0.0) / (trials - 1)
    holds = bool(lhs <= rhs + PASS_SLACK * math.sqrt(lhs_var + rhs_var))
    report = PisierReport(f, phi, n, trials, seed, float(lhs), math.sqrt(lhs_var), float(rhs), math.sqrt(rhs_var), holds)
    logger.info(f"pisier_check f={f} phi={phi}: lhs={lhs:.5g} rhs={rhs:.5g} holds={holds}")
    return report


def haar_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed element of SO(n) from the QR factorization of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def rotation_guard(lam: float, n: int, p: float, q: float) -> bool:
    """exp(lam^2/(2q)) <= min{lam^{-1} n^{1/2 - 1/(2p) - 1/q}, n^{1/(2p) - 1/q}}."""
    left = math.exp(lam * lam / (2.0 * q))
    second = n ** (1.0 / (2.0 * p) - 1.0 / q)
    if lam == 0:
        return left <= second
    return left <= min(n ** (0.5 - 1.0 / (2.0 * p) - 1.0 / q) / lam, second)


def unit_variance_poly_tail(q: float):
    """Polynomial-tail law with P{|X| > t} = (Ct + 1)^{-q} scaled to unit variance (q > 2)."""
    return poly_tail(q, math.sqrt(2.0 / ((q - 1.0) * (q - 2.0))))


@dataclass
class RotationRow:
    lam: float
    probability: float
    quantile: float
    ratio: float
    guard_ok: bool


@dataclass
class RotationReport:
    """Deviation quantiles of g(UX) at probabilities exp(-lam^2/2); qualitative, no pass flag."""

    n: int
    q: float
    p: float
    g: str
    identity: bool
    trials: int
    seed: int
    median: float
    rows: List[RotationRow]

    def quantile(self, probability: float) -> float:
        for row in self.rows:
            if math.isclose(row.probability, probability):
                return row.quantile
        raise DomainError(f"no row at probability {probability}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n, "q": self.q, "p": self.p, "g": self.g, "identity": self.identity,
            "trials": self.trials, "seed": self.seed, "median": self.median,
            "rows": [{"lambda": r.lam, "probability": r.probability, "quantile": r.quantile,
                      "ratio": r.ratio, "guard_ok": r.guard_ok} for r in self.rows],
        }


def experiment_random_rotation(n: int, q: float, g: str, trials: int, seed: int,
                               lambdas: Sequence[float] = (1.0, 1.5, 2.0, 2.5, 3.0),
                               p: Optional[float] = None, identity: bool = False,
                               extra_probabilities: Sequence[float] = (0.01,),
                               chunk_size: int = 4096) -> RotationReport:
    """
    Sample one Haar rotation U and report quantiles of |g(UX) - median| for X with
    unit-variance polynomial-tail coordinates.

    Args:
        p (float): Index of the lam-range guard; defaults to the geometric mean of
            the admissible range (q/(q-2), q/2)
        identity (bool): Force U = I
        extra_probabilities: Further tail probabilities reported with lam = nan
    """
    if not q > 4:
        raise DomainError("experiment_random_rotation needs q > 4")
    fn = smooth_function(g)
    if fn.lipschitz > 1.0:
        raise DomainError(f"{g!r} is not 1-Lipschitz")
    p = p if p is not None else math.sqrt(q / (q - 2.0) * q / 2.0)
    if not q / (q - 2.0) < p < q / 2.0:
        raise DomainError(f"p must lie in ({q / (q - 2):.4g}, {q / 2:.4g})")
    law = unit_variance_poly_tail(q)
    u = np.eye(n) if identity else haar_rotation(n, generator(seed, TAG_TRIAL, 0, 0))

    values = np.empty(trials)
    for index, start in enumerate(range(0, trials, chunk_size)):
        rows = min(chunk_size, trials - start)
        x = law.sampler(generator(seed, TAG_TRIAL, 1, index), rows * n).reshape(rows, n)
        values[start:start + rows] = fn.value(x @ u.T)
    median = float(np.median(values))
    deviations = np.abs(values - median)

    out = []
    for lam in lambdas:
        probability = math.exp(-lam * lam / 2.0)
        quantile = float(np.quantile(deviations, 1.0 - probability))
        out.append(RotationRow(float(lam), probability, quantile, quantile / lam if lam else math.nan,
                               rotation_guard(lam, n, p, q)))
    for probability in extra_probabilities:
        quantile = float(np.quantile(deviations, 1.0 - probability))
        out.append(RotationRow(math.nan, float(probability), quantile, math.nan, False))
    return RotationReport(n, float(q), float(p), g, identity, trials, seed, median, out)


def emit_report(report, fmt: str, out_dir: str, stem: Optional[str] = None) -> List[str]:
    """
    Write the report in one of csv, json or svg and return the written paths.

    Raises:
        DomainError: On an unknown format
        OSError: If the output directory is not writable
    """
    from utils import reports

    writers = {"csv": reports.write_csv, "json": reports.write_json, "svg": reports.write_svg}
    if fmt not in writers:
        raise DomainError(f"unknown report format {fmt!r}")
    return writers[fmt](report, out_dir, stem)

