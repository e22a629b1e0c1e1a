import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lab.distributions import rademacher, resolve_law
from lab.errors import DomainError, PreconditionError
from lab.functionals import (
    GridSet,
    OrliczSpec,
    connectivity_param,
    contraction_check,
    exact_sum_moment,
    gaussian_log_mgf,
    latala_functional,
    lipschitz_constant,
    lipschitz_extension_eval,
    log_mgf,
    lorentz_dual,
    lorentz_dual_brute,
    lorentz_dual_sweep,
    lorentz_norm,
    lp_functional,
    main_zeroth_bound,
    orlicz_quantile,
    path_ratio,
    poisson_hull_functional,
    poisson_hull_oracle_1d,
    product_sampler,
    rademacher_log_mgf,
    stencil_inflation,
    symmetrization_check,
)


def test_lp_of_unit_vector():
    e1 = np.zeros(6)
    e1[0] = 1.0
    for p in (0.5, 1.0, 2.0, 7.0, math.inf):
        assert lp_functional(e1, p) == pytest.approx(1.0)


def test_lp_rejects_nonpositive_index():
    with pytest.raises(DomainError):
        lp_functional([1.0, 2.0], 0.0)


def test_l1_lipschitz_constant_is_sqrt_n():
    n = 8
    rng = np.random.default_rng(0)
    directions = rng.standard_normal((10_000, n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    assert np.abs(directions).sum(axis=1).max() <= math.sqrt(n) + 1e-12
    signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    assert lp_functional(signs, 1.0) / lp_functional(signs, 2.0) == pytest.approx(math.sqrt(n))


def test_lp_log_convexity():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = rng.standard_normal(12)
        for p in (2.5, 4.0, 10.0):
            bound = lp_functional(a, math.inf) ** (1 - 2 / p) * lp_functional(a, 2.0) ** (2 / p)
            assert lp_functional(a, p) <= bound * (1 + 1e-12)


def test_lorentz_norm_on_sign_vectors():
    r, q = 2.0, 3.0
    for x in ([1, 0, -1, 1, 0], [1, 1, 1, 1, 1, 1, 1, 1], [0, 0, -1]):
        x = np.array(x, dtype=float)
        expected = max(lp_functional(x, 1.0), r * lp_functional(x, q))
        assert lorentz_norm(x, r, q) == pytest.approx(expected, rel=1e-7)


def test_lorentz_duality_inequality():
    rng = np.random.default_rng(2)
    for _ in range(20):
        x, y = rng.standard_normal((2, 10))
        assert float(x @ y) <= lorentz_norm(x, 1.5, 2.0) * lorentz_dual(y, 1.5, 2.0) * (1 + 1e-7)


def test_lorentz_norm_sandwich():
    rng = np.random.default_rng(3)
    r, q, n = 2.0, 2.0, 20
    factor = 3.0 * (1.0 + math.log(min(r ** (q / (q - 1)), n))) ** ((q - 1) / q)
    for _ in range(20):
        x = rng.standard_normal(n)
        base = max(lp_functional(x, 1.0), r * lp_functional(x, q))
        value = lorentz_norm(x, r, q)
        assert base * (1 - 1e-7) <= value <= factor * base


@pytest.mark.parametrize("r,q", [(2.0, 2.0), (1.5, 3.0), (3.0, 1.5)])
def test_lorentz_dual_matches_brute_force_and_sweep(r, q):
    rng = np.random.default_rng(4)
    for _ in range(10):
        y = rng.standard_normal(6)
        exact = lorentz_dual_brute(y, r, q)
        assert lorentz_dual(y, r, q) == pytest.approx(exact, rel=1e-12)
        sweep = lorentz_dual_sweep(y, r, q)
        assert exact * (1 - 1e-12) <= sweep <= 2.0 * exact * (1 + 1e-12)


def test_lorentz_domain():
    with pytest.raises(DomainError):
        lorentz_norm([1.0], 0.5, 2.0)
    with pytest.raises(DomainError):
        lorentz_dual([1.0], 2.0, 1.0)


def test_log_mgf_by_quadrature():
    xi = log_mgf("normal")
    for t in (0.5, 1.0, 2.0):
        assert xi(t) == pytest.approx(gaussian_log_mgf(t), rel=1e-8)
    assert log_mgf("rademacher")(1.3) == pytest.approx(rademacher_log_mgf(1.3), rel=1e-12)


def test_orlicz_gaussian_closed_form():
    rng = np.random.default_rng(5)
    a = rng.standard_normal(10)
    x = 2.0
    value = orlicz_quantile(OrliczSpec.iid(gaussian_log_mgf, 10, x), a)
    assert value == pytest.approx(math.sqrt(x / 2.0) * np.linalg.norm(a), rel=1e-10)


def test_orlicz_homogeneity():
    spec = OrliczSpec.iid(rademacher_log_mgf, 5, 3.0)
    a = np.array([0.3, -1.0, 2.0, 0.0, 0.7])
    assert orlicz_quantile(spec, 2.5 * a) == pytest.approx(2.5 * orlicz_quantile(spec, a), rel=1e-10)
    assert orlicz_quantile(spec, np.zeros(5)) == 0.0


def test_orlicz_gaussian_tail():
    n, x, trials = 10, 2.0, 100_000
    rng = np.random.default_rng(6)
    a = rng.standard_normal(n)
    level = 2.0 * orlicz_quantile(OrliczSpec.iid(gaussian_log_mgf, n, x), a)
    sums = rng.standard_normal((trials, n)) @ a
    assert np.mean(sums > level) <= math.exp(-x)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_orlicz_indicator_is_midpoint_convex(a, b):
    spec = OrliczSpec.iid(rademacher_log_mgf, 4, 1.5)
    a, b = np.array(a), np.array(b)
    middle = spec.indicator(0.5 * (a + b))
    assert middle <= 0.5 * (spec.indicator(a) + spec.indicator(b)) + 1e-9


def test_orlicz_spec_validation():
    OrliczSpec.iid(gaussian_log_mgf, 3, 1.0).validate()
    with pytest.raises(DomainError):
        OrliczSpec.iid(lambda t: 1.0 + t * t, 3, 1.0).validate()
    with pytest.raises(DomainError):
        OrliczSpec.iid(lambda t: -t * t, 3, 1.0).validate()


def test_latala_single_rademacher():
    value = latala_functional(["rademacher"], 2.0)
    assert value.value == pytest.approx((math.e ** 2 - 1) ** -0.5, rel=1e-10)
    assert value.value == pytest.approx(0.3956231, abs=1e-7)


def test_latala_scaling():
    base = latala_functional([rademacher()] * 2, 3.0).value
    scaled = latala_functional([rademacher().scaled(3.0)] * 2, 3.0).value
    assert scaled == pytest.approx(3.0 * base, rel=1e-9)


def test_latala_sandwich_three_rademacher():
    value = latala_functional(["rademacher"] * 3, 4.0).value
    moment = exact_sum_moment(["rademacher"] * 3, 4.0)
    assert moment == pytest.approx(21.0 ** 0.25)
    assert (math.e - 1) / (2 * math.e ** 2) * value <= moment <= math.e * value


def test_latala_sandwich_random_instances():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(1, 5))
        laws = [rng.choice(["rademacher", "uniform_pm:k=2"]) for _ in range(n)]
        p = float(rng.choice([2.0, 3.0, 4.0]))
        value = latala_functional(laws, p).value
        moment = exact_sum_moment(laws, p)
        assert (math.e - 1) / (2 * math.e ** 2) * value <= moment <= math.e * value


def test_latala_rejects_asymmetric_and_small_p():
    with pytest.raises(DomainError):
        latala_functional(["exp"], 2.0)
    with pytest.raises(DomainError):
        latala_functional(["rademacher"], 1.5)


def test_latala_diverges_without_moment():
    value = latala_functional(["poly_tail:q=1"], 2.0)
    assert value.diverged
    assert math.isinf(value.value)


def test_poisson_hull_zero_vector():
    estimate = poisson_hull_functional(product_sampler(["normal"] * 3), np.zeros(3), 0.1, 100, seed=0)
    assert estimate.value == 0.0


def test_poisson_hull_matches_one_dimensional_oracle():
    delta = 0.1
    estimate = poisson_hull_functional(product_sampler(["exp"]), [1.0], delta, 20_000, seed=8)
    oracle = poisson_hull_oracle_1d("exp", 1.0, delta)
    assert abs(estimate.value - oracle) <= 3.0 * estimate.standard_error


@pytest.mark.slow
def test_poisson_hull_tail_check():
    delta, n, trials = 0.01, 5, 100_000
    rng = np.random.default_rng(9)
    a = rng.standard_normal(n)
    a /= np.linalg.norm(a)
    estimate = poisson_hull_functional(product_sampler(["normal"] * n), a, delta, 20_000, seed=10)
    sums = rng.standard_normal((trials, n)) @ a
    exceed = np.mean(sums > 2.0 * estimate.value)
    se = math.sqrt(max(exceed * (1 - exceed), 1.0 / trials) / trials)
    assert exceed <= delta * math.log(2.0) + 3.0 * se


def test_poisson_hull_domain():
    with pytest.raises(DomainError):
        poisson_hull_functional(product_sampler(["normal"]), [1.0], 0.6, 100, seed=0)


def test_extension_agrees_on_the_set():
    rng = np.random.default_rng(11)
    points = rng.standard_normal((12, 3))
    values = rng.standard_normal(12)
    extended = lipschitz_extension_eval(points, values, points)
    np.testing.assert_allclose(extended, values, atol=1e-12)


def test_extension_from_single_point():
    x = np.array([3.0, 4.0])
    assert lipschitz_extension_eval([[0.0, 0.0]], [0.0], x, lip=1.0) == pytest.approx(5.0)


def test_extension_preserves_lipschitz_constant():
    rng = np.random.default_rng(12)
    points = rng.standard_normal((12, 3))
    values = rng.standard_normal(12)
    lip = lipschitz_constant(points, values)
    grid = rng.uniform(-2.5, 2.5, size=(400, 3))
    extended = lipschitz_extension_eval(points, values, grid)
    combined = np.vstack([points, grid])
    combined_values = np.concatenate([values, extended])
    assert lipschitz_constant(combined, combined_values) == pytest.approx(lip, abs=1e-9)


def test_extension_with_l1_metric():
    points = np.array([[0.0, 0.0], [1.0, 1.0]])
    values = np.array([0.0, 1.0])
    assert lipschitz_extension_eval(points, values, [2.0, 0.0], metric="cityblock") == pytest.approx(1.0)


def test_stencil_inflation_is_small():
    assert 1.0 < stencil_inflation(GridSet(np.ones((3, 3)), 1.0).stencil) < 1.05
    assert 1.0 < stencil_inflation(GridSet(np.ones((3, 3, 3)), 1.0).stencil) < 1.3


def disk(x, y):
    return x * x + y * y <= 1.0


def quadrant_complement(x, y):
    return (x <= 0) | (y <= 0)


def thin_annulus(x, y):
    r2 = x * x + y * y
    return (r2 >= 0.64) & (r2 <= 1.0)


def test_convex_disk_is_connected_with_unit_parameter():
    estimate = connectivity_param(GridSet.from_predicate(disk, -1.0, 1.0, 1 / 50), pairs=100, seed=1)
    assert estimate.value <= 1.05
    assert estimate.pairs == 100


@pytest.mark.slow
def test_convex_disk_fine_grid():
    estimate = connectivity_param(GridSet.from_predicate(disk, -1.0, 1.0, 1 / 200), pairs=40, seed=2)
    assert estimate.value <= 1.05


def test_quadrant_complement_corner_pair():
    grid_set = GridSet.from_predicate(quadrant_complement, -1.0, 1.0, 1 / 50)
    assert path_ratio(grid_set, (1.0, 0.0), (0.0, 1.0)) == pytest.approx(math.sqrt(2.0), abs=0.05)
    estimate = connectivity_param(grid_set, pairs=200, seed=3)
    assert estimate.value <= math.sqrt(2.0) + 0.05


def test_annulus_witnesses_non_convexity():
    estimate = connectivity_param(GridSet.from_predicate(thin_annulus, -1.0, 1.0, 1 / 50), pairs=200, seed=4)
    assert estimate.value > 1.2


def test_disconnected_mask_is_infinite():
    bitmap = """
    1100011
    1100011
    """
    estimate = connectivity_param(GridSet.from_bitmap(bitmap, 0.1), pairs=10, seed=5)
    assert math.isinf(estimate.value)


def test_path_ratio_outside_set():
    grid_set = GridSet.from_predicate(quadrant_complement, -1.0, 1.0, 1 / 10)
    with pytest.raises(DomainError):
        path_ratio(grid_set, (0.5, 0.5), (-0.5, -0.5))


def test_main_zeroth_bound():
    deviation, probability = main_zeroth_bound(1.0, 1.5, 2.0, 2.0)
    assert deviation == pytest.approx(2 * 1.5 * 2.0 * 2.0)
    assert probability == pytest.approx(3.0 * 0.022750131948179195, rel=1e-10)
    with pytest.raises(PreconditionError):
        main_zeroth_bound(1.0, 1.0, 1.0, 0.5)


@pytest.mark.parametrize("law_id", ["normal", "laplace", "poly_tail:q=3"])
def test_symmetrization_inequalities(law_id):
    rows = symmetrization_check(law_id, 1.0, [0.5, 1.0, 2.0, 3.0], 50_000, seed=13)
    assert all(row.ok for row in rows)
    assert all(row.lower <= row.upper for row in rows)


def test_symmetrization_needs_small_median_window():
    with pytest.raises(PreconditionError):
        symmetrization_check("normal", 0.1, [1.0], 1000, seed=0)


def test_contraction_rademacher_against_gaussian():
    report = contraction_check("rademacher", "normal", 2.0, 2.0, np.ones(4) / 2.0, np.square, 20_000, seed=14)
    assert report.ok
    assert report.lhs == pytest.approx(1.0, abs=0.05)


def test_contraction_requires_tail_domination():
    with pytest.raises(PreconditionError):
        contraction_check("laplace", "normal", 1.0, 1.0, np.ones(3), np.abs, 1000, seed=0)
    with pytest.raises(PreconditionError):
        contraction_check("exp", "normal", 2.0, 2.0, np.ones(3), np.abs, 1000, seed=0)


def test_laws_resolve_for_hull_sampler():
    draw = product_sampler([resolve_law("normal"), "laplace"])
    assert draw(np.random.default_rng(0), 7).shape == (7, 2)
