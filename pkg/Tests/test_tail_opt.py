import math

import numpy as np
import pytest
from scipy import stats

from lab.distributions import exponential, normal, resolve_law
from lab.errors import DifferentialConditionError, DomainError, PreconditionError
from lab.tail_opt import (
    eta_from_xi,
    hinge_expectation,
    optimal_markov,
    refined_tail_estimate,
    regularity_constants,
    surrogate_from_tail,
    surrogate_tail,
    tail_from_gradient,
)


def test_exponential_witness():
    witness = optimal_markov(exponential(), 2.0)
    assert witness.a == pytest.approx(1.0, rel=1e-8)
    assert witness.bound_value == pytest.approx(math.exp(-1.0), rel=1e-8)


def test_witness_bound_matches_hinge_quadrature():
    law = exponential()
    witness = optimal_markov(law, 3.5)
    assert hinge_expectation(law, witness.a, witness.t) == pytest.approx(witness.bound_value, rel=1e-7)


@pytest.mark.parametrize("law_id,t", [("exp", 1.5), ("exp", 4.0), ("normal", 1.0), ("normal", 3.0),
                                      ("laplace", 2.0), ("uniform01", 0.9)])
def test_witness_never_beats_true_tail(law_id, t):
    law = resolve_law(law_id)
    assert optimal_markov(law, t).bound_value >= float(law.survival(t))


def test_witness_beats_first_moment_markov():
    law = exponential()
    for t in (1.5, 2.0, 5.0):
        assert optimal_markov(law, t).bound_value <= law.first_moment() / t


def test_normal_witness_matches_grid_search():
    slopes = np.geomspace(1e-3, 1e3, 4001)
    kinks = 2.0 - 1.0 / slopes
    values = slopes * (stats.norm.pdf(kinks) - kinks * stats.norm.sf(kinks))
    best = slopes[values.argmin()]
    witness = optimal_markov(normal(), 2.0)
    # grid spacing limits the agreement on a
    assert witness.a == pytest.approx(best, rel=5e-3)
    assert witness.bound_value == pytest.approx(values.min(), rel=1e-4)


def test_witness_dominates_other_convex_functions():
    law = normal()
    t = 2.0
    witness = optimal_markov(law, t)
    for c in (0.0, 1.0, 1.5):
        squared = law.expect(lambda x: max(0.0, x - c) ** 2) / (t - c) ** 2
        assert squared >= witness.bound_value
    exponential_markov = law.expect(lambda x: math.exp(0.5 * x)) / math.exp(0.5 * t)
    assert exponential_markov >= witness.bound_value


def test_witness_requires_threshold_above_mean():
    with pytest.raises(PreconditionError):
        optimal_markov(exponential(), 1.0)
    with pytest.raises(PreconditionError):
        optimal_markov(normal(), -0.5)


@pytest.mark.parametrize("p", [3.0, 4.0])
def test_boundary_regularity_constants(p):
    constants = regularity_constants(p, -1.0 / p)
    # at b = -1/p both inner limits equal p/(p-1)
    assert constants.reach == pytest.approx(p / (p - 1.0), rel=1e-8)
    assert constants.reach_hat == pytest.approx(p / (p - 1.0), rel=1e-8)
    assert constants.a_pb == pytest.approx(constants.a_hat_pb, rel=1e-8)
    assert constants.R_flat == pytest.approx(constants.R_sharp, rel=1e-8)


def test_boundary_reach_is_three_halves():
    assert regularity_constants(3.0, -1.0 / 3.0).reach == pytest.approx(1.5, abs=1e-6)


@pytest.mark.parametrize("b", [0.01, -0.01])
def test_regularity_constants_approach_e(b):
    constants = regularity_constants(50.0, b)
    assert constants.R_flat == pytest.approx(math.e, abs=0.15)
    assert constants.R_sharp == pytest.approx(math.e, abs=0.15)


def test_regularity_constants_ordering():
    constants = regularity_constants(5.0, 0.05)
    assert constants.R_flat <= constants.R_sharp


GRID_P = (3.0, 5.0, 10.0)
GRID_B = (0.05, 0.2, 0.5)


@pytest.mark.parametrize("p", GRID_P)
@pytest.mark.parametrize("b", GRID_B)
def test_regularity_constants_orderings_on_grid(p, b):
    constants = regularity_constants(p, b)
    assert constants.a_pb <= constants.a_hat_pb
    assert constants.reach >= constants.reach_hat
    assert constants.R_flat <= constants.R_sharp


def test_regularity_constants_residuals():
    for p, b in ((3.0, 0.2), (6.0, -0.1), (10.0, 0.5)):
        residuals = regularity_constants(p, b).residuals()
        for name, value in residuals.items():
            assert abs(value) < 1e-8, name


def test_regularity_constants_monotone():
    ps = (3.0, 5.0, 10.0)
    bs = (0.05, 0.2, 0.5)
    table = np.array([[regularity_constants(p, b).a_pb for b in bs] for p in ps])
    assert np.all(np.diff(table, axis=0) > 0)
    assert np.all(np.diff(table, axis=1) < 0)


@pytest.mark.parametrize("p,b", [(2.0, 0.1), (3.0, 0.0), (4.0, -0.5)])
def test_regularity_constants_domain(p, b):
    with pytest.raises(DomainError):
        regularity_constants(p, b)


@pytest.mark.parametrize("t", [2.0, 2.5, 3.0])
def test_normal_witness_sandwich(t):
    constants = regularity_constants(10.0, 0.5)
    tail = stats.norm.sf(t)
    bound = optimal_markov(normal(), t).bound_value
    assert constants.R_flat * tail <= bound <= constants.R_sharp * tail


def test_refined_estimate_tracks_weibull_tail():
    law = surrogate_tail(4.0)
    for t in (1.5, 2.0):
        estimate = refined_tail_estimate(law, t, 4.0)
        assert estimate == pytest.approx(math.exp(-t ** 4), rel=0.5)


def test_surrogate_reproduces_tail():
    p = 3.0
    law = surrogate_from_tail(lambda t: math.exp(-t ** p))
    for t in (0.2, 0.7, 1.0, 1.6):
        assert law.survival(t) == pytest.approx(math.exp(-t ** p), rel=1e-14)


def test_eta_of_constant_xi_is_linear():
    eta = eta_from_xi(lambda s: 2.0)
    for y in (0.5, 3.0, 10.0):
        assert eta(y) == pytest.approx(2.0 * y / (math.pi * 2.0), rel=1e-10)


def test_lipschitz_gradient_tail():
    A, p, b = 1.0, 10.0, 0.5
    value = tail_from_gradient(A, lambda s: 1.0, p, b, T0=4.0, t=6.0)
    expected = 4.0 * (A + 0.5) * regularity_constants(p, b).R_sharp * math.exp(-2.0 * 36.0 / math.pi ** 2)
    assert value == pytest.approx(expected, rel=1e-6)


def test_differential_condition_violation_names_grid_point():
    with pytest.raises(DifferentialConditionError) as info:
        tail_from_gradient(1.0, lambda s: 1.0, 10.0, 0.1, T0=4.0, t=6.0)
    assert info.value.side == "upper"
    assert info.value.grid_point == pytest.approx(4.0)


def test_gradient_tail_needs_t_beyond_start():
    with pytest.raises(PreconditionError):
        tail_from_gradient(1.0, lambda s: 1.0, 10.0, 0.5, T0=4.0, t=3.0)
