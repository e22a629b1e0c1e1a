import math

import numpy as np
import pytest
from scipy import stats

from lab.bounds import CalibrationSet
from lab.distributions import exponential, uniform01
from lab.errors import DomainError
from lab.order_stats import (
    closed_form_sum_bounds,
    crude_renyi_bound,
    envelope_coverage,
    fit_poly_sum_constant,
    order_sum_bound,
    order_sum_coverage,
    pareto_sums,
    renyi_bound,
    renyi_log_complement,
    renyi_representation,
    uniform_order_envelope,
    xi_1,
    xi_2,
    xi_inverse,
)


def test_xi_inverse_at_one():
    assert xi_inverse(1, 1.0).value == 0.0
    assert xi_inverse(2, 1.0).value == 0.0


def test_xi_2_inverse_at_two_over_e():
    assert xi_inverse(2, 2.0 / math.e).value == pytest.approx(1.0, abs=1e-9)


def test_xi_1_inverse_below_analytic_bound():
    for y in np.linspace(0.1, 0.9, 9):
        result = xi_inverse(1, y)
        assert result.value <= min(math.sqrt(2.0 * (1.0 - y)), 1.0 - y / math.e)
        assert result.value <= result.analytic_bound
        assert float(xi_1(result.value)) == pytest.approx(y, abs=1e-9)


def test_xi_2_inverse_below_analytic_bound():
    for y in np.linspace(0.05, 0.95, 10):
        result = xi_inverse(2, y)
        assert result.value <= result.analytic_bound
        assert float(xi_2(result.value)) == pytest.approx(y, abs=1e-9)


@pytest.mark.parametrize("which,y", [(1, 0.0), (2, 1.5), (3, 0.5), (1, -0.1)])
def test_xi_inverse_domain(which, y):
    with pytest.raises(DomainError):
        xi_inverse(which, y)


def test_envelope_nontrivial_at_zero():
    envelope = uniform_order_envelope(100, 0.0)
    assert np.all(envelope.upper < 1.0)
    assert np.all(envelope.upper > 0.0)


def test_envelope_is_nondecreasing_with_provenance():
    envelope = uniform_order_envelope(60, 1.5)
    assert np.all(np.diff(envelope.upper) >= 0)
    assert len(envelope.source) == 60
    assert set(envelope.source) <= {"top", "bottom", "renyi"}


@pytest.mark.parametrize("lam", [2.0, 3.0])
def test_envelope_last_entry_matches_closed_form(lam):
    n = 99
    envelope = uniform_order_envelope(n, lam)
    assert envelope.upper[-1] <= 1.0 - math.exp(-0.5 * lam * lam) / (math.e * (n + 1))


def test_renyi_formula_stays_nontrivial_for_large_t():
    n = 50
    for k in range(1, n):
        # 1 - renyi_bound rounds to zero at this t, so the complement is checked in log space
        complement = renyi_log_complement(n, k, 20.0)
        assert math.isfinite(complement)
        assert renyi_bound(n, k, 20.0) == pytest.approx(-math.expm1(complement))
        assert crude_renyi_bound(n, k, 1.0) >= renyi_bound(n, k, 1.0)
    assert renyi_log_complement(n, 40, 20.0) < math.log(1e-16)
    assert renyi_log_complement(n, n, 20.0) == -math.inf


def test_renyi_bound_small_t_matches_direct_formula():
    n, k = 100, 10
    spread = max((1.0 + math.sqrt(math.log(k))) * math.sqrt(k) / math.sqrt(n * (n - k + 1.0)),
                 (1.0 + math.log(k)) / (n - k + 1.0))
    assert renyi_bound(n, k, 1.0) == pytest.approx(1.0 - (n - k) / n * math.exp(-spread), rel=1e-12)


def test_envelope_coverage():
    coverage, _ = envelope_coverage(200, 2.0, 10_000, seed=17)
    assert coverage >= 1.0 - math.pi ** 2 / 3.0 * math.exp(-2.0)


def test_renyi_representation_law():
    n, k, size = 50, 10, 10_000
    rng = np.random.default_rng(123)
    gamma_k = np.sort(rng.random((size, n)), axis=1)[:, k - 1]
    direct = -np.log1p(-gamma_k)
    represented = renyi_representation(n, k, size, seed=5)
    assert stats.ks_2samp(direct, represented).pvalue > 0.001


def test_uniform_order_sum_bound_scale():
    bound = order_sum_bound(uniform01(), 99, 1, 2.0)
    assert math.isfinite(bound.value)
    assert not bound.diverged
    assert bound.value >= 99 / 2


def test_order_sum_bound_monotone_in_lambda():
    values = [order_sum_bound(uniform01(), 99, 1, lam).value for lam in (2.0, 2.5, 3.0, 4.0)]
    assert values == sorted(values)


@pytest.mark.parametrize("lam", [2.0, 3.0])
def test_order_sum_coverage(lam):
    coverage, _ = order_sum_coverage(uniform01(), 99, 1, lam, 10_000, seed=8)
    assert coverage >= 1.0 - math.pi ** 2 / 3.0 * math.exp(-0.5 * lam * lam)


def test_order_sum_bound_exponential_is_finite():
    bound = order_sum_bound(exponential(), 50, 3, 2.5)
    assert math.isfinite(bound.value)
    assert bound.top_term > 0


def test_order_sum_bound_preconditions():
    with pytest.raises(DomainError):
        order_sum_bound(uniform01(), 10, 6, 2.0)
    with pytest.raises(DomainError):
        order_sum_bound(uniform01(), 10, 1, 1.5)


def test_poly_closed_form_value():
    value = closed_form_sum_bounds("poly", 3.0, 1000, 1, 3.0, CalibrationSet())
    expected = 3.0 * 1000 / 2.0 + 1000 ** (1 / 3) * (1 + 3.0 / 9.0) * math.exp(9.0 / 6.0)
    assert value == pytest.approx(expected, rel=1e-12)


def test_weibull_closed_forms():
    n, lam = 500, 3.0
    assert closed_form_sum_bounds("weibull", 1.0, n, 1, lam) == pytest.approx(n + lam ** 2)
    assert closed_form_sum_bounds("weibull_log", 1.0, n, 1, lam) >= closed_form_sum_bounds("weibull", 1.0, n, 1, lam)


def test_normal_pow_closed_form():
    assert closed_form_sum_bounds("normal_pow", 1.0, 400, 1, 2.0) == pytest.approx(400 + 20 * 2.0)
    assert closed_form_sum_bounds("normal_pow", 4.0, 400, 1, 2.0) == pytest.approx(400 + 16.0)


def test_closed_form_domain_errors():
    with pytest.raises(DomainError):
        closed_form_sum_bounds("poly", 3.0, 100, 40, 3.0)
    with pytest.raises(DomainError):
        closed_form_sum_bounds("poly", 1.0, 100, 1, 3.0)
    with pytest.raises(DomainError):
        closed_form_sum_bounds("gamma", 1.0, 100, 1, 3.0)


def test_closed_form_uses_calibration():
    calib = CalibrationSet()
    calib.set_fitted("order_stats.weibull.C_q", 2.0, seed=1, trials=1000)
    assert closed_form_sum_bounds("weibull", 0.5, 100, 1, 2.0, calib) == pytest.approx(2.0 * (100 + 16.0))


def test_fitted_poly_constant_holds_on_held_out_trials():
    p, n, lam = 3.0, 100, 2.0
    C = fit_poly_sum_constant(p, n, lam, 10_000, seed=31)
    bound = C * closed_form_sum_bounds("poly", p, n, 1, lam, CalibrationSet())
    held_out = pareto_sums(p, n, 10_000, seed=31, split=1)
    assert (held_out > bound).mean() <= math.exp(-0.5 * lam * lam)
