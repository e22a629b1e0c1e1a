import math

import numpy as np
import pytest

from lab.bounds import (
    BOUND_FACTORIES,
    FIT_KEYS,
    PROBABILITY_CAP,
    CalibrationSet,
    TailBoundCurve,
    berry_esseen_bound,
    berry_esseen_subgaussian_reach,
    cusp_split,
    gaussian_abs_moment,
    hmso_moment_bound,
    lp_on_lq_ball_bound,
    lpn_gauss_bound,
    lpn_gauss_mean,
    lpn_gauss_rel_bound,
    lpn_gauss_t_for_deviation,
    make_curve,
    poly_nonlinear_bound,
    weibull_linear_bound,
    weibull_inf_moment_bound,
    weibull_nonlinear_bound,
)
from lab.errors import DomainError, UnresolvableIdError


def test_calibration_defaults_to_one():
    calib = CalibrationSet()
    assert calib.get("weibull.c_q") == 1.0
    assert calib.identifier == "default"


def test_calibration_identifier_tracks_values():
    first = CalibrationSet()
    first.set("lpn_gauss.C", 2.0)
    second = CalibrationSet.from_dict({"lpn_gauss.C": 2.0})
    assert first.identifier == second.identifier
    assert first.identifier.startswith("calib-")
    assert len(first.identifier) == len("calib-") + 10
    second.set("lpn_gauss.C", 3.0)
    assert first.identifier != second.identifier


@pytest.mark.parametrize("value", [0.0, -1.0, math.inf, math.nan])
def test_calibration_rejects_non_positive(value):
    with pytest.raises(DomainError):
        CalibrationSet().set("hmso.C", value)


def test_fitted_entries_keep_provenance():
    calib = CalibrationSet()
    calib.set_fitted("weibull.C_q", 1.7, seed=3, trials=500, experiment="weibull_nonlinear")
    record = calib.to_dict()["weibull.C_q"]
    assert record == {"value": 1.7, "provenance": "fitted", "seed": 3, "trials": 500,
                      "experiment": "weibull_nonlinear"}
    restored = CalibrationSet.from_dict(calib.to_dict())
    assert restored.identifier == calib.identifier
    assert restored.copy().get("weibull.C_q") == 1.7


def test_calibration_from_dict_rejects_text():
    with pytest.raises(DomainError):
        CalibrationSet.from_dict({"hmso.C": "large"})
    with pytest.raises(DomainError):
        CalibrationSet.from_dict({"hmso.C": {"provenance": "fitted"}})


def test_weibull_linear_heavy_branch():
    a = np.array([1.0, 0.0, 0.0])
    assert weibull_linear_bound(1.0, a, 2.0) == pytest.approx(2.0 * math.exp(-2.0))


def test_weibull_linear_light_branch_takes_max():
    a = np.full(4, 0.5)
    assert weibull_linear_bound(3.0, a, 1.0) == pytest.approx(2.0 * math.exp(-1.0))


def test_weibull_linear_is_capped_and_validated():
    assert weibull_linear_bound(0.5, [1.0, 1.0], 0.0) == PROBABILITY_CAP
    with pytest.raises(DomainError):
        weibull_linear_bound(0.5, [0.0, 0.0], 1.0)
    with pytest.raises(DomainError):
        weibull_linear_bound(-1.0, [1.0], 1.0)


def test_weibull_nonlinear_deviation():
    result = weibull_nonlinear_bound(0.5, 1.0, 1.0, 2.0, 3.0, n=10, t=1.0)
    assert not result.log_clipped
    assert result.deviation == pytest.approx((1.0 + math.log(10.0) ** 1.5) * 5.0)
    assert result.variation_probability == pytest.approx(2.0 * math.exp(-1.0))


def test_weibull_nonlinear_clips_small_log_argument():
    result = weibull_nonlinear_bound(0.5, 1.0, 1.0, 1.0, 1.0, n=10, t=2.0)
    assert result.log_clipped
    assert result.deviation == pytest.approx(2.0 * (2.0 + 16.0))


def test_weibull_nonlinear_needs_small_q():
    with pytest.raises(DomainError):
        weibull_nonlinear_bound(1.5, 1.0, 1.0, 1.0, 1.0, n=10, t=1.0)


def test_hmso_moment_bound():
    assert hmso_moment_bound([1.0, 1.0], 1.0, 1.0, 2.0) == pytest.approx(math.sqrt(2.0) + 2.0)
    with pytest.raises(DomainError):
        hmso_moment_bound([1.0], 1.0, 1.0, 1.5)


def test_poly_nonlinear_admissible_range():
    with pytest.raises(DomainError):
        poly_nonlinear_bound(4.0, 3.0, [0.5] * 4, 4, 1.0)
    with pytest.raises(DomainError):
        poly_nonlinear_bound(2.0, 10.0, [0.5] * 4, 4, 1.0)
    with pytest.raises(DomainError):
        poly_nonlinear_bound(4.0, 6.0, [0.5] * 3, 4, 1.0)
    assert poly_nonlinear_bound(4.0, 6.0, [0.5] * 4, 4, 0.0) == (0.0, 0.0)


def test_poly_nonlinear_grows_with_t():
    grads = [0.5] * 4
    levels = [min(poly_nonlinear_bound(4.0, 6.0, grads, 4, t)) for t in (0.5, 1.0, 2.0)]
    assert all(level > 0 for level in levels)
    assert levels == sorted(levels)


@pytest.mark.parametrize("u,expected", [(0.0, 1.0), (1.0, math.sqrt(2.0 / math.pi)), (2.0, 1.0), (4.0, 3.0)])
def test_gaussian_abs_moment(u, expected):
    assert gaussian_abs_moment(u) == pytest.approx(expected, rel=1e-12)


def test_lpn_gauss_mean():
    assert lpn_gauss_mean(10, 2.0) == pytest.approx(10.0)
    assert lpn_gauss_mean(10, 1.0) == pytest.approx(10.0 * math.sqrt(2.0 / math.pi))


@pytest.mark.parametrize("p,expected", [
    (1.0, 8.0),
    (1.5, 8.0 + 2.0 * 2.0 ** 1.5),
    (2.0, 12.0),
    (3.0, 8.0 * math.sqrt(3.0) * 4.0 * 2.0),
])
def test_lpn_gauss_branches(p, expected):
    assert lpn_gauss_bound(16, p, 2.0) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("p", [0.5, 1.25, 1.8, 3.0])
def test_lpn_gauss_inverse_is_conservative(p):
    for s in (1.0, 10.0, 100.0):
        t = lpn_gauss_t_for_deviation(64, p, s)
        assert lpn_gauss_bound(64, p, t) <= s * (1 + 1e-9)


def test_lpn_gauss_rel_branches():
    assert lpn_gauss_rel_bound(100, 2.0, 0.1) == pytest.approx(math.exp(-1.0))
    assert lpn_gauss_rel_bound(100, 5.0, 0.1) == pytest.approx(100 ** -0.1)
    with pytest.raises(DomainError):
        lpn_gauss_rel_bound(100, 2.0, 0.0)


def test_lp_on_lq_ball_bound():
    assert lp_on_lq_ball_bound(4, 1.0, 2.0, 1.0) == pytest.approx(2.0 * math.exp(-1.0))
    assert lp_on_lq_ball_bound(4, 1.0, 2.0, 0.0) == PROBABILITY_CAP
    with pytest.raises(DomainError):
        lp_on_lq_ball_bound(4, 1.0, 2.0, 2.5)


def test_berry_esseen_forms():
    bound = berry_esseen_bound(np.full(4, 0.5), 1.0, 3.0, 1.0, 0.0)
    assert bound.uniform == pytest.approx(0.5)
    assert bound.nonuniform == pytest.approx(1.0)
    far = berry_esseen_bound(np.full(4, 0.5), 1.0, 3.0, 1.0, 9.0)
    assert far.nonuniform == pytest.approx(1.0e-3)


def test_berry_esseen_subgaussian_reach():
    assert berry_esseen_subgaussian_reach(3.0, 100) == pytest.approx(math.log(100) ** -1.5 / 10.0)
    calib = CalibrationSet.from_dict({"berry_esseen.C_r": 2.0})
    assert berry_esseen_subgaussian_reach(4.0, 400, calib) == pytest.approx(2.0 * math.log(400) ** -2.0 / 20.0)
    assert berry_esseen_subgaussian_reach(3.0, 10 ** 6) < berry_esseen_subgaussian_reach(3.0, 10 ** 3)
    with pytest.raises(DomainError):
        berry_esseen_subgaussian_reach(2.5, 100)


def test_weibull_inf_moment_bound():
    assert weibull_inf_moment_bound(0.5, 100) == pytest.approx(math.log(100) ** 3)
    calib = CalibrationSet.from_dict({"weibull.C_q": 0.5})
    assert weibull_inf_moment_bound(0.5, 100, calib) == pytest.approx(0.5 * math.log(100) ** 3)
    for q, n in ((1.5, 100), (0.5, 1)):
        with pytest.raises(DomainError):
            weibull_inf_moment_bound(q, n)


def test_cusp_split_scalar():
    u, v = cusp_split(0.5, 2.0)
    assert (u, v) == (pytest.approx(math.sqrt(2.0)), 0.0)
    u, v = cusp_split(0.5, 0.5)
    assert u == pytest.approx(0.8125)
    assert u + v == pytest.approx(math.sqrt(0.5))


def test_cusp_split_array():
    t = np.linspace(-3.0, 3.0, 41)
    u, v = cusp_split(0.3, t)
    np.testing.assert_allclose(u + v, np.abs(t) ** 0.3)
    assert np.all(v[np.abs(t) >= 1.0] == 0.0)
    with pytest.raises(DomainError):
        cusp_split(1.0, t)


def test_curve_clips_probabilities():
    for raw, expected in ((5.0, PROBABILITY_CAP), (math.nan, PROBABILITY_CAP), (-0.1, 0.0), (0.3, 0.3)):
        curve = TailBoundCurve("custom", {}, lambda t, raw=raw: raw)
        assert curve.evaluate(1.0) == expected


def test_curve_grid_rows():
    curve = make_curve("lpn_gauss", {"n": 16, "p": 1.0})
    rows = curve.grid([1.0, 2.0])
    assert rows[1] == (2.0, pytest.approx(8.0), pytest.approx(math.exp(-2.0)))
    assert curve.is_nonincreasing([0.5, 1.0, 2.0, 3.0])
    assert curve.calib_id == "default"


def test_curve_without_deviation_uses_t():
    curve = make_curve("lp_on_lq_ball", {"n": 4, "p": 1.0, "q": 2.0})
    assert curve.threshold(1.5) == 1.5


def test_make_curve_errors():
    with pytest.raises(UnresolvableIdError):
        make_curve("chernoff", {})
    with pytest.raises(DomainError):
        make_curve("weibull_linear", {})


def test_make_curve_uses_calibration():
    calib = CalibrationSet.from_dict({"lpn_gauss.C": 2.0})
    curve = make_curve("lpn_gauss", {"n": 16, "p": 1.0}, calib)
    assert curve.threshold(2.0) == pytest.approx(16.0)
    assert curve.calib_id == calib.identifier


def test_every_curve_has_a_fit_key():
    assert set(FIT_KEYS) == set(BOUND_FACTORIES)
