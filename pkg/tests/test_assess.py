import numpy as np
import pytest

from conftest import make_data
from idp.assess import (COUNTY_PHASES, BacktestPlan, QuantileBand, band_from_trajectories,
                        replicate_band, rolling_forecast)
from idp.errors import InvalidInput, NonConvergence
from idp.inference import FitOptions, fit_mle
from idp.model import ModelSpec, ParamVector, immigration_rates
from idp.simulate import simulate_rates

FAST = FitOptions(restarts=2, seed=3)


@pytest.fixture(scope="module")
def data():
    days = 120
    t = np.arange(days)
    h = np.rint(200 + 150 * np.sin(t / 25.0) ** 2).astype(int)
    params = ParamVector(0.1, 0.2)
    counts = simulate_rates(immigration_rates(ModelSpec.M5, params, h[:-1], 0), 0.2, 100,
                            np.random.default_rng(17))
    return make_data(counts, h)


@pytest.fixture(scope="module")
def fit(data):
    return fit_mle(*data, ModelSpec.M5, FAST)


def test_band_percentiles_round_outward():
    paths = np.arange(1, 101, dtype=float)[:, None] * np.ones((1, 3))
    band = band_from_trajectories(np.arange(3), paths)
    # linear interpolation: 2.5th -> 3.475, 97.5th -> 97.525
    np.testing.assert_array_equal(band.lower, [3, 3, 3])
    np.testing.assert_array_equal(band.upper, [98, 98, 98])
    assert band.contains([3, 2, 99]).tolist() == [True, False, False]


def test_band_rejects_inverted_bounds():
    with pytest.raises(InvalidInput):
        QuantileBand(np.arange(2), np.array([3, 4]), np.array([5, 3]), 10)


def test_replicate_band_is_seeded(data, fit):
    series, cov = data
    a = replicate_band(fit, cov, int(series.icu_census[0]), n_rep=40, seed=5)
    b = replicate_band(fit, cov, int(series.icu_census[0]), n_rep=40, seed=5)
    np.testing.assert_array_equal(a.lower, b.lower)
    np.testing.assert_array_equal(a.upper, b.upper)
    assert np.all(a.lower <= a.upper) and a.lower.min() >= 0
    assert a.lower[0] == a.upper[0] == series.icu_census[0]
    assert a.contains(series.icu_census).mean() > 0.8


def test_replicate_band_needs_converged_fit(data, fit):
    import dataclasses
    with pytest.raises(NonConvergence):
        replicate_band(dataclasses.replace(fit, converged=False), data[1], 10)
    with pytest.raises(InvalidInput):
        replicate_band(fit, data[1], 10, n_rep=1)


def test_plan_windows_step_by_a_week():
    plan = BacktestPlan(COUNTY_PHASES)
    for k in range(3):
        ends = plan.training_ends(k)
        assert len(ends) == 3
        assert all((b - a).astype(int) == 7 for a, b in zip(ends, ends[1:]))
        assert ends[-1] + 7 == plan.phases[k][1]
        assert ends[0] > plan.phases[k][0]


def test_plan_validation():
    with pytest.raises(InvalidInput):
        BacktestPlan((("2020-04-01", "2020-03-01"),))
    with pytest.raises(InvalidInput):
        BacktestPlan((("2020-03-01", "2020-05-01"), ("2020-04-01", "2020-06-01")))
    with pytest.raises(InvalidInput):
        BacktestPlan((("2020-03-01", "2020-03-15"),))


def test_rolling_forecast(data):
    series, cov = data
    plan = BacktestPlan((("2020-03-29", "2020-05-20"), ("2020-05-21", "2020-07-26")),
                        n_forecasts=60)
    a = rolling_forecast(series, cov, ["M5", "M5"], plan, FAST)
    b = rolling_forecast(series, cov, ["M5", "M5"], plan, FAST)
    assert not a.failures and len(a.weeks) == 6
    for wa, wb in zip(a.weeks, b.weeks):
        np.testing.assert_array_equal(wa.band.lower, wb.band.lower)
        np.testing.assert_array_equal(wa.band.upper, wb.band.upper)
        assert len(wa.observed) == 7
    assert a.coverage == b.coverage and 0.0 <= a.coverage <= 1.0
    widths = np.mean([w.band.width for w in a.weeks], axis=0)
    assert widths[-1] > widths[0]


def test_forecast_records_phase_failures(data):
    series, cov = data
    plan = BacktestPlan((("2020-03-29", "2020-05-20"), ("2020-05-21", "2020-09-01")),
                        n_forecasts=20)
    result = rolling_forecast(series, cov, ["M5", "M5"], plan, FAST)
    assert [p for p, _ in result.failures] == [1]
    assert {w.phase for w in result.weeks} == {0}
    with pytest.raises(InvalidInput):
        rolling_forecast(series, cov, ["M5"], plan, FAST)
