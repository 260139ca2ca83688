"""County-scale synthetic covariates and model-generated ICU series."""
import numpy as np

from idp.model import CovariatePath, ObservedSeries, day_grid, immigration_rates
from idp.simulate import STUDY_START, oc_like_census, simulate_rates


def county_covariates(t_max):
    """Census from the study path plus a single positivity wave peaking near 14%."""
    h = oc_like_census(t_max, 43)
    t = np.arange(t_max + 1)
    p = 0.04 + 0.10 * np.exp(-(((t - 0.45 * t_max) / (0.15 * t_max)) ** 2))
    return CovariatePath(day_grid(STUDY_START, t_max + 1), h, p)


def model_series(spec, params, cov, i0, rng):
    rates = immigration_rates(spec, params, cov.hospital_census[:-1], cov.positivity[:-1])
    return ObservedSeries(cov.dates, simulate_rates(rates, params.mu, i0, rng))
