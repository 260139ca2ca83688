"""Immigration-death models of ICU occupancy with covariate-dependent rates.

Transition probabilities come from the closed-form generating function
inverted on the unit circle; parameters are fitted by multistart
Nelder-Mead with Wald intervals from the observed information; models are
ranked by AIC and checked by simulation bands and weekly backtests.
"""
from ._backend import NAME as BACKEND
from .assess import (BacktestPlan, ForecastResult, QuantileBand, replicate_band,
                     rolling_forecast)
from .inference import (FitOptions, FitResult, Selection, confidence_intervals, fit_mle,
                        log_likelihood, select_model)
from .kernel import KernelConfig, TransitionRow, pgf_eval, transition_probs, transition_row
from .model import (CovariatePath, ModelSpec, ObservedSeries, ParamVector,
                    immigration_rate_at, mean_icu_stay, model_dimension)
from .simulate import (HospitalPanel, StudyConfig, StudyReport, apply_underreporting,
                       disaggregate_hospitals, gillespie_icu, run_study)

__all__ = [
    "BACKEND", "BacktestPlan", "CovariatePath", "FitOptions", "FitResult", "ForecastResult",
    "HospitalPanel", "KernelConfig", "ModelSpec", "ObservedSeries", "ParamVector",
    "QuantileBand", "Selection", "StudyConfig", "StudyReport", "TransitionRow",
    "apply_underreporting", "confidence_intervals", "disaggregate_hospitals", "fit_mle",
    "gillespie_icu", "immigration_rate_at", "log_likelihood", "mean_icu_stay",
    "model_dimension", "pgf_eval", "replicate_band", "rolling_forecast", "run_study",
    "select_model", "transition_probs", "transition_row",
]
__version__ = "0.1.0"
