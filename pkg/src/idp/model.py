"""Immigration-death process parametrization and the covariate rate models.

The ICU census is a continuous-time Markov chain with state-independent
admissions at rate ``alpha(t)`` and per-patient clearance at rate ``mu``.
The admission rate is log-linear in the hospital census ``H`` and the test
positivity ``P``; five nested forms are supported (``M1`` ... ``M5``).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateRate, InvalidCovariate, InvalidInput

BETA_NAMES = ("beta_H", "beta_HP", "beta_P")


class ModelSpec(enum.Enum):
    """Log-linear immigration rate forms, from the richest (M1) down to M5.

    ======  ==========================================================
    M1      log a(t) = log a + bH log H + bHP P log H + bP P
    M2      log a(t) = log a + bH log H + bHP P log H
    M3      log a(t) = log a + bH log H + bP P
    M4      log a(t) = log a + bH log H
    M5      log a(t) = log a + log H
    ======  ==========================================================
    """

    M1 = ("beta_H", "beta_HP", "beta_P")
    M2 = ("beta_H", "beta_HP")
    M3 = ("beta_H", "beta_P")
    M4 = ("beta_H",)
    M5 = ()

    @property
    def model_id(self) -> str:
        return self.name

    @property
    def betas(self) -> tuple[str, ...]:
        return self.value

    @property
    def param_names(self) -> tuple[str, ...]:
        return ("alpha", "mu") + self.value

    @property
    def parameter_count(self) -> int:
        return 2 + len(self.value)

    @property
    def order(self) -> int:
        return int(self.name[1:])

    @classmethod
    def parse(cls, value: "str | ModelSpec") -> "ModelSpec":
        if isinstance(value, ModelSpec):
            return value
        key = str(value).strip().upper()
        if key.isdigit():
            key = "M" + key
        try:
            return cls[key]
        except KeyError:
            raise InvalidInput(f"unknown model id {value!r}") from None

    def nests(self, other: "ModelSpec") -> bool:
        """True when ``other`` is a special case of ``self``.

        M5 sits inside M4 by pinning ``beta_H = 1``; every other nesting drops
        coefficients (sets them to zero).
        """
        if other is self:
            return True
        if other is ModelSpec.M5:
            return "beta_H" in self.betas
        return set(other.betas) < set(self.betas)


ALL_MODELS = tuple(ModelSpec)


def model_dimension(spec: ModelSpec) -> int:
    """Number of free parameters ``K`` of a model."""
    return ModelSpec.parse(spec).parameter_count


@dataclass(frozen=True)
class ParamVector:
    """Natural-scale parameters; inactive coefficients are ``None``."""

    alpha: float
    mu: float
    beta_H: float | None = None
    beta_HP: float | None = None
    beta_P: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise DegenerateRate(f"alpha must be positive, got {self.alpha}")
        if not (np.isfinite(self.mu) and self.mu > 0):
            raise DegenerateRate(f"mu must be positive, got {self.mu}")

    @property
    def active(self) -> tuple[str, ...]:
        return tuple(b for b in BETA_NAMES if getattr(self, b) is not None)

    def matches(self, spec: ModelSpec) -> bool:
        return self.active == spec.betas

    def as_array(self, spec: ModelSpec | None = None) -> np.ndarray:
        names = ("alpha", "mu") + (self.active if spec is None else spec.betas)
        return np.array([getattr(self, n) for n in names], dtype=float)

    def as_dict(self) -> dict[str, float]:
        return {n: getattr(self, n) for n in ("alpha", "mu") + self.active}

    @classmethod
    def from_array(cls, spec: ModelSpec, values: Sequence[float]) -> "ParamVector":
        values = [float(v) for v in values]
        if len(values) != spec.parameter_count:
            raise InvalidInput(
                f"{spec.name} takes {spec.parameter_count} parameters, got {len(values)}"
            )
        return cls(**dict(zip(spec.param_names, values)))

    def embed(self, spec: ModelSpec) -> "ParamVector":
        """Express these parameters in a larger model that nests the current one."""
        values = {"alpha": self.alpha, "mu": self.mu}
        for b in spec.betas:
            current = getattr(self, b)
            if current is None:
                current = 1.0 if (b == "beta_H" and not self.active) else 0.0
            values[b] = current
        return ParamVector(**values)


def check_params(spec: ModelSpec, params: ParamVector) -> None:
    if not params.matches(spec):
        raise InvalidInput(
            f"{spec.name} expects coefficients {spec.betas}, got {params.active}"
        )


@dataclass(frozen=True)
class CovariatePath:
    """Daily hospital census ``H`` and 7-day test positivity ``P``."""

    dates: np.ndarray
    hospital_census: np.ndarray
    positivity: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        h = np.asarray(self.hospital_census)
        p = np.asarray(self.positivity, dtype=float)
        if not (dates.shape == h.shape == p.shape) or dates.ndim != 1:
            raise InvalidInput("covariate arrays must be 1-d and of equal length")
        if h.size and (np.any(h < 0) or not np.all(np.equal(np.mod(h, 1), 0))):
            raise InvalidCovariate("hospital census must be nonnegative integers")
        if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
            raise InvalidCovariate("positivity must lie in [0, 1]")
        _check_grid(dates)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "hospital_census", h.astype(np.int64))
        object.__setattr__(self, "positivity", p)

    def __len__(self):
        return len(self.dates)

    def window(self, start: int, stop: int) -> "CovariatePath":
        return CovariatePath(self.dates[start:stop], self.hospital_census[start:stop],
                             self.positivity[start:stop])


@dataclass(frozen=True)
class ObservedSeries:
    """Daily ICU census, the discretely observed chain."""

    dates: np.ndarray
    icu_census: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        x = np.asarray(self.icu_census)
        if dates.shape != x.shape or dates.ndim != 1:
            raise InvalidInput("series arrays must be 1-d and of equal length")
        if x.size and (np.any(x < 0) or not np.all(np.equal(np.mod(x, 1), 0))):
            raise InvalidInput("ICU counts must be nonnegative integers")
        _check_grid(dates)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "icu_census", x.astype(np.int64))

    def __len__(self):
        return len(self.dates)

    def window(self, start: int, stop: int) -> "ObservedSeries":
        return ObservedSeries(self.dates[start:stop], self.icu_census[start:stop])


def _check_grid(dates: np.ndarray) -> None:
    if dates.size > 1 and np.any(np.diff(dates).astype(np.int64) != 1):
        raise InvalidInput("date grid must be strictly increasing daily with no gaps")


def day_grid(start: str | np.datetime64, n: int) -> np.ndarray:
    return np.datetime64(start, "D") + np.arange(n)


def check_paired(series: ObservedSeries, cov: CovariatePath) -> None:
    if len(series) != len(cov) or not np.array_equal(series.dates, cov.dates):
        raise InvalidInput("series and covariates must share the same date grid")


def log_rate_terms(spec: ModelSpec, params: ParamVector, h, p) -> np.ndarray:
    """Vectorised ``log alpha(t)`` for census ``h`` and positivity ``p``."""
    h = np.asarray(h, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(h < 0):
        raise InvalidCovariate("hospital census must be nonnegative")
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise InvalidCovariate("positivity must lie in [0, 1]")
    log_h = np.log(np.maximum(h, 1.0))
    out = np.full(np.broadcast(h, p).shape, np.log(params.alpha))
    if spec is ModelSpec.M5:
        return out + log_h
    out = out + params.beta_H * log_h
    if "beta_HP" in spec.betas:
        out = out + params.beta_HP * p * log_h
    if "beta_P" in spec.betas:
        out = out + params.beta_P * p
    return out


def immigration_rates(spec: ModelSpec, params: ParamVector, h, p) -> np.ndarray:
    check_params(spec, params)
    return np.exp(log_rate_terms(spec, params, h, p))


def immigration_rate_at(spec: ModelSpec, params: ParamVector, h: int, p: float) -> float:
    """Admission intensity for a single day's census and positivity."""
    if h < 0:
        raise InvalidCovariate(f"hospital census must be nonnegative, got {h}")
    if not 0.0 <= p <= 1.0:
        raise InvalidCovariate(f"positivity must lie in [0, 1], got {p}")
    rate = float(immigration_rates(spec, params, h, p))
    if not (np.isfinite(rate) and rate > 0):
        raise DegenerateRate(f"immigration rate is not a positive finite number: {rate}")
    return rate


def mean_icu_stay(params: ParamVector) -> float:
    """Mean per-patient ICU stay in days, ``1 / mu``."""
    mu = params.mu if isinstance(params, ParamVector) else float(params)
    if not mu > 0:
        raise DegenerateRate(f"mu must be positive, got {mu}")
    return 1.0 / mu
