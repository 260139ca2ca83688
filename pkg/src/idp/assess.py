"""Replicate-simulation bands and expanding-window weekly backtesting."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import IDPError, InsufficientData, InvalidInput, NonConvergence
from .inference import FitOptions, FitResult, fit_mle
from .model import CovariatePath, ModelSpec, ObservedSeries, immigration_rates
from .simulate import simulate_rates

LOWER_Q, UPPER_Q = 2.5, 97.5


@dataclass
class QuantileBand:
    dates: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_replicates: int

    def __post_init__(self):
        if np.any(self.lower > self.upper):
            raise InvalidInput("band lower bound exceeds upper bound")

    def contains(self, counts) -> np.ndarray:
        counts = np.asarray(counts)
        return (self.lower <= counts) & (counts <= self.upper)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


def band_from_trajectories(dates, trajectories: np.ndarray) -> QuantileBand:
    """Pointwise 2.5/97.5 percentiles, rounded outward to whole beds."""
    lo = np.floor(np.percentile(trajectories, LOWER_Q, axis=0)).astype(np.int64)
    hi = np.ceil(np.percentile(trajectories, UPPER_Q, axis=0)).astype(np.int64)
    return QuantileBand(np.asarray(dates), lo, hi, len(trajectories))


def simulate_trajectories(fit: FitResult, cov: CovariatePath, i0: int, n_rep: int,
                          rng: np.random.Generator) -> np.ndarray:
    """``n_rep`` paths over ``cov``'s grid from ``i0``, admissions driven by ``cov``."""
    rates = immigration_rates(fit.spec, fit.mle, cov.hospital_census[:-1], cov.positivity[:-1])
    return np.array([simulate_rates(rates, fit.mle.mu, i0, rng) for _ in range(n_rep)])


def replicate_band(fit: FitResult, cov: CovariatePath, i0: int, n_rep: int = 100,
                   seed: int | np.random.Generator | None = 0) -> QuantileBand:
    """Envelope of ``n_rep`` replicate datasets simulated from a fitted model.

    Every trajectory starts at ``i0`` on the first day of ``cov`` and is
    conditioned on the observed hospital census and positivity.
    """
    if not fit.converged:
        raise NonConvergence("bands require a converged fit")
    if n_rep < 2:
        raise InvalidInput("need at least two replicates")
    rng = np.random.default_rng(seed)
    paths = simulate_trajectories(fit, cov, i0, n_rep, rng)
    return band_from_trajectories(cov.dates, paths)


@dataclass(frozen=True)
class BacktestPlan:
    phases: tuple[tuple[np.datetime64, np.datetime64], ...]
    holdout_weeks: int = 3
    horizon: int = 7
    n_forecasts: int = 100

    def __post_init__(self):
        phases = tuple((np.datetime64(a, "D"), np.datetime64(b, "D")) for a, b in self.phases)
        for (a, b), nxt in zip(phases, phases[1:] + ((None, None),)):
            if b < a:
                raise InvalidInput(f"phase {a}..{b} ends before it starts")
            if nxt[0] is not None and nxt[0] <= b:
                raise InvalidInput("phases must be ordered and non-overlapping")
            if (b - a).astype(int) + 1 <= self.holdout_weeks * self.horizon:
                raise InvalidInput(f"phase {a}..{b} is too short for the holdout")
        object.__setattr__(self, "phases", phases)

    def training_ends(self, phase: int) -> list[np.datetime64]:
        """Last training day of each forecast week in a phase."""
        _, end = self.phases[phase]
        first = end - self.holdout_weeks * self.horizon
        return [first + w * self.horizon for w in range(self.holdout_weeks)]


COUNTY_PHASES = (("2020-03-29", "2020-06-15"), ("2020-06-16", "2020-09-01"),
                ("2020-09-02", "2020-11-15"))


@dataclass
class ForecastWeek:
    phase: int
    train_start: np.datetime64
    train_end: np.datetime64
    fit: FitResult
    band: QuantileBand
    observed: np.ndarray

    @property
    def covered(self) -> np.ndarray:
        return self.band.contains(self.observed)


@dataclass
class ForecastResult:
    weeks: list[ForecastWeek] = field(default_factory=list)
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def coverage(self) -> float:
        hits = np.concatenate([w.covered for w in self.weeks]) if self.weeks else np.array([])
        return float(hits.mean()) if hits.size else float("nan")

    def phase_coverage(self, phase: int) -> float:
        hits = [w.covered for w in self.weeks if w.phase == phase]
        return float(np.concatenate(hits).mean()) if hits else float("nan")


def _index_of(dates: np.ndarray, day: np.datetime64) -> int:
    k = int((day - dates[0]).astype(int))
    if not 0 <= k < len(dates) or dates[k] != day:
        raise InsufficientData(f"date {day} outside the observed grid")
    return k


def rolling_forecast(series: ObservedSeries, cov: CovariatePath,
                     spec_per_phase: Sequence[ModelSpec | str], plan: BacktestPlan,
                     opts: FitOptions | None = None) -> ForecastResult:
    """Phase-wise weekly forecasts with an expanding training window.

    Each week refits the phase model on phase start .. training end, then
    simulates ``n_forecasts`` paths over the next ``horizon`` days from the
    last observed ICU count, conditioned on the observed covariates.
    A phase that fails is recorded in ``failures``; later phases still run.
    """
    if len(spec_per_phase) != len(plan.phases):
        raise InvalidInput("need one model per phase")
    opts = opts or FitOptions()
    specs = [ModelSpec.parse(s) for s in spec_per_phase]
    result = ForecastResult()
    seeds = np.random.SeedSequence(opts.seed).spawn(len(plan.phases))
    for phase, ((start, end), spec, seq) in enumerate(zip(plan.phases, specs, seeds)):
        week_seeds = seq.spawn(plan.holdout_weeks)
        try:
            lo = _index_of(series.dates, start)
            _index_of(series.dates, end)
            for train_end, wseq in zip(plan.training_ends(phase), week_seeds):
                hi = _index_of(series.dates, train_end) + 1
                if hi - lo < spec.parameter_count + 2:
                    raise InsufficientData(f"phase {phase + 1}: training window too short")
                fit_seed, sim_seed = wseq.generate_state(2)
                fit = fit_mle(series.window(lo, hi), cov.window(lo, hi), spec,
                              opts.replace(seed=int(fit_seed)))
                ahead = cov.window(hi - 1, hi + plan.horizon)
                rng = np.random.default_rng(int(sim_seed))
                i0 = int(series.icu_census[hi - 1])
                paths = simulate_trajectories(fit, ahead, i0, plan.n_forecasts, rng)[:, 1:]
                band = band_from_trajectories(ahead.dates[1:], paths)
                result.weeks.append(ForecastWeek(phase, start, train_end, fit, band,
                                                 series.icu_census[hi:hi + plan.horizon]))
        except IDPError as exc:
            result.failures.append((phase, f"{exc.code}: {exc}"))
    return result
