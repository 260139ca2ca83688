"""Observed-data likelihood, multistart Nelder-Mead MLE, Wald intervals, AIC."""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import (AliasingRisk, DegenerateData, DegenerateRate, IDPError,
                     InsufficientData, InvalidCovariate, InvalidInput, NonConvergence,
                     NonPSD, SingularInformation, StateOverflow)
from .kernel import RESOLUTION, KernelConfig, transition_probs
from .model import (CovariatePath, ModelSpec, ObservedSeries, ParamVector,
                    check_paired, check_params, log_rate_terms)

log = logging.getLogger(__name__)

PENALTY = -1e10
Z95 = 1.96
AGREE_TOL = 1e-4
MAX_COND = 1e12

# restart boxes, transformed scale
LOG_RATE_BOX = (np.log(0.01), np.log(3.0))
BETA_BOX = {"beta_H": (-2.0, 2.0), "beta_HP": (-2.0, 2.0), "beta_P": (0.0, 30.0)}
# initial simplex edge per coordinate
SIMPLEX_STEP = {"alpha": 0.1, "mu": 0.1, "beta_H": 0.05, "beta_HP": 0.1, "beta_P": 1.0}


@dataclass(frozen=True)
class FitOptions:
    restarts: int = 10
    simplex_tolerance: float = 1e-8
    max_iterations: int = 2000
    seed: int = 0
    kernel: KernelConfig = field(default_factory=KernelConfig)

    def __post_init__(self):
        if self.restarts < 1:
            raise InvalidInput("restarts must be >= 1")
        if not (self.simplex_tolerance > 0 and self.max_iterations > 0):
            raise InvalidInput("tolerances must be positive")

    def replace(self, **changes) -> "FitOptions":
        return dataclasses.replace(self, **changes)


@dataclass
class FitResult:
    spec: ModelSpec
    mle: ParamVector
    loglik: float
    aic: float
    covariance: np.ndarray | None = None
    intervals: dict[str, tuple[float, float]] | None = None
    restarts_agreeing: int = 0
    restarts_total: int = 0
    converged: bool = False
    objectives: np.ndarray | None = None
    n_obs: int = 0

    @property
    def K(self) -> int:
        return self.spec.parameter_count

    @property
    def std_errors(self) -> dict[str, float] | None:
        if self.covariance is None:
            return None
        return dict(zip(self.spec.param_names, np.sqrt(np.diag(self.covariance))))


def aic(loglik: float, k: int) -> float:
    return -2.0 * loglik + 2.0 * k


class Objective:
    """Negative log-likelihood of one dataset, prepared once for repeated calls."""

    def __init__(self, series: ObservedSeries, cov: CovariatePath, spec: ModelSpec,
                 cfg: KernelConfig | None = None):
        check_paired(series, cov)
        self.spec = spec
        self.cfg = cfg or KernelConfig()
        x = series.icu_census
        if x.size and x.max() >= self.cfg.n_grid:
            raise StateOverflow(
                f"observed count {x.max()} does not fit the kernel grid N={self.cfg.n_grid}")
        self.src = np.ascontiguousarray(x[:-1])
        self.dst = np.ascontiguousarray(x[1:])
        self.h = cov.hospital_census[:-1]
        self.p = cov.positivity[:-1]
        elapsed = np.diff(series.dates).astype(np.int64).astype(float)
        self.groups = [(float(t), np.flatnonzero(elapsed == t)) for t in np.unique(elapsed)]

    def loglik(self, params: ParamVector) -> float:
        check_params(self.spec, params)
        if self.src.size == 0:
            return 0.0
        rates = np.exp(log_rate_terms(self.spec, params, self.h, self.p))
        total = 0.0
        for t, idx in self.groups:
            probs = transition_probs(self.src[idx], self.dst[idx], rates[idx], params.mu, t,
                                     self.cfg)
            probs = np.maximum(probs, self.cfg.clamp_floor)
            if np.any(probs <= RESOLUTION):
                return PENALTY
            total += float(np.sum(np.log(probs)))
        return total

    def safe_loglik(self, params: ParamVector) -> float:
        try:
            value = self.loglik(params)
        except (DegenerateRate, AliasingRisk, InvalidCovariate, FloatingPointError):
            return PENALTY
        return value if np.isfinite(value) else PENALTY

    # transformed scale: (log alpha, log mu, betas...)
    def to_params(self, z: np.ndarray) -> ParamVector:
        with np.errstate(over="ignore"):
            values = np.concatenate([np.exp(z[:2]), z[2:]])
        return ParamVector(*values[:2], **dict(zip(self.spec.betas, values[2:])))

    def __call__(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=float)
        if not np.all(np.isfinite(z)) or np.any(np.abs(z[:2]) > 700):
            return -PENALTY
        try:
            params = self.to_params(z)
        except DegenerateRate:
            return -PENALTY
        return -self.safe_loglik(params)


def log_likelihood(series: ObservedSeries, cov: CovariatePath, spec: ModelSpec,
                   params: ParamVector, cfg: KernelConfig | None = None) -> float:
    """Sum of log transition probabilities between consecutive observations.

    The immigration rate over each interval is frozen at its value on the
    interval's first day, and the first observation is conditioned on.
    Returns ``PENALTY`` when a required probability is not resolvable from
    zero (at or below ``RESOLUTION`` after clamping).
    """
    return Objective(series, cov, spec, cfg).loglik(params)


def _to_transformed(spec: ModelSpec, params: ParamVector) -> np.ndarray:
    return np.concatenate([np.log([params.alpha, params.mu]),
                           [getattr(params, b) for b in spec.betas]])


def _draw_start(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    z = list(rng.uniform(*LOG_RATE_BOX, size=2))
    z += [rng.uniform(*BETA_BOX[b]) for b in spec.betas]
    return np.array(z)


def _initial_simplex(spec: ModelSpec, x0: np.ndarray) -> np.ndarray:
    steps = np.array([SIMPLEX_STEP[n] for n in spec.param_names])
    return np.vstack([x0, x0 + np.diag(steps)])


def fit_mle(series: ObservedSeries, cov: CovariatePath, spec: ModelSpec | str,
            opts: FitOptions | None = None, initial_points: Sequence[ParamVector] = (),
            intervals: bool = False) -> FitResult:
    """Maximise the likelihood from ``opts.restarts`` seeded random starts.

    ``initial_points`` are tried in addition to the random starts; model
    selection uses them to warm-start a model from the MLE of a nested one.
    """
    spec = ModelSpec.parse(spec)
    opts = opts or FitOptions()
    k = spec.parameter_count
    if len(series) < k + 2:
        raise InsufficientData(f"{spec.name} needs at least {k + 2} observations, got {len(series)}")
    if not np.any(series.icu_census):
        raise DegenerateData("ICU series is identically zero")
    objective = Objective(series, cov, spec, opts.kernel)
    rng = np.random.default_rng(opts.seed)

    starts = []
    for _ in range(opts.restarts):
        for _attempt in range(50):
            z0 = _draw_start(spec, rng)
            if objective(z0) < -PENALTY:
                break
        starts.append(z0)
    starts += [_to_transformed(spec, p) for p in initial_points]

    fits = []
    for z0 in starts:
        res = minimize(objective, z0, method="Nelder-Mead", options={
            "initial_simplex": _initial_simplex(spec, z0),
            "fatol": opts.simplex_tolerance,
            "xatol": np.inf,
            "maxiter": opts.max_iterations,
            "maxfev": opts.max_iterations * (k + 2),
        })
        converged = bool(res.success) and res.nit < opts.max_iterations
        fits.append((float(res.fun), res.x, converged))
    objectives = np.array([f[0] for f in fits])
    if not any(f[2] for f in fits):
        raise NonConvergence(f"{spec.name}: all {len(fits)} restarts hit the iteration cap")
    best = int(np.argmin(objectives))
    best_fun, best_x, converged = fits[best]
    if best_fun >= -PENALTY:
        raise DegenerateData(f"{spec.name}: no parameter value gives a finite likelihood")
    loglik = -best_fun
    result = FitResult(
        spec=spec,
        mle=objective.to_params(best_x),
        loglik=loglik,
        aic=aic(loglik, k),
        restarts_agreeing=int(np.sum(objectives <= best_fun + AGREE_TOL)),
        restarts_total=len(fits),
        converged=converged,
        objectives=objectives,
        n_obs=len(series),
    )
    log.debug("%s fit: loglik=%.4f agreeing=%d/%d", spec.name, loglik,
              result.restarts_agreeing, result.restarts_total)
    if intervals:
        result = confidence_intervals(result, series, cov, opts.kernel)
    return result


def hessian(f, x: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """Central-difference Hessian of a scalar function."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    e = np.diag(steps)
    f0 = f(x)
    h = np.empty((n, n))
    for i in range(n):
        h[i, i] = (f(x + e[i]) - 2.0 * f0 + f(x - e[i])) / steps[i] ** 2
        for j in range(i):
            h[i, j] = h[j, i] = (
                f(x + e[i] + e[j]) - f(x + e[i] - e[j])
                - f(x - e[i] + e[j]) + f(x - e[i] - e[j])
            ) / (4.0 * steps[i] * steps[j])
    return h


def observed_information(fit: FitResult, series: ObservedSeries, cov: CovariatePath,
                         cfg: KernelConfig | None = None) -> np.ndarray:
    objective = Objective(series, cov, fit.spec, cfg)
    theta = fit.mle.as_array(fit.spec)

    def neg_loglik(values):
        try:
            params = ParamVector.from_array(fit.spec, values)
        except DegenerateRate:
            return -PENALTY
        return -objective.safe_loglik(params)

    steps = 1e-4 * np.maximum(np.abs(theta), 1.0)
    return hessian(neg_loglik, theta, steps)


def confidence_intervals(fit: FitResult, series: ObservedSeries, cov: CovariatePath,
                         cfg: KernelConfig | None = None) -> FitResult:
    """Fill covariance and 95% Wald intervals from the observed information."""
    if not fit.converged:
        raise NonConvergence("intervals require a converged fit")
    info = observed_information(fit, series, cov, cfg)
    if not np.all(np.isfinite(info)) or np.linalg.cond(info) > MAX_COND:
        raise SingularInformation(f"{fit.spec.name}: observed information is not invertible")
    covariance = np.linalg.inv(info)
    covariance = 0.5 * (covariance + covariance.T)
    variances = np.diag(covariance)
    if np.any(variances < 0):
        raise NonPSD(f"{fit.spec.name}: negative variance in inverse information")
    theta = fit.mle.as_array(fit.spec)
    half = Z95 * np.sqrt(variances)
    intervals = {n: (float(t - w), float(t + w))
                 for n, t, w in zip(fit.spec.param_names, theta, half)}
    return dataclasses.replace(fit, covariance=covariance, intervals=intervals)


@dataclass
class Selection:
    """Candidates ranked by AIC, plus the ones whose fit failed."""

    ranked: list[FitResult]
    excluded: list[tuple[ModelSpec, str]] = field(default_factory=list)

    @property
    def best(self) -> FitResult:
        return self.ranked[0]

    def __iter__(self):
        return iter(self.ranked)

    def __len__(self):
        return len(self.ranked)

    def __getitem__(self, i):
        return self.ranked[i]


def rank_key(fit: FitResult):
    return (fit.aic, fit.K, fit.spec.order)


def select_model(series: ObservedSeries, cov: CovariatePath,
                 candidates: Sequence[ModelSpec | str], opts: FitOptions | None = None
                 ) -> Selection:
    """Fit every candidate and sort by AIC (ties: fewer parameters, then id).

    Smaller models are fitted first; each larger candidate is also started
    from the MLEs of the already-fitted models it nests.
    """
    specs = [ModelSpec.parse(c) for c in candidates]
    if len(specs) < 2:
        raise InvalidInput("model selection needs at least two candidates")
    opts = opts or FitOptions()
    fitted: dict[ModelSpec, FitResult] = {}
    excluded = []
    for spec in sorted(specs, key=lambda s: (s.parameter_count, -s.order)):
        warm = [f.mle.embed(spec) for s, f in fitted.items() if spec.nests(s) and s is not spec]
        try:
            fitted[spec] = fit_mle(series, cov, spec, opts, initial_points=warm)
        except IDPError as exc:
            excluded.append((spec, f"{exc.code}: {exc}"))
    ranked = sorted(fitted.values(), key=rank_key)
    return Selection(ranked, excluded)
