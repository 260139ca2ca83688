"""Exact simulation of ICU occupancy and the multi-hospital bias/coverage study."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from ._parallel import pmap
from .errors import IDPError, InfeasibleDecrement, InvalidInput, InvalidLaw
from .inference import FitOptions, fit_mle
from .model import CovariatePath, ModelSpec, ObservedSeries, day_grid

DROP_LAWS = ("none", "uniform_0_2")
STUDY_START = "2020-03-29"


def simulate_rates(rates, mu: float, i0: int, rng: np.random.Generator,
                   backend=None) -> np.ndarray:
    """Gillespie path of the ICU census with admission intensity ``rates[d]`` on day ``d``.

    Returns the state at each integer day ``0 .. len(rates)``. Random numbers
    are drawn in blocks so that the compiled and fallback loops consume the
    same stream.
    """
    backend = backend or _backend.core
    rates = np.ascontiguousarray(rates, dtype=float)
    if np.any(rates < 0) or not np.all(np.isfinite(rates)):
        raise InvalidInput("immigration rates must be finite and nonnegative")
    if i0 < 0:
        raise InvalidInput("initial ICU count must be nonnegative")
    t_max = len(rates)
    out = np.empty(t_max + 1, dtype=np.int64)
    out[0] = i0
    state, day, t_in_day = int(i0), 0, 0.0
    while day < t_max:
        expected = rates[day:].sum() + mu * state * (t_max - day) + (t_max - day)
        n = int(min(expected * 1.2 + 64, 1 << 20))
        exps = rng.standard_exponential(n)
        unifs = rng.random(n)
        state, day, t_in_day, _ = backend.simulate_chunk(rates, float(mu), state, day,
                                                         t_in_day, exps, unifs, out)
    return out


def gillespie_icu(h_path, alpha: float, mu: float, i0: int, t_max: int,
                  rng: np.random.Generator, backend=None) -> np.ndarray:
    """Daily ICU counts for admissions ``alpha * H[day]`` and clearance ``mu`` per patient."""
    h_path = np.asarray(h_path)
    if len(h_path) != t_max + 1:
        raise InvalidInput(f"h_path needs {t_max + 1} entries, got {len(h_path)}")
    if np.any(h_path < 0):
        raise InvalidInput("hospital census must be nonnegative")
    return simulate_rates(alpha * h_path[:t_max].astype(float), mu, i0, rng, backend)


@dataclass
class HospitalPanel:
    hospital_beds: np.ndarray
    icu_beds: np.ndarray | None
    m: int
    seed: int | None = None


def disaggregate_hospitals(h_total, m: int, rng: np.random.Generator,
                           max_retries: int = 1000) -> HospitalPanel:
    """Split a county census path into ``m`` hospital paths with equal weights.

    Day 0 is a multinomial split; each later day distributes ``|H(t) - H(t-1)|``
    multinomially and applies the sign, redrawing when a hospital would go
    negative.
    """
    h_total = np.asarray(h_total, dtype=np.int64)
    if m < 1:
        raise InvalidInput("need at least one hospital")
    if h_total.size == 0 or np.any(h_total < 0):
        raise InvalidInput("hospital totals must be nonnegative")
    weights = np.full(m, 1.0 / m)
    beds = np.empty((len(h_total), m), dtype=np.int64)
    beds[0] = rng.multinomial(h_total[0], weights)
    for t in range(1, len(h_total)):
        delta = int(h_total[t] - h_total[t - 1])
        for _ in range(max_retries):
            row = beds[t - 1] + np.sign(delta) * rng.multinomial(abs(delta), weights)
            if row.min() >= 0:
                break
        else:
            raise InfeasibleDecrement(f"day {t}: could not distribute a change of {delta}")
        beds[t] = row
    return HospitalPanel(beds, None, m)


def _drops(law, rng: np.random.Generator, m: int) -> int:
    if callable(law):
        return int(law(rng, m))
    if law == "none":
        return 0
    if law == "uniform_0_2":
        return int(rng.integers(0, 3))
    raise InvalidLaw(f"unknown drop law {law!r}; expected one of {DROP_LAWS}")


def apply_underreporting(panel: HospitalPanel, drop_law="none",
                         rng: np.random.Generator | None = None):
    """Daily totals ``(H, I)`` after omitting ``gamma_t`` random hospitals each day.

    ``drop_law`` is ``"none"``, ``"uniform_0_2"`` or a callable ``(rng, m) -> gamma``.
    The same hospitals are removed from both matrices.
    """
    if not (callable(drop_law) or drop_law in DROP_LAWS):
        raise InvalidLaw(f"unknown drop law {drop_law!r}; expected one of {DROP_LAWS}")
    beds, icu = panel.hospital_beds, panel.icu_beds
    if drop_law == "none":
        return beds.sum(axis=1), icu.sum(axis=1)
    rng = rng or np.random.default_rng()
    keep = np.ones(beds.shape, dtype=bool)
    for t in range(beds.shape[0]):
        gamma = min(_drops(drop_law, rng, panel.m), panel.m)
        if gamma:
            keep[t, rng.choice(panel.m, size=gamma, replace=False)] = False
    return (beds * keep).sum(axis=1), (icu * keep).sum(axis=1)


def oc_like_census(t_max: int = 200, h0: int = 43) -> np.ndarray:
    """Deterministic county-scale census path: slow growth plus one summer surge."""
    t = np.arange(t_max + 1, dtype=float)
    surge = 560.0 * np.exp(-(((t - 0.525 * t_max) / (0.125 * t_max)) ** 2))
    surge -= surge[0]
    return np.rint(h0 + 110.0 * t / t_max + surge).astype(np.int64)


@dataclass(frozen=True)
class StudyConfig:
    theta_true: tuple[float, float] = (0.1, 0.2)
    m: int = 25
    T_max: int = 200
    H0_total: int = 43
    I0_per_hospital: int = 1
    n_sim: int = 1000
    drop_law: str = "none"
    seed: int = 0
    h_total: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n_sim < 1 or self.m < 1 or self.T_max < 1:
            raise InvalidInput("n_sim, m and T_max must be positive")
        if not (callable(self.drop_law) or self.drop_law in DROP_LAWS):
            raise InvalidLaw(f"unknown drop law {self.drop_law!r}")
        if self.h_total is not None and len(self.h_total) != self.T_max + 1:
            raise InvalidInput("h_total must have T_max + 1 entries")

    def census(self) -> np.ndarray:
        if self.h_total is not None:
            return np.asarray(self.h_total, dtype=np.int64)
        return oc_like_census(self.T_max, self.H0_total)


def simulate_panel(cfg: StudyConfig, rng: np.random.Generator) -> HospitalPanel:
    alpha, mu = cfg.theta_true
    panel = disaggregate_hospitals(cfg.census(), cfg.m, rng)
    icu = np.empty_like(panel.hospital_beds)
    for j in range(cfg.m):
        icu[:, j] = gillespie_icu(panel.hospital_beds[:, j], alpha, mu,
                                  cfg.I0_per_hospital, cfg.T_max, rng)
    panel.icu_beds = icu
    return panel


def simulate_dataset(cfg: StudyConfig, rng: np.random.Generator):
    """One aggregated replicate as ``(ObservedSeries, CovariatePath)``."""
    panel = simulate_panel(cfg, rng)
    h, i = apply_underreporting(panel, cfg.drop_law, rng)
    dates = day_grid(STUDY_START, cfg.T_max + 1)
    return ObservedSeries(dates, i), CovariatePath(dates, h, np.zeros(len(h)))


@dataclass
class ReplicateOutcome:
    index: int
    estimate: tuple[float, float] | None = None
    intervals: tuple[tuple[float, float], tuple[float, float]] | None = None
    error: str | None = None


def _run_replicate(args) -> ReplicateOutcome:
    index, cfg, opts, seed_seq = args
    data_seq, fit_seq = seed_seq.spawn(2)
    rng = np.random.default_rng(data_seq)
    try:
        series, cov = simulate_dataset(cfg, rng)
        fit_opts = opts.replace(seed=int(fit_seq.generate_state(1)[0]))
        fit = fit_mle(series, cov, ModelSpec.M5, fit_opts, intervals=True)
    except IDPError as exc:
        return ReplicateOutcome(index, error=f"{exc.code}: {exc}")
    return ReplicateOutcome(index, (fit.mle.alpha, fit.mle.mu),
                            (fit.intervals["alpha"], fit.intervals["mu"]))


@dataclass
class StudyReport:
    config: StudyConfig
    n_ok: int
    n_failed: int
    mean_mle: dict[str, float]
    bias: dict[str, float]
    mean_relative_error: dict[str, float]
    coverage: dict[str, float]
    estimates: np.ndarray
    covered: np.ndarray
    failures: list[tuple[int, str]] = field(default_factory=list)

    def summary(self) -> dict[str, dict[str, float]]:
        return {"mean_mle": self.mean_mle, "bias": self.bias,
                "mean_relative_error": self.mean_relative_error, "coverage": self.coverage}


def run_study(cfg: StudyConfig, opts: FitOptions | None = None) -> StudyReport:
    """Simulate ``n_sim`` aggregated datasets, fit M5 to each, summarise bias and coverage."""
    opts = opts or FitOptions()
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_sim)
    outcomes = pmap(_run_replicate, [(k, cfg, opts, s) for k, s in enumerate(seeds)])
    ok = [o for o in outcomes if o.error is None]
    failures = [(o.index, o.error) for o in outcomes if o.error is not None]
    truth = np.array(cfg.theta_true)
    names = ("alpha", "mu")
    if ok:
        est = np.array([o.estimate for o in ok])
        lo = np.array([[iv[0] for iv in o.intervals] for o in ok])
        hi = np.array([[iv[1] for iv in o.intervals] for o in ok])
        covered = (lo <= truth) & (truth <= hi)
        mean = est.mean(axis=0)
        rel = ((est - truth) / truth).mean(axis=0)
        cover = covered.mean(axis=0)
    else:
        est = np.empty((0, 2))
        covered = np.empty((0, 2), dtype=bool)
        mean = rel = cover = np.full(2, np.nan)
    return StudyReport(
        config=cfg,
        n_ok=len(ok),
        n_failed=len(failures),
        mean_mle=dict(zip(names, mean.tolist())),
        bias=dict(zip(names, (mean - truth).tolist())),
        mean_relative_error=dict(zip(names, rel.tolist())),
        coverage=dict(zip(names, cover.tolist())),
        estimates=est,
        covered=covered,
        failures=failures,
    )
