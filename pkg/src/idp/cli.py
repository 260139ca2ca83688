"""Command-line entry point: ``idp {fit,select,simulate,study,validate,forecast}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend
from .assess import COUNTY_PHASES, BacktestPlan, replicate_band, rolling_forecast
from .errors import IDPError, InvalidInput
from .inference import FitOptions, FitResult, confidence_intervals, fit_mle, select_model
from .io import Report, emit_csv, ingest_csv
from .kernel import KernelConfig
from .model import ALL_MODELS, CovariatePath, ModelSpec, ObservedSeries, ParamVector, \
    immigration_rates, mean_icu_stay
from .simulate import StudyConfig, run_study, simulate_dataset, simulate_rates

log = logging.getLogger("idp")

COMMANDS = ("fit", "select", "simulate", "study", "validate", "forecast")
COUNTY_PHASE_MODELS = ("M2", "M3", "M3")


@dataclass
class RunConfig:
    command: str
    input: Path | None = None
    models: tuple[str, ...] = ()
    phases: tuple[tuple[str, str], ...] = ()
    grid_n: int = 2 ** 11
    restarts: int = 10
    seed: int = 0
    out: Path = Path("idp-out")
    nsim: int = 1000
    drops: str = "none"
    nrep: int = 100
    params: dict[str, float] = field(default_factory=dict)

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise InvalidInput(f"unknown command {self.command!r}")
        if self.input is not None and not Path(self.input).exists():
            raise InvalidInput(f"input file {self.input} does not exist")
        needs_input = self.command in ("fit", "select", "validate", "forecast")
        if needs_input and self.input is None:
            raise InvalidInput(f"{self.command} requires --input")
        KernelConfig(self.grid_n)
        starts = [np.datetime64(a) for a, _ in self.phases]
        ends = [np.datetime64(b) for _, b in self.phases]
        for k, (a, b) in enumerate(zip(starts, ends)):
            if b < a or (k and a <= ends[k - 1]):
                raise InvalidInput("phase boundaries must be ordered and non-overlapping")
        for m in self.models:
            ModelSpec.parse(m)

    def fit_options(self) -> FitOptions:
        return FitOptions(restarts=self.restarts, seed=self.seed,
                          kernel=KernelConfig(self.grid_n))


def parse_phases(value: str | None) -> tuple[tuple[str, str], ...]:
    if not value:
        return ()
    if value.strip().lower() in ("county", "paper"):
        return COUNTY_PHASES
    phases = []
    for chunk in value.split(","):
        start, sep, end = chunk.strip().partition(":")
        if not sep:
            raise InvalidInput(f"phase {chunk!r} is not of the form START:END")
        phases.append((start.strip(), end.strip()))
    return tuple(phases)


PARAM_NAMES = ("alpha", "mu", "beta_H", "beta_HP", "beta_P")


def parse_params(value: str | None) -> dict[str, float]:
    if not value:
        return {}
    out = {}
    for item in value.split(","):
        key, sep, number = item.partition("=")
        if not sep:
            raise InvalidInput(f"parameter {item!r} is not of the form name=value")
        key = key.strip()
        if key not in PARAM_NAMES:
            raise InvalidInput(f"unknown parameter {key!r}; expected one of {PARAM_NAMES}")
        try:
            out[key] = float(number)
        except ValueError:
            raise InvalidInput(f"parameter {key}={number!r} is not a number") from None
    return out


def _phase_windows(series: ObservedSeries, cov: CovariatePath, phases):
    if not phases:
        yield "all", series, cov
        return
    for k, (start, end) in enumerate(phases, start=1):
        mask = (series.dates >= np.datetime64(start)) & (series.dates <= np.datetime64(end))
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            raise InvalidInput(f"phase {start}..{end} has no observations")
        yield f"phase{k}", series.window(idx[0], idx[-1] + 1), cov.window(idx[0], idx[-1] + 1)


def _suffix(label: str) -> str:
    return "" if label == "all" else f".{label}"


def _add_fit(report: Report, label: str, fit: FitResult) -> None:
    sec = _suffix(label)
    report.update(f"estimates{sec}", {
        "model": fit.spec.name, "K": fit.K, "n_obs": fit.n_obs,
        **fit.mle.as_dict(),
        "mean_icu_stay_days": mean_icu_stay(fit.mle),
        "loglik": fit.loglik, "aic": fit.aic, "converged": fit.converged,
        "restarts_agreeing": f"{fit.restarts_agreeing}/{fit.restarts_total}",
    })
    if fit.intervals is not None:
        report.update(f"intervals{sec}", {k: v for k, v in fit.intervals.items()})
        lo, hi = fit.intervals["mu"]
        if lo > 0:
            report.set(f"intervals{sec}", "mean_icu_stay_days", (1.0 / hi, 1.0 / lo))


def _load(cfg: RunConfig, report: Report):
    series, cov, ingest = ingest_csv(cfg.input)
    report.update("input", {"path": str(cfg.input), "rows_read": ingest.rows_read,
                            "rows_dropped": ingest.rows_dropped,
                            "gap_days_filled": ingest.gap_days_filled,
                            "positivity_source": ingest.positivity_source})
    return series, cov


def _models_for(cfg: RunConfig, n: int, default=("M3",)) -> list[str]:
    models = list(cfg.models) or list(default)
    if len(models) == 1:
        return models * n
    if len(models) != n:
        raise InvalidInput(f"need 1 or {n} models, got {len(models)}")
    return models


def _cmd_fit(cfg: RunConfig, report: Report) -> None:
    series, cov = _load(cfg, report)
    windows = list(_phase_windows(series, cov, cfg.phases))
    opts = cfg.fit_options()
    for (label, s, c), model in zip(windows, _models_for(cfg, len(windows))):
        fit = fit_mle(s, c, model, opts, intervals=True)
        _add_fit(report, label, fit)


def _cmd_select(cfg: RunConfig, report: Report) -> None:
    series, cov = _load(cfg, report)
    candidates = list(cfg.models) or [m.name for m in ALL_MODELS]
    for label, s, c in _phase_windows(series, cov, cfg.phases):
        selection = select_model(s, c, candidates, cfg.fit_options())
        report.table(f"aic{_suffix(label)}", ("rank", "model", "K", "loglik", "aic"),
                     [(r, f.spec.name, f.K, f.loglik, f.aic)
                      for r, f in enumerate(selection.ranked, start=1)])
        for spec, reason in selection.excluded:
            report.set(f"excluded{_suffix(label)}", spec.name, reason)
        if selection.ranked:
            best = selection.best
            try:
                best = confidence_intervals(best, s, c, cfg.fit_options().kernel)
            except IDPError as exc:
                report.set(f"estimates{_suffix(label)}", "interval_error", exc.code)
            _add_fit(report, label, best)


def _cmd_simulate(cfg: RunConfig, report: Report) -> None:
    rng = np.random.default_rng(cfg.seed)
    if cfg.input is not None:
        series, cov = _load(cfg, report)
        spec = ModelSpec.parse(cfg.models[0] if cfg.models else "M5")
        params = ParamVector(**cfg.params)
        rates = immigration_rates(spec, params, cov.hospital_census[:-1], cov.positivity[:-1])
        counts = simulate_rates(rates, params.mu, int(series.icu_census[0]), rng)
        report.update("simulation", {"source": "covariates", "model": spec.name,
                                     **params.as_dict(), "seed": cfg.seed})
        sim = ObservedSeries(cov.dates, counts)
    else:
        theta = (cfg.params.get("alpha", 0.1), cfg.params.get("mu", 0.2))
        study = StudyConfig(theta_true=theta, n_sim=1, drop_law=cfg.drops, seed=cfg.seed)
        sim, cov = simulate_dataset(study, rng)
        report.update("simulation", {"source": "hospital-panel", "model": "M5",
                                     "alpha": theta[0], "mu": theta[1], "m": study.m,
                                     "T_max": study.T_max, "drops": cfg.drops,
                                     "seed": cfg.seed})
    path = emit_csv(Path(cfg.out) / "simulated.csv", sim, cov)
    report.set("simulation", "output", str(path))
    report.table("series", ("date", "hospital_census", "icu_census"),
                 zip(sim.dates, cov.hospital_census, sim.icu_census))


def _cmd_study(cfg: RunConfig, report: Report) -> None:
    theta = (cfg.params.get("alpha", 0.1), cfg.params.get("mu", 0.2))
    study = StudyConfig(theta_true=theta, n_sim=cfg.nsim, drop_law=cfg.drops, seed=cfg.seed)
    result = run_study(study, cfg.fit_options())
    report.update("study", {"n_sim": study.n_sim, "n_ok": result.n_ok,
                            "n_failed": result.n_failed, "drops": cfg.drops,
                            "alpha_true": theta[0], "mu_true": theta[1], "m": study.m,
                            "T_max": study.T_max, "seed": cfg.seed})
    for name in ("alpha", "mu"):
        report.update(f"study.{name}", {
            "mean_mle": result.mean_mle[name], "bias": result.bias[name],
            "mean_relative_error": result.mean_relative_error[name],
            "coverage": result.coverage[name]})
    report.set("study", "mean_icu_stay_days", 1.0 / result.mean_mle["mu"])
    report.table("study.replicates", ("alpha_hat", "mu_hat", "alpha_covered", "mu_covered"),
                 ((a, m, bool(ca), bool(cm)) for (a, m), (ca, cm)
                  in zip(result.estimates, result.covered)))
    for index, reason in result.failures:
        report.set("study.failures", f"replicate{index}", reason)


def _cmd_validate(cfg: RunConfig, report: Report) -> None:
    series, cov = _load(cfg, report)
    windows = list(_phase_windows(series, cov, cfg.phases))
    opts = cfg.fit_options()
    rows = []
    for k, ((label, s, c), model) in enumerate(zip(windows, _models_for(cfg, len(windows)))):
        fit = fit_mle(s, c, model, opts)
        _add_fit(report, label, fit)
        band = replicate_band(fit, c, int(s.icu_census[0]), cfg.nrep, seed=cfg.seed + k)
        rows += list(zip(band.dates, band.lower, band.upper, s.icu_census))
    inside = np.mean([lo <= x <= hi for _, lo, hi, x in rows])
    report.update("band.summary", {"n_replicates": cfg.nrep, "coverage": float(inside)})
    report.table("band", ("date", "lower", "upper", "observed"), rows)


def _cmd_forecast(cfg: RunConfig, report: Report) -> None:
    series, cov = _load(cfg, report)
    phases = cfg.phases or COUNTY_PHASES
    default = COUNTY_PHASE_MODELS if phases == COUNTY_PHASES else ("M3",)
    plan = BacktestPlan(phases, n_forecasts=cfg.nrep)
    models = _models_for(cfg, len(phases), default)
    result = rolling_forecast(series, cov, models, plan, cfg.fit_options())
    report.update("forecast.summary", {"coverage": result.coverage,
                                       "weeks": len(result.weeks),
                                       "models": ",".join(models)})
    for phase, reason in result.failures:
        report.set("forecast.failures", f"phase{phase + 1}", reason)
    report.table("forecast", ("date", "phase", "train_end", "lower", "upper", "observed"),
                 ((d, w.phase + 1, w.train_end, lo, hi, x) for w in result.weeks
                  for d, lo, hi, x in zip(w.band.dates, w.band.lower, w.band.upper,
                                          w.observed)))
    if result.failures:
        raise _Partial(f"{len(result.failures)} phase(s) failed")


class _Partial(IDPError):
    code = "partial-result"


HANDLERS = {"fit": _cmd_fit, "select": _cmd_select, "simulate": _cmd_simulate,
            "study": _cmd_study, "validate": _cmd_validate, "forecast": _cmd_forecast}


def run(cfg: RunConfig) -> int:
    """Execute one command; the report lands in ``out/<command>.report``.

    On failure the partial report plus an ``[error]`` section is written under
    ``out/quarantine/`` and a JSON error record is printed to stderr.
    """
    report = Report(f"idp {cfg.command}")
    report.update("run", {"command": cfg.command, "seed": cfg.seed, "grid_n": cfg.grid_n,
                          "restarts": cfg.restarts, "backend": _backend.NAME})
    out = Path(cfg.out)
    try:
        cfg.validate()
        HANDLERS[cfg.command](cfg, report)
    except (IDPError, ValueError) as exc:
        code = getattr(exc, "code", "invalid-input")
        record = {"command": cfg.command, "error": code, "message": str(exc)}
        report.update("error", record)
        path = report.write(out / "quarantine" / f"{cfg.command}.report")
        record["report"] = str(path)
        print(json.dumps(record), file=sys.stderr)
        return 1
    path = report.write(out / f"{cfg.command}.report")
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idp", description="Fit, select, simulate and check immigration-death "
                                "models of daily ICU occupancy.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", type=Path)
        p.add_argument("--model", default="",
                       help="model id, or comma-separated ids (one per phase / candidates)")
        p.add_argument("--phases", default="",
                       help="'county' (alias 'paper') for the three 2020 county phases, "
                            "or START:END[,START:END...] in ISO dates")
        p.add_argument("--grid-n", type=int, default=2 ** 11)
        p.add_argument("--restarts", type=int, default=10)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=Path, default=Path("idp-out"))
        p.add_argument("--nsim", type=int, default=1000)
        p.add_argument("--drops", default="none", choices=("none", "uniform_0_2"))
        p.add_argument("--nrep", type=int, default=100)
        p.add_argument("--params", default="", help="name=value[,name=value...]")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = RunConfig(
            command=args.command, input=args.input,
            models=tuple(m.strip() for m in args.model.split(",") if m.strip()),
            phases=parse_phases(args.phases), grid_n=args.grid_n, restarts=args.restarts,
            seed=args.seed, out=args.out, nsim=args.nsim, drops=args.drops, nrep=args.nrep,
            params=parse_params(args.params))
    except IDPError as exc:
        print(json.dumps({"command": args.command, "error": exc.code, "message": str(exc)}),
              file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
