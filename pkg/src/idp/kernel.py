"""Transition probabilities of the immigration-death chain.

Over an interval of length ``t`` with constant rates the probability
generating function starting from ``i`` patients is

    phi_i(s, t) = exp[alpha (1 - s)(exp(-mu t) - 1) / mu] * [1 + (s - 1) exp(-mu t)]^i

Its power-series coefficients are the transition probabilities ``P_ij(t)``.
They are recovered by evaluating ``phi`` at the ``N`` roots of unity and
applying a discrete Fourier transform (exact up to aliasing of mass above
``N - 1``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import AliasingRisk, DegenerateRate, InvalidInput

MU_FLOOR = 1e-8
ALIAS_TOL = 1e-10
# round-off level of the unit-circle inversion; smaller coefficients are noise
RESOLUTION = 1e-13
DEFAULT_N = 2 ** 11


@dataclass(frozen=True)
class KernelConfig:
    n_grid: int = DEFAULT_N
    clamp_floor: float = 0.0
    escalate: bool = True

    def __post_init__(self):
        n = self.n_grid
        if not (isinstance(n, (int, np.integer)) and n >= 2 and (n & (n - 1)) == 0):
            raise InvalidInput(f"n_grid must be a power of two >= 2, got {n}")
        if not self.clamp_floor >= 0:
            raise InvalidInput("clamp_floor must be nonnegative")

    def doubled(self) -> "KernelConfig":
        return KernelConfig(2 * self.n_grid, self.clamp_floor, escalate=False)


@dataclass(frozen=True)
class TransitionRow:
    from_state: int
    elapsed: float
    rates: tuple[float, float]
    probs: np.ndarray
    raw: np.ndarray | None = None

    @property
    def n_grid(self) -> int:
        return len(self.probs)


def _check_rates(alpha, mu, t):
    if not np.all(np.asarray(mu) >= MU_FLOOR):
        raise DegenerateRate(f"mu must be at least {MU_FLOOR:g}, got {mu}")
    if not np.all(np.asarray(alpha) > 0) or not np.all(np.isfinite(alpha)):
        raise DegenerateRate(f"alpha must be positive and finite, got {alpha}")
    if not np.all(np.asarray(t) > 0):
        raise InvalidInput(f"elapsed time must be positive, got {t}")


def pgf_eval(i: int, s, t: float, alpha: float, mu: float):
    """Closed-form PGF ``E[s^X(t) | X(0) = i]`` for constant rates."""
    _check_rates(alpha, mu, t)
    s = np.asarray(s, dtype=complex)
    if np.any(np.abs(s) > 1 + 1e-12):
        raise InvalidInput("s must lie in the closed unit disk")
    decay = np.exp(-mu * t)
    value = np.exp(alpha * (1 - s) * (decay - 1) / mu)
    if i:
        value = value * (1 + (s - 1) * decay) ** i
    return value[()] if value.ndim == 0 else value


def poisson_mean(t, alpha, mu):
    """Mean of the Poisson (immigrant) component, ``alpha (1 - e^{-mu t}) / mu``."""
    return alpha * -np.expm1(-mu * t) / mu


def tail_bound(i, t, alpha, mu, level):
    """Chernoff bound on ``P(X(t) >= level | X(0) = i)``.

    Uses ``P(X >= a) <= phi(z) / z^a`` for real ``z > 1``, minimised over a
    geometric grid of ``z``. Vectorised over ``i`` and ``alpha``.
    """
    i = np.atleast_1d(np.asarray(i, dtype=float))[:, None]
    lam = np.atleast_1d(poisson_mean(t, np.asarray(alpha, dtype=float), mu))[:, None]
    p = np.exp(-mu * t)
    z = np.geomspace(1.0005, 1e3, 64)[None, :]
    log_b = lam * (z - 1) + i * np.log1p((z - 1) * p) - level * np.log(z)
    with np.errstate(over="ignore"):
        return np.exp(np.min(log_b, axis=1))


def transition_row(i: int, t: float, alpha: float, mu: float,
                   cfg: KernelConfig | None = None) -> TransitionRow:
    """Full row ``{P_ij(t)}_{j < N}`` by FFT of the PGF on the unit circle."""
    cfg = cfg or KernelConfig()
    _check_rates(alpha, mu, t)
    n = cfg.n_grid
    if not 0 <= i < n:
        raise InvalidInput(f"source state {i} outside grid of size {n}")
    s = np.exp(2j * np.pi * np.arange(n) / n)
    values = pgf_eval(i, s, t, alpha, mu)
    raw = np.fft.fft(values).real / n
    tail = max(raw[-1], float(tail_bound(i, t, alpha, mu, n - 1)[0]))
    if tail > ALIAS_TOL:
        if cfg.escalate:
            return transition_row(i, t, alpha, mu, cfg.doubled())
        raise AliasingRisk(
            f"mass {tail:.3g} near index {n - 1} for i={i}, t={t}, alpha={alpha}, mu={mu}")
    probs = np.maximum(raw, cfg.clamp_floor)
    return TransitionRow(int(i), float(t), (float(alpha), float(mu)), probs, raw)


def transition_probs(src, dst, alpha, mu: float, t: float = 1.0,
                     cfg: KernelConfig | None = None, backend=None) -> np.ndarray:
    """``P_{src[k], dst[k]}(t)`` with immigration rate ``alpha[k]`` per pair.

    Same inversion as :func:`transition_row` but only the requested
    coefficient of each row is formed, which is what the likelihood needs.
    Probabilities are returned unclamped.
    """
    cfg = cfg or KernelConfig()
    backend = backend or _backend.core
    src = np.ascontiguousarray(src, dtype=np.int64)
    dst = np.ascontiguousarray(dst, dtype=np.int64)
    alpha = np.ascontiguousarray(np.broadcast_to(alpha, src.shape), dtype=float)
    _check_rates(alpha, mu, t)
    n = cfg.n_grid
    top = max(int(src.max(initial=0)), int(dst.max(initial=0)))
    if top >= n:
        if cfg.escalate and top < 2 * n:
            return transition_probs(src, dst, alpha, mu, t, cfg.doubled(), backend)
        raise AliasingRisk(f"state {top} does not fit a grid of size {n}")
    if src.size and np.max(tail_bound(src, t, alpha, mu, n - 1)) > ALIAS_TOL:
        if cfg.escalate:
            return transition_probs(src, dst, alpha, mu, t, cfg.doubled(), backend)
        raise AliasingRisk(f"transition mass reaches index {n - 1}")
    lam = np.ascontiguousarray(poisson_mean(t, alpha, mu))
    return backend.pgf_coefficients(lam, src, dst, float(np.exp(-mu * t)), n)
