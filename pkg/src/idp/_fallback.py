"""Pure-Python / numpy versions of the compiled loops in ``_core.pyx``."""
import numpy as np


def pgf_coefficients(lam, src, dst, p, n_grid, cutoff=-60.0):
    lam = np.asarray(lam, dtype=float)[:, None]
    src = np.asarray(src, dtype=np.int64)[:, None]
    dst = np.asarray(dst, dtype=np.int64)[:, None]
    n_half = n_grid // 2
    m = np.arange(n_half + 1)
    theta = 2.0 * np.pi * m / n_grid
    base = 1.0 - p + p * np.exp(1j * theta)
    with np.errstate(divide="ignore"):
        log_base = np.log(base)
    re = lam * (np.cos(theta) - 1.0)
    im = lam * np.sin(theta)
    has_src = src > 0
    with np.errstate(invalid="ignore"):
        re = re + np.where(has_src, src * log_base.real, 0.0)
        im = im + np.where(has_src, src * log_base.imag, 0.0)
    im = im - 2.0 * np.pi * ((dst * m) % n_grid) / n_grid
    w = np.full(n_half + 1, 2.0)
    w[0] = w[-1] = 1.0
    keep = re >= cutoff
    terms = np.where(keep, np.exp(np.where(keep, re, 0.0)) * np.cos(np.where(keep, im, 0.0)), 0.0)
    return terms @ w / n_grid


def simulate_chunk(rates, mu, state, day, t_in_day, exps, unifs, out):
    t_max = len(rates)
    n = len(exps)
    k = 0
    while day < t_max and k < n:
        a = rates[day]
        psi = a + mu * state
        if psi <= 0.0:
            day += 1
            t_in_day = 0.0
            out[day] = state
            continue
        wait = exps[k] / psi
        if t_in_day + wait < 1.0:
            t_in_day += wait
            if unifs[k] * psi < a:
                state += 1
            else:
                state -= 1
        else:
            day += 1
            t_in_day = 0.0
            out[day] = state
        k += 1
    return state, day, t_in_day, k
