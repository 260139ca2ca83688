"""Reference computations that share no code with the package's kernel."""
import numpy as np
from scipy import linalg, stats


def generator(alpha, mu, n_states=400):
    """Truncated generator of the immigration-death chain on 0..n_states-1."""
    q = np.zeros((n_states, n_states))
    k = np.arange(n_states)
    q[k[:-1], k[:-1] + 1] = alpha
    q[k[1:], k[1:] - 1] = k[1:] * mu
    q[k, k] = -q.sum(axis=1)
    return q


def expm_row(i, t, alpha, mu, n_states=400):
    return linalg.expm(generator(alpha, mu, n_states) * t)[i]


def convolution_row(i, t, alpha, mu, n):
    """Survivors are Binomial(i, e^{-mu t}); newcomers are Poisson."""
    p = np.exp(-mu * t)
    lam = alpha * (1 - np.exp(-mu * t)) / mu
    surv = stats.binom.pmf(np.arange(i + 1), i, p)
    new = stats.poisson.pmf(np.arange(n), lam)
    return np.convolve(surv, new)[:n]


def expm_loglik(counts, rates, mu, n_states=400):
    """Log-likelihood of a daily series by matrix exponentials, one per day."""
    total = 0.0
    for a, x0, x1 in zip(rates, counts[:-1], counts[1:]):
        total += np.log(expm_row(int(x0), 1.0, a, mu, n_states)[int(x1)])
    return total
