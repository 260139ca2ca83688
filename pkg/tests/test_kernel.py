import itertools

import numpy as np
import pytest
from scipy import stats

from idp import _backend
from idp.errors import AliasingRisk, DegenerateRate, InvalidInput
from idp.kernel import KernelConfig, pgf_eval, transition_probs, transition_row
from oracles import convolution_row, expm_row

POISSON_GRID = list(itertools.product((0.1, 1.0, 10.0), (0.05, 0.2, 1.0), (0.5, 1.0, 7.0)))


@pytest.mark.parametrize("alpha, mu, t", POISSON_GRID)
def test_empty_start_is_poisson(alpha, mu, t):
    row = transition_row(0, t, alpha, mu)
    lam = alpha * (1 - np.exp(-mu * t)) / mu
    np.testing.assert_allclose(row.probs, stats.poisson.pmf(np.arange(row.n_grid), lam),
                               rtol=0, atol=1e-10)


@pytest.mark.parametrize("i, alpha, mu", list(itertools.product((0, 5, 20), (0.5, 2.0), (0.1, 0.4))))
def test_matches_matrix_exponential(i, alpha, mu):
    row = transition_row(i, 1.0, alpha, mu)
    np.testing.assert_allclose(row.probs[:400], expm_row(i, 1.0, alpha, mu), atol=1e-7, rtol=0)


@pytest.mark.parametrize("i, t, alpha, mu", [(300, 1.0, 50.0, 0.2), (900, 2.0, 400.0, 0.05),
                                             (40, 0.3, 7.0, 1.0)])
def test_matches_binomial_poisson_convolution(i, t, alpha, mu):
    row = transition_row(i, t, alpha, mu)
    np.testing.assert_allclose(row.probs, convolution_row(i, t, alpha, mu, row.n_grid),
                               atol=1e-12, rtol=0)


def test_chapman_kolmogorov():
    alpha, mu, t, s, i = 3.0, 0.3, 0.6, 0.9, 12
    cfg = KernelConfig(512)
    first = transition_row(i, t, alpha, mu, cfg).probs
    reach = np.flatnonzero(first > 1e-300)[-1] + 1
    rows = np.array([transition_row(k, s, alpha, mu, cfg).probs for k in range(reach)])
    composed = first[:reach] @ rows
    direct = transition_row(i, t + s, alpha, mu, cfg).probs
    np.testing.assert_allclose(composed[:201], direct[:201], atol=1e-6, rtol=0)


@pytest.mark.parametrize("i, alpha, mu, t", [(0, 10.0, 0.05, 7.0), (50, 1.0, 1.0, 0.5),
                                             (400, 80.0, 0.2, 1.0)])
def test_rows_normalised_and_nonnegative(i, alpha, mu, t):
    row = transition_row(i, t, alpha, mu)
    assert abs(row.probs.sum() - 1) < 1e-8
    assert row.raw.min() >= -1e-10
    assert row.probs.min() >= 0
    assert row.probs[-1] < 1e-10


def test_pgf_bounded_on_unit_circle():
    theta = np.linspace(0, 2 * np.pi, 4001)
    for i, alpha, mu, t in [(0, 10, 0.05, 7), (30, 2, 0.2, 1), (500, 100, 1.0, 0.1)]:
        assert np.max(np.abs(pgf_eval(i, np.exp(1j * theta), t, alpha, mu))) <= 1 + 1e-12


def test_short_time_limit_is_point_mass():
    row = transition_row(17, 1e-7, 2.0, 0.3)
    assert row.probs[17] == pytest.approx(1.0, abs=1e-5)


def test_escalates_once_then_errors():
    tight = KernelConfig(16)
    assert transition_row(0, 1.0, 5.0, 1.0, tight).n_grid == 32
    with pytest.raises(AliasingRisk):
        transition_row(0, 1.0, 5.0, 1.0, KernelConfig(16, escalate=False))
    with pytest.raises(AliasingRisk):
        transition_row(0, 1.0, 50.0, 0.1, tight)


def test_rejects_degenerate_rates_and_bad_grids():
    with pytest.raises(DegenerateRate):
        transition_row(0, 1.0, 1.0, 1e-9)
    with pytest.raises(DegenerateRate):
        transition_row(0, 1.0, 0.0, 0.2)
    for bad in (0, 1, 1000, 2.0):
        with pytest.raises(InvalidInput):
            KernelConfig(bad)
    with pytest.raises(InvalidInput):
        KernelConfig(64, clamp_floor=-1.0)


@pytest.mark.parametrize("backend", [_backend.core, _backend.fallback],
                         ids=lambda b: b.__name__.rsplit(".", 1)[-1])
def test_selected_coefficients_match_full_rows(backend):
    rng = np.random.default_rng(3)
    src = rng.integers(0, 300, 40)
    dst = np.clip(src + rng.integers(-30, 30, 40), 0, None)
    alpha = rng.uniform(1, 80, 40)
    got = transition_probs(src, dst, alpha, 0.2, 1.0, backend=backend)
    want = [transition_row(int(i), 1.0, a, 0.2).raw[j] for i, j, a in zip(src, dst, alpha)]
    np.testing.assert_allclose(got, want, atol=1e-14, rtol=0)


def test_backends_agree():
    rng = np.random.default_rng(8)
    src = rng.integers(0, 900, 200)
    dst = np.clip(src + rng.integers(-60, 60, 200), 0, None)
    alpha = rng.uniform(5, 200, 200)
    a = transition_probs(src, dst, alpha, 0.19, 1.0, backend=_backend.core)
    b = transition_probs(src, dst, alpha, 0.19, 1.0, backend=_backend.fallback)
    np.testing.assert_allclose(a, b, atol=1e-14, rtol=0)


def test_transition_probs_escalates_for_large_states():
    p = transition_probs([2100], [2090], [420.0], 0.2, cfg=KernelConfig(2048))
    want = convolution_row(2100, 1.0, 420.0, 0.2, 4096)[2090]
    assert p[0] == pytest.approx(want, rel=1e-8)
