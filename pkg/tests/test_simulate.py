import numpy as np
import pytest

from idp import _backend
from idp.errors import InfeasibleDecrement, InvalidInput, InvalidLaw
from idp.inference import FitOptions
from idp.kernel import transition_row
from idp.simulate import (HospitalPanel, StudyConfig, apply_underreporting,
                          disaggregate_hospitals, gillespie_icu, oc_like_census, run_study,
                          simulate_dataset, simulate_panel, simulate_rates)


def test_pure_death_is_binomial(rng):
    paths = np.array([simulate_rates(np.zeros(3), 0.3, 50, rng) for _ in range(4000)])
    assert np.all(np.diff(paths, axis=1) <= 0)
    for d in (1, 2, 3):
        p = np.exp(-0.3 * d)
        se = np.sqrt(50 * p * (1 - p) / len(paths))
        assert abs(paths[:, d].mean() - 50 * p) < 4 * se


def test_long_run_distribution_is_poisson(rng):
    ends = np.array([simulate_rates(np.full(60, 4.0), 0.2, 0, rng)[-1] for _ in range(3000)])
    lam = 4.0 / 0.2 * (1 - np.exp(-12))
    se = np.sqrt(lam / len(ends))
    assert abs(ends.mean() - lam) < 4 * se
    assert ends.var() == pytest.approx(lam, rel=0.1)


def test_one_day_outcomes_match_kernel(rng):
    draws = np.array([simulate_rates([6.0], 0.4, 8, rng)[1] for _ in range(20000)])
    probs = transition_row(8, 1.0, 6.0, 0.4).probs
    freq = np.bincount(draws, minlength=len(probs))[:len(probs)] / len(draws)
    assert 0.5 * np.abs(freq - probs).sum() < 0.03


def test_backends_consume_the_same_stream():
    rates = np.linspace(2, 30, 50)
    a = simulate_rates(rates, 0.2, 10, np.random.default_rng(4), backend=_backend.core)
    b = simulate_rates(rates, 0.2, 10, np.random.default_rng(4), backend=_backend.fallback)
    np.testing.assert_array_equal(a, b)


def test_zero_stays_nonnegative(rng):
    path = simulate_rates(np.full(30, 0.05), 2.0, 0, rng)
    assert path.min() >= 0


def test_gillespie_input_checks(rng):
    with pytest.raises(InvalidInput):
        gillespie_icu([10, 10], 0.1, 0.2, 1, 5, rng)
    with pytest.raises(InvalidInput):
        gillespie_icu([10, -1, 4], 0.1, 0.2, 1, 2, rng)
    with pytest.raises(InvalidInput):
        simulate_rates([1.0, -1.0], 0.2, 0, rng)


def test_disaggregation_conserves_totals(rng):
    totals = oc_like_census(200, 43)
    panel = disaggregate_hospitals(totals, 25, rng)
    assert panel.hospital_beds.shape == (201, 25)
    assert panel.hospital_beds.min() >= 0
    np.testing.assert_array_equal(panel.hospital_beds.sum(axis=1), totals)


def test_disaggregation_can_fail_when_totals_crash():
    with pytest.raises(InfeasibleDecrement):
        disaggregate_hospitals([40, 0], 8, np.random.default_rng(0), max_retries=1)


def test_census_path_shape():
    h = oc_like_census(200, 43)
    assert h[0] == 43 and len(h) == 201
    assert h.max() > 600 and h[-1] > h[0]


def _panel(rng, m=25, days=400):
    beds = rng.integers(5, 15, size=(days, m))
    return HospitalPanel(beds, beds // 2, m)


def test_drops_remove_a_twenty_fifth_on_average(rng):
    panel = HospitalPanel(np.full((20000, 25), 4), np.full((20000, 25), 2), 25)
    h, i = apply_underreporting(panel, "uniform_0_2", rng)
    assert h.mean() / 100 == pytest.approx(24 / 25, abs=0.003)
    np.testing.assert_array_equal(h, 2 * i)


def test_drops_hit_both_matrices_jointly(rng):
    panel = _panel(rng)
    h, i = apply_underreporting(panel, "uniform_0_2", np.random.default_rng(1))
    h_full, i_full = apply_underreporting(panel, "none")
    missing_h = h_full - h
    missing_i = i_full - i
    assert np.all((missing_h == 0) == (missing_i == 0))


def test_total_censoring_and_bad_laws(rng):
    panel = _panel(rng)
    h, i = apply_underreporting(panel, lambda r, m: m, rng)
    assert not h.any() and not i.any()
    with pytest.raises(InvalidLaw):
        apply_underreporting(panel, "poisson", rng)
    with pytest.raises(InvalidLaw):
        StudyConfig(drop_law="everything")
    with pytest.raises(InvalidInput):
        StudyConfig(n_sim=0)


def test_panels_are_seed_reproducible():
    cfg = StudyConfig(n_sim=1, T_max=60)
    a = simulate_panel(cfg, np.random.default_rng(3))
    b = simulate_panel(cfg, np.random.default_rng(3))
    np.testing.assert_array_equal(a.hospital_beds, b.hospital_beds)
    np.testing.assert_array_equal(a.icu_beds, b.icu_beds)
    s1, c1 = simulate_dataset(cfg, np.random.default_rng(3))
    s2, c2 = simulate_dataset(cfg, np.random.default_rng(3))
    np.testing.assert_array_equal(s1.icu_census, s2.icu_census)
    np.testing.assert_array_equal(c1.hospital_census, c2.hospital_census)


def test_panel_matches_configured_start():
    cfg = StudyConfig(n_sim=1, T_max=30)
    panel = simulate_panel(cfg, np.random.default_rng(0))
    assert panel.hospital_beds[0].sum() == 43
    np.testing.assert_array_equal(panel.icu_beds[0], np.ones(25))


def test_single_replicate_study_is_reproducible():
    cfg = StudyConfig(n_sim=2, T_max=80, seed=7)
    opts = FitOptions(restarts=2)
    a, b = run_study(cfg, opts), run_study(cfg, opts)
    assert a.n_ok + a.n_failed == 2
    np.testing.assert_array_equal(a.estimates, b.estimates)
    assert a.summary() == b.summary()
    one = run_study(StudyConfig(n_sim=1, T_max=80, seed=7), opts)
    assert one.n_ok == 1
    np.testing.assert_array_equal(one.estimates[0], a.estimates[0])
