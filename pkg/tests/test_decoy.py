import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from qkdlab.decoy import (
    SCHEME_S05,
    SCHEME_S1,
    DecoyScheme,
    analytic_lr_success,
    analytic_tagged_fraction,
    binomial_split,
    coherent_split,
    count_photons,
    decoy_yield_check,
    discriminate_levels_poisson,
    emit_pulse,
    emit_pulses,
    helstrom_error,
    honest_yield,
    likelihood_ratio_decide,
    naive_pns_forward_probs,
    nominal_false_alarm,
    pns_breach_condition,
    pns_split,
    poisson_multi,
    sample_counts,
    tagged_fraction,
    threshold_rule_success,
    transmit_honest,
    transmit_naive_pns,
)

import oracles

P_MULTI_05 = 1 - math.exp(-0.5) * 1.5


def single_level(s):
    # a dummy second level with zero probability keeps the scheme well-formed
    return DecoyScheme(((s, 1.0), (s + 1.0, 0.0)))


@pytest.mark.parametrize(
    "levels", [(), ((0.5, 0.6), (0.1, 0.6)), ((0.5, 0.5), (0.5, 0.5)), ((-0.1, 1.0),)]
)
def test_scheme_validation(levels):
    with pytest.raises(ValueError):
        DecoyScheme(levels)


def test_emitted_pulse_invariants(rng):
    b = emit_pulses(SCHEME_S05, 10_000, rng)
    np.testing.assert_allclose(np.abs(b.amplitude) ** 2, b.s_level, atol=1e-9)
    assert np.all((b.phase >= 0) & (b.phase < 2 * math.pi))
    assert np.all(b.realized_n >= 0)
    rec = emit_pulse(SCHEME_S1, rng)
    assert abs(abs(rec.amplitude) ** 2 - rec.s_level) < 1e-9


def test_vacuum_pulses_are_empty(rng):
    b = emit_pulses(SCHEME_S1, 100_000, rng)
    assert np.all(b.realized_n[b.s_level == 0.0] == 0)


def test_poisson_mean(rng):
    b = emit_pulses(single_level(1.0), 1_000_000, rng)
    n = b.realized_n
    assert abs(n.mean() - 1.0) < 4 * n.std(ddof=1) / math.sqrt(n.size)


def test_poisson_tail_formula():
    assert float(poisson_multi(0.5)) == pytest.approx(0.0902040104310499, abs=1e-15)
    assert float(poisson_multi(0.5)) == pytest.approx(
        1 - oracles.poisson_pmf(0, 0.5) - oracles.poisson_pmf(1, 0.5), abs=1e-15
    )


def test_deferred_count_sampling(rng):
    b = emit_pulses(SCHEME_S05, 1000, rng, sample_counts=False)
    assert not b.has_counts
    with pytest.raises(ValueError):
        pns_split(b)
    b2 = sample_counts(b, rng)
    assert b2.has_counts
    np.testing.assert_array_equal(b2.forwarded_n, b2.realized_n)


@pytest.mark.parametrize("n,fwd,tagged", [(0, 0, False), (1, 1, False), (2, 1, True), (3, 2, True)])
def test_pns_split_single(rng, n, fwd, tagged):
    rec = emit_pulse(SCHEME_S05, rng)
    from dataclasses import replace

    rec = replace(rec, realized_n=n, forwarded_n=n)
    out = pns_split(rec)
    assert out.forwarded_n == fwd
    assert out.tagged is tagged
    assert out.eve_split_photons == int(tagged)
    assert out.eve_split_photons <= out.realized_n


def test_pns_tagged_share(rng):
    b = pns_split(emit_pulses(single_level(0.5), 1_000_000, rng))
    share = b.tagged.mean()
    assert abs(share - P_MULTI_05) < 4 * math.sqrt(P_MULTI_05 * (1 - P_MULTI_05) / len(b))


def test_coherent_split_examples(rng):
    b = emit_pulses(single_level(1.0), 5, rng)
    zero = coherent_split(b, 0.0)
    assert np.all(zero.eve_split_amplitude == 0)
    np.testing.assert_array_equal(zero.forwarded_amplitude, b.amplitude)
    split = coherent_split(b, 0.9)
    np.testing.assert_allclose(np.abs(split.eve_split_amplitude) ** 2, 0.9, atol=1e-12)
    np.testing.assert_allclose(np.abs(split.forwarded_amplitude) ** 2, 0.1, atol=1e-12)
    for kappa in (-0.1, 1.1):
        with pytest.raises(ValueError):
            coherent_split(b, kappa)


@given(kappa=st.floats(0, 1), seed=st.integers(0, 2**32))
def test_coherent_split_conserves_energy(kappa, seed):
    b = emit_pulses(SCHEME_S05, 256, np.random.default_rng(seed))
    s = coherent_split(b, kappa)
    total = np.abs(s.eve_split_amplitude) ** 2 + np.abs(s.forwarded_amplitude) ** 2
    np.testing.assert_allclose(total, b.s_level, rtol=0, atol=1e-12)
    # the split keeps the pulse phase
    nz = b.s_level > 0
    if 0 < kappa:
        np.testing.assert_allclose(np.angle(s.eve_split_amplitude[nz] / b.amplitude[nz]), 0, atol=1e-9)


def poisson_chisquare_pvalue(counts, mu, top=6):
    k = np.minimum(counts, top)
    observed = np.bincount(k, minlength=top + 1)
    probs = stats.poisson.pmf(np.arange(top), mu)
    probs = np.append(probs, 1 - probs.sum())
    return stats.chisquare(observed, probs * counts.size).pvalue


@pytest.mark.parametrize("s,kappa", [(1.0, 0.9), (0.5, 0.3)])
def test_split_arm_is_poisson_both_views(rng, s, kappa):
    b = emit_pulses(single_level(s), 1_000_000, rng)
    # amplitude view: deterministic split, then count
    rho1 = count_photons(coherent_split(b, kappa).eve_split_amplitude, rng)
    # count view: photon-by-photon binomial split
    rho2 = binomial_split(b, kappa, rng)
    assert poisson_chisquare_pvalue(rho1, kappa * s) > 0.01
    assert poisson_chisquare_pvalue(rho2, kappa * s) > 0.01


def test_discrimination_vacuum_vs_one(rng):
    res = discriminate_levels_poisson(0.9, 1.0, 0.0, (0.5, 0.5), 1_000_000, rng)
    assert res.analytic == pytest.approx(1 - 0.5 * math.exp(-0.9), abs=1e-12)
    assert res.analytic == pytest.approx(0.7967151701297921, abs=1e-12)
    assert abs(res.sigmas_off) < 4


def test_discrimination_equal_levels(rng):
    res = discriminate_levels_poisson(0.9, 0.5, 0.5, (0.5, 0.5), 100_000, rng)
    assert res.analytic == pytest.approx(0.5)
    assert abs(res.success - 0.5) < 4 * 0.5 / math.sqrt(100_000)


def test_discrimination_monotone_in_kappa():
    grid = np.linspace(0, 1, 21)
    succ = [analytic_lr_success(k * 0.5, k * 0.1) for k in grid]
    assert np.all(np.diff(succ) >= -1e-15)
    succ1 = [analytic_lr_success(k * 1.0, 0.0) for k in grid]
    np.testing.assert_allclose(succ1, 1 - 0.5 * np.exp(-grid), atol=1e-12)


def test_discrimination_monotone_in_kappa_mc():
    vals = []
    for k in (0.1, 0.5, 0.9):
        rng = np.random.default_rng(7)
        vals.append(discriminate_levels_poisson(k, 1.0, 0.0, (0.5, 0.5), 200_000, rng).success)
    assert vals[0] <= vals[1] <= vals[2]


def test_lr_beats_every_threshold_rule(rng):
    n, kappa, sa, sb = 200_000, 0.9, 1.0, 0.3
    truth = rng.random(n) < 0.5
    counts = rng.poisson(kappa * np.where(truth, sa, sb))
    lr = float(np.mean(likelihood_ratio_decide(counts, kappa * sa, kappa * sb) == truth))
    for t in range(0, 8):
        for high in (True, False):
            assert lr >= threshold_rule_success(counts, truth, t, high)


@pytest.mark.parametrize("kappa,sa,sb", [(0.9, 1.0, 0.0), (0.5, 0.5, 0.1), (1.0, 2.0, 1.0)])
def test_helstrom_below_counting_error(kappa, sa, sb):
    q = helstrom_error(math.sqrt(kappa * sa), math.sqrt(kappa * sb))
    assert q <= 1 - analytic_lr_success(kappa * sa, kappa * sb) + 1e-15


def test_helstrom_examples():
    assert helstrom_error(1, 0) == pytest.approx(0.5 * (1 - math.sqrt(1 - math.exp(-1))))
    assert helstrom_error(1, 0) == pytest.approx(0.1025, abs=1e-4)
    assert helstrom_error(0.3 + 0.2j, 0.3 + 0.2j) == pytest.approx(0.5)
    assert helstrom_error(10, 0) < 1e-40
    assert helstrom_error(1, 0, (1.0, 0.0)) == pytest.approx(0.0)


def test_helstrom_matches_matrix_oracle():
    # Gram-matrix route: trace norm of p_a|a><a| - p_b|b><b| in a 2-d span
    for alpha, beta, pa in [(1, 0, 0.5), (0.7, -0.2j, 0.3)]:
        ov = math.exp(-abs(alpha - beta) ** 2 / 2)
        a = np.array([1.0, 0.0])
        b = np.array([ov, math.sqrt(1 - ov**2)])
        gamma = pa * np.outer(a, a) - (1 - pa) * np.outer(b, b)
        err = 0.5 * (1 - np.abs(np.linalg.eigvalsh(gamma)).sum())
        assert helstrom_error(alpha, beta, (pa, 1 - pa)) == pytest.approx(err, abs=1e-12)


def test_naive_pns_forward_probs():
    r, q = naive_pns_forward_probs(SCHEME_S05, 0.1)
    target = 0.5 * (honest_yield(0.5, 0.1) + honest_yield(0.1, 0.1))
    multi = 0.5 * (poisson_multi(0.5) + poisson_multi(0.1))
    assert q == 0.0
    assert r == pytest.approx(target / multi)
    r2, q2 = naive_pns_forward_probs(SCHEME_S05, 0.9)
    assert r2 == 1.0 and 0 < q2 <= 1


def test_naive_pns_keeps_total_rate(rng):
    b = emit_pulses(SCHEME_S05, 400_000, rng)
    att = transmit_naive_pns(b, SCHEME_S05, 0.1, rng)
    honest = transmit_honest(b, 0.1, rng)
    p = 0.5 * float(honest_yield(0.5, 0.1) + honest_yield(0.1, 0.1))
    se = math.sqrt(p * (1 - p) / len(b))
    assert abs(att.clicked.mean() - p) < 4 * se
    assert abs(honest.clicked.mean() - p) < 4 * se


def test_yield_check_false_alarm(rng):
    trials, t = 500, 3.0
    alarms = 0
    for _ in range(trials):
        b = emit_pulses(SCHEME_S05, 20_000, rng)
        alarms += decoy_yield_check(transmit_honest(b, 0.1, rng), 0.1, t).alarm
    nominal = nominal_false_alarm(t, 2)
    assert alarms / trials <= nominal + 3 * math.sqrt(nominal * (1 - nominal) / trials)


def test_yield_check_catches_naive_pns(rng):
    hits = sum(
        decoy_yield_check(
            transmit_naive_pns(emit_pulses(SCHEME_S05, 100_000, rng), SCHEME_S05, 0.1, rng), 0.1
        ).alarm
        for _ in range(100)
    )
    assert hits > 95


def test_vacuum_decoy_yield_zero_without_attack(rng):
    b = emit_pulses(SCHEME_S1, 50_000, rng)
    chk = decoy_yield_check(transmit_honest(b, 0.1, rng), 0.1)
    assert chk.yields[chk.s_levels == 0.0][0] == 0.0
    assert not chk.alarm or np.all(chk.s_levels != 0.0)


def test_vacuum_decoy_click_alarms(rng):
    b = emit_pulses(SCHEME_S1, 50_000, rng)
    att = transmit_honest(b, 0.1, rng)
    clicked = att.clicked.copy()
    clicked[np.flatnonzero(b.s_level == 0.0)[0]] = True
    from qkdlab.decoy import Arrivals

    assert decoy_yield_check(Arrivals(att.pulses, clicked), 0.1).alarm


def test_yield_check_needs_two_levels(rng):
    b = emit_pulses(single_level(0.5), 1000, rng)
    with pytest.raises(ValueError, match="two"):
        decoy_yield_check(transmit_honest(b, 0.1, rng), 0.1)


def test_alarm_monotone_in_strength():
    strengths = (0.0, 0.1, 0.2, 0.4, 1.0)
    rates = []
    for s in strengths:
        alarms = 0
        for seed in range(60):
            rng = np.random.default_rng(seed)
            b = emit_pulses(SCHEME_S05, 50_000, rng)
            alarms += decoy_yield_check(transmit_naive_pns(b, SCHEME_S05, 0.1, rng, s), 0.1).alarm
        rates.append(alarms)
    assert all(a <= b for a, b in zip(rates, rates[1:]))
    assert rates[-1] == 60


def test_breach_condition_example():
    assert pns_breach_condition(0.5, 0.01)
    assert 0.01 * 0.5 * math.exp(-0.5) == pytest.approx(0.00303, abs=1e-5)
    assert not pns_breach_condition(0.01, 1.0)


def test_tagged_fraction_vanishes_for_weak_pulses():
    vals = [analytic_tagged_fraction(s, 1.0) for s in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-4


def test_tagged_fraction_monte_carlo(rng):
    eta = 0.01
    b = pns_split(emit_pulses(single_level(0.5), 1_000_000, rng))
    tf = tagged_fraction(b, eta)
    n = len(b)
    assert abs(tf.n_tagged - n * P_MULTI_05) < 4 * math.sqrt(n * P_MULTI_05 * (1 - P_MULTI_05))
    assert tf.fraction == pytest.approx(analytic_tagged_fraction(0.5, eta), rel=0.02)
    assert tf.breach
    assert tf.multi_photon_fraction == pytest.approx(P_MULTI_05, rel=0.02)
