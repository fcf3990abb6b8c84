import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qkdlab.quantum_core import (
    BREIDBART_BASIS,
    BREIDBART_SUCCESS,
    X_BASIS,
    Z_BASIS,
    MeasBasis,
    QubitState,
    bb84_angles,
    bb84_ensemble,
    bb84_state,
    born_probability,
    measure_and_resend,
    measure_angles,
    optimal_deletion_advantage,
    prob0_angles,
)

COS2 = 0.8535533905932737


def test_bb84_states():
    s = bb84_state(0, "Z")
    assert (s.amp0, s.amp1) == (1, 0)
    s = bb84_state(1, "X")
    assert s.amp0 == pytest.approx(1 / math.sqrt(2))
    assert s.amp1 == pytest.approx(-1 / math.sqrt(2))
    assert bb84_state(0, "Z").fidelity(bb84_state(0, "X")) == pytest.approx(0.5)


@pytest.mark.parametrize("bit,basis", [(2, "Z"), (0, "Y")])
def test_bb84_state_rejects_bad_input(bit, basis):
    with pytest.raises(ValueError):
        bb84_state(bit, basis)


@pytest.mark.parametrize(
    "state,basis,expected",
    [
        ((0, "Z"), Z_BASIS, (1.0, 0.0)),
        ((0, "Z"), BREIDBART_BASIS, (COS2, 1 - COS2)),
        ((0, "X"), Z_BASIS, (0.5, 0.5)),
    ],
)
def test_born_probability_examples(state, basis, expected):
    p = born_probability(bb84_state(*state), basis)
    assert p == pytest.approx(expected, abs=1e-12)


def test_born_rejects_unnormalized():
    with pytest.raises(ValueError, match="normalized"):
        born_probability(QubitState(1 + 0j, 1 + 0j), Z_BASIS)


def test_basis_orthonormal():
    for angle in np.linspace(0, math.pi, 17):
        b = MeasBasis(float(angle))
        assert abs(b.eigenstate(0).overlap(b.eigenstate(1))) < 1e-12


def test_breidbart_guesses_every_bb84_state_with_cos2():
    for bit in (0, 1):
        for basis in ("Z", "X"):
            p = born_probability(bb84_state(bit, basis), BREIDBART_BASIS)
            assert p[bit] == pytest.approx(BREIDBART_SUCCESS, abs=1e-15)
    assert BREIDBART_SUCCESS == math.cos(math.pi / 8) ** 2


@given(
    theta=st.floats(0, 2 * math.pi),
    phase=st.floats(0, 2 * math.pi),
    angle=st.floats(-math.pi, math.pi),
)
def test_born_probabilities_sum_to_one(theta, phase, angle):
    s = QubitState(complex(math.cos(theta)), math.sin(theta) * complex(math.cos(phase), math.sin(phase)))
    p0, p1 = born_probability(s, MeasBasis(angle))
    assert 0 <= p0 <= 1 and 0 <= p1 <= 1
    assert abs(p0 + p1 - 1) <= 1e-12
    # independent route: explicit projector
    psi = np.array([s.amp0, s.amp1])
    assert p0 == pytest.approx(oracles.born(psi, angle)[0], abs=1e-12)


def test_measure_and_resend_eigenstate(rng):
    for _ in range(50):
        out, resent = measure_and_resend(bb84_state(0, "Z"), Z_BASIS, rng)
        assert out == 0
        assert resent.fidelity(bb84_state(0, "Z")) == pytest.approx(1.0)


def test_resent_state_is_basis_eigenstate(rng):
    for _ in range(20):
        out, resent = measure_and_resend(bb84_state(1, "Z"), X_BASIS, rng)
        assert resent.fidelity(bb84_state(out, "X")) == pytest.approx(1.0)


def test_breidbart_intercept_error_is_quarter():
    # oracle: enumeration over Eve's outcomes with explicit projectors
    for bit in (0, 1):
        for basis in ("Z", "X"):
            assert oracles.intercept_error(math.pi / 8, bit, basis) == pytest.approx(0.25, abs=1e-12)


def test_breidbart_intercept_error_monte_carlo(rng):
    n = 200_000
    bits = np.zeros(n, dtype=np.int8)
    bases = np.zeros(n, dtype=np.int8)
    out, resent = measure_angles(bb84_angles(bits, bases), BREIDBART_BASIS.angle, rng)
    babe1 = rng.random(n) >= prob0_angles(resent, 0.0)
    se = math.sqrt(0.25 * 0.75 / n)
    assert abs(babe1.mean() - 0.25) < 4 * se


def test_measure_and_resend_frequency_chi_square(rng):
    from scipy import stats

    state = bb84_state(0, "Z")
    p0, p1 = born_probability(state, BREIDBART_BASIS)
    n = 1_000_000
    # the scalar path is too slow for 10^6 draws; check it on 2*10^4 and the
    # vectorised path (same sampling rule) on 10^6
    scalar = np.array([measure_and_resend(state, BREIDBART_BASIS, rng)[0] for _ in range(20_000)])
    k = np.count_nonzero(scalar == 0)
    assert abs(k / 20_000 - p0) < 4 * math.sqrt(p0 * p1 / 20_000)
    out, _ = measure_angles(np.zeros(n), BREIDBART_BASIS.angle, rng)
    counts = np.bincount(out, minlength=2)
    chi = stats.chisquare(counts, [n * p0, n * p1])
    assert chi.pvalue > 0.01


def test_optimal_deletion_bb84_no_budget():
    states, bits, priors = bb84_ensemble()
    res = optimal_deletion_advantage(states, bits, priors, 0.0)
    assert res.success_prob == pytest.approx(COS2, abs=1e-9)
    assert math.isclose(res.best_basis_angle % (math.pi / 2), math.pi / 8, abs_tol=1e-9)
    assert res.kept_fraction == pytest.approx(1.0)


def test_optimal_deletion_matches_direct_maximisation():
    grid = np.arange(720) * (math.pi / 720)
    states, bits, priors = bb84_ensemble()
    res = optimal_deletion_advantage(states, bits, priors, 0.0)
    assert res.success_prob == pytest.approx(oracles.no_postselection_optimum(grid), abs=1e-12)


@pytest.mark.parametrize("d", [0.0, 0.3, 0.9])
def test_optimal_deletion_single_known_state(d):
    res = optimal_deletion_advantage([bb84_state(1, "X")], [1], [1.0], d, basis_grid=72)
    assert res.success_prob == pytest.approx(1.0)


def test_optimal_deletion_nondecreasing_in_budget():
    # an asymmetric ensemble where deleting one outcome actually helps
    states = [bb84_state(0, "Z"), bb84_state(1, "X"), QubitState.from_angle(1.2)]
    bits, priors = [0, 1, 1], [0.5, 0.3, 0.2]
    values = [
        optimal_deletion_advantage(states, bits, priors, d, basis_grid=180).success_prob
        for d in np.linspace(0, 0.95, 20)
    ]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    assert values[-1] > values[0]


def test_optimal_deletion_rejects_empty():
    with pytest.raises(ValueError):
        optimal_deletion_advantage([], [], [], 0.0)


def test_optimal_deletion_rule_description():
    states, bits, priors = bb84_ensemble()
    res = optimal_deletion_advantage(states, bits, priors, 0.0, basis_grid=16)
    assert "keep" in res.best_rule
