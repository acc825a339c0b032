import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lisgan import schedules as S


def test_gate_probabilities_for_three_iterations():
    assert [S.gate_probability(t, 3, False) for t in range(4)] == [0.25, 0.5, 0.75, 1.0]
    assert S.gate_probability(0, 3, True) == 1.0


def test_analytic_values():
    # first trained iteration: 1/4, 3/4*2/4, 3/4*2/4*3/4, remainder
    np.testing.assert_allclose(S.first_trained_distribution(3), [0.25, 0.375, 0.28125, 0.09375])
    assert S.expected_generator_updates(3) == pytest.approx(2.78125, abs=1e-12)
    np.testing.assert_allclose(S.module_count_distribution(3), [0.125, 0.21875, 0.328125, 0.328125])
    np.testing.assert_allclose(S.module_count_distribution(0), [1.0])


def test_stop_probabilities_before_each_module():
    assert [S.stop_probability(i, 3) for i in (1, 2, 3)] == [0.125, 0.25, 0.5]


def test_gates_are_monotone_once_trained():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        gates = S.sample_iteration_gates(3, rng)
        first = gates.index(True)
        assert all(gates[first:]) and not any(gates[:first])


def test_iteration_and_module_sampling_match_analytic_distributions():
    rng = np.random.default_rng(1)
    n = 20_000
    counts = np.zeros(4)
    for _ in range(n):
        counts[S.sample_iteration_gates(3, rng).index(True)] += 1
    np.testing.assert_allclose(counts / n, S.first_trained_distribution(3), atol=0.02)
    ks = np.bincount([S.sample_module_count(3, rng) for _ in range(n)], minlength=4)
    np.testing.assert_allclose(ks / n, S.module_count_distribution(3), atol=0.02)


def test_zero_iterations_consume_no_randomness():
    rng = np.random.default_rng(5)
    before = rng.bit_generator.state
    assert S.sample_iteration_gates(0, rng) == [True]
    assert S.sample_module_count(0, rng) == 0
    assert rng.bit_generator.state == before


@given(st.integers(0, 8))
def test_distributions_sum_to_one(n_r):
    assert S.first_trained_distribution(n_r).sum() == pytest.approx(1.0)
    assert S.module_count_distribution(n_r).sum() == pytest.approx(1.0)
    assert 1.0 <= S.expected_generator_updates(n_r) <= n_r + 1
