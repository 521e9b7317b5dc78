import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marllab.environments import MATRIX_PAYOFF
from marllab.matrixlab import (
    boltzmann,
    joint_entropy,
    soft_policy_iteration,
    train_qmixs,
    train_tabular_qmix,
)

# table of published fitted joint values for the monotone decomposition
PUBLISHED_FIT = np.array([[-8.06, -8.05, -8.05],
                          [-8.05, -0.01, -0.01],
                          [-8.05, -0.02, -0.01]])
PUBLISHED_POLICY = np.array([[0.01, 0.02, 0.02],
                             [0.02, 0.23, 0.23],
                             [0.01, 0.23, 0.23]])
PUBLISHED_JOINT_POLICY = np.array([[0.76, 0.01, 0.01],
                                   [0.01, 0.05, 0.05],
                                   [0.01, 0.05, 0.05]])


def test_payoff_table_exact():
    assert MATRIX_PAYOFF.tolist() == [[8, -12, -12], [-12, 0, 0], [-12, 0, 0]]


def test_decomposition_failure_across_seeds():
    t0 = time.monotonic()
    hits = 0
    for seed in range(5):
        fit = train_tabular_qmix(seed=seed)
        if fit.greedy != (0, 0) and fit.q_tot[0, 0] < -4.0:
            hits += 1
            assert fit.greedy[0] in (1, 2) and fit.greedy[1] in (1, 2)
    assert hits >= 4
    assert time.monotonic() - t0 < 10.0


def test_decomposition_fit_shape_on_reference_seed():
    fit = train_tabular_qmix(seed=0)
    assert fit.q_tot[0, 0] < -4.0
    # low-payoff block fitted near zero, A row/column strongly negative
    assert np.abs(fit.q_tot[1:, 1:]).max() < 0.5
    assert fit.q_tot[0, 1:].max() < -4.0
    assert fit.q_tot[1:, 0].max() < -4.0


def test_joint_conditioned_fit_recovers_payoff():
    for seed in range(5):
        fit = train_qmixs(seed=seed)
        assert fit.greedy == (0, 0)
        assert abs(fit.q_tot[0, 0] - 8.0) <= 0.1
        assert np.abs(fit.q_tot - MATRIX_PAYOFF).max() <= 0.1


def test_joint_conditioned_fit_zero_payoff():
    fit = train_qmixs(payoff=np.zeros((3, 3)), seed=0)
    assert np.abs(fit.q_tot).max() <= 0.1


@pytest.mark.slow
def test_joint_conditioned_fit_arbitrary_payoffs():
    rng = np.random.default_rng(0)
    for seed in range(5):
        payoff = rng.uniform(-10, 10, (3, 3))
        fit = train_qmixs(payoff=payoff, seed=seed)
        assert np.abs(fit.q_tot - payoff).max() < 0.1


def test_divergence_guard():
    from marllab.matrixlab import DivergenceError
    with pytest.raises(DivergenceError):
        train_tabular_qmix(payoff=np.full((3, 3), 1e9), iterations=50, seed=0)


def test_boltzmann_uniform_table():
    p = boltzmann(np.zeros((3, 3)), alpha=2.0)
    assert np.allclose(p, 1.0 / 9.0)


def test_boltzmann_rejects_nonpositive_temperature():
    with pytest.raises(ValueError):
        boltzmann(MATRIX_PAYOFF, 0.0)
    with pytest.raises(ValueError):
        boltzmann(MATRIX_PAYOFF, -1.0)


def test_boltzmann_reproduces_published_policy_table():
    # softmax of the published fitted values at alpha=3
    p = boltzmann(PUBLISHED_FIT, 3.0)
    assert np.abs(p - PUBLISHED_POLICY).max() <= 0.01


def test_boltzmann_of_payoff_reproduces_joint_policy_table():
    p = boltzmann(MATRIX_PAYOFF, 3.0)
    assert 0.73 <= p[0, 0] <= 0.81          # published 0.76
    assert abs(p[1, 1] - 0.05) <= 0.03      # published 0.05
    assert abs(p[2, 2] - 0.05) <= 0.03


@settings(max_examples=40, deadline=None)
@given(st.floats(-50, 50))
def test_boltzmann_shift_invariance(shift):
    rng = np.random.default_rng(0)
    q = rng.uniform(-5, 5, (3, 3))
    p1 = boltzmann(q, 2.5)
    p2 = boltzmann(q + shift, 2.5)
    assert np.abs(p1 - p2).max() < 1e-9
    assert abs(p1.sum() - 1.0) < 1e-9
    assert np.argmax(p1) == np.argmax(q)


@pytest.mark.parametrize("alpha", [0.1, 1.0, 3.0])
def test_soft_policy_iteration_monotone(alpha):
    trace = soft_policy_iteration(alpha=alpha, iterations=8)
    assert len(trace) == 9
    assert all(b >= a - 1e-12 for a, b in zip(trace, trace[1:]))


def test_soft_policy_iteration_one_step_fixed_point():
    trace = soft_policy_iteration(alpha=1.0, iterations=6)
    later = trace[1:]
    assert max(later) - min(later) < 1e-12


def test_soft_policy_iteration_greedy_limit():
    # alpha -> 0 concentrates on the (A, A) optimum
    pi = boltzmann(MATRIX_PAYOFF, 1e-3)
    assert pi[0, 0] > 0.999
    trace = soft_policy_iteration(alpha=1e-3, iterations=3)
    assert trace[-1] == pytest.approx(8.0, abs=1e-2)


def test_soft_policy_iteration_rejects_bad_alpha():
    with pytest.raises(ValueError):
        soft_policy_iteration(alpha=0.0)


def test_joint_entropy_uniform():
    assert joint_entropy(np.full((3, 3), 1 / 9)) == pytest.approx(np.log(9.0))
