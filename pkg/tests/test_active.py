import logging
import os

import numpy as np
import pandas as pd
import pytest

from services.active import (
    Combine, LabelOracle, QueryState, export_log, query_labels, rule_probability, sample_by_uncertainty,
    solution_probabilities, uncertainty_scores,
)
from services.hybrid import Solution
from services.rulemine import induce_candidates, rule_coverage
from utils.errors import BudgetExceededError


def test_oracle_counts_distinct_reveals():
    oracle = LabelOracle([0, 1, 1])
    assert oracle.reveal(1) == 1
    oracle.reveal(1)
    oracle.reveal(2)
    assert oracle.cost == 2


def test_acquire_is_idempotent_and_bounded():
    oracle = LabelOracle([1, 0, 1, 0])
    state = QueryState(budget=2, batch_size=1)
    assert state.acquire(0, oracle) == 1
    assert state.acquire(0, oracle) == 1
    assert state.size == 1
    state.acquire(3, oracle)
    with pytest.raises(BudgetExceededError):
        state.acquire(2, oracle)
    # repeated index is still free
    assert state.acquire(3, oracle) == 0
    assert state.q.tolist() == [0, 3]
    assert state.y_q.tolist() == [1, 0]


def test_signal_overrides_h_with_true_labels():
    state = QueryState(budget=3, batch_size=1)
    state.acquire(1, LabelOracle([0, 0, 1]))
    assert state.signal([1, 1, 1]).tolist() == [1, 0, 1]


def test_budget_never_exceeded_over_random_call_sequences():
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 40))
        budget = int(rng.integers(1, n + 1))
        batch = int(rng.integers(1, budget + 1))
        state = QueryState(budget=budget, batch_size=batch)
        oracle = LabelOracle(rng.integers(0, 2, n))
        for step in range(int(rng.integers(1, 12))):
            if state.remaining <= 0:
                break
            scores = rng.random(n) * (rng.random(n) < 0.5)
            sample_by_uncertainty(scores, state, oracle, rng, iteration=step)
            assert state.size <= budget
            assert oracle.cost == state.size


def test_acquisitions_are_deterministic_per_seed():
    def acquire(seed):
        rng = np.random.default_rng(seed)
        state = QueryState(budget=15, batch_size=5)
        oracle = LabelOracle(np.arange(50) % 2)
        scores = np.linspace(0, 1, 50)
        for step in range(3):
            sample_by_uncertainty(scores, state, oracle, rng, iteration=step)
        return state.q.tolist()

    assert acquire(4) == acquire(4)
    assert len(set(acquire(4))) == 15


def test_zero_scores_sample_uniformly_and_positive_mass_wins():
    rng = np.random.default_rng(0)
    oracle = LabelOracle(np.zeros(10))
    state = QueryState(budget=10, batch_size=3)
    sample_by_uncertainty(np.zeros(10), state, oracle, rng)
    assert state.size == 3

    state = QueryState(budget=10, batch_size=2)
    scores = np.zeros(10)
    scores[[4, 7]] = 0.5
    sample_by_uncertainty(scores, state, oracle, rng)
    assert sorted(state.q.tolist()) == [4, 7]


def test_no_unlabeled_instances_left(caplog):
    oracle = LabelOracle([0, 1])
    state = QueryState(budget=5, batch_size=2)
    state.acquire(0, oracle)
    state.acquire(1, oracle)
    with caplog.at_level(logging.WARNING):
        sample_by_uncertainty(np.ones(2), state, oracle, np.random.default_rng(0))
    assert state.size == 2
    assert 'No unlabeled' in caplog.text


def test_probabilities_come_from_the_deciding_rule(toy_dataset):
    pools = induce_candidates(toy_dataset, max_pool=10)
    pos_cov, neg_cov = rule_coverage(pools, toy_dataset.bits)
    solution = Solution.of(pos=[0])
    signal = toy_dataset.h_label.copy()
    sample = np.arange(toy_dataset.n)

    probability = solution_probabilities(solution, pos_cov, neg_cov, toy_dataset.h_label, signal, sample)
    covered = pos_cov[:, 0]
    assert np.allclose(probability[covered], np.mean(signal[covered]))
    assert np.array_equal(probability[~covered], toy_dataset.h_label[~covered])

    i = int(np.flatnonzero(covered)[0])
    assert rule_probability(solution, pos_cov, neg_cov, toy_dataset.h_label, signal, sample, i) == \
        pytest.approx(np.mean(signal[covered]))


def test_uncertainty_scores_shape_and_single_bootstrap(toy_dataset, caplog):
    pools = induce_candidates(toy_dataset, max_pool=10)
    pos_cov, neg_cov = rule_coverage(pools, toy_dataset.bits)
    front = [Solution.of(pos=[0], neg=[0]), Solution.of(pos=[1])]
    signal = toy_dataset.h_label.copy()
    rng = np.random.default_rng(0)

    for combine in Combine:
        scores = uncertainty_scores(front, pos_cov, neg_cov, toy_dataset.h_label, signal, rng, nboot=10, combine=combine)
        assert scores.shape == (toy_dataset.n,)
        assert (scores >= 0).all()

    with caplog.at_level(logging.WARNING):
        flat = uncertainty_scores(front, pos_cov, neg_cov, toy_dataset.h_label, signal, rng, nboot=1)
    assert not flat.any()
    assert 'nboot=1' in caplog.text


def test_query_labels_acquires_a_batch(toy_dataset, tmp_path):
    pools = induce_candidates(toy_dataset, max_pool=10)
    pos_cov, neg_cov = rule_coverage(pools, toy_dataset.bits)
    state = QueryState(budget=30, batch_size=10)
    oracle = LabelOracle(toy_dataset.y)
    rng = np.random.default_rng(2)
    query_labels([Solution.of(pos=[0], neg=[0])], pos_cov, neg_cov, toy_dataset.h_label, state, oracle, rng, iteration=4)
    assert state.size == 10
    assert all(toy_dataset.y[i] == label for i, label in state.labels.items())

    path = os.path.join(tmp_path, 'log.csv')
    export_log(state, path)
    log = pd.read_csv(path)
    assert list(log.columns) == ['iteration', 'index', 'label']
    assert (log['iteration'] == 4).all()
    assert len(log) == 10


def test_query_labels_refuses_when_budget_spent(toy_dataset):
    state = QueryState(budget=1, batch_size=1)
    oracle = LabelOracle(toy_dataset.y)
    state.acquire(0, oracle)
    with pytest.raises(BudgetExceededError):
        query_labels([Solution()], np.zeros((toy_dataset.n, 0), bool), np.zeros((toy_dataset.n, 0), bool),
                     toy_dataset.h_label, state, oracle, np.random.default_rng(0))


def _scripted_probabilities(monkeypatch, values):
    """Make every bootstrap round return the next scripted probability for all instances"""
    rounds = iter(values)
    monkeypatch.setattr(
        'services.active.solution_probabilities',
        lambda solution, pos_cov, neg_cov, h_label, signal, sample: np.full(len(h_label), next(rounds)),
    )


@pytest.mark.parametrize('combine', list(Combine))
def test_identical_bootstrap_probabilities_score_zero(monkeypatch, combine):
    _scripted_probabilities(monkeypatch, [0.7] * 10)
    h = np.zeros(6, dtype=np.int8)
    scores = uncertainty_scores([Solution()], None, None, h, h, np.random.default_rng(0), nboot=10, combine=combine)
    assert np.array_equal(scores, np.zeros(6))


@pytest.mark.parametrize('combine', list(Combine))
def test_alternating_bootstrap_probabilities_score_a_quarter(monkeypatch, combine):
    _scripted_probabilities(monkeypatch, [0.0, 1.0] * 5)
    h = np.zeros(6, dtype=np.int8)
    scores = uncertainty_scores([Solution()], None, None, h, h, np.random.default_rng(0), nboot=10, combine=combine)
    assert scores == pytest.approx(np.full(6, 0.25))
