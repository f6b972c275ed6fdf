import itertools
import math

import numpy as np
import pytest

from services.dataio import BinarizedDataset
from services.rulemine import Rule, Sign, fpgrowth, induce_candidates, rule_coverage
from utils.errors import ConfigurationError


def brute_force_itemsets(bits, minsupp, max_len):
    """Level-wise enumeration of every frequent itemset"""
    n, m = bits.shape
    min_count = max(1, math.ceil(minsupp * n))
    found = []
    frontier = [()]
    for size in range(1, max_len + 1):
        candidates = set()
        for items in frontier:
            start = items[-1] + 1 if items else 0
            for item in range(start, m):
                candidates.add(items + (item,))
        frontier = []
        for items in sorted(candidates):
            count = int(bits[:, list(items)].all(axis=1).sum())
            if count >= min_count:
                found.append((items, count))
                frontier.append(items)
        if not frontier:
            break
    return sorted(found)


def test_fpgrowth_matches_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n = int(rng.integers(1, 201))
        m = int(rng.integers(1, 13))
        density = rng.uniform(0.1, 0.7)
        bits = rng.random((n, m)) < density
        minsupp = float(rng.uniform(0.05, 0.6))
        max_len = int(rng.integers(1, 4))
        assert fpgrowth(bits, minsupp, max_len) == brute_force_itemsets(bits, minsupp, max_len)


def test_fpgrowth_threshold_is_inclusive():
    bits = np.array([[1, 0], [1, 0], [0, 1], [0, 0]], dtype=bool)
    # ceil(0.5 * 4) = 2 instances
    assert fpgrowth(bits, 0.5, 2) == [((0,), 2)]


def test_fpgrowth_edge_cases():
    assert fpgrowth(np.zeros((0, 3), dtype=bool), 0.1, 2) == []
    assert fpgrowth(np.zeros((5, 3), dtype=bool), 0.1, 2) == []
    with pytest.raises(ValueError):
        fpgrowth(np.ones((3, 3), dtype=bool), 0.0, 2)
    with pytest.raises(ValueError):
        fpgrowth(np.ones((3, 3), dtype=bool), 0.5, 0)


def test_rule_requires_sorted_conditions():
    with pytest.raises(ValueError):
        Rule(conditions=(3, 1), sign=Sign.POSITIVE, support=1, precision=1.0)
    with pytest.raises(ValueError):
        Rule(conditions=(), sign=Sign.POSITIVE, support=1, precision=1.0)


def test_candidates_respect_precision_and_ranking(toy_dataset):
    pools = induce_candidates(toy_dataset, minsupp=0.05, max_len=3, min_precision=0.7, max_pool=20)
    assert 0 < len(pools.positive) <= 20
    assert 0 < len(pools.negative) <= 20

    for sign, rules in ((Sign.POSITIVE, pools.positive), (Sign.NEGATIVE, pools.negative)):
        keys = [(-r.precision, -r.support, r.conditions) for r in rules]
        assert keys == sorted(keys)
        for rule in rules:
            assert rule.sign is sign
            assert 1 <= len(rule.conditions) <= 3
            covered = rule.covers(toy_dataset.bits)
            assert rule.precision >= 0.7
            assert rule.precision == pytest.approx(np.mean(toy_dataset.h_label[covered] == sign.label))


def test_per_class_support_counts_within_class(toy_dataset):
    pools = induce_candidates(toy_dataset, minsupp=0.05, max_len=2, min_precision=0.7, max_pool=50)
    positives = toy_dataset.h_label == 1
    for rule in pools.positive:
        assert rule.support == int(rule.covers(toy_dataset.bits[positives]).sum())


def test_no_rule_reaching_precision_is_an_error(toy_dataset):
    with pytest.raises(ConfigurationError):
        induce_candidates(toy_dataset, minsupp=0.5, max_len=1, min_precision=1.0)


def test_mining_requires_h_labels(toy_dataset):
    unlabeled = BinarizedDataset(bits=toy_dataset.bits, z=toy_dataset.z, vocabulary=toy_dataset.vocabulary)
    with pytest.raises(ConfigurationError):
        induce_candidates(unlabeled)


def test_rule_coverage_columns(toy_dataset):
    pools = induce_candidates(toy_dataset, max_pool=10)
    pos_cov, neg_cov = rule_coverage(pools, toy_dataset.bits)
    assert pos_cov.shape == (toy_dataset.n, len(pools.positive))
    assert neg_cov.shape == (toy_dataset.n, len(pools.negative))
    for j, rule in enumerate(pools.negative):
        assert np.array_equal(neg_cov[:, j], rule.covers(toy_dataset.bits))


def test_pool_document_uses_condition_strings(toy_dataset):
    pools = induce_candidates(toy_dataset, max_pool=5)
    document = pools.to_document(toy_dataset.vocabulary)
    assert set(document) == {'positive', 'negative'}
    first = document['positive'][0]
    assert all(isinstance(text, str) for text in first['conditions'])
    assert first['support'] == pools.positive[0].support
