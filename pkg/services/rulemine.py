"""Frequent condition-set mining and candidate rule pools"""
import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from mlxtend.frequent_patterns import fpgrowth as mlxtend_fpgrowth

from utils.errors import ConfigurationError

logger = logging.getLogger(__name__)


class Sign(enum.Enum):
    POSITIVE = 'positive'
    NEGATIVE = 'negative'

    @property
    def label(self):
        return 1 if self is Sign.POSITIVE else 0


@dataclass(frozen=True)
class Rule:
    """A conjunction of vocabulary conditions voting for one label"""
    conditions: tuple
    sign: Sign
    support: int
    precision: float

    def __post_init__(self):
        if not self.conditions:
            raise ValueError("A rule needs at least one condition")
        if any(b <= a for a, b in zip(self.conditions, self.conditions[1:])):
            raise ValueError("Rule condition ids must be strictly increasing")

    def covers(self, bits):
        """Boolean vector of instances satisfying every condition"""
        return np.asarray(bits)[:, list(self.conditions)].all(axis=1)

    def describe(self, vocabulary):
        return [vocabulary[c].describe() for c in self.conditions]


@dataclass(frozen=True)
class CandidatePools:
    """Gene alphabet of the search: positive and negative rule lists"""
    positive: tuple
    negative: tuple

    def pool(self, sign):
        return self.positive if sign is Sign.POSITIVE else self.negative

    def size(self, sign):
        return len(self.pool(sign))

    def to_document(self, vocabulary):
        describe = lambda rule: {
            'conditions': rule.describe(vocabulary),
            'support': rule.support,
            'precision': rule.precision,
        }
        return {
            'positive': [describe(rule) for rule in self.positive],
            'negative': [describe(rule) for rule in self.negative],
        }


def fpgrowth(bitmatrix, minsupp, max_len):
    """Frequent itemsets with exact support counts, in lexicographic order

    Returns every itemset of at most `max_len` items whose support count is
    at least ceil(minsupp * n).
    """
    if not 0 < minsupp <= 1:
        raise ValueError("minsupp must lie in (0, 1]")
    if max_len < 1:
        raise ValueError("max_len must be at least 1")

    bitmatrix = np.asarray(bitmatrix, dtype=bool)
    if bitmatrix.ndim != 2 or bitmatrix.shape[0] == 0 or bitmatrix.shape[1] == 0:
        return []

    n = bitmatrix.shape[0]
    min_count = max(1, math.ceil(minsupp * n))
    # halfway between counts so the library's fraction test and its ceil agree with min_count
    threshold = (min_count - 0.5) / n

    frame = pd.DataFrame(bitmatrix, columns=range(bitmatrix.shape[1]))
    found = mlxtend_fpgrowth(frame, min_support=threshold, use_colnames=False, max_len=max_len)

    itemsets = []
    for support, items in zip(found['support'], found['itemsets']):
        count = int(round(support * n))
        if count >= min_count:
            itemsets.append((tuple(sorted(int(i) for i in items)), count))
    itemsets.sort(key=lambda entry: entry[0])
    return itemsets


def _rank_key(rule):
    return (-rule.precision, -rule.support, rule.conditions)


def _rules_for_sign(itemsets, sign, dataset, min_precision):
    target = sign.label
    rules = []
    for items, count in itemsets:
        covered = dataset.bits[:, list(items)].all(axis=1)
        if not covered.any():
            continue
        precision = float(np.mean(dataset.h_label[covered] == target))
        if precision >= min_precision:
            rules.append(Rule(conditions=items, sign=sign, support=count, precision=precision))
    return rules


def induce_candidates(dataset, minsupp=0.05, max_len=3, min_precision=0.7, max_pool=150, per_class_support=True):
    """Mine high-precision positive and negative rule pools against h-labels"""
    if dataset.h_label is None:
        raise ConfigurationError("Rule mining needs black-box labels for every instance")

    pools = {}
    shared = None if per_class_support else fpgrowth(dataset.bits, minsupp, max_len)
    for sign in (Sign.POSITIVE, Sign.NEGATIVE):
        if per_class_support:
            rows = dataset.h_label == sign.label
            itemsets = fpgrowth(dataset.bits[rows], minsupp, max_len)
        else:
            itemsets = shared
        rules = sorted(_rules_for_sign(itemsets, sign, dataset, min_precision), key=_rank_key)
        pools[sign] = tuple(rules[:max_pool])
        logger.info("Mined %d %s candidate rules (%d kept)", len(rules), sign.value, len(pools[sign]))

    for sign, rules in pools.items():
        if not rules:
            raise ConfigurationError(
                f"No {sign.value} rules reach precision {min_precision}; lower min_precision or min_support"
            )

    return CandidatePools(positive=pools[Sign.POSITIVE], negative=pools[Sign.NEGATIVE])


def rule_coverage(pools, bits):
    """Coverage matrices (instances x rules) for the positive and negative pools"""
    bits = np.asarray(bits, dtype=bool)
    n = bits.shape[0]

    def matrix(rules):
        if not rules:
            return np.zeros((n, 0), dtype=bool)
        return np.stack([rule.covers(bits) for rule in rules], axis=1)

    return matrix(pools.positive), matrix(pools.negative)
