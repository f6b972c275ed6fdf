"""Budgeted label acquisition driven by query-by-bagging uncertainty"""
import enum
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from services.hybrid import predict_batch
from utils.errors import BudgetExceededError

logger = logging.getLogger(__name__)


class Combine(enum.Enum):
    MEAN = 'mean'
    PER_SOLUTION = 'per_solution'


class LabelOracle:
    """Holds the hidden true labels; reveals them one index at a time"""

    def __init__(self, labels):
        self._labels = np.array(labels, dtype=np.int8, copy=True)
        self._labels.setflags(write=False)
        self._charged = set()

    def __len__(self):
        return len(self._labels)

    @property
    def cost(self):
        """Number of distinct indices revealed so far"""
        return len(self._charged)

    def reveal(self, index):
        index = int(index)
        self._charged.add(index)
        return int(self._labels[index])


@dataclass
class QueryState:
    """Acquired labels, the budget and an acquisition log"""
    budget: int
    batch_size: int
    labels: dict = field(default_factory=dict)
    log: list = field(default_factory=list)

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")

    @property
    def q(self):
        return np.fromiter(self.labels.keys(), dtype=int, count=len(self.labels))

    @property
    def y_q(self):
        return np.fromiter(self.labels.values(), dtype=np.int8, count=len(self.labels))

    @property
    def size(self):
        return len(self.labels)

    @property
    def remaining(self):
        return self.budget - len(self.labels)

    def acquire(self, index, oracle, iteration=0):
        """Label of `index`; charges the budget only on first acquisition"""
        index = int(index)
        if index in self.labels:
            return self.labels[index]
        if len(self.labels) >= self.budget:
            raise BudgetExceededError(f"Budget of {self.budget} labels is exhausted")
        label = oracle.reveal(index)
        self.labels[index] = label
        self.log.append((iteration, index, label))
        return label

    def signal(self, h_label):
        """h-labels with acquired true labels written over them"""
        signal = np.array(h_label, dtype=np.int8, copy=True)
        if self.labels:
            signal[self.q] = self.y_q
        return signal

    def unlabeled(self, n):
        mask = np.ones(n, dtype=bool)
        if self.labels:
            mask[self.q] = False
        return np.flatnonzero(mask)


def solution_probabilities(solution, pos_cov, neg_cov, h_label, signal, sample):
    """Per-instance positive rate of the deciding rule's captures in a bootstrap sample

    Deferred instances get h(x). A deciding rule that captures nothing in the
    sample falls back to the solution's positive prediction rate on the sample.
    """
    h_label = np.asarray(h_label)
    probability = h_label.astype(float)
    decided = np.zeros(len(h_label), dtype=bool)
    sample_signal = signal[sample]

    fallback = None
    for cov, rules in ((pos_cov, sorted(solution.pos)), (neg_cov, sorted(solution.neg))):
        for rule_id in rules:
            column = cov[:, rule_id]
            targets = column & ~decided
            if not targets.any():
                continue
            captured = column[sample]
            if captured.any():
                rate = float(np.mean(sample_signal[captured]))
            else:
                if fallback is None:
                    predicted, _ = predict_batch(solution, pos_cov[sample], neg_cov[sample], h_label[sample])
                    fallback = float(np.mean(predicted)) if len(sample) else 0.0
                rate = fallback
            probability[targets] = rate
            decided |= targets
    return probability


def rule_probability(solution, pos_cov, neg_cov, h_label, signal, sample, instance):
    """Probability assigned to one instance by the rule that decides it"""
    return float(solution_probabilities(solution, pos_cov, neg_cov, h_label, signal, sample)[instance])


def uncertainty_scores(front1, pos_cov, neg_cov, h_label, signal, rng, nboot=10, combine=Combine.MEAN):
    """Variance of bootstrap probabilities for every instance"""
    if not front1:
        raise ValueError("front1 must be non-empty")
    if nboot < 2:
        logger.warning("nboot=%d gives zero variance for every instance", nboot)

    n = len(h_label)
    samples = [rng.integers(0, n, size=n) for _ in range(nboot)]
    combine = Combine(combine)

    if combine is Combine.MEAN:
        averaged = np.zeros((nboot, n))
        for solution in front1:
            for b, sample in enumerate(samples):
                averaged[b] += solution_probabilities(solution, pos_cov, neg_cov, h_label, signal, sample)
        averaged /= len(front1)
        return averaged.var(axis=0)

    total = np.zeros(n)
    for solution in front1:
        per_sample = np.stack([
            solution_probabilities(solution, pos_cov, neg_cov, h_label, signal, sample) for sample in samples
        ])
        total += per_sample.var(axis=0)
    return total / len(front1)


def sample_by_uncertainty(scores, state, oracle, rng, iteration=0):
    """Acquire up to b unlabeled instances drawn in proportion to their scores"""
    scores = np.clip(np.asarray(scores, dtype=float), 0.0, None)
    unlabeled = state.unlabeled(len(scores))
    if len(unlabeled) == 0:
        logger.warning("No unlabeled instances remain; nothing acquired")
        return state

    count = min(state.batch_size, state.remaining, len(unlabeled))
    weights = scores[unlabeled]
    available = np.ones(len(unlabeled), dtype=bool)
    for _ in range(count):
        mass = np.where(available, weights, 0.0)
        total = mass.sum()
        p = mass / total if total > 0 else available / available.sum()
        pick = int(rng.choice(len(unlabeled), p=p))
        available[pick] = False
        state.acquire(unlabeled[pick], oracle, iteration)

    logger.info("Acquired %d labels at iteration %d (|Q|=%d of %d)", count, iteration, state.size, state.budget)
    return state


def query_labels(front1, pos_cov, neg_cov, h_label, state, oracle, rng, iteration=0, nboot=10, combine=Combine.MEAN):
    """Score instances with the first front and acquire a batch of labels"""
    if state.remaining <= 0:
        raise BudgetExceededError("Budget already exhausted")
    signal = state.signal(h_label)
    scores = uncertainty_scores(front1, pos_cov, neg_cov, h_label, signal, rng, nboot=nboot, combine=combine)
    return sample_by_uncertainty(scores, state, oracle, rng, iteration)


def export_log(state, path):
    """Write the acquisition log as CSV"""
    frame = pd.DataFrame(state.log, columns=['iteration', 'index', 'label'])
    frame.to_csv(path, index=False, lineterminator='\n')
