"""The hybrid model: positive rules, then negative rules, then defer to h"""
import enum
from dataclasses import dataclass

import numpy as np
from marshmallow import EXCLUDE, Schema, fields, ValidationError

from utils.errors import ConfigurationError


# Input validation schema for serialized solutions
class SolutionDocument(Schema):
    class Meta:
        unknown = EXCLUDE

    pos_rules = fields.List(fields.List(fields.String()), load_default=list)
    neg_rules = fields.List(fields.List(fields.String()), load_default=list)


def load_solution_document(document):
    try:
        return SolutionDocument().load(document)
    except ValidationError as err:
        raise ConfigurationError(f"Invalid solution document: {err.messages}") from err


class Provenance(enum.IntEnum):
    DEFERRED = 0
    POSITIVE_RULE = 1
    NEGATIVE_RULE = 2


@dataclass(frozen=True)
class Solution:
    """Rule ids into the positive and negative candidate pools"""
    pos: frozenset = frozenset()
    neg: frozenset = frozenset()

    @classmethod
    def of(cls, pos=(), neg=()):
        return cls(pos=frozenset(int(r) for r in pos), neg=frozenset(int(r) for r in neg))

    @property
    def key(self):
        """Canonical identity used for de-duplication"""
        return tuple(sorted(self.pos)), tuple(sorted(self.neg))

    @property
    def n_rules(self):
        return len(self.pos) + len(self.neg)

    def is_empty(self):
        return not self.pos and not self.neg

    def validate(self, pools):
        if any(r < 0 or r >= len(pools.positive) for r in self.pos):
            raise ValueError("Positive rule id outside the pool")
        if any(r < 0 or r >= len(pools.negative) for r in self.neg):
            raise ValueError("Negative rule id outside the pool")
        return self


def predict(solution, pools, bits_row, h_value):
    """Label and provenance for one instance given its bits and h's decision"""
    bits_row = np.asarray(bits_row, dtype=bool)
    for rule_id in sorted(solution.pos):
        if bits_row[list(pools.positive[rule_id].conditions)].all():
            return 1, Provenance.POSITIVE_RULE
    for rule_id in sorted(solution.neg):
        if bits_row[list(pools.negative[rule_id].conditions)].all():
            return 0, Provenance.NEGATIVE_RULE
    return int(h_value), Provenance.DEFERRED


def predict_batch(solution, pos_cov, neg_cov, h_label):
    """Vectorized labels and provenance codes from rule coverage matrices"""
    h_label = np.asarray(h_label, dtype=np.int8)
    n = len(h_label)
    pos_hit = pos_cov[:, sorted(solution.pos)].any(axis=1) if solution.pos else np.zeros(n, dtype=bool)
    neg_hit = neg_cov[:, sorted(solution.neg)].any(axis=1) if solution.neg else np.zeros(n, dtype=bool)
    neg_hit &= ~pos_hit

    labels = h_label.copy()
    labels[pos_hit] = 1
    labels[neg_hit] = 0
    provenance = np.full(n, Provenance.DEFERRED, dtype=np.int8)
    provenance[pos_hit] = Provenance.POSITIVE_RULE
    provenance[neg_hit] = Provenance.NEGATIVE_RULE
    return labels, provenance


def coverage(solution, pos_cov, neg_cov):
    """Fraction of instances decided by a rule rather than h"""
    n = pos_cov.shape[0]
    if n == 0:
        return 0.0
    _, provenance = predict_batch(solution, pos_cov, neg_cov, np.zeros(n, dtype=np.int8))
    return float(np.mean(provenance != Provenance.DEFERRED))


def to_document(solution, pools, vocabulary):
    """Serializable form using human-readable condition strings"""
    return {
        'pos_rules': [pools.positive[r].describe(vocabulary) for r in sorted(solution.pos)],
        'neg_rules': [pools.negative[r].describe(vocabulary) for r in sorted(solution.neg)],
    }


def from_document(document, pools, vocabulary):
    """Map a serialized solution back onto pool rule ids"""
    document = load_solution_document(document)
    index = {condition.describe(): j for j, condition in enumerate(vocabulary)}

    def lookup(rules, conditions):
        try:
            ids = tuple(sorted(index[text] for text in conditions))
        except KeyError as err:
            raise ConfigurationError(f"Unknown condition {err.args[0]!r}") from err
        for rule_id, rule in enumerate(rules):
            if rule.conditions == ids:
                return rule_id
        raise ConfigurationError(f"Rule {conditions} is not in the candidate pool")

    return Solution.of(
        pos=[lookup(pools.positive, rule) for rule in document.get('pos_rules', [])],
        neg=[lookup(pools.negative, rule) for rule in document.get('neg_rules', [])],
    )


def render_document(document):
    """If / else-if / else listing of a serialized solution"""
    document = load_solution_document(document)
    lines = []
    blocks = [(document.get('pos_rules', []), 1), (document.get('neg_rules', []), 0)]
    for rules, label in blocks:
        if not rules:
            continue
        opener = 'If' if not lines else 'Else if'
        for i, conditions in enumerate(rules):
            prefix = opener if i == 0 else '  OR'
            lines.append(f"{prefix} {' and '.join(conditions)}")
        lines.append(f'  -> Y = {label}')
    lines.append('Else Y = h(x)')
    return '\n'.join(lines) + '\n'


def render(solution, pools, vocabulary):
    return render_document(to_document(solution, pools, vocabulary))
