"""Post-processing baselines: equal-opportunity label randomization and protected-bit flips"""
import logging
from dataclasses import dataclass

import numpy as np

from services.blackbox import flip_protected
from utils.errors import FittingError
from utils.io import write_json

logger = logging.getLogger(__name__)

TPR_GRID = np.arange(1001) / 1000.0


@dataclass(frozen=True)
class EopPolicy:
    """P(output = 1 | h, z) for h in {0, 1} and both groups, plus the common TPR target"""
    keep_positive: tuple
    flip_negative: tuple
    target: float
    expected_error: float = 0.0

    def __post_init__(self):
        for p in self.keep_positive + self.flip_negative:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"Policy probabilities must lie in [0, 1], got {p}")

    @property
    def table(self):
        """2 x 2 array indexed by [h, z]"""
        return np.array([self.flip_negative, self.keep_positive], dtype=float)

    def is_identity(self):
        return all(p == 1.0 for p in self.keep_positive) and all(p == 0.0 for p in self.flip_negative)

    def to_document(self):
        return {
            'p1_given_h1': {'z0': self.keep_positive[0], 'z1': self.keep_positive[1]},
            'p1_given_h0': {'z0': self.flip_negative[0], 'z1': self.flip_negative[1]},
            'target_tpr': self.target,
            'expected_error': self.expected_error,
        }


def _group_rates(h, y, z, group):
    positives = (z == group) & (y == 1)
    negatives = (z == group) & (y == 0)
    if not positives.any():
        raise FittingError(f"Group z={group} has no labeled positives")
    tpr = float(np.mean(h[positives] == 1))
    fpr = float(np.mean(h[negatives] == 1)) if negatives.any() else 0.0
    return int(positives.sum()), int(negatives.sum()), tpr, fpr


def _mix_for_target(tpr, fpr, target):
    """(keep, flip, fpr') minimizing the group's FPR at TPR = target

    keep = P(1 | h=1), flip = P(1 | h=0); the feasible set is a segment
    and the FPR is linear along it, so an endpoint is optimal.
    """
    if tpr >= 1.0:
        candidates = [(target, 0.0), (target, 1.0)]
    elif tpr <= 0.0:
        candidates = [(1.0, target), (0.0, target)]
    else:
        high = min(1.0, target / tpr)
        low = max(0.0, (target - (1.0 - tpr)) / tpr)
        candidates = [(a, (target - a * tpr) / (1.0 - tpr)) for a in (high, low)]

    best = None
    for keep, flip in candidates:
        flip = min(max(flip, 0.0), 1.0)
        rate = keep * fpr + flip * (1.0 - fpr)
        if best is None or rate < best[2] - 1e-15:
            best = (keep, flip, rate)
    return best


def fit_eop(h_label, y, z):
    """Pick the common TPR target with the lowest expected error on labeled data"""
    h_label, y, z = (np.asarray(v, dtype=np.int8) for v in (h_label, y, z))
    if not len(y):
        raise FittingError("EOP needs labeled instances")

    groups = [_group_rates(h_label, y, z, g) for g in (0, 1)]
    n = len(y)
    # observed TPRs make the identity policy reachable exactly
    targets = np.unique(np.concatenate([TPR_GRID, [groups[0][2], groups[1][2]]]))

    best = None
    for target in targets:
        target = float(target)
        mixes = [_mix_for_target(tpr, fpr, target) for _, _, tpr, fpr in groups]
        error = sum(
            positives * (1.0 - target) + negatives * mix[2]
            for (positives, negatives, _, _), mix in zip(groups, mixes)
        ) / n
        if best is None or error < best[0] - 1e-12:
            best = (error, target, mixes)

    error, target, mixes = best
    policy = EopPolicy(
        keep_positive=tuple(float(m[0]) for m in mixes),
        flip_negative=tuple(float(m[1]) for m in mixes),
        target=target,
        expected_error=float(error),
    )
    logger.info("EOP target TPR %.3f, expected error %.4f", target, error)
    return policy


def apply_eop(policy, h_label, z, rng):
    """Randomized outputs drawn with the probability indexed by (h, z)"""
    h_label = np.asarray(h_label, dtype=int)
    z = np.asarray(z, dtype=int)
    return (rng.random(len(h_label)) < policy.table[h_label, z]).astype(np.int8)


def flip_baselines(dm):
    """Decision-makers that see every instance with protected bit 0 and 1"""
    return flip_protected(dm, 0), flip_protected(dm, 1)


def export_policy(policy, path):
    write_json(path, policy.to_document())
