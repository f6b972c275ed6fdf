"""Objectives, dominance, Pareto fronts and hypervolume"""
import enum
import math
from typing import NamedTuple

import numpy as np
from pymoo.indicators.hv import HV

from utils.errors import UndefinedBiasError, UndefinedFitnessError


class BiasMetric(enum.Enum):
    EQUAL_OPPORTUNITY = 'equal_opportunity'
    DEMOGRAPHIC_PARITY = 'demographic_parity'


class ObjectivePoint(NamedTuple):
    error: float
    bias: float

    def validate(self):
        for value in self:
            if not math.isfinite(value) or not 0.0 <= value <= 1.0:
                raise ValueError(f"Objective values must be finite and in [0, 1], got {tuple(self)}")
        return self


def error_rate(predictions, labels):
    """Mismatch rate over the labeled instances"""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if labels.size == 0:
        raise UndefinedFitnessError("Error is undefined without labeled instances")
    return float(np.mean(predictions != labels))


def _group_tpr(predictions, labels, z, group, smoothing):
    positives = (labels == 1) & (z == group)
    count = int(positives.sum())
    hits = int((predictions[positives] == 1).sum())
    if smoothing:
        return (hits + 1.0) / (count + 2.0)
    if count == 0:
        raise UndefinedBiasError(f"Group z={group} has no labeled positives")
    return hits / count


def bias_eqopp(predictions, labels, z, smoothing=False):
    """Absolute gap in true positive rates between z=0 and z=1"""
    predictions, labels, z = (np.asarray(v) for v in (predictions, labels, z))
    if labels.size == 0:
        raise UndefinedFitnessError("Bias is undefined without labeled instances")
    return abs(_group_tpr(predictions, labels, z, 0, smoothing) - _group_tpr(predictions, labels, z, 1, smoothing))


def bias_parity(predictions, z, smoothing=False):
    """Absolute gap in positive prediction rates between z=0 and z=1"""
    predictions, z = np.asarray(predictions), np.asarray(z)
    if z.size == 0:
        raise UndefinedFitnessError("Bias is undefined without instances")
    rates = []
    for group in (0, 1):
        members = z == group
        count = int(members.sum())
        hits = int((predictions[members] == 1).sum())
        if smoothing:
            rates.append((hits + 1.0) / (count + 2.0))
        elif count == 0:
            raise UndefinedBiasError(f"Group z={group} has no instances")
        else:
            rates.append(hits / count)
    return abs(rates[0] - rates[1])


def evaluate(predictions, labels, z, metric=BiasMetric.EQUAL_OPPORTUNITY, smoothing=False):
    """(error, bias) of predictions against labels"""
    error = error_rate(predictions, labels)
    if BiasMetric(metric) is BiasMetric.DEMOGRAPHIC_PARITY:
        bias = bias_parity(predictions, z, smoothing=smoothing)
    else:
        bias = bias_eqopp(predictions, labels, z, smoothing=smoothing)
    return ObjectivePoint(error, bias)


def dominates(a, b):
    """True if a is no worse in both objectives and strictly better in one"""
    return (a[0] < b[0] and a[1] <= b[1]) or (a[0] <= b[0] and a[1] < b[1])


def pareto_front(points):
    """Indices of points not dominated by any other point"""
    points = [tuple(p) for p in points]
    return [
        i for i, p in enumerate(points)
        if not any(dominates(q, p) for j, q in enumerate(points) if j != i)
    ]


def hypervolume(front, reference=(1.0, 1.0)):
    """Area dominated by the front and bounded by the reference point"""
    front = np.asarray(front, dtype=float).reshape(-1, 2)
    reference = np.asarray(reference, dtype=float)
    if front.size == 0:
        return 0.0
    if (front > reference).any():
        raise ValueError("Every point must be componentwise <= the reference point")
    return float(HV(ref_point=reference)(front))
