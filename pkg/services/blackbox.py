"""The fixed decision-maker h and its protected-feature override variants"""
import enum
import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import pandas as pd
from scipy.special import expit

from services.dataio import ColumnKind
from utils.errors import DegenerateModelError, UnsupportedOperationError

logger = logging.getLogger(__name__)


class BlackBoxKind(enum.Enum):
    COLUMN = 'column'
    LINEAR = 'linear'


def _frozen(array, dtype):
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class FeatureEncoder:
    """Encodes raw table rows into the design matrix of a linear decision-maker

    Numeric features are standardized (missing -> mean), categorical features
    are one-hot encoded over the categories seen at fit time, and the
    protected bit is appended unscaled as the last column so it can be
    overridden.
    """
    numeric: tuple
    categorical: tuple
    protected: str

    @classmethod
    def fit(cls, table, schema):
        numeric = []
        categorical = []
        for name, kind in schema.features:
            if name == schema.protected:
                continue
            if kind is ColumnKind.NUMERIC:
                values = table[name].to_numpy(dtype=float)
                mean = float(np.nanmean(values)) if np.isfinite(values).any() else 0.0
                std = float(np.nanstd(values)) if np.isfinite(values).any() else 0.0
                numeric.append((name, mean, std if std > 0 else 1.0))
            else:
                categorical.append((name, tuple(sorted(set(table[name].astype(str))))))
        return cls(numeric=tuple(numeric), categorical=tuple(categorical), protected=schema.protected)

    @property
    def names(self):
        names = [name for name, _, _ in self.numeric]
        for name, categories in self.categorical:
            names.extend(f'{name}={category}' for category in categories)
        names.append(self.protected)
        return names

    @property
    def protected_index(self):
        return len(self.names) - 1

    def transform(self, table):
        if isinstance(table, pd.Series):
            table = table.to_frame().T
        blocks = []
        for name, mean, std in self.numeric:
            values = pd.to_numeric(table[name], errors='coerce').to_numpy(dtype=float)
            blocks.append(np.nan_to_num((values - mean) / std, nan=0.0)[:, None])
        for name, categories in self.categorical:
            values = table[name].astype(str).to_numpy()
            blocks.append(np.stack([values == c for c in categories], axis=1).astype(float)
                          if categories else np.zeros((len(table), 0)))
        blocks.append(table[self.protected].to_numpy(dtype=float)[:, None])
        return np.hstack(blocks)

    def to_document(self):
        return {
            'numeric': [{'name': n, 'mean': m, 'std': s} for n, m, s in self.numeric],
            'categorical': [{'name': n, 'categories': list(c)} for n, c in self.categorical],
            'protected': self.protected,
        }


@dataclass(frozen=True, eq=False)
class DecisionMaker:
    """A fixed binary decision-maker; never mutated after construction"""
    kind: BlackBoxKind
    labels: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    intercept: float = 0.0
    encoder: Optional[FeatureEncoder] = None
    override: Optional[int] = None
    threshold: float = 0.5

    def __post_init__(self):
        if self.kind is BlackBoxKind.COLUMN:
            if self.labels is None:
                raise ValueError("Column-backed decision-maker needs a label vector")
            object.__setattr__(self, 'labels', _frozen(self.labels, np.int8))
        else:
            if self.weights is None or self.encoder is None:
                raise ValueError("Linear decision-maker needs weights and an encoder")
            object.__setattr__(self, 'weights', _frozen(self.weights, float))
        if self.override not in (None, 0, 1):
            raise ValueError("override must be None, 0 or 1")

    def to_document(self):
        document = {'kind': self.kind.value, 'override': self.override, 'threshold': self.threshold}
        if self.kind is BlackBoxKind.LINEAR:
            document.update({
                'features': self.encoder.names,
                'weights': [float(w) for w in self.weights],
                'intercept': float(self.intercept),
                'encoder': self.encoder.to_document(),
            })
        return document


def from_column(labels):
    """Decision-maker backed by a recorded label column"""
    return DecisionMaker(kind=BlackBoxKind.COLUMN, labels=labels)


def predict_encoded(dm, X):
    """Batch decisions for an encoded design matrix (linear kind only)"""
    if dm.kind is not BlackBoxKind.LINEAR:
        raise UnsupportedOperationError("Column-backed decision-maker cannot score feature vectors")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if dm.override is not None:
        X = X.copy()
        X[:, dm.encoder.protected_index] = dm.override
    probability = expit(X @ dm.weights + dm.intercept)
    # ties go to the favorable label
    return (probability >= dm.threshold).astype(np.int8)


def predict_table(dm, table):
    """Batch decisions for a raw table (linear kind only)"""
    if dm.kind is not BlackBoxKind.LINEAR:
        raise UnsupportedOperationError("Column-backed decision-maker cannot score new tables")
    return predict_encoded(dm, dm.encoder.transform(table))


def predict_indices(dm, indices):
    """Stored decisions for instances of the source dataset (column kind only)"""
    if dm.kind is not BlackBoxKind.COLUMN:
        raise UnsupportedOperationError("Linear decision-maker has no stored labels")
    indices = np.asarray(indices, dtype=int)
    if indices.size and (indices.min() < 0 or indices.max() >= len(dm.labels)):
        raise UnsupportedOperationError("Instance is outside the decision-maker's source dataset")
    return dm.labels[indices]


def predict(dm, instance):
    """Decision for one instance

    Column-backed: `instance` is a row position in the source dataset.
    Linear: `instance` is an encoded feature vector or a raw table row.
    """
    if dm.kind is BlackBoxKind.COLUMN:
        if not isinstance(instance, (int, np.integer)):
            raise UnsupportedOperationError("Column-backed decision-maker only scores its own instances")
        return int(predict_indices(dm, [instance])[0])

    if isinstance(instance, pd.Series):
        x = dm.encoder.transform(instance)
    else:
        x = np.asarray(instance, dtype=float)
    return int(predict_encoded(dm, x)[0])


def flip_protected(dm, value):
    """Copy of a linear decision-maker that always sees the protected bit as `value`"""
    if value not in (0, 1):
        raise ValueError("value must be 0 or 1")
    if dm.kind is BlackBoxKind.COLUMN:
        raise UnsupportedOperationError("Column-backed decision-maker cannot be re-scored")
    return replace(dm, override=value)


def _soft_threshold(values, amount):
    return np.sign(values) * np.maximum(np.abs(values) - amount, 0.0)


def _proximal_gradient(X, y, lam, epochs, rng):
    """FISTA on mean logistic loss + lam * ||w||_1 (intercept unpenalized)"""
    n, d = X.shape
    augmented = np.hstack([X, np.ones((n, 1))])
    lipschitz = np.linalg.norm(augmented, 2) ** 2 / (4.0 * n) + 1e-12
    step = 1.0 / lipschitz

    theta = np.concatenate([rng.normal(0.0, 0.01, d), [0.0]])
    momentum = theta.copy()
    t = 1.0
    for _ in range(epochs):
        residual = expit(augmented @ momentum) - y
        gradient = augmented.T @ residual / n
        candidate = momentum - step * gradient
        candidate[:d] = _soft_threshold(candidate[:d], step * lam)

        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        momentum = candidate + ((t - 1.0) / t_next) * (candidate - theta)
        theta, t = candidate, t_next

    return theta[:d], float(theta[d])


def train_l1_logistic(train_table, schema, lam, epochs=500, seed=0):
    """Fit an L1-regularized logistic decision-maker by proximal gradient descent"""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if not schema.label:
        raise DegenerateModelError("Training a decision-maker requires a true-label column")

    y = train_table[schema.label].to_numpy(dtype=float)
    if len(np.unique(y)) < 2:
        raise DegenerateModelError("Training labels contain a single class")

    encoder = FeatureEncoder.fit(train_table, schema)
    X = encoder.transform(train_table)
    weights, intercept = _proximal_gradient(X, y, lam, epochs, np.random.default_rng(seed))
    logger.info("Trained L1 logistic decision-maker (lambda=%g, %d of %d weights non-zero)",
                lam, int(np.count_nonzero(weights)), len(weights))
    return DecisionMaker(kind=BlackBoxKind.LINEAR, weights=weights, intercept=intercept, encoder=encoder)


def select_lambda(train_table, val_table, schema, grid, epochs=500, seed=0):
    """Train one model per lambda and keep the lowest validation error"""
    best = None
    y_val = val_table[schema.label].to_numpy()
    for lam in grid:
        dm = train_l1_logistic(train_table, schema, lam, epochs=epochs, seed=seed)
        error = float(np.mean(predict_table(dm, val_table) != y_val)) if len(val_table) else 0.0
        logger.debug("lambda=%g validation error %.4f", lam, error)
        if best is None or error < best[2]:
            best = (dm, lam, error)
    return best
