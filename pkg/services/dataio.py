"""Tabular data loading, discretization into binary conditions, and fold splitting"""
import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from marshmallow import Schema, fields, validate, ValidationError
from sklearn.model_selection import KFold

from utils.errors import DataValidationError, SchemaError

logger = logging.getLogger(__name__)

# Raw cell values treated as missing
MISSING_MARKERS = ('', '?', 'NA', 'NaN', 'nan', 'null')
MISSING_CATEGORY = 'missing'


class ColumnKind(enum.Enum):
    CATEGORICAL = 'categorical'
    NUMERIC = 'numeric'


class Operator(enum.Enum):
    EQUALS = '='
    NOT_EQUALS = '!='
    AT_LEAST = '>='
    LESS_THAN = '<'


NUMERIC_OPERATORS = (Operator.AT_LEAST, Operator.LESS_THAN)
CATEGORY_OPERATORS = (Operator.EQUALS, Operator.NOT_EQUALS)


# Input validation schema for dataset schema documents
class SchemaDocument(Schema):
    columns = fields.Dict(
        keys=fields.String(),
        values=fields.String(validate=validate.OneOf([k.value for k in ColumnKind])),
        required=True
    )
    protected = fields.String(required=True)
    label = fields.String(load_default=None, allow_none=True)
    blackbox_label = fields.String(load_default=None, allow_none=True)
    positive_value = fields.Dict(keys=fields.String(), values=fields.Raw(), load_default=dict)


@dataclass(frozen=True)
class DatasetSchema:
    """Column kinds plus the protected, label and black-box label columns"""
    columns: tuple
    protected: str
    label: Optional[str] = None
    blackbox_label: Optional[str] = None
    positive_value: dict = field(default_factory=dict)

    @property
    def binary_columns(self):
        return tuple(c for c in (self.protected, self.label, self.blackbox_label) if c)

    @property
    def features(self):
        """Feature columns (name, kind), label columns excluded"""
        skip = {self.label, self.blackbox_label}
        return tuple((name, kind) for name, kind in self.columns if name not in skip)

    def to_document(self):
        return {
            'columns': {name: kind.value for name, kind in self.columns},
            'protected': self.protected,
            'label': self.label,
            'blackbox_label': self.blackbox_label,
            'positive_value': dict(self.positive_value),
        }


def parse_schema(document):
    """Validate a schema document and build a DatasetSchema"""
    try:
        data = SchemaDocument().load(document)
    except ValidationError as err:
        raise SchemaError(f"Invalid dataset schema: {err.messages}") from err

    return DatasetSchema(
        columns=tuple((name, ColumnKind(kind)) for name, kind in data['columns'].items()),
        protected=data['protected'],
        label=data['label'],
        blackbox_label=data['blackbox_label'],
        positive_value=data['positive_value'],
    )


@dataclass(frozen=True)
class Condition:
    """A binary test on one feature, e.g. `education-num >= 10`"""
    feature: str
    operator: Operator
    value: object
    kind: ColumnKind

    def __post_init__(self):
        allowed = NUMERIC_OPERATORS if self.kind is ColumnKind.NUMERIC else CATEGORY_OPERATORS
        if self.operator not in allowed:
            raise ValueError(f"Operator {self.operator.value} not valid for {self.kind.value} feature {self.feature}")

    def describe(self):
        value = f'{self.value:.10g}' if self.kind is ColumnKind.NUMERIC else self.value
        return f'{self.feature} {self.operator.value} {value}'

    def evaluate(self, column):
        """Boolean vector of instances satisfying the condition"""
        values = column.to_numpy()
        if self.operator is Operator.AT_LEAST:
            with np.errstate(invalid='ignore'):
                return np.asarray(values >= self.value, dtype=bool)
        if self.operator is Operator.LESS_THAN:
            with np.errstate(invalid='ignore'):
                return np.asarray(values < self.value, dtype=bool)
        if self.operator is Operator.EQUALS:
            return np.asarray(values == self.value, dtype=bool)
        return np.asarray(values != self.value, dtype=bool)


@dataclass(frozen=True, eq=False)
class BinarizedDataset:
    """Instances as bit-vectors over a condition vocabulary"""
    bits: np.ndarray
    z: np.ndarray
    vocabulary: tuple
    h_label: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        n = self.bits.shape[0]
        if self.bits.ndim != 2 or self.bits.shape[1] != len(self.vocabulary):
            raise ValueError("Bit matrix width must equal vocabulary size")
        for name in ('z', 'h_label', 'y'):
            vector = getattr(self, name)
            if vector is not None and len(vector) != n:
                raise ValueError(f"{name} length {len(vector)} does not match {n} instances")

    def __len__(self):
        return self.bits.shape[0]

    @property
    def n(self):
        return self.bits.shape[0]

    def subset(self, rows):
        """Dataset restricted to the given row positions"""
        rows = np.asarray(rows, dtype=int)
        pick = lambda v: None if v is None else v[rows]
        return BinarizedDataset(
            bits=self.bits[rows],
            z=self.z[rows],
            vocabulary=self.vocabulary,
            h_label=pick(self.h_label),
            y=pick(self.y),
        )


def load_schema(path):
    """Read and validate a JSON schema document"""
    from utils.io import read_json
    return parse_schema(read_json(path))


def _missing_mask(raw):
    return raw.isin(MISSING_MARKERS) | raw.isna()


def _encode_binary(name, raw, positive):
    """Encode a binary column to 0/1; returns (encoded, bad-row mask)"""
    missing = _missing_mask(raw)
    if positive is not None:
        positives = [str(v) for v in (positive if isinstance(positive, (list, tuple)) else [positive])]
        encoded = raw.isin(positives).astype(np.int8)
        return encoded, missing

    values = pd.to_numeric(raw.where(~missing), errors='coerce')
    unparseable = ~missing & values.isna()
    present = values.dropna()
    if not present.isin([0, 1]).all():
        bad = sorted(set(present[~present.isin([0, 1])].tolist()))
        raise DataValidationError(f"Column '{name}' must be binary 0/1, found {bad[:5]}")
    return values.fillna(0).astype(np.int8), missing | unparseable


def load_dataset(path, schema):
    """Load a CSV file into a typed table following the schema"""
    frame = pd.read_csv(path, dtype=str, skipinitialspace=True, keep_default_na=False, encoding='utf-8')
    frame.columns = [str(c).strip() for c in frame.columns]

    required = [name for name, _ in schema.columns] + list(schema.binary_columns)
    missing_columns = [name for name in dict.fromkeys(required) if name not in frame.columns]
    if missing_columns:
        raise SchemaError(f"Columns missing from {path}: {missing_columns}")

    table = pd.DataFrame(index=frame.index)
    rejected = np.zeros(len(frame), dtype=bool)

    for name, kind in schema.features:
        if name in schema.binary_columns:
            continue
        raw = frame[name].str.strip()
        missing = _missing_mask(raw)
        if kind is ColumnKind.NUMERIC:
            values = pd.to_numeric(raw.where(~missing), errors='coerce')
            rejected |= (~missing & values.isna()).to_numpy()
            table[name] = values.astype(float)
        else:
            table[name] = raw.where(~missing, MISSING_CATEGORY).astype(str)

    for name in schema.binary_columns:
        encoded, bad = _encode_binary(name, frame[name].str.strip(), schema.positive_value.get(name))
        rejected |= bad.to_numpy()
        table[name] = encoded

    if rejected.any():
        logger.warning("Rejected %d rows with unparseable values in %s", int(rejected.sum()), path)
        table = table[~rejected]

    table = table.reset_index(drop=True)
    logger.info("Loaded %d rows from %s", len(table), path)
    return table


def fit_vocabulary(table, schema, max_bins=5, exclude_protected=True):
    """Build the ordered condition vocabulary from a training table"""
    if max_bins < 2:
        raise ValueError("max_bins must be at least 2")

    vocabulary = []
    for name, kind in schema.features:
        if name == schema.protected and exclude_protected:
            continue
        column = table[name]
        if name == schema.protected:
            kind = ColumnKind.CATEGORICAL
            column = column.astype(str)

        if kind is ColumnKind.NUMERIC:
            values = column.dropna().to_numpy(dtype=float)
            if values.size == 0:
                continue
            probs = np.linspace(0, 1, max_bins + 1)[1:-1]
            cuts = np.unique(np.quantile(values, probs))
            # a cut must separate at least one value on each side
            cuts = [float(c) for c in cuts if values.min() < c <= values.max()]
            for cut in cuts:
                vocabulary.append(Condition(name, Operator.AT_LEAST, cut, kind))
                vocabulary.append(Condition(name, Operator.LESS_THAN, cut, kind))
        else:
            categories = sorted(set(column.tolist()))
            if len(categories) < 2:
                continue
            for category in categories:
                vocabulary.append(Condition(name, Operator.EQUALS, category, kind))
                # not-equals is redundant for binary features
                if len(categories) > 2:
                    vocabulary.append(Condition(name, Operator.NOT_EQUALS, category, kind))

    return tuple(vocabulary)


def apply_vocabulary(table, schema, vocabulary, h_label=None):
    """Binarize a table against an existing vocabulary"""
    n = len(table)
    bits = np.zeros((n, len(vocabulary)), dtype=bool)
    for j, condition in enumerate(vocabulary):
        column = table[condition.feature]
        if condition.feature == schema.protected:
            column = column.astype(str)
        bits[:, j] = condition.evaluate(column)

    if h_label is None and schema.blackbox_label:
        h_label = table[schema.blackbox_label].to_numpy()
    y = table[schema.label].to_numpy(dtype=np.int8) if schema.label else None

    return BinarizedDataset(
        bits=bits,
        z=table[schema.protected].to_numpy(dtype=np.int8),
        vocabulary=tuple(vocabulary),
        h_label=None if h_label is None else np.asarray(h_label, dtype=np.int8),
        y=y,
    )


def discretize(table, schema, max_bins=5, exclude_protected=True, h_label=None):
    """Fit a vocabulary on the table and binarize it"""
    vocabulary = fit_vocabulary(table, schema, max_bins=max_bins, exclude_protected=exclude_protected)
    logger.info("Vocabulary has %d conditions", len(vocabulary))
    return apply_vocabulary(table, schema, vocabulary, h_label=h_label)


def kfold_split(dataset, k, seed):
    """Deterministic k-fold split; returns (train indices, test indices) per fold"""
    n = dataset if isinstance(dataset, (int, np.integer)) else len(dataset)
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"Cannot split {n} instances into {k} folds")

    splitter = KFold(n_splits=k, shuffle=True, random_state=seed)
    return [(np.sort(train), np.sort(test)) for train, test in splitter.split(np.arange(n))]


def train_val_split(indices, ratio, seed):
    """Split training indices; validation size is floor((1 - ratio) * n)"""
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie strictly between 0 and 1")

    indices = np.asarray(indices, dtype=int)
    rng = np.random.default_rng(seed)
    shuffled = rng.permutation(indices)
    n_val = int(np.floor((1 - ratio) * len(indices) + 1e-9))
    return np.sort(shuffled[n_val:]), np.sort(shuffled[:n_val])
