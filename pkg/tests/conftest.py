import json
import os

import numpy as np
import pandas as pd
import pytest

os.environ.setdefault('AUFAIR_ENV', 'testing')

from config import TestingConfig
from services.dataio import discretize, parse_schema
from services.driver import RunConfig

TOY_SCHEMA = {
    'columns': {
        'age': 'numeric',
        'hours': 'numeric',
        'job': 'categorical',
        'sex': 'categorical',
        'label': 'categorical',
        'decision': 'categorical',
    },
    'protected': 'sex',
    'label': 'label',
    'blackbox_label': 'decision',
}


def make_toy_table(n=500, seed=0, noise=0.15):
    """Synthetic table whose recorded decisions favour sex = 1, with a share of them flipped"""
    rng = np.random.default_rng(seed)
    sex = rng.integers(0, 2, n)
    age = rng.integers(18, 70, n).astype(float)
    hours = rng.integers(10, 60, n).astype(float)
    job = rng.choice(['clerk', 'manager', 'sales'], n)
    score = 0.04 * (age - 40) + 0.05 * (hours - 35) + 1.0 * (job == 'manager')
    label = (score + rng.normal(0, 0.5, n) > 0.4).astype(np.int8)
    decision = (score + 0.8 * sex > 0.4).astype(np.int8)
    flipped = rng.random(n) < noise
    decision = np.where(flipped, 1 - decision, decision).astype(np.int8)
    return pd.DataFrame({
        'age': age,
        'hours': hours,
        'job': job.astype(str),
        'sex': sex.astype(np.int8),
        'label': label,
        'decision': decision,
    })


@pytest.fixture
def config():
    return TestingConfig


@pytest.fixture
def toy_schema():
    return parse_schema(TOY_SCHEMA)


@pytest.fixture
def toy_table():
    return make_toy_table()


@pytest.fixture
def toy_dataset(toy_table, toy_schema):
    return discretize(toy_table, toy_schema, max_bins=5)


@pytest.fixture
def toy_files(tmp_path, toy_table):
    """CSV and schema files for the toy table"""
    data_path = tmp_path / 'toy.csv'
    schema_path = tmp_path / 'toy_schema.json'
    toy_table.to_csv(data_path, index=False)
    schema_path.write_text(json.dumps(TOY_SCHEMA))
    return str(data_path), str(schema_path)


@pytest.fixture
def run_config(config):
    return RunConfig.build({
        'population_size': 12,
        'budget_fraction': 0.5,
        'query_interval': 2,
        'min_support': 0.05,
        'min_precision': 0.7,
        'max_pool': 30,
        'seed': 7,
    }, config=config)
