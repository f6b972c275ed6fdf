import json
import logging
import os

import numpy as np
import pandas as pd
import pytest

from services.blackbox import from_column
from services.dataio import BinarizedDataset, load_schema
from services.harness import (
    FRONTIER_COLUMNS, BlackBoxSource, _baseline_points, budget_label, derive_seeds, export_frontier,
    load_experiment_config, parse_experiment_config, run_experiment,
)
from services.metrics import BiasMetric
from utils.errors import ConfigurationError

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


@pytest.fixture
def experiment_document(toy_files):
    data_path, schema_path = toy_files
    return {
        'dataset': data_path,
        'schema': schema_path,
        'folds': 2,
        'train_ratio': 0.8,
        'budgets': [0.1, 0.5],
        'max_bins': 4,
        'n_jobs': 1,
        'run': {'population_size': 8, 'max_pool': 15, 'min_precision': 0.7},
    }


@pytest.fixture
def experiment_path(tmp_path, experiment_document):
    path = tmp_path / 'experiment.json'
    path.write_text(json.dumps(experiment_document))
    return str(path)


def test_budget_labels():
    assert budget_label(0.01) == '1'
    assert budget_label(0.1) == '10'
    assert budget_label(1.0) == '100'


def test_derived_seeds_are_stable_and_distinct():
    seeds = derive_seeds(42, 5)
    assert seeds == derive_seeds(42, 5)
    assert len(set(seeds)) == 5


def test_config_defaults_and_relative_paths(tmp_path, config):
    settings = parse_experiment_config({'dataset': 'data.csv', 'schema': 'schema.json'},
                                       base_dir=str(tmp_path), config=config)
    assert settings.dataset == os.path.join(str(tmp_path), 'data.csv')
    assert settings.folds == config.FOLDS
    assert settings.budgets == tuple(sorted(config.BUDGET_FRACTIONS))
    assert settings.run.population_size == config.POPULATION_SIZE


@pytest.mark.parametrize('document', [
    {'schema': 's.json'},
    {'dataset': 'd.csv', 'schema': 's.json', 'budgets': [0.0]},
    {'dataset': 'd.csv', 'schema': 's.json', 'folds': 1},
    {'dataset': 'd.csv', 'schema': 's.json', 'run': {'population_size': 3}},
])
def test_invalid_experiment_configs(document, config):
    with pytest.raises(ConfigurationError):
        parse_experiment_config(document, config=config)


def test_experiment_needs_a_seed(experiment_path, config):
    with pytest.raises(ConfigurationError):
        run_experiment(load_experiment_config(experiment_path, config=config))


def test_experiment_report(experiment_path, config):
    settings = load_experiment_config(experiment_path, config=config)
    report = run_experiment(settings, seed=5)

    assert [f.fold for f in report.folds] == [0, 1]
    assert all(f.valid for f in report.folds), [f.error for f in report.folds]
    assert report.manifest['validation_labels_charged'] is False
    assert report.manifest['seed'] == 5
    for fold in report.folds:
        assert set(fold.budgets) == {0.1, 0.5}
        assert 'h' in fold.baselines
        # recorded decisions cannot be re-scored with a flipped protected bit
        assert 'h_flip0' not in fold.baselines
        for budget in fold.budgets.values():
            assert budget.rows
            assert budget.q_size == budget.budget
            for row in budget.rows:
                assert 0.0 <= row['test_err'] <= 1.0
                assert 0.0 <= row['coverage'] <= 1.0

    aggregated = report.aggregates['budgets']['10']
    assert aggregated['fraction'] == 0.1
    assert len(aggregated['attainment']['bias_mean']) == 101
    # every fold reaches its own frontier by error 1.0
    assert not np.isnan(aggregated['attainment']['bias_mean'][-1])


def test_export_and_reproducibility(experiment_path, config, tmp_path):
    settings = load_experiment_config(experiment_path, config=config)
    report = run_experiment(settings, seed=11)

    first = os.path.join(tmp_path, 'first')
    export_frontier(report, first)
    frame = pd.read_csv(os.path.join(first, 'frontier_budget_10.csv'))
    assert list(frame.columns) == FRONTIER_COLUMNS
    assert len(frame) == sum(len(f.budgets[0.1].rows) for f in report.folds)

    with open(os.path.join(first, 'summary.json')) as handle:
        summary = json.load(handle)
    assert len(summary['manifest']['dataset_sha256']) == 64
    assert set(summary['aggregates']['budgets']) == {'10', '50'}

    row = frame.iloc[0]
    stem = f"fold{int(row['fold'])}_budget10_sol{int(row['solution_id'])}"
    assert os.path.exists(os.path.join(first, 'solutions', stem + '.json'))
    with open(os.path.join(first, 'solutions', stem + '.txt')) as handle:
        assert handle.read().endswith('Else Y = h(x)\n')

    # same report exports the same bytes
    second = os.path.join(tmp_path, 'second')
    export_frontier(report, second)
    # a fresh run with the same seed exports the same bytes
    third = os.path.join(tmp_path, 'third')
    export_frontier(run_experiment(settings, seed=11), third)
    for name in ('frontier_budget_10.csv', 'frontier_budget_50.csv', 'summary.json'):
        with open(os.path.join(first, name), 'rb') as handle:
            expected = handle.read()
        for other in (second, third):
            with open(os.path.join(other, name), 'rb') as handle:
                assert handle.read() == expected


def test_trained_blackbox_adds_flip_baselines(tmp_path, experiment_document, config):
    document = dict(experiment_document, blackbox='train', budgets=[0.2], lambda_grid=[0.01], epochs=100)
    settings = parse_experiment_config(document, config=config)
    report = run_experiment(settings, seed=3)
    for fold in report.folds:
        assert fold.valid, fold.error
        assert fold.lam == 0.01
        assert {'h', 'h_flip0', 'h_flip1'} <= set(fold.baselines)
    assert 'h_flip1' in report.aggregates['baselines']


def test_failed_fold_is_recorded(tmp_path, experiment_document, config):
    document = dict(experiment_document, run={'population_size': 8, 'min_support': 0.5, 'max_len': 1,
                                              'min_precision': 1.0})
    settings = parse_experiment_config(document, config=config)
    report = run_experiment(settings, seed=1)
    assert not any(f.valid for f in report.folds)
    assert all('ConfigurationError' in f.error for f in report.folds)
    assert report.aggregates['valid_folds'] == 0

    out = os.path.join(tmp_path, 'out')
    export_frontier(report, out)
    frame = pd.read_csv(os.path.join(out, 'frontier_budget_10.csv'))
    assert list(frame.columns) == FRONTIER_COLUMNS
    assert frame.empty


def test_blackbox_source_is_parsed_into_the_enum(config):
    settings = parse_experiment_config({'dataset': 'd.csv', 'schema': 's.json', 'blackbox': 'column'}, config=config)
    assert settings.blackbox is BlackBoxSource.COLUMN
    assert settings.to_document()['blackbox'] == 'column'
    assert parse_experiment_config({'dataset': 'd.csv', 'schema': 's.json'}, config=config).blackbox is None
    with pytest.raises(ConfigurationError):
        parse_experiment_config({'dataset': 'd.csv', 'schema': 's.json', 'blackbox': 'oracle'}, config=config)


def test_black_box_baseline_survives_a_group_without_positives(caplog):
    h = np.array([1, 0, 1, 0, 0, 1], dtype=np.int8)
    test_ds = BinarizedDataset(
        bits=np.zeros((6, 0), dtype=bool), z=np.array([0, 0, 0, 1, 1, 1], dtype=np.int8), vocabulary=(),
        h_label=h, y=np.array([1, 1, 0, 0, 0, 0], dtype=np.int8),
    )
    with caplog.at_level(logging.WARNING):
        points = _baseline_points(from_column(h), None, test_ds, BiasMetric.EQUAL_OPPORTUNITY)
    assert set(points) == {'h'}
    assert points['h']['error'] == pytest.approx(0.5)
    # smoothed TPRs: (1 + 1) / (2 + 2) against (0 + 1) / (0 + 2)
    assert points['h']['bias'] == pytest.approx(0.0)
    assert 'smoothed bias' in caplog.text


@pytest.mark.parametrize('name', sorted(os.listdir(os.path.join(ROOT, 'configs'))))
def test_shipped_experiment_configs_parse(name, config):
    settings = load_experiment_config(os.path.join(ROOT, 'configs', name), config=config)
    schema = load_schema(settings.schema)
    assert schema.label
    assert schema.protected in schema.positive_value
    assert settings.run.population_size % 2 == 0
