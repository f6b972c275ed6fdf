import os

import numpy as np
import pytest

from services.harness import parse_experiment_config, run_experiment
from services.metrics import dominates, hypervolume
from utils.io import read_json

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
ADULT_CSV = os.environ.get('AUFAIR_ADULT_CSV')

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(not ADULT_CSV, reason='AUFAIR_ADULT_CSV is not set'),
]


@pytest.fixture(scope='module')
def adult_report():
    document = read_json(os.path.join(ROOT, 'configs', 'adult_experiment.json'))
    document['dataset'] = os.path.abspath(ADULT_CSV)
    settings = parse_experiment_config(document, base_dir=os.path.join(ROOT, 'configs'))
    report = run_experiment(settings, seed=0)
    assert all(f.valid for f in report.folds), [f.error for f in report.folds]
    return report


def test_full_budget_frontier_beats_the_black_box(adult_report):
    for fold in adult_report.folds:
        assert fold.baselines['h']['bias'] >= 0.12
        rows = fold.budgets[1.0].rows
        assert any(r['test_err'] <= 0.22 and r['test_bias'] <= 0.09 for r in rows)


def test_frontier_dominates_eop_in_most_folds(adult_report):
    for fraction in (0.01, 0.1, 1.0):
        wins = 0
        for fold in adult_report.folds:
            budget = fold.budgets[fraction]
            if budget.eop is None:
                continue
            eop = (budget.eop['test']['error'], budget.eop['test']['bias'])
            points = [(r['test_err'], r['test_bias']) for r in budget.rows]
            if any(p == eop or dominates(p, eop) for p in points):
                wins += 1
            elif fraction == 0.01 and budget.hypervolume >= hypervolume([eop]):
                wins += 1
        assert wins >= 4, f'budget {fraction}: {wins} folds'


def test_more_labels_push_the_frontier_down(adult_report):
    volumes = adult_report.aggregates['budgets']
    small = volumes['1']['hypervolume']['mean']
    medium = volumes['10']['hypervolume']['mean']
    assert np.isfinite(small) and np.isfinite(medium)
    assert medium >= small - 0.02
