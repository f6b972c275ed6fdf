"""Cross-validated experiments: black box, search per budget, baselines, aggregation and export"""
import enum
import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from marshmallow import Schema, fields, validate, ValidationError

from config import get_config
from services.active import LabelOracle
from services.baselines import apply_eop, fit_eop, flip_baselines
from services.blackbox import BlackBoxKind, from_column, predict_table, select_lambda
from services.dataio import apply_vocabulary, fit_vocabulary, kfold_split, load_dataset, load_schema, train_val_split
from services.driver import (
    TELEMETRY_FIELDS, RunConfig, evaluate_labels, evaluate_on, run, select_frontier_on_validation,
)
from services.hybrid import coverage, render, to_document
from services.metrics import hypervolume
from services.rulemine import induce_candidates, rule_coverage
from utils.errors import AuFairError, ConfigurationError
from utils.io import ensure_dir, file_sha256, read_json, write_frame, write_json, write_json_lines, write_text

logger = logging.getLogger(__name__)

FRONTIER_COLUMNS = [
    'fold', 'solution_id', 'train_err', 'train_bias', 'val_err', 'val_bias',
    'test_err', 'test_bias', 'coverage', 'n_rules',
]
ERROR_GRID = np.round(np.arange(0, 101) / 100.0, 2)


class BlackBoxSource(enum.Enum):
    TRAIN = 'train'
    COLUMN = 'column'


# Input validation schema for experiment configuration files
class ExperimentConfigSchema(Schema):
    dataset = fields.String(required=True)
    schema = fields.String(required=True)
    seed = fields.Integer(load_default=None, allow_none=True)
    folds = fields.Integer(load_default=None, validate=validate.Range(min=2))
    train_ratio = fields.Float(load_default=None, validate=validate.Range(min=0, max=1, min_inclusive=False, max_inclusive=False))
    budgets = fields.List(
        fields.Float(validate=validate.Range(min=0, max=1, min_inclusive=False)),
        load_default=None, validate=validate.Length(min=1)
    )
    blackbox = fields.String(load_default=None, validate=validate.OneOf([s.value for s in BlackBoxSource]))
    lambda_grid = fields.List(fields.Float(validate=validate.Range(min=0)), load_default=None, validate=validate.Length(min=1))
    epochs = fields.Integer(load_default=None, validate=validate.Range(min=1))
    max_bins = fields.Integer(load_default=None, validate=validate.Range(min=2))
    exclude_protected = fields.Boolean(load_default=None)
    n_jobs = fields.Integer(load_default=None)
    run = fields.Dict(keys=fields.String(), load_default=dict)
    notes = fields.String(load_default='')


@dataclass(frozen=True)
class ExperimentSettings:
    dataset: str
    schema: str
    seed: Optional[int]
    folds: int
    train_ratio: float
    budgets: tuple
    blackbox: Optional[BlackBoxSource]
    lambda_grid: tuple
    epochs: int
    max_bins: int
    exclude_protected: bool
    n_jobs: int
    run: RunConfig
    notes: str = ''

    def to_document(self):
        return {
            'dataset': self.dataset,
            'schema': self.schema,
            'seed': self.seed,
            'folds': self.folds,
            'train_ratio': self.train_ratio,
            'budgets': list(self.budgets),
            'blackbox': self.blackbox.value if self.blackbox else None,
            'lambda_grid': list(self.lambda_grid),
            'epochs': self.epochs,
            'max_bins': self.max_bins,
            'exclude_protected': self.exclude_protected,
            'run': self.run.to_document(),
            'notes': self.notes,
        }


def parse_experiment_config(document, base_dir='.', config=None):
    """Validate an experiment document and fill defaults from the environment configuration"""
    config = config or get_config()
    try:
        data = ExperimentConfigSchema().load(document)
    except ValidationError as err:
        raise ConfigurationError(f"Invalid experiment configuration: {err.messages}") from err

    run_overrides = dict(data['run'])
    for key in ('budget', 'budget_fraction'):
        if run_overrides.pop(key, None) is not None:
            logger.warning("Ignoring run.%s; budgets come from the experiment budget list", key)
    run_config = RunConfig.build(run_overrides, config=config)

    resolve = lambda path: path if os.path.isabs(path) else os.path.normpath(os.path.join(base_dir, path))
    pick = lambda key, default: default if data[key] is None else data[key]

    return ExperimentSettings(
        dataset=resolve(data['dataset']),
        schema=resolve(data['schema']),
        seed=data['seed'],
        folds=pick('folds', config.FOLDS),
        train_ratio=pick('train_ratio', config.TRAIN_RATIO),
        budgets=tuple(sorted(set(pick('budgets', config.BUDGET_FRACTIONS)))),
        blackbox=BlackBoxSource(data['blackbox']) if data['blackbox'] else None,
        lambda_grid=tuple(pick('lambda_grid', config.LAMBDA_GRID)),
        epochs=pick('epochs', config.EPOCHS),
        max_bins=pick('max_bins', config.MAX_BINS),
        exclude_protected=pick('exclude_protected', config.EXCLUDE_PROTECTED),
        n_jobs=pick('n_jobs', config.N_JOBS),
        run=run_config,
        notes=data['notes'],
    )


def load_experiment_config(path, config=None):
    return parse_experiment_config(read_json(path), base_dir=os.path.dirname(os.path.abspath(path)), config=config)


@dataclass
class BudgetReport:
    fraction: float
    budget: int = 0
    q_size: int = 0
    rows: list = field(default_factory=list)
    solutions: list = field(default_factory=list)
    eop: Optional[dict] = None
    hypervolume: float = math.nan
    telemetry: list = field(default_factory=list)


@dataclass
class FoldReport:
    fold: int
    seed: int
    valid: bool = True
    error: Optional[str] = None
    lam: Optional[float] = None
    baselines: dict = field(default_factory=dict)
    budgets: dict = field(default_factory=dict)


@dataclass
class ExperimentReport:
    settings: ExperimentSettings
    manifest: dict
    folds: list
    aggregates: dict = field(default_factory=dict)


def budget_label(fraction):
    """File-name label of a budget fraction, e.g. 0.1 -> '10'"""
    return f'{fraction * 100:g}'


def derive_seeds(seed, count):
    """Independent child seeds from one master seed"""
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(count)]


def _point(p):
    return {'error': float(p[0]), 'bias': float(p[1])}


def _blackbox_labels(settings, schema, tables, seed):
    """Decision-maker plus its labels on the fit, validation and test tables"""
    source = settings.blackbox or (BlackBoxSource.COLUMN if schema.blackbox_label else BlackBoxSource.TRAIN)
    fit_table, val_table, test_table = tables
    if source is BlackBoxSource.COLUMN:
        if not schema.blackbox_label:
            raise ConfigurationError("blackbox 'column' needs a blackbox_label column in the schema")
        labels = [t[schema.blackbox_label].to_numpy(dtype=np.int8) for t in tables]
        return from_column(np.concatenate(labels)), None, labels

    dm, lam, _ = select_lambda(fit_table, val_table, schema, settings.lambda_grid, epochs=settings.epochs, seed=seed)
    return dm, lam, [predict_table(dm, t) for t in tables]


def _baseline_points(dm, test_table, test_ds, metric):
    points = {'h': _point(evaluate_labels(test_ds.h_label, test_ds, metric))}
    if dm.kind is BlackBoxKind.LINEAR:
        for name, flipped in zip(('h_flip0', 'h_flip1'), flip_baselines(dm)):
            points[name] = _point(evaluate_labels(predict_table(flipped, test_table), test_ds, metric))
    else:
        logger.warning("Protected-bit flip baselines need a trained decision-maker; skipped")
    return points


def _run_budget(fraction, seed, fit_ds, val_ds, test_ds, pools, settings, fold):
    rng_seeds = derive_seeds(seed, 2)
    config = replace(settings.run, budget=None, budget_fraction=fraction, seed=rng_seeds[0])
    metric = config.bias_metric

    result = run(fit_ds, LabelOracle(fit_ds.y), config, pools=pools)
    selected, val_points = select_frontier_on_validation(result.frontier, pools, val_ds, metric)
    chosen = [result.frontier[i] for i in selected]
    test_points = evaluate_on(chosen, pools, test_ds, metric)
    pos_cov, neg_cov = rule_coverage(pools, test_ds.bits)

    report = BudgetReport(fraction=fraction, budget=result.budget, q_size=result.state.size)
    report.telemetry = [{k: r[k] for k in TELEMETRY_FIELDS}
                        for r in result.telemetry]
    for solution_id, (i, solution, test_point) in enumerate(zip(selected, chosen, test_points)):
        report.rows.append({
            'fold': fold,
            'solution_id': solution_id,
            'train_err': result.train_points[i].error,
            'train_bias': result.train_points[i].bias,
            'val_err': val_points[i].error,
            'val_bias': val_points[i].bias,
            'test_err': test_point.error,
            'test_bias': test_point.bias,
            'coverage': coverage(solution, pos_cov, neg_cov),
            'n_rules': solution.n_rules,
        })
        report.solutions.append({
            'document': to_document(solution, pools, fit_ds.vocabulary),
            'text': render(solution, pools, fit_ds.vocabulary),
        })
    report.hypervolume = hypervolume(test_points)

    # EOP sees exactly the labels the search acquired
    q = result.state.q
    try:
        policy = fit_eop(fit_ds.h_label[q], result.state.y_q, fit_ds.z[q])
        outputs = apply_eop(policy, test_ds.h_label, test_ds.z, np.random.default_rng(rng_seeds[1]))
        report.eop = {'policy': policy.to_document(), 'test': _point(evaluate_labels(outputs, test_ds, metric))}
    except AuFairError as err:
        logger.warning("Fold %d budget %s: EOP baseline skipped (%s)", fold, budget_label(fraction), err)
    return report


def run_fold(table, schema, settings, fold, train_rows, test_rows, seed):
    """One fold end to end; failures are recorded, not raised"""
    report = FoldReport(fold=fold, seed=seed)
    try:
        seeds = derive_seeds(seed, len(settings.budgets) + 2)
        fit_rows, val_rows = train_val_split(train_rows, settings.train_ratio, seeds[0])
        tables = [table.iloc[rows].reset_index(drop=True) for rows in (fit_rows, val_rows, test_rows)]

        dm, report.lam, (h_fit, h_val, h_test) = _blackbox_labels(settings, schema, tables, seeds[1])
        vocabulary = fit_vocabulary(tables[0], schema, settings.max_bins, settings.exclude_protected)
        fit_ds = apply_vocabulary(tables[0], schema, vocabulary, h_label=h_fit)
        val_ds = apply_vocabulary(tables[1], schema, vocabulary, h_label=h_val)
        test_ds = apply_vocabulary(tables[2], schema, vocabulary, h_label=h_test)

        run_config = settings.run
        pools = induce_candidates(
            fit_ds, run_config.min_support, run_config.max_len, run_config.min_precision,
            run_config.max_pool, per_class_support=run_config.per_class_support,
        )
        report.baselines = _baseline_points(dm, tables[2], test_ds, run_config.bias_metric)

        for fraction, budget_seed in zip(settings.budgets, seeds[2:]):
            report.budgets[fraction] = _run_budget(fraction, budget_seed, fit_ds, val_ds, test_ds, pools, settings, fold)
        logger.info("Fold %d finished", fold)
    except Exception as err:
        logger.exception("Fold %d failed", fold)
        report.valid = False
        report.error = f'{type(err).__name__}: {err}'
    return report


def _attainment(rows):
    """Lowest test bias reachable at test error <= e, per grid point"""
    curve = np.full(len(ERROR_GRID), np.nan)
    for row in rows:
        reachable = ERROR_GRID >= row['test_err'] - 1e-12
        curve[reachable] = np.fmin(curve[reachable], row['test_bias'])
    return curve


def aggregate(folds, budgets):
    """Mean and standard deviation across valid folds"""
    valid = [f for f in folds if f.valid]
    aggregates = {'valid_folds': len(valid), 'budgets': {}, 'baselines': {}}

    for name in ('h', 'h_flip0', 'h_flip1'):
        points = pd.DataFrame([f.baselines[name] for f in valid if name in f.baselines])
        if len(points):
            aggregates['baselines'][name] = {'mean': points.mean().to_dict(), 'std': points.std(ddof=0).to_dict()}

    for fraction in budgets:
        reports = [f.budgets[fraction] for f in valid if fraction in f.budgets]
        volumes = pd.Series([r.hypervolume for r in reports], dtype=float)
        curves = pd.DataFrame({i: _attainment(r.rows) for i, r in enumerate(reports)}, index=ERROR_GRID)
        eop = pd.DataFrame([r.eop['test'] for r in reports if r.eop])
        aggregates['budgets'][budget_label(fraction)] = {
            'fraction': fraction,
            'hypervolume': {'mean': volumes.mean(), 'std': volumes.std(ddof=0)},
            'attainment': {
                'error': ERROR_GRID.tolist(),
                'bias_mean': curves.mean(axis=1).tolist() if len(reports) else [],
                'bias_std': curves.std(axis=1, ddof=0).tolist() if len(reports) else [],
            },
            'eop': {'mean': eop.mean().to_dict(), 'std': eop.std(ddof=0).to_dict()} if len(eop) else None,
        }
    return aggregates


def run_experiment(settings, seed=None):
    """Full cross-validated protocol; `seed` overrides the configured one"""
    if isinstance(settings, (str, os.PathLike)):
        settings = load_experiment_config(settings)
    seed = settings.seed if seed is None else seed
    if seed is None:
        raise ConfigurationError("An experiment needs a seed")

    schema = load_schema(settings.schema)
    if not schema.label:
        raise ConfigurationError("Experiments need a true-label column in the schema")
    table = load_dataset(settings.dataset, schema)

    splits = kfold_split(len(table), settings.folds, seed)
    fold_seeds = derive_seeds(seed, settings.folds)
    logger.info("Running %d folds over %d rows with budgets %s", settings.folds, len(table), list(settings.budgets))

    folds = Parallel(n_jobs=settings.n_jobs)(
        delayed(run_fold)(table, schema, settings, k, train, test, fold_seed)
        for k, ((train, test), fold_seed) in enumerate(zip(splits, fold_seeds))
    )

    manifest = {
        'config': settings.to_document(),
        'seed': seed,
        'fold_seeds': fold_seeds,
        'dataset_sha256': file_sha256(settings.dataset),
        'dataset_rows': len(table),
        'schema': schema.to_document(),
        'validation_labels_charged': False,
        'budget_base': 'training split',
    }
    report = ExperimentReport(settings=replace(settings, seed=seed), manifest=manifest, folds=list(folds))
    report.aggregates = aggregate(report.folds, settings.budgets)
    invalid = [f.fold for f in report.folds if not f.valid]
    if invalid:
        logger.warning("Folds %s failed and are excluded from aggregates", invalid)
    return report


def _clean(value):
    """Replace NaN and infinities with None and numpy scalars with Python ones"""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def summary_document(report):
    folds = []
    for f in report.folds:
        folds.append({
            'fold': f.fold,
            'seed': f.seed,
            'valid': f.valid,
            'error': f.error,
            'lambda': f.lam,
            'baselines': f.baselines,
            'budgets': {
                budget_label(fraction): {
                    'budget': b.budget,
                    'q_size': b.q_size,
                    'frontier_size': len(b.rows),
                    'hypervolume': b.hypervolume,
                    'eop': b.eop,
                }
                for fraction, b in sorted(f.budgets.items())
            },
        })
    return _clean({'manifest': report.manifest, 'aggregates': report.aggregates, 'folds': folds})


def export_frontier(report, path):
    """Per-budget frontier CSVs, summary.json, and every frontier solution as JSON and text"""
    ensure_dir(path)
    solutions_dir = ensure_dir(os.path.join(path, 'solutions'))
    telemetry_dir = ensure_dir(os.path.join(path, 'telemetry'))

    for fraction in report.settings.budgets:
        label = budget_label(fraction)
        rows = []
        for f in report.folds:
            budget = f.budgets.get(fraction)
            if budget is None:
                continue
            rows.extend(budget.rows)
            for row, solution in zip(budget.rows, budget.solutions):
                stem = f"fold{f.fold}_budget{label}_sol{row['solution_id']}"
                write_json(os.path.join(solutions_dir, stem + '.json'), solution['document'])
                write_text(os.path.join(solutions_dir, stem + '.txt'), solution['text'])
            write_json_lines(os.path.join(telemetry_dir, f'fold{f.fold}_budget{label}.jsonl'), budget.telemetry)
        write_frame(os.path.join(path, f'frontier_budget_{label}.csv'), pd.DataFrame(rows, columns=FRONTIER_COLUMNS))

    write_json(os.path.join(path, 'summary.json'), summary_document(report))
    logger.info("Exported experiment report to %s", path)
    return path
