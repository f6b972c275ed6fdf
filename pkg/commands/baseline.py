import logging

import click
import numpy as np

from commands import handle_errors, load_labeled_dataset
from services.baselines import apply_eop, fit_eop, flip_baselines
from services.blackbox import BlackBoxKind, predict_table
from services.metrics import BiasMetric, evaluate
from utils.errors import ConfigurationError
from utils.io import write_json

logger = logging.getLogger(__name__)


def _point(p):
    return {'error': p.error, 'bias': p.bias}


@click.command(help="Fit the EOP and protected-flip baselines and report their (error, bias)")
@click.option('--data', required=True, type=click.Path(dir_okay=False), help="CSV dataset")
@click.option('--schema', 'schema_path', required=True, type=click.Path(dir_okay=False), help="Dataset schema JSON")
@click.option('--bias-metric', type=click.Choice([m.value for m in BiasMetric]), default=None)
@click.option('--lam', type=float, help="L1 weight when a decision-maker must be trained")
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', required=True, type=click.Path(dir_okay=False), help="Output JSON file")
@click.pass_obj
@handle_errors
def baseline_cmd(config, data, schema_path, bias_metric, lam, seed, out):
    metric = bias_metric or config.BIAS_METRIC
    table, _, dm, dataset = load_labeled_dataset(data, schema_path, config, lam=lam, seed=seed)
    if dataset.y is None:
        raise ConfigurationError("Baselines need a true-label column in the schema")

    points = {'h': _point(evaluate(dataset.h_label, dataset.y, dataset.z, metric))}
    if dm.kind is BlackBoxKind.LINEAR:
        for name, flipped in zip(('h_flip0', 'h_flip1'), flip_baselines(dm)):
            points[name] = _point(evaluate(predict_table(flipped, table), dataset.y, dataset.z, metric))
    else:
        logger.warning("Protected-bit flip baselines need a trained decision-maker; skipped")

    policy = fit_eop(dataset.h_label, dataset.y, dataset.z)
    outputs = apply_eop(policy, dataset.h_label, dataset.z, np.random.default_rng(seed))
    points['eop'] = _point(evaluate(outputs, dataset.y, dataset.z, metric))

    write_json(out, {'metric': metric, 'points': points, 'eop_policy': policy.to_document()})
    for name, point in points.items():
        click.echo(f"{name}: error={point['error']:.4f} bias={point['bias']:.4f}")
