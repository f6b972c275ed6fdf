import logging
import os

import click

from commands import handle_errors, load_labeled_dataset
from services.active import Combine, LabelOracle, export_log
from services.driver import RunConfig, export_telemetry, run
from services.hybrid import coverage, render, to_document
from services.metrics import BiasMetric
from services.rulemine import rule_coverage
from utils.errors import ConfigurationError
from utils.io import ensure_dir, write_json, write_text

logger = logging.getLogger(__name__)


@click.command(help="Run a single active NSGA-II search on a labeled dataset")
@click.option('--data', required=True, type=click.Path(dir_okay=False), help="CSV dataset")
@click.option('--schema', 'schema_path', required=True, type=click.Path(dir_okay=False), help="Dataset schema JSON")
@click.option('--budget', type=int, help="Number of true labels that may be acquired")
@click.option('--budget-fraction', type=float, help="Budget as a fraction of the dataset")
@click.option('--batch-size', type=int, help="Labels per acquisition round")
@click.option('--population-size', type=int)
@click.option('--query-interval', type=int, help="Generations between acquisition rounds")
@click.option('--min-support', type=float)
@click.option('--max-len', type=int)
@click.option('--min-precision', type=float)
@click.option('--max-pool', type=int)
@click.option('--max-init-rules', type=int)
@click.option('--post-budget-generations', type=int)
@click.option('--nboot', type=int, help="Bootstrap samples for uncertainty scoring")
@click.option('--bias-metric', type=click.Choice([m.value for m in BiasMetric]))
@click.option('--uncertainty-combine', type=click.Choice([c.value for c in Combine]))
@click.option('--smoothing/--no-smoothing', default=None, help="Laplace smoothing of group TPRs during search")
@click.option('--per-class-support/--shared-support', default=None)
@click.option('--lam', type=float, help="L1 weight when a decision-maker must be trained")
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', required=True, type=click.Path(file_okay=False), help="Output directory")
@click.pass_obj
@handle_errors
def train_cmd(config, data, schema_path, lam, seed, out, **overrides):
    run_config = RunConfig.build(dict(overrides, seed=seed), config=config)
    _, schema, _, dataset = load_labeled_dataset(data, schema_path, config, lam=lam, seed=seed)
    if dataset.y is None:
        raise ConfigurationError("Training needs a true-label column in the schema")

    result = run(dataset, LabelOracle(dataset.y), run_config)

    ensure_dir(out)
    solutions_dir = ensure_dir(os.path.join(out, 'solutions'))
    pos_cov, neg_cov = rule_coverage(result.pools, dataset.bits)
    summary = []
    for i, (solution, point) in enumerate(zip(result.frontier, result.train_points)):
        document = to_document(solution, result.pools, dataset.vocabulary)
        write_json(os.path.join(solutions_dir, f'sol{i}.json'), document)
        write_text(os.path.join(solutions_dir, f'sol{i}.txt'), render(solution, result.pools, dataset.vocabulary))
        summary.append({
            'id': i,
            'train_error': point.error,
            'train_bias': point.bias,
            'coverage': coverage(solution, pos_cov, neg_cov),
            'n_rules': solution.n_rules,
            **document,
        })

    write_json(os.path.join(out, 'frontier.json'), {
        'budget': result.budget,
        'batch_size': result.batch_size,
        'labels_acquired': result.state.size,
        'config': run_config.to_document(),
        'solutions': summary,
    })
    write_json(os.path.join(out, 'pools.json'), result.pools.to_document(dataset.vocabulary))
    export_telemetry(result, os.path.join(out, 'telemetry.jsonl'))
    export_log(result.state, os.path.join(out, 'acquisitions.csv'))
    click.echo(f"Frontier of {len(result.frontier)} solutions with {result.state.size} labels -> {out}")
