import logging

import click

from commands import handle_errors, load_labeled_dataset
from services.driver import RunConfig
from services.rulemine import induce_candidates
from utils.io import write_json

logger = logging.getLogger(__name__)


@click.command(help="Mine positive and negative candidate rule pools against black-box labels")
@click.option('--data', required=True, type=click.Path(dir_okay=False), help="CSV dataset")
@click.option('--schema', 'schema_path', required=True, type=click.Path(dir_okay=False), help="Dataset schema JSON")
@click.option('--min-support', type=float, help="Minimum itemset support fraction")
@click.option('--max-len', type=int, help="Maximum conditions per rule")
@click.option('--min-precision', type=float, help="Minimum rule precision against h")
@click.option('--max-pool', type=int, help="Rules kept per pool")
@click.option('--per-class-support/--shared-support', default=None, help="Mine each class separately")
@click.option('--lam', type=float, help="L1 weight when a decision-maker must be trained")
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', required=True, type=click.Path(dir_okay=False), help="Output JSON file")
@click.pass_obj
@handle_errors
def mine_cmd(config, data, schema_path, min_support, max_len, min_precision, max_pool, per_class_support, lam, seed, out):
    run_config = RunConfig.build({
        'min_support': min_support,
        'max_len': max_len,
        'min_precision': min_precision,
        'max_pool': max_pool,
        'per_class_support': per_class_support,
    }, config=config)
    _, _, _, dataset = load_labeled_dataset(data, schema_path, config, lam=lam, seed=seed)
    pools = induce_candidates(
        dataset, run_config.min_support, run_config.max_len, run_config.min_precision,
        run_config.max_pool, per_class_support=run_config.per_class_support,
    )

    document = pools.to_document(dataset.vocabulary)
    document['vocabulary'] = [condition.describe() for condition in dataset.vocabulary]
    write_json(out, document)
    click.echo(f"Mined {len(pools.positive)} positive and {len(pools.negative)} negative rules -> {out}")
