from dataclasses import replace

import click

from commands import handle_errors
from services.harness import export_frontier, load_experiment_config, run_experiment


@click.command(help="Run the cross-validated protocol from an experiment configuration file")
@click.option('--config', 'config_path', required=True, type=click.Path(dir_okay=False), help="Experiment JSON")
@click.option('--seed', required=True, type=int, help="Master seed for folds, searches and baselines")
@click.option('--n-jobs', type=int, help="Folds run in parallel")
@click.option('--out', required=True, type=click.Path(file_okay=False), help="Output directory")
@click.pass_obj
@handle_errors
def experiment_cmd(config, config_path, seed, n_jobs, out):
    settings = load_experiment_config(config_path, config=config)
    if n_jobs is not None:
        settings = replace(settings, n_jobs=n_jobs)

    report = run_experiment(settings, seed=seed)
    export_frontier(report, out)
    valid = sum(f.valid for f in report.folds)
    click.echo(f"{valid} of {len(report.folds)} folds completed -> {out}")
    if not valid:
        raise SystemExit(1)
