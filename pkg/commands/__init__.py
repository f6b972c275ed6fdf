import functools
import logging

import click
import numpy as np

from services.blackbox import from_column, predict_table, train_l1_logistic
from services.dataio import discretize, load_dataset, load_schema
from utils.errors import ConfigurationError, exit_code_for

logger = logging.getLogger(__name__)


def handle_errors(command):
    """Turn exceptions into a logged message and the matching exit code"""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (click.exceptions.Exit, click.ClickException):
            raise
        except Exception as err:
            code = exit_code_for(err)
            logger.debug("Command failed", exc_info=True)
            click.echo(f"Error: {err}", err=True)
            raise SystemExit(code) from err
    return wrapper


def load_labeled_dataset(data, schema_path, config, lam=None, seed=0):
    """Table, schema, decision-maker and binarized dataset with black-box labels

    Uses the schema's recorded black-box column when present, otherwise
    trains an L1 logistic decision-maker on the table.
    """
    schema = load_schema(schema_path)
    table = load_dataset(data, schema)
    if schema.blackbox_label:
        h_label = table[schema.blackbox_label].to_numpy(dtype=np.int8)
        dm = from_column(h_label)
    else:
        if not schema.label:
            raise ConfigurationError("Schema needs a blackbox_label or a label column to train one")
        lam = config.LAMBDA_GRID[1] if lam is None else lam
        dm = train_l1_logistic(table, schema, lam, epochs=config.EPOCHS, seed=seed)
        h_label = predict_table(dm, table)
    dataset = discretize(table, schema, config.MAX_BINS, config.EXCLUDE_PROTECTED, h_label=h_label)
    return table, schema, dm, dataset


def register_commands(cli):
    """Register all subcommands with the command group"""

    # Import command modules
    from .mine import mine_cmd
    from .train import train_cmd
    from .experiment import experiment_cmd
    from .baseline import baseline_cmd
    from .render import render_cmd

    cli.add_command(mine_cmd, name='mine')
    cli.add_command(train_cmd, name='train')
    cli.add_command(experiment_cmd, name='experiment')
    cli.add_command(baseline_cmd, name='baseline')
    cli.add_command(render_cmd, name='render')

