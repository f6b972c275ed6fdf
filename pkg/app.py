import logging

import click

from config import get_config
from commands import register_commands

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR']


def configure_logging(level):
    """Install a single stream handler on the root logger"""
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, '_aufair', False):
            root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._aufair = True
    root.addHandler(handler)
    root.setLevel(level.upper())


def create_app(config_name=None):
    """Create and configure the command line application"""
    config = get_config(config_name)

    @click.group(help="Fair hybrid rule sets over a fixed black-box decision-maker")
    @click.option('--log-level', default=config.LOG_LEVEL, show_default=True,
                  type=click.Choice(LOG_LEVELS, case_sensitive=False))
    @click.pass_context
    def cli(ctx, log_level):
        configure_logging(log_level)
        ctx.obj = config

    # Register subcommands
    register_commands(cli)

    return cli


if __name__ == '__main__':
    app = create_app()
    app()
