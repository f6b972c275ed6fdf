import click

from commands import handle_errors
from services.hybrid import render_document
from utils.io import read_json


@click.command(help="Pretty-print a serialized solution as an if / else-if / else listing")
@click.argument('solution_file', type=click.Path(dir_okay=False))
@handle_errors
def render_cmd(solution_file):
    click.echo(render_document(read_json(solution_file)), nl=False)
