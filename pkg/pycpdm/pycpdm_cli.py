#!/usr/bin/env python3

"""
This is the main tool that give access to all commands and options provided by pycpdm: phantom simulation, noise
predictor training, despeckling and evaluation.
"""
import sys

import click

from pycpdm.commands import simulate as simulate_cmd
from pycpdm.commands import train as train_cmd
from pycpdm.commands import despeckle as despeckle_cmd
from pycpdm.commands import evaluate as evaluate_cmd
from pycpdm.commands.utils import CONTEXT_SETTINGS, echo_failure
from pycpdm.toolbox.exceptions import AppException


class PycpdmGroup(click.Group):
    """
    Reports application errors of any subcommand on stderr with exit code 1
    """

    def invoke(self, ctx):
        try:
            return super(PycpdmGroup, self).invoke(ctx)
        except AppException as e:
            echo_failure("ERROR: {}".format(e.value))
            ctx.exit(1)


# Cli returns command line requests
@click.group(cls=PycpdmGroup, context_settings=CONTEXT_SETTINGS)
@click.version_option(version='0.1.1')
def cli():
    """
  This is the main tool that give access to all commands and options provided by pycpdm
  """


cli.add_command(simulate_cmd.simulate)
cli.add_command(train_cmd.train)
cli.add_command(despeckle_cmd.despeckle)
cli.add_command(evaluate_cmd.evaluate)


def main(argv=None):
    """
    Run the command line and return its exit code
    :param argv: arguments, sys.argv[1:] when None
    """
    try:
        code = cli.main(args=argv, prog_name='pycpdm', standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        echo_failure("Aborted!")
        return 1
    return code if isinstance(code, int) else 0


if __name__ == "__main__":
    sys.exit(main())
