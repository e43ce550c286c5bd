"""
CLI Routes for the MTS Domain Adaptation toolkit
Maps command names and flags onto controller methods
"""

import argparse
import logging

from mts.config import describe_keys
from mts.controllers.cli_controller import cli_controller
from mts.errors import UsageError

logger = logging.getLogger(__name__)

COMMANDS = {
    'generate': ('cmd_generate', "Write source.csv and target.csv"),
    'train': ('cmd_train', "Train one model and write checkpoint, history and report"),
    'eval': ('cmd_eval', "Evaluate a checkpoint on <data>/target.csv"),
    'ablate': ('cmd_ablate', "Run every method variant and compare them"),
    'plot': ('cmd_plot', "Export an SVG scatter of learned features"),
    'benchmark': ('cmd_benchmark', "Compare MTS with the source-only baseline across rotations"),
}


class CliParser(argparse.ArgumentParser):
    """Argument parser that raises instead of exiting the process"""

    def error(self, message):
        raise UsageError(message)


def _epilog():
    lines = ["config keys (key = value, '#' comments):"]
    lines.extend(f"  {key} = {default}  {doc}" for key, default, doc in describe_keys())
    return '\n'.join(lines)


def build_parser():
    """
    Build the argument parser with one subcommand per controller method

    Returns:
        CliParser: Configured parser
    """
    parser = CliParser(prog='mts', description="Open set domain adaptation toolkit",
                       epilog=_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
    subparsers = parser.add_subparsers(dest='command', parser_class=CliParser)
    for name, (_, help_text) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text, description=help_text)
        sub.add_argument('--config', metavar='PATH', help="run configuration file")
        sub.add_argument('--data', metavar='DIR', help="directory holding source.csv and target.csv")
        sub.add_argument('--out', metavar='DIR', help="output directory (plot: .svg path or directory)")
        sub.add_argument('--seed', metavar='N', type=int, help="overrides the configured seed")
        sub.add_argument('--checkpoint', metavar='PATH', help="checkpoint file (eval, plot)")
    return parser


class CliApp:
    """Parsed-argument dispatcher returned by create_app"""

    def __init__(self, settings, parser=None, controller=None):
        self.settings = settings
        self.parser = parser or build_parser()
        self.controller = controller or cli_controller

    def run(self, argv):
        """
        Parse argv and run the matching command

        Args:
            argv (list): Arguments without the program name

        Returns:
            int: Process exit code
        """
        try:
            args = self.parser.parse_args(argv)
        except UsageError as e:
            logger.error(f"Usage: {e}")
            return e.exit_code
        if not args.command:
            self.parser.print_help()
            return UsageError.exit_code
        method_name, _ = COMMANDS[args.command]
        logger.info(f"Running command '{args.command}'")
        return self.controller.handle(getattr(self.controller, method_name), args)


def init_app(settings):
    """
    Register the controller with the settings and build the app

    Args:
        settings (Settings): Environment settings

    Returns:
        CliApp: Ready to run
    """
    cli_controller.init_app(settings)
    return CliApp(settings)
