# Copyright 2016 Netherlands eScience Center
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
import argparse
import logging
import sys

from .datasets import make_datasets_parser
from .experiments import run_sc, sweep_sc
from .recipes import recipes_sc
from ..version import __version__

LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR']


def make_parser():
    """Creates a parser with sub commands

    Returns:
        argparse.ArgumentParser: parser with sub commands
    """
    parser = argparse.ArgumentParser(prog='dum-lab')
    parser.add_argument('--version', action='version', version=__version__)
    parser.add_argument('--log_level', choices=LOG_LEVELS, default='WARNING',
                        help='Level of log messages written to stderr (default: %(default)s)')
    subparsers = parser.add_subparsers(dest='subcommand')

    run_sc(subparsers)

    sweep_sc(subparsers)

    recipes_sc(subparsers)

    make_datasets_parser(subparsers)

    return parser


def main(argv=sys.argv[1:]):
    """Main script function.

    Calls run method of selected sub commandos.

    Args:
        argv (list[str]): List of command line arguments

    Returns:
        int: exit code
    """
    parser = make_parser()
    args = parser.parse_args(argv)
    fargs = vars(args)
    logging.basicConfig(level=fargs.pop('log_level'), format='%(asctime)s %(name)s %(levelname)s %(message)s')
    if 'func' in fargs:
        func = args.func
        del(fargs['subcommand'])
        del(fargs['func'])
        return func(**fargs)
    else:
        if args.subcommand:
            parser.parse_args([args.subcommand, '--help'])
        else:
            parser.print_help()
    return 2
