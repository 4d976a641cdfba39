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
from ..experiment import run_experiment, sweep


def _common_arguments(sc):
    sc.add_argument('config', type=str, help='Filename of YAML experiment config')
    sc.add_argument('--seeds', type=str, help='Comma separated seeds, replaces seeds of config')
    sc.add_argument('--force', action='store_true', help='Overwrite existing output directory (default: %(default)s)')
    sc.add_argument('--out', type=str, help='Output directory, replaces output of config')
    sc.add_argument('--progress', action='store_true', help='Show progress bar of epochs (default: %(default)s)')


def run_sc(subparsers):
    sc = subparsers.add_parser('run', help='Train and evaluate a model for each seed of an experiment')
    _common_arguments(sc)
    sc.set_defaults(func=run_experiment)


def sweep_sc(subparsers):
    sc_help = 'Run an experiment for each value of one or more config leaves'
    sc_description = '''Without --axis the axes of the sweep block in the config are used.
    Several --axis/--values pairs sweep over all combinations.'''
    sc = subparsers.add_parser('sweep', help=sc_help, description=sc_description)
    _common_arguments(sc)
    sc.add_argument('--axis', type=str, action='append',
                    help='Dotted path of config leaf, like encoder.latent_dim')
    sc.add_argument('--values', type=str, action='append',
                    help='Comma separated values of the preceding axis, like 16,64,128')
    sc.set_defaults(func=sweep)
