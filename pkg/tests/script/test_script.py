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

import os

import pandas as pd
from numpy.testing import assert_allclose

import dumlab.script as script
from dumlab.config import recipes


def test_make_parser():
    parser = script.make_parser()
    usage = parser.format_usage()
    assert 'dum-lab' in usage
    assert '{run,sweep,recipes,datasets}' in usage


def test_run_arguments():
    args = script.make_parser().parse_args(['run', 'toy.yml', '--seeds', '0,1', '--force'])
    assert args.config == 'toy.yml'
    assert args.seeds == '0,1'
    assert args.force
    assert args.out is None


def test_sweep_arguments():
    argv = ['sweep', 'toy.yml', '--axis', 'encoder.latent_dim', '--values', '2,4',
            '--axis', 'head.entropy_lambda', '--values', '0,1e-5']
    args = script.make_parser().parse_args(argv)
    assert args.axis == ['encoder.latent_dim', 'head.entropy_lambda']
    assert args.values == ['2,4', '0,1e-5']


def test_main_without_subcommand(capsys):
    assert script.main([]) == 2
    out, _ = capsys.readouterr()
    assert 'usage: dum-lab' in out


def test_recipes(tmpdir):
    out = str(tmpdir.join('configs'))
    assert script.main(['recipes', '--out', out]) == 0
    assert sorted(os.listdir(out)) == sorted(name + '.yml' for name in recipes())


def test_run_missing_config(tmpdir):
    assert script.main(['run', str(tmpdir.join('missing.yml'))]) == 2


def test_datasets_toy(tmpdir):
    out = str(tmpdir.join('toy.csv'))
    assert script.main(['datasets', 'toy', out, '--count_per_class', '10', '--seed', '3']) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ['x', 'y', 'label']
    assert len(frame) == 20
    assert sorted(frame['label'].unique()) == [0, 1]


def test_datasets_grid(tmpdir):
    out = str(tmpdir.join('grid.csv'))
    assert script.main(['datasets', 'grid', out, '--resolution', '3', '--extent', '-1', '1', '-2', '2']) == 0
    frame = pd.read_csv(out)
    assert_allclose(frame['x'].values, [-1, 0, 1, -1, 0, 1, -1, 0, 1])
    assert_allclose(frame['y'].values, [-2, -2, -2, 0, 0, 0, 2, 2, 2])
