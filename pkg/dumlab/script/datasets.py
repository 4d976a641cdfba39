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

import pandas as pd

from ..data import ToySpec, make_collapse_toy, make_grid


def make_datasets_parser(subparsers):
    """Creates a parser for datasets sub commands

    Args:
        subparsers (argparse.ArgumentParser): Parser to which to add sub commands to
    """
    sc = subparsers.add_parser('datasets', help='Export toy datasets').add_subparsers()
    toy_sc(sc)
    grid_sc(sc)


def toy_sc(subparsers):
    sc = subparsers.add_parser('toy', help='Two Gaussian blobs sharing the y axis as CSV with x, y and label columns')
    sc.add_argument('out', type=argparse.FileType('w'), help='Output CSV file, use - for stdout')
    sc.add_argument('--seed', type=int, default=0, help='Random seed (default: %(default)s)')
    sc.add_argument('--count_per_class', type=int, default=500,
                    help='Number of samples per class (default: %(default)s)')
    sc.add_argument('--std', type=float, default=1.0, help='Standard deviation of blobs (default: %(default)s)')
    sc.set_defaults(func=toy_export_run)


def grid_sc(subparsers):
    sc = subparsers.add_parser('grid', help='Lattice grid as CSV with x and y columns, row-major with ascending y')
    sc.add_argument('out', type=argparse.FileType('w'), help='Output CSV file, use - for stdout')
    sc.add_argument('--extent', type=float, nargs=4, default=[-6.0, 6.0, -6.0, 6.0],
                    metavar=('X_MIN', 'X_MAX', 'Y_MIN', 'Y_MAX'), help='Extent of grid (default: %(default)s)')
    sc.add_argument('--resolution', type=int, default=50,
                    help='Number of points along each axis (default: %(default)s)')
    sc.set_defaults(func=grid_export_run)


def toy_export_run(out, seed, count_per_class, std):
    dataset, _ = make_collapse_toy(ToySpec(count_per_class=count_per_class, std=std), seed)
    frame = pd.DataFrame(dataset.inputs, columns=['x', 'y'])
    frame['label'] = dataset.labels
    frame.to_csv(out, index=False, float_format='%.17g')
    out.flush()
    return 0


def grid_export_run(out, extent, resolution):
    frame = pd.DataFrame(make_grid(extent, resolution), columns=['x', 'y'])
    frame.to_csv(out, index=False, float_format='%.17g')
    out.flush()
    return 0
