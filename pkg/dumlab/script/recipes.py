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
from ..experiment import emit_recipes


def recipes_sc(subparsers):
    sc = subparsers.add_parser('recipes', help='Write the canonical experiment configs')
    sc.add_argument('--out', type=str, default='configs', help='Directory to write configs to (default: %(default)s)')
    sc.set_defaults(func=emit_recipes)
