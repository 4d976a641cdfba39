# -*- coding: utf-8 -*-
#
# Sphinx configuration of the dumlab documentation.

import os
import sys

sys.path.insert(0, os.path.abspath('..'))

import dumlab.version  # noqa: E402

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.intersphinx',
    'sphinx.ext.viewcode',
    'sphinx.ext.napoleon',
    'sphinxarg.ext',
]

source_suffix = ['.rst']
master_doc = 'index'

project = u'dumlab'
copyright = u'2016, Netherlands eScience Center'
author = u'Netherlands eScience Center'
version = dumlab.version.__version__
release = dumlab.version.__version__

exclude_patterns = ['_build']
pygments_style = 'sphinx'

html_theme = 'sphinx_rtd_theme'
htmlhelp_basename = 'dumlabdoc'

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'scipy': ('https://docs.scipy.org/doc/scipy/', None),
    'tables': ('http://www.pytables.org/', None),
    'pandas': ('https://pandas.pydata.org/docs/', None),
}
