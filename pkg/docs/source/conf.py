# -*- coding: utf-8 -*-
"""Configure the Sphinx build of the HTML documentation of pyqocr."""

import os
import sys

sys.path.insert(0, os.path.abspath('../..'))

import pyqocr_meta  # pylint: disable=wrong-import-position

project = pyqocr_meta.__title__
copyright = pyqocr_meta.__copyright__  # pylint: disable=redefined-builtin
author = pyqocr_meta.__author__
release = pyqocr_meta.__version__
version = '.'.join(release.split('.')[:2])

extensions = ['sphinx.ext.autodoc', 'sphinx_autodoc_typehints']

autodoc_member_order = 'bysource'
autodoc_default_options = {'members': True, 'show-inheritance': True}

master_doc = 'index'
source_suffix = '.rst'
pygments_style = 'sphinx'

html_theme = 'sphinx_rtd_theme'
htmlhelp_basename = 'pyqocrdoc'
