"""
Recognize printed cursive words with a convolutional-recurrent network trained by CTC.

The main points of entry are:

* :mod:`qocr.dataset` to render, store, perturb and split the word images,
* :mod:`qocr.model` to build, run and train the network,
* :mod:`qocr.training` to train on a repository,
* :mod:`qocr.checkpoint` to persist the training state and
* :mod:`qocr.metrics` to measure the character and word recognition rates.
"""

import pyqocr_meta

__title__ = pyqocr_meta.__title__
__description__ = pyqocr_meta.__description__
__url__ = pyqocr_meta.__url__
__version__ = pyqocr_meta.__version__
__author__ = pyqocr_meta.__author__
__author_email__ = pyqocr_meta.__author_email__
__license__ = pyqocr_meta.__license__
__copyright__ = pyqocr_meta.__copyright__
