"""Define meta information about the package."""

__title__ = 'pyqocr'
__description__ = 'Recognize printed cursive words with a convolutional-recurrent network trained by CTC.'
__url__ = 'https://github.com/Parquery/pyqocr'
__version__ = '1.0.0'
__author__ = 'Marko Ristin'
__author_email__ = 'marko.ristin@gmail.com'
__license__ = 'MIT'
__copyright__ = 'Copyright 2018 Parquery AG'
