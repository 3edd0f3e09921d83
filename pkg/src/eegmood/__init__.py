"""EEG emotion recognition with db4 wavelet features and RBF-SVM classifiers."""

__version__ = "0.1.0"

from .errors import ConvergenceError, DataError

__all__ = ["ConvergenceError", "DataError", "__version__"]
