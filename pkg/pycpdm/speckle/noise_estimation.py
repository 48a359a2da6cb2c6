"""
Single image noise level estimators used to choose the start step of the truncated reverse diffusion.

Both estimators return the standard deviation of an additive, signal independent noise component. In the log
domain the speckle becomes additive, so they are applied to log images.
"""
import abc
import math

import numpy as np
import pywt
from scipy.signal import convolve2d

from pycpdm.speckle.exceptions import SpeckleModelException

MIN_ESTIMATION_SIZE = 16

# median(|X|) / sigma for a standard normal X
MAD_TO_SIGMA = 0.6744897501960817


class NoiseEstimator(abc.ABC):
    """
    Interface of the noise level estimators.
    """

    name = None

    def __call__(self, grid):
        return self.estimate(grid)

    def estimate(self, grid) -> float:
        grid = np.asarray(grid, dtype=np.float64)
        if grid.ndim != 2:
            raise SpeckleModelException("Noise estimation needs a 2D image, got shape {}".format(grid.shape))
        height, width = grid.shape
        if height < MIN_ESTIMATION_SIZE or width < MIN_ESTIMATION_SIZE:
            raise SpeckleModelException("Noise estimation needs an image of at least {0}x{0} pixels, got {1}x{2}"
                                        .format(MIN_ESTIMATION_SIZE, width, height))
        if not np.all(np.isfinite(grid)):
            raise SpeckleModelException("Noise estimation received non finite values")
        return float(self._estimate(grid))

    @abc.abstractmethod
    def _estimate(self, grid: np.ndarray) -> float:
        pass


class WaveletMadNoiseEstimator(NoiseEstimator):
    """
    Median absolute deviation of the finest diagonal (HH) Haar coefficients. The orthonormal Haar HH coefficient of
    i.i.d. noise keeps the noise standard deviation, and the median ignores the few large coefficients produced by
    edges.
    """

    name = 'wavelet_mad'

    def _estimate(self, grid):
        _, (_, _, diagonal) = pywt.dwt2(grid, 'haar', mode='periodization')
        return np.median(np.abs(diagonal)) / MAD_TO_SIGMA


class LaplacianNoiseEstimator(NoiseEstimator):
    """
    Immerkaer's fast estimator: the image is filtered with the difference of two Laplacians, which cancels smooth
    structure, and the mean absolute response is rescaled to a standard deviation.
    """

    name = 'laplacian'

    _KERNEL = np.array([[1, -2, 1],
                        [-2, 4, -2],
                        [1, -2, 1]], dtype=np.float64)

    def _estimate(self, grid):
        height, width = grid.shape
        response = convolve2d(grid, self._KERNEL, mode='valid')
        return math.sqrt(0.5 * math.pi) * np.sum(np.abs(response)) / (6.0 * (width - 2) * (height - 2))


NOISE_ESTIMATORS = {
    WaveletMadNoiseEstimator.name: WaveletMadNoiseEstimator,
    LaplacianNoiseEstimator.name: LaplacianNoiseEstimator,
}


def get_noise_estimator(name: str = WaveletMadNoiseEstimator.name) -> NoiseEstimator:
    """
    Build a noise estimator by name
    :param name: one of NOISE_ESTIMATORS
    :return: estimator instance
    """
    if name not in NOISE_ESTIMATORS:
        raise SpeckleModelException("Unknown noise estimator '{}', use one of {}"
                                    .format(name, sorted(NOISE_ESTIMATORS)))
    return NOISE_ESTIMATORS[name]()
