"""
Statistical model of fully developed multiplicative speckle.

A noisy intensity is Y = x * N where the speckle N follows a unit mean gamma law with M looks. In the log domain
the model becomes additive, G = z + W with W = log N, which is the form the diffusion prior and the fidelity term
work with.
"""
import math

import numpy as np
from scipy.special import digamma, gammaln, polygamma

from pycpdm.speckle.exceptions import SpeckleModelException
from pycpdm.speckle.noise_estimation import get_noise_estimator, WaveletMadNoiseEstimator

DEFAULT_LOG_FLOOR = 1e-3
MAX_LOG_FLOOR = 0.1

# rows generated by each independent random stream of sample_speckle
SPECKLE_ROW_BAND = 32


class SpeckleParams:

    def __init__(self, looks: float = 4.0, log_floor: float = DEFAULT_LOG_FLOOR):
        """
        Parameters of the gamma speckle law
        :param looks: number of multilooks M (real, >= 1)
        :param log_floor: clamp applied before the log transform, in (0, 0.1]
        """
        _check_looks(looks)
        if not (0 < log_floor <= MAX_LOG_FLOOR):
            raise SpeckleModelException("log_floor must be in (0, {}], got {}".format(MAX_LOG_FLOOR, log_floor))
        self.looks = float(looks)
        self.log_floor = float(log_floor)

    def __repr__(self):
        return "SpeckleParams(looks={}, log_floor={})".format(self.looks, self.log_floor)


def _check_looks(looks):
    if not np.isfinite(looks) or looks < 1:
        raise SpeckleModelException("The number of looks M must be a finite value >= 1, got {}".format(looks))


def _as_scalar_or_array(value):
    return float(value) if np.ndim(value) == 0 else value


def gamma_speckle_pdf(n, looks: float):
    """
    Density of the unit mean gamma speckle, (M^M / Gamma(M)) n^(M-1) exp(-n M).
    :param n: speckle value(s), strictly positive
    :param looks: number of looks M
    :return: density value(s)
    """
    _check_looks(looks)
    n = np.asarray(n, dtype=np.float64)
    if np.any(~np.isfinite(n)) or np.any(n <= 0):
        raise SpeckleModelException("The gamma speckle density is defined for n > 0 only")
    log_pdf = looks * math.log(looks) - gammaln(looks) + (looks - 1.0) * np.log(n) - n * looks
    return _as_scalar_or_array(np.exp(log_pdf))


def log_speckle_density(w, looks: float):
    """
    Density of W = log N, (M^M / Gamma(M)) exp(M w) exp(-M e^w).
    :param w: log speckle value(s)
    :param looks: number of looks M
    :return: density value(s)
    """
    _check_looks(looks)
    w = np.asarray(w, dtype=np.float64)
    log_pdf = looks * math.log(looks) - gammaln(looks) + looks * w - looks * np.exp(w)
    return _as_scalar_or_array(np.exp(log_pdf))


def log_speckle_moments(looks: float):
    """
    Mean and variance of W = log N: psi(M) - ln M and psi'(M).
    :param looks: number of looks M
    :return: (mean, variance)
    """
    _check_looks(looks)
    mean = float(digamma(looks)) - math.log(looks)
    variance = float(polygamma(1, looks))
    return mean, variance


def _check_dimensions(width, height):
    if int(width) != width or int(height) != height or width < 1 or height < 1:
        raise SpeckleModelException("Speckle fields need positive integer dimensions, got {}x{}".format(width, height))


def speckle_generators(seed, bands: int):
    """
    Independent Philox streams, one per band of rows, derived from a single seed.
    """
    children = np.random.SeedSequence(seed).spawn(bands)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def sample_speckle(width: int, height: int, looks: float, seed) -> np.ndarray:
    """
    Draw a field of i.i.d. Gamma(shape=M, scale=1/M) speckle. Each band of SPECKLE_ROW_BAND rows has its own random
    stream, so the field does not depend on the order in which bands are generated.
    :param width: columns
    :param height: rows
    :param looks: number of looks M
    :param seed: integer seed
    :return: array of shape (height, width)
    """
    _check_dimensions(width, height)
    _check_looks(looks)
    bands = -(-int(height) // SPECKLE_ROW_BAND)
    field = np.empty((int(height), int(width)), dtype=np.float64)
    for band, generator in enumerate(speckle_generators(seed, bands)):
        rows = slice(band * SPECKLE_ROW_BAND, min((band + 1) * SPECKLE_ROW_BAND, int(height)))
        field[rows] = generator.gamma(shape=looks, scale=1.0 / looks, size=(rows.stop - rows.start, int(width)))
    return field


def apply_speckle(clean, looks: float, seed) -> np.ndarray:
    """
    Multiply a clean [0, 1] image with a speckle field drawn from seed.
    """
    clean = np.asarray(clean, dtype=np.float64)
    if clean.ndim != 2:
        raise SpeckleModelException("Expected a 2D image, got shape {}".format(clean.shape))
    if not np.all(np.isfinite(clean)) or clean.min() < 0 or clean.max() > 1:
        raise SpeckleModelException("Clean images must hold finite values in [0, 1]")
    height, width = clean.shape
    return clean * sample_speckle(width, height, looks, seed)


def log_transform(img, log_floor: float = DEFAULT_LOG_FLOOR) -> np.ndarray:
    """
    ln(max(img, log_floor)) elementwise.
    """
    if not (0 < log_floor <= MAX_LOG_FLOOR):
        raise SpeckleModelException("log_floor must be in (0, {}], got {}".format(MAX_LOG_FLOOR, log_floor))
    img = np.asarray(img, dtype=np.float64)
    if not np.all(np.isfinite(img)):
        raise SpeckleModelException("Cannot log transform an image with non finite values")
    return np.log(np.maximum(img, log_floor))


def exp_transform(limg) -> np.ndarray:
    """
    exp of a log image, clipped to the [0, 1] intensity range.
    """
    limg = np.asarray(limg, dtype=np.float64)
    return np.clip(np.exp(np.minimum(limg, 0.0)), 0.0, 1.0)


def estimate_noise_std(limg, estimator=WaveletMadNoiseEstimator.name) -> float:
    """
    Standard deviation of the additive noise of a log image.
    :param limg: log image, at least 16x16
    :param estimator: estimator name or NoiseEstimator instance
    :return: estimated standard deviation
    """
    if isinstance(estimator, str):
        estimator = get_noise_estimator(estimator)
    return estimator.estimate(limg)
