"""
No-reference despeckling quality metrics over regions of interest (CNR, ENL) and PSNR against a synthetic ground
truth.
"""
import math

import numpy as np

from pycpdm.despeckling.exceptions import MetricException

CNR_FORMULA = "10*log10(|mean_r - mean_b| / sqrt(std_r^2 + std_b^2))"


class Region:

    def __init__(self, x: int, y: int, width: int, height: int):
        """
        Axis aligned rectangle, (x, y) is the top left pixel (column, row)
        """
        values = (x, y, width, height)
        if any(int(v) != v for v in values) or x < 0 or y < 0 or width < 1 or height < 1:
            raise MetricException("Invalid region x={} y={} w={} h={}".format(x, y, width, height))
        self.x, self.y, self.width, self.height = (int(v) for v in values)

    def check_bounds(self, shape):
        rows, cols = shape
        if self.x + self.width > cols or self.y + self.height > rows:
            raise MetricException("Region {} exceeds the image bounds {}x{}".format(self, cols, rows))

    def extract(self, img) -> np.ndarray:
        self.check_bounds(img.shape)
        return img[self.y:self.y + self.height, self.x:self.x + self.width]

    def to_list(self):
        return [self.x, self.y, self.width, self.height]

    def __eq__(self, other):
        return isinstance(other, Region) and self.to_list() == other.to_list()

    def __repr__(self):
        return "Region(x={}, y={}, w={}, h={})".format(self.x, self.y, self.width, self.height)


class RoiSpec:

    def __init__(self, signal_regions=None, background_region: Region = None, homogeneous_region: Region = None):
        self.signal_regions = list(signal_regions or [])
        self.background_region = background_region
        self.homogeneous_region = homogeneous_region

    def check_bounds(self, shape):
        for region in self.signal_regions + [self.background_region, self.homogeneous_region]:
            if region is not None:
                region.check_bounds(shape)


def _as_image(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or not np.all(np.isfinite(img)):
        raise MetricException("Metrics need a finite 2D image, got shape {}".format(img.shape))
    return img


def _variance(values) -> float:
    # np.var of a constant region can come out as a tiny positive number, not 0
    return 0.0 if np.ptp(values) == 0 else float(np.var(values))


def region_cnr(signal: np.ndarray, background: np.ndarray) -> float:
    """
    CNR in dB between two pixel sets.
    """
    contrast = abs(float(np.mean(signal)) - float(np.mean(background)))
    if np.ptp(signal) == 0 and np.ptp(background) == 0:
        raise MetricException("CNR is undefined for constant signal and background regions")
    if contrast == 0:
        return float('-inf')
    spread = math.sqrt(_variance(signal) + _variance(background))
    return 10.0 * math.log10(contrast / spread)


def cnr_per_region(img, roi: RoiSpec):
    img = _as_image(img)
    if not roi.signal_regions or roi.background_region is None:
        raise MetricException("CNR needs at least one signal region and a background region")
    roi.check_bounds(img.shape)
    background = roi.background_region.extract(img)
    return [region_cnr(region.extract(img), background) for region in roi.signal_regions]


def cnr(img, roi: RoiSpec) -> float:
    """
    Mean over the signal regions of 10 log10(|mu_r - mu_b| / sqrt(sigma_r^2 + sigma_b^2)).
    """
    return float(np.mean(cnr_per_region(img, roi)))


def enl(img, roi: RoiSpec) -> float:
    """
    mu^2 / sigma^2 over the homogeneous region; +inf for a constant region.
    """
    img = _as_image(img)
    if roi.homogeneous_region is None:
        raise MetricException("ENL needs a homogeneous region")
    values = roi.homogeneous_region.extract(img)
    if np.ptp(values) == 0:
        return float('inf')
    return float(np.mean(values)) ** 2 / _variance(values)


def psnr(img, ref) -> float:
    """
    10 log10(1 / MSE) for [0, 1] images; +inf for identical images.
    """
    img = _as_image(img)
    ref = _as_image(ref)
    if img.shape != ref.shape:
        raise MetricException("PSNR needs images of the same shape, got {} and {}".format(img.shape, ref.shape))
    mse = float(np.mean((img - ref) ** 2))
    if mse == 0:
        return float('inf')
    return 10.0 * math.log10(1.0 / mse)


def mean_absolute_deviation(img, ref) -> float:
    img = _as_image(img)
    ref = _as_image(ref)
    if img.shape != ref.shape:
        raise MetricException("Images of different shapes {} and {}".format(img.shape, ref.shape))
    return float(np.mean(np.abs(img - ref)))
