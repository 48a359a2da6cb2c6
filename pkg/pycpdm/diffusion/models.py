"""
This module contains the configuration records of the noise predictor and its training
"""
import math

import numpy as np

from pycpdm.diffusion.exceptions import PredictorException, DiffusionException


class PredictorConfig:

    def __init__(self, hidden_channels=(16, 16, 16), kernel_size: int = 3, embedding_dim: int = 32):
        """
        Architecture of the fully convolutional noise predictor: len(hidden_channels) + 1 convolutions
        1 -> hidden_channels[0] -> ... -> hidden_channels[-1] -> 1, with a time modulation on every hidden layer.
        :param hidden_channels: widths of the hidden layers
        :param kernel_size: odd kernel size
        :param embedding_dim: even dimension of the sinusoidal time encoding
        """
        hidden_channels = tuple(int(c) for c in hidden_channels)
        if not hidden_channels or min(hidden_channels) < 1:
            raise PredictorException("The predictor needs at least one hidden layer with positive width")
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise PredictorException("The kernel size must be odd, got {}".format(kernel_size))
        if embedding_dim < 2 or embedding_dim % 2:
            raise PredictorException("The time embedding dimension must be even, got {}".format(embedding_dim))
        self.hidden_channels = hidden_channels
        self.kernel_size = int(kernel_size)
        self.embedding_dim = int(embedding_dim)

    @property
    def channels(self):
        return (1,) + self.hidden_channels + (1,)

    @property
    def layers(self):
        return len(self.hidden_channels) + 1

    def to_dict(self):
        return {'hidden_channels': list(self.hidden_channels), 'kernel_size': self.kernel_size,
                'embedding_dim': self.embedding_dim}

    @classmethod
    def from_dict(cls, data):
        return cls(hidden_channels=data['hidden_channels'], kernel_size=data['kernel_size'],
                   embedding_dim=data['embedding_dim'])

    def __eq__(self, other):
        return isinstance(other, PredictorConfig) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return "PredictorConfig({})".format(self.to_dict())


class TrainingConfig:

    def __init__(self, epochs: int = 50, batch_size: int = 2, learning_rate: float = 1e-4, lr_decay: float = 0.5,
                 lr_period: int = 5, seed: int = 0):
        """
        Training schedule of the noise predictor (Adam with a step decay of the learning rate)
        :param epochs: passes over the dataset
        :param batch_size: samples per optimizer step
        :param learning_rate: initial step size
        :param lr_decay: multiplicative decay factor
        :param lr_period: epochs between two decays
        :param seed: seed of the batch order, time steps and noise draws
        """
        if epochs < 0:
            raise DiffusionException("epochs must be >= 0, got {}".format(epochs))
        if batch_size < 1:
            raise DiffusionException("batch_size must be >= 1, got {}".format(batch_size))
        if not learning_rate >= 0:
            raise DiffusionException("learning_rate must be >= 0, got {}".format(learning_rate))
        if not 0 < lr_decay <= 1:
            raise DiffusionException("lr_decay must be in (0, 1], got {}".format(lr_decay))
        if lr_period < 1:
            raise DiffusionException("lr_period must be >= 1, got {}".format(lr_period))
        self.epochs = int(epochs)
        self.batch_size = int(batch_size)
        self.learning_rate = float(learning_rate)
        self.lr_decay = float(lr_decay)
        self.lr_period = int(lr_period)
        self.seed = int(seed)

    def learning_rate_at(self, epoch: int) -> float:
        return self.learning_rate * self.lr_decay ** (epoch // self.lr_period)


class GaussianOracleSpec:

    def __init__(self, mu0: float, sigma0: float):
        """
        Data law x0 ~ N(mu0, sigma0^2 I) for which the optimal noise predictor has a closed form
        """
        if not sigma0 > 0:
            raise PredictorException("sigma0 must be > 0, got {}".format(sigma0))
        self.mu0 = float(mu0)
        self.sigma0 = float(sigma0)


class LogNormalizer:
    """
    Affine map between the data domain (log or linear intensities) and the [-1, 1] range seen by the predictor:
    normalized = (value - center) / half_range.
    """

    def __init__(self, center: float, half_range: float):
        if not np.isfinite(center) or not np.isfinite(half_range) or half_range <= 0:
            raise DiffusionException("Invalid normalization center={} half_range={}".format(center, half_range))
        self.center = float(center)
        self.half_range = float(half_range)

    @classmethod
    def from_range(cls, low: float, high: float):
        if not high > low:
            raise DiffusionException("Degenerate normalization range [{}, {}]".format(low, high))
        return cls(0.5 * (low + high), 0.5 * (high - low))

    @classmethod
    def for_log_floor(cls, log_floor: float):
        return cls.from_range(math.log(log_floor), 0.0)

    @classmethod
    def for_unit_interval(cls):
        return cls.from_range(0.0, 1.0)

    @classmethod
    def fit(cls, grids):
        low = min(float(np.min(g)) for g in grids)
        high = max(float(np.max(g)) for g in grids)
        return cls.from_range(low, high)

    def normalize(self, values):
        return (np.asarray(values, dtype=np.float64) - self.center) / self.half_range

    def denormalize(self, values):
        return np.asarray(values, dtype=np.float64) * self.half_range + self.center

    def scale_std(self, std: float) -> float:
        """
        A standard deviation of the data domain expressed in the normalized domain
        """
        return std / self.half_range

    def to_dict(self):
        return {'center': self.center, 'half_range': self.half_range}

    @classmethod
    def from_dict(cls, data):
        return cls(data['center'], data['half_range'])

    def __repr__(self):
        return "LogNormalizer(center={}, half_range={})".format(self.center, self.half_range)
