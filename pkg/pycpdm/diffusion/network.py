"""
Fully convolutional noise predictor written directly on numpy, with its reverse-mode gradient.

Every hidden layer is conv -> time modulation (per channel scale and shift driven by a sinusoidal encoding of t)
-> SiLU. The last layer is a plain convolution. Convolutions use reflect padding so the output keeps the input size.
Tensors are laid out (batch, channels, height, width).
"""
import math
from collections import OrderedDict

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from pycpdm.diffusion.exceptions import PredictorException
from pycpdm.diffusion.models import PredictorConfig


class PredictorParams:
    """
    Named parameter tensors of the predictor plus the architecture they belong to.
    """

    def __init__(self, config: PredictorConfig, tensors, loss_trace=None):
        self.config = config
        self.loss_trace = list(loss_trace) if loss_trace is not None else []
        self.tensors = OrderedDict((name, np.asarray(value, dtype=np.float64)) for name, value in tensors.items())
        expected = parameter_shapes(config)
        if list(expected) != list(self.tensors):
            raise PredictorException("Parameter names {} do not match the architecture {}"
                                     .format(list(self.tensors), list(expected)))
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise PredictorException("Parameter '{}' has shape {}, expected {}"
                                         .format(name, self.tensors[name].shape, shape))

    @classmethod
    def initialize(cls, config: PredictorConfig, seed=0, zero_final: bool = True):
        """
        Fan-in scaled uniform weights and zero biases. With zero_final the last convolution starts at zero, so the
        untrained predictor outputs 0.
        """
        rng = np.random.Generator(np.random.Philox(seed))
        tensors = OrderedDict()
        last = config.layers - 1
        for name, shape in parameter_shapes(config).items():
            if name.endswith('bias') or (zero_final and name.startswith('conv{}.'.format(last))):
                tensors[name] = np.zeros(shape)
            else:
                fan_in = int(np.prod(shape[1:]))
                bound = 1.0 / math.sqrt(fan_in)
                tensors[name] = rng.uniform(-bound, bound, size=shape)
        return cls(config, tensors)

    def zeros_like(self):
        return PredictorParams(self.config, OrderedDict((n, np.zeros_like(v)) for n, v in self.tensors.items()))

    def copy(self):
        return PredictorParams(self.config, OrderedDict((n, v.copy()) for n, v in self.tensors.items()),
                               loss_trace=self.loss_trace)

    def names(self):
        return list(self.tensors)

    def items(self):
        return self.tensors.items()

    def __getitem__(self, name):
        return self.tensors[name]

    def num_parameters(self) -> int:
        return int(sum(v.size for v in self.tensors.values()))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.tensors.values())


def parameter_shapes(config: PredictorConfig):
    shapes = OrderedDict()
    channels = config.channels
    k = config.kernel_size
    for layer in range(config.layers):
        shapes['conv{}.weight'.format(layer)] = (channels[layer + 1], channels[layer], k, k)
        shapes['conv{}.bias'.format(layer)] = (channels[layer + 1],)
        if layer < config.layers - 1:
            shapes['film{}.scale_weight'.format(layer)] = (channels[layer + 1], config.embedding_dim)
            shapes['film{}.scale_bias'.format(layer)] = (channels[layer + 1],)
            shapes['film{}.shift_weight'.format(layer)] = (channels[layer + 1], config.embedding_dim)
            shapes['film{}.shift_bias'.format(layer)] = (channels[layer + 1],)
    return shapes


def time_embedding(steps, dim: int) -> np.ndarray:
    """
    Sinusoidal encoding of the diffusion steps, shape (len(steps), dim).
    """
    steps = np.asarray(steps, dtype=np.float64).reshape(-1)
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half, dtype=np.float64) / half)
    args = steps[:, None] * freqs[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=1)


def _reflect_pad(x, pad):
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode='reflect')


def _fold_reflection(grad, pad, axis):
    size = grad.shape[axis] - 2 * pad
    inner = np.take(grad, np.arange(pad, pad + size), axis=axis).copy()
    inner = np.moveaxis(inner, axis, 0)
    border = np.moveaxis(grad, axis, 0)
    for i in range(pad):
        inner[pad - i] += border[i]
        inner[size - 2 - i] += border[pad + size + i]
    return np.moveaxis(inner, 0, axis)


def _reflect_pad_adjoint(grad, pad):
    if pad == 0:
        return grad
    return _fold_reflection(_fold_reflection(grad, pad, axis=3), pad, axis=2)


def _conv_forward(x, weight, bias):
    pad = weight.shape[-1] // 2
    windows = sliding_window_view(_reflect_pad(x, pad), weight.shape[-2:], axis=(2, 3))
    out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    return out + bias[None, :, None, None], windows


def _conv_backward(dout, windows, weight, need_input_grad=True):
    dweight = np.tensordot(dout, windows, axes=([0, 2, 3], [0, 2, 3]))
    dbias = dout.sum(axis=(0, 2, 3))
    if not need_input_grad:
        return None, dweight, dbias
    k = weight.shape[-1]
    pad = k // 2
    batch, _, height, width = dout.shape
    dwindows = np.tensordot(dout, weight, axes=([1], [0]))
    dpadded = np.zeros((batch, weight.shape[1], height + 2 * pad, width + 2 * pad))
    for i in range(k):
        for j in range(k):
            dpadded[:, :, i:i + height, j:j + width] += dwindows[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return _reflect_pad_adjoint(dpadded, pad), dweight, dbias


def check_input(x, config: PredictorConfig):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None, None]
    elif x.ndim == 3:
        x = x[:, None]
    if x.ndim != 4 or x.shape[1] != 1:
        raise PredictorException("Expected a grid or a batch of grids, got shape {}".format(x.shape))
    pad = config.kernel_size // 2
    if x.shape[2] <= pad or x.shape[3] <= pad:
        raise PredictorException("Grid {}x{} is too small for kernel size {}"
                                 .format(x.shape[3], x.shape[2], config.kernel_size))
    if not np.all(np.isfinite(x)):
        raise PredictorException("The predictor received non finite values")
    return x


def forward(params: PredictorParams, x, steps):
    """
    Run the network on a batch
    :param params: predictor parameters
    :param x: batch (N, 1, H, W)
    :param steps: N diffusion steps
    :return: (output (N, 1, H, W), cache for backward)
    """
    config = params.config
    embedding = time_embedding(steps, config.embedding_dim)
    if embedding.shape[0] != x.shape[0]:
        raise PredictorException("Got {} steps for a batch of {}".format(embedding.shape[0], x.shape[0]))
    cache = {'embedding': embedding, 'layers': []}
    h = x
    for layer in range(config.layers - 1):
        pre, windows = _conv_forward(h, params['conv{}.weight'.format(layer)], params['conv{}.bias'.format(layer)])
        scale = 1.0 + embedding @ params['film{}.scale_weight'.format(layer)].T \
            + params['film{}.scale_bias'.format(layer)]
        shift = embedding @ params['film{}.shift_weight'.format(layer)].T + params['film{}.shift_bias'.format(layer)]
        modulated = pre * scale[:, :, None, None] + shift[:, :, None, None]
        gate = expit(modulated)
        h = modulated * gate
        cache['layers'].append((windows, pre, scale, modulated, gate))
    last = config.layers - 1
    out, windows = _conv_forward(h, params['conv{}.weight'.format(last)], params['conv{}.bias'.format(last)])
    cache['last'] = windows
    return out, cache


def backward(params: PredictorParams, cache, dout) -> PredictorParams:
    """
    Gradients of a scalar loss with respect to every parameter, given dloss/doutput.
    """
    config = params.config
    grads = params.zeros_like()
    last = config.layers - 1
    dh, dweight, dbias = _conv_backward(dout, cache['last'], params['conv{}.weight'.format(last)],
                                        need_input_grad=last > 0)
    grads.tensors['conv{}.weight'.format(last)] = dweight
    grads.tensors['conv{}.bias'.format(last)] = dbias
    embedding = cache['embedding']
    for layer in reversed(range(last)):
        windows, pre, scale, modulated, gate = cache['layers'][layer]
        dmodulated = dh * (gate + modulated * gate * (1.0 - gate))
        dscale = (dmodulated * pre).sum(axis=(2, 3))
        dshift = dmodulated.sum(axis=(2, 3))
        grads.tensors['film{}.scale_weight'.format(layer)] = dscale.T @ embedding
        grads.tensors['film{}.scale_bias'.format(layer)] = dscale.sum(axis=0)
        grads.tensors['film{}.shift_weight'.format(layer)] = dshift.T @ embedding
        grads.tensors['film{}.shift_bias'.format(layer)] = dshift.sum(axis=0)
        dpre = dmodulated * scale[:, :, None, None]
        dh, dweight, dbias = _conv_backward(dpre, windows, params['conv{}.weight'.format(layer)],
                                            need_input_grad=layer > 0)
        grads.tensors['conv{}.weight'.format(layer)] = dweight
        grads.tensors['conv{}.bias'.format(layer)] = dbias
    return grads
