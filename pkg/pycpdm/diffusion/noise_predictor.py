"""
The noise predictor eps_theta(x_t, t) of the diffusion prior: a trainable convolutional predictor, the closed
form predictor of a Gaussian data law used as a test oracle, the DDPM training loss and the training loop.
"""
import abc
import logging

import numpy as np

from pycpdm.diffusion import network
from pycpdm.diffusion.exceptions import PredictorException, TrainingDivergedException
from pycpdm.diffusion.models import PredictorConfig, TrainingConfig, GaussianOracleSpec
from pycpdm.diffusion.network import PredictorParams
from pycpdm.diffusion.schedule import NoiseSchedule

log = logging.getLogger(__name__)

DOMAIN_LOG = 'log'
DOMAIN_LINEAR = 'linear'
DOMAINS = (DOMAIN_LOG, DOMAIN_LINEAR)


class NoisePredictor(abc.ABC):
    """
    Interface shared by the predictors the despeckling solver can run with. Grids handed to predict() are in the
    normalized domain described by `normalizer`; `domain` tells whether the data was log transformed.
    """

    def __init__(self, normalizer=None, domain: str = DOMAIN_LOG):
        if domain not in DOMAINS:
            raise PredictorException("Unknown data domain '{}', use one of {}".format(domain, DOMAINS))
        self.normalizer = normalizer
        self.domain = domain

    @abc.abstractmethod
    def predict(self, x_t, t: int) -> np.ndarray:
        pass


class ConvNoisePredictor(NoisePredictor):

    def __init__(self, params: PredictorParams, normalizer=None, domain: str = DOMAIN_LOG):
        super(ConvNoisePredictor, self).__init__(normalizer, domain)
        self.params = params

    def predict(self, x_t, t: int) -> np.ndarray:
        return predict(self.params, x_t, t)


class GaussianOraclePredictor(NoisePredictor):

    def __init__(self, spec: GaussianOracleSpec, schedule: NoiseSchedule, normalizer=None,
                 domain: str = DOMAIN_LOG):
        super(GaussianOraclePredictor, self).__init__(normalizer, domain)
        self.spec = spec
        self.schedule = schedule

    def predict(self, x_t, t: int) -> np.ndarray:
        return oracle_predict(self.spec, x_t, t, self.schedule)


def predict(params: PredictorParams, x_t, t: int) -> np.ndarray:
    """
    Predicted noise for a single grid at step t, same shape as x_t.
    """
    if int(t) != t or t < 1:
        raise PredictorException("Diffusion steps start at 1, got {}".format(t))
    x_t = np.asarray(x_t, dtype=np.float64)
    batch = network.check_input(x_t, params.config)
    out, _ = network.forward(params, batch, np.full(batch.shape[0], int(t)))
    return out.reshape(x_t.shape)


def oracle_predict(spec: GaussianOracleSpec, x_t, t: int, schedule: NoiseSchedule) -> np.ndarray:
    """
    Posterior mean of the noise when x0 ~ N(mu0, sigma0^2 I):
    sqrt(1 - a) (x_t - sqrt(a) mu0) / (a sigma0^2 + 1 - a), with a = alpha_bar_t.
    """
    alpha_bar = schedule.alpha_bar(t)
    x_t = np.asarray(x_t, dtype=np.float64)
    return np.sqrt(1.0 - alpha_bar) * (x_t - np.sqrt(alpha_bar) * spec.mu0) \
        / (alpha_bar * spec.sigma0 ** 2 + 1.0 - alpha_bar)


def _stack_batch(batch_x0, config):
    grids = [np.asarray(g, dtype=np.float64) for g in batch_x0]
    if not grids:
        raise PredictorException("Empty training batch")
    shapes = {g.shape for g in grids}
    if len(shapes) != 1:
        raise PredictorException("All grids of a batch must share a shape, got {}".format(sorted(shapes)))
    return network.check_input(np.stack(grids), config)


def loss_and_gradients_fixed(params: PredictorParams, batch_x0, steps, eps, schedule: NoiseSchedule):
    """
    Denoising loss mean((eps - eps_theta(sqrt(a) x0 + sqrt(1 - a) eps, t))^2) for frozen steps and noise, and its
    exact gradient.
    :param params: predictor parameters
    :param batch_x0: N clean grids
    :param steps: N steps in [1, T]
    :param eps: noise of shape (N, 1, H, W) or (N, H, W)
    :param schedule: noise schedule
    :return: (loss, gradients as PredictorParams)
    """
    x0 = _stack_batch(batch_x0, params.config)
    steps = np.asarray(steps, dtype=np.int64).reshape(-1)
    eps = np.asarray(eps, dtype=np.float64).reshape(x0.shape)
    if steps.size != x0.shape[0]:
        raise PredictorException("Got {} steps for a batch of {}".format(steps.size, x0.shape[0]))
    indices = np.array([schedule.check_step(int(t)) for t in steps])
    coef_signal = schedule.sqrt_alphas_cumprod[indices][:, None, None, None]
    coef_noise = schedule.sqrt_one_minus_alphas_cumprod[indices][:, None, None, None]
    x_t = coef_signal * x0 + coef_noise * eps
    out, cache = network.forward(params, x_t, steps)
    residual = out - eps
    loss = float(np.mean(residual ** 2))
    grads = network.backward(params, cache, 2.0 * residual / residual.size)
    return loss, grads


def loss_and_gradients(params: PredictorParams, batch_x0, rng: np.random.Generator, schedule: NoiseSchedule):
    """
    Training loss of one batch with a uniform step t ~ {1..T} and fresh Gaussian noise per sample.
    """
    x0 = _stack_batch(batch_x0, params.config)
    steps = rng.integers(1, schedule.steps + 1, size=x0.shape[0])
    eps = rng.standard_normal(x0.shape)
    return loss_and_gradients_fixed(params, x0[:, 0], steps, eps, schedule)


class AdamOptimizer:

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self._first = None
        self._second = None
        self._step = 0

    def step(self, params: PredictorParams, grads: PredictorParams, learning_rate: float):
        """
        Update params in place.
        """
        if self._first is None:
            self._first = grads.zeros_like()
            self._second = grads.zeros_like()
        self._step += 1
        correction1 = 1.0 - self.beta1 ** self._step
        correction2 = 1.0 - self.beta2 ** self._step
        for name, grad in grads.items():
            first = self._first.tensors[name]
            second = self._second.tensors[name]
            first *= self.beta1
            first += (1.0 - self.beta1) * grad
            second *= self.beta2
            second += (1.0 - self.beta2) * grad * grad
            update = learning_rate * (first / correction1) / (np.sqrt(second / correction2) + self.epsilon)
            params.tensors[name] -= update


def train(dataset, schedule: NoiseSchedule, cfg: TrainingConfig, predictor_config: PredictorConfig = None,
          initial_params: PredictorParams = None, normalizer=None, logger=None) -> PredictorParams:
    """
    Fit the predictor on clean grids with Adam. The per-epoch mean loss is kept in params.loss_trace.
    :param dataset: clean grids (log or linear domain), all of the same shape
    :param schedule: noise schedule
    :param cfg: training configuration
    :param predictor_config: architecture, used when initial_params is not given
    :param initial_params: starting parameters
    :param normalizer: optional map applied to the grids before training
    :param logger: logger for the per-epoch report
    :return: trained parameters
    """
    logger = logger or log
    grids = [np.asarray(g, dtype=np.float64) for g in dataset]
    if not grids:
        raise PredictorException("The training dataset is empty")
    if normalizer is not None:
        grids = [normalizer.normalize(g) for g in grids]
    if initial_params is None:
        initial_params = PredictorParams.initialize(predictor_config or PredictorConfig(), seed=cfg.seed)
    params = initial_params.copy()
    _stack_batch(grids, params.config)

    rng = np.random.Generator(np.random.Philox(cfg.seed))
    optimizer = AdamOptimizer()
    trace = list(params.loss_trace)
    for epoch in range(cfg.epochs):
        learning_rate = cfg.learning_rate_at(epoch)
        order = rng.permutation(len(grids))
        losses = []
        for start in range(0, len(grids), cfg.batch_size):
            batch = [grids[i] for i in order[start:start + cfg.batch_size]]
            loss, grads = loss_and_gradients(params, batch, rng, schedule)
            if not np.isfinite(loss) or not grads.is_finite():
                trace.append(float('nan'))
                raise TrainingDivergedException("Training diverged at epoch {} (loss {})".format(epoch + 1, loss),
                                                trace=trace)
            optimizer.step(params, grads, learning_rate)
            losses.append(loss)
        epoch_loss = float(np.mean(losses))
        trace.append(epoch_loss)
        logger.info("Epoch {}/{} loss {:.6f} learning rate {:.3g}".format(epoch + 1, cfg.epochs, epoch_loss,
                                                                          learning_rate))
    params.loss_trace = trace
    return params
