"""
Variance schedule of the diffusion chain, forward sampling, the single and the respaced reverse steps and the choice
of the step at which a truncated reverse process starts.

Steps are 1-based, t in [1, T], as in the usual DDPM notation; the arrays are stored 0-based.
"""
from typing import List

import numpy as np

from pycpdm.diffusion.exceptions import ScheduleException

DEFAULT_STEPS = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 6e-3


class NoiseSchedule:

    def __init__(self, betas, beta_start=None, beta_end=None):
        """
        Build the derived arrays of a schedule from its betas. The posterior noise scale uses the fixed variance
        choice sigma_t^2 = beta_t.
        :param betas: non decreasing values in (0, 1)
        """
        betas = np.asarray(betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ScheduleException("A schedule needs at least one beta")
        if np.any(~np.isfinite(betas)) or np.any(betas <= 0) or np.any(betas >= 1):
            raise ScheduleException("Betas must lie in (0, 1)")
        if np.any(np.diff(betas) < 0):
            raise ScheduleException("Betas must be non decreasing")
        self.betas = betas
        self.alphas = 1.0 - betas
        self.alphas_cumprod = np.cumprod(self.alphas)
        self.sigmas = np.sqrt(betas)
        self.sqrt_alphas_cumprod = np.sqrt(self.alphas_cumprod)
        self.sqrt_one_minus_alphas_cumprod = np.sqrt(1.0 - self.alphas_cumprod)
        self.beta_start = float(betas[0] if beta_start is None else beta_start)
        self.beta_end = float(betas[-1] if beta_end is None else beta_end)
        for array in (self.betas, self.alphas, self.alphas_cumprod, self.sigmas):
            array.setflags(write=False)

    @property
    def steps(self) -> int:
        return int(self.betas.size)

    def check_step(self, t: int) -> int:
        if int(t) != t or not (1 <= t <= self.steps):
            raise ScheduleException("Step {} outside the schedule range [1, {}]".format(t, self.steps))
        return int(t) - 1

    def beta(self, t: int) -> float:
        return float(self.betas[self.check_step(t)])

    def alpha(self, t: int) -> float:
        return float(self.alphas[self.check_step(t)])

    def alpha_bar(self, t: int) -> float:
        return float(self.alphas_cumprod[self.check_step(t)])

    def sigma(self, t: int) -> float:
        return float(self.sigmas[self.check_step(t)])

    def noise_level(self, t: int) -> float:
        """
        Standard deviation sqrt(1 - alpha_bar_t) of the noise carried by x_t.
        """
        return float(self.sqrt_one_minus_alphas_cumprod[self.check_step(t)])

    def signal_level(self, t: int) -> float:
        """
        sqrt(alpha_bar_t), with the clean step t = 0 mapping to 1.
        """
        if t == 0:
            return 1.0
        return float(self.sqrt_alphas_cumprod[self.check_step(t)])

    def relative_noise_level(self, t: int) -> float:
        """
        Noise to signal ratio sqrt((1 - alpha_bar_t) / alpha_bar_t): x_t / sqrt(alpha_bar_t) is x_0 plus Gaussian
        noise of this standard deviation. Zero at t = 0.
        """
        if t == 0:
            return 0.0
        index = self.check_step(t)
        return float(self.sqrt_one_minus_alphas_cumprod[index] / self.sqrt_alphas_cumprod[index])

    def to_dict(self):
        return {'steps': self.steps, 'beta_start': self.beta_start, 'beta_end': self.beta_end}

    @classmethod
    def from_dict(cls, data):
        return linear_beta_schedule(int(data['steps']), float(data['beta_start']), float(data['beta_end']))

    def __repr__(self):
        return "NoiseSchedule(steps={}, beta_start={}, beta_end={})".format(self.steps, self.beta_start,
                                                                           self.beta_end)


class DiffusionState:
    """
    Current iterate of a reverse process and the step it belongs to.
    """

    def __init__(self, x, t: int, schedule: NoiseSchedule):
        if not (0 <= t <= schedule.steps):
            raise ScheduleException("Step {} outside [0, {}]".format(t, schedule.steps))
        self.x = x
        self.t = int(t)


def linear_beta_schedule(steps: int = DEFAULT_STEPS, beta_start: float = DEFAULT_BETA_START,
                         beta_end: float = DEFAULT_BETA_END) -> NoiseSchedule:
    """
    beta_t = beta_start + (t - 1) / (T - 1) * (beta_end - beta_start)
    """
    if int(steps) != steps or steps < 1:
        raise ScheduleException("The number of steps must be a positive integer, got {}".format(steps))
    if not (0 < beta_start <= beta_end < 1):
        raise ScheduleException("Expected 0 < beta_start <= beta_end < 1, got {} and {}".format(beta_start, beta_end))
    steps = int(steps)
    if steps == 1:
        betas = np.array([beta_start], dtype=np.float64)
    else:
        betas = beta_start + np.arange(steps, dtype=np.float64) / (steps - 1) * (beta_end - beta_start)
        betas[-1] = beta_end
    return NoiseSchedule(betas, beta_start=beta_start, beta_end=beta_end)


def _check_same_shape(first, second, names):
    if first.shape != second.shape:
        raise ScheduleException("Shape mismatch between {} {} and {} {}".format(names[0], first.shape,
                                                                               names[1], second.shape))


def forward_sample(x0, t: int, eps, schedule: NoiseSchedule) -> np.ndarray:
    """
    Sample x_t given x_0: sqrt(alpha_bar_t) x_0 + sqrt(1 - alpha_bar_t) eps.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_same_shape(x0, eps, ('x0', 'eps'))
    index = schedule.check_step(t)
    return schedule.sqrt_alphas_cumprod[index] * x0 + schedule.sqrt_one_minus_alphas_cumprod[index] * eps


def reverse_step(x_t, t: int, eps_pred, schedule: NoiseSchedule, noise=None) -> np.ndarray:
    """
    One ancestral step x_t -> x_{t-1}:
    (x_t - beta_t / sqrt(1 - alpha_bar_t) eps_pred) / sqrt(alpha_t) + sigma_t noise.
    No noise is injected at t = 1.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_pred = np.asarray(eps_pred, dtype=np.float64)
    _check_same_shape(x_t, eps_pred, ('x_t', 'eps_pred'))
    index = schedule.check_step(t)
    mean = (x_t - schedule.betas[index] / schedule.sqrt_one_minus_alphas_cumprod[index] * eps_pred) \
        / np.sqrt(schedule.alphas[index])
    if noise is None or t == 1:
        return mean
    noise = np.asarray(noise, dtype=np.float64)
    _check_same_shape(x_t, noise, ('x_t', 'noise'))
    return mean + schedule.sigmas[index] * noise


def truncation_step(sigma_est: float, schedule: NoiseSchedule) -> int:
    """
    Smallest step whose noise level sqrt(1 - alpha_bar_t) reaches sigma_est, saturating at T.
    """
    if not np.isfinite(sigma_est) or sigma_est < 0:
        raise ScheduleException("The noise estimate must be finite and >= 0, got {}".format(sigma_est))
    index = int(np.searchsorted(schedule.sqrt_one_minus_alphas_cumprod, sigma_est, side='left'))
    return min(index + 1, schedule.steps)


def matching_step(sigma_est: float, schedule: NoiseSchedule) -> int:
    """
    Step whose relative noise level first reaches sigma_est, saturating at T. An observation y = x_0 + sigma_est n
    scaled by sqrt(alpha_bar_t) is then distributed like x_t.
    """
    if not np.isfinite(sigma_est) or sigma_est < 0:
        raise ScheduleException("The noise estimate must be finite and >= 0, got {}".format(sigma_est))
    return truncation_step(sigma_est / np.sqrt(1.0 + sigma_est ** 2), schedule)


def respaced_steps(t_start: int, count: int) -> List[int]:
    """
    At most count decreasing steps from t_start, evenly spread: ceil(t_start k / count) for k = count..1. With
    count >= t_start every step t_start..1 is visited.
    """
    if int(t_start) != t_start or t_start < 1:
        raise ScheduleException("The start step must be an integer >= 1, got {}".format(t_start))
    if int(count) != count or count < 1:
        raise ScheduleException("The number of steps must be an integer >= 1, got {}".format(count))
    t_start = int(t_start)
    count = min(int(count), t_start)
    return [-(-t_start * k // count) for k in range(count, 0, -1)]


def reverse_jump(x_t, t: int, s: int, eps_pred, schedule: NoiseSchedule, noise=None) -> np.ndarray:
    """
    Ancestral jump x_t -> x_s (0 <= s < t) of the respaced chain, with alpha' = alpha_bar_t / alpha_bar_s and
    beta' = 1 - alpha':
    (x_t - beta' / sqrt(1 - alpha_bar_t) eps_pred) / sqrt(alpha') + sqrt(beta') noise.
    For s = t - 1 this is reverse_step. No noise is injected when s = 0.
    """
    if int(s) != s or not (0 <= s < t):
        raise ScheduleException("Jump target {} must satisfy 0 <= s < t = {}".format(s, t))
    if s == t - 1:
        return reverse_step(x_t, t, eps_pred, schedule, noise)
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_pred = np.asarray(eps_pred, dtype=np.float64)
    _check_same_shape(x_t, eps_pred, ('x_t', 'eps_pred'))
    index = schedule.check_step(t)
    alpha_prime = (schedule.sqrt_alphas_cumprod[index] / schedule.signal_level(s)) ** 2
    beta_prime = 1.0 - alpha_prime
    mean = (x_t - beta_prime / schedule.sqrt_one_minus_alphas_cumprod[index] * eps_pred) / np.sqrt(alpha_prime)
    if noise is None or s == 0:
        return mean
    noise = np.asarray(noise, dtype=np.float64)
    _check_same_shape(x_t, noise, ('x_t', 'noise'))
    return mean + np.sqrt(beta_prime) * noise
