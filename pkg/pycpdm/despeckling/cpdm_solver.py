"""
Despeckling inference: a truncated reverse diffusion that alternates the prior step of the trained noise predictor
with a data fidelity step derived from the gamma speckle likelihood.

In the log domain the fidelity step solves, independently for every pixel s,

    min_z  z + exp(g_s - z) + (lambda / 2) (z - u_s)^2

where g is the log observation and u the output of the reverse diffusion step. The problem is strictly convex
(second derivative exp(g - z) + lambda > 0) and is solved with a safeguarded Newton iteration.

The reverse process starts at the step whose noise to signal ratio matches the noise estimate of the observation
and visits at most max_reverse_steps evenly spaced steps down to 0. With the annealed fidelity schedule the coupling
of each step is lambda / sigma_s^2, sigma_s being the noise level of the prior output in log units, so the prior
takes over as its output gets cleaner.
"""
import logging

import numpy as np

from pycpdm.despeckling.exceptions import SolverException, NewtonDivergenceException, DespeckleException
from pycpdm.diffusion.models import LogNormalizer
from pycpdm.diffusion.noise_predictor import DOMAIN_LOG, DOMAIN_LINEAR
from pycpdm.diffusion.schedule import NoiseSchedule, DiffusionState, matching_step, respaced_steps, reverse_jump
from pycpdm.speckle.noise_estimation import WaveletMadNoiseEstimator
from pycpdm.speckle.speckle_model import SpeckleParams, log_transform, exp_transform, estimate_noise_std
from pycpdm.toolbox.exceptions import AppException

log = logging.getLogger(__name__)

VARIANT_CPDM = 'cpdm'
VARIANT_LOGDM = 'logdm'
VARIANT_ODDM = 'oddm'
VARIANTS = (VARIANT_CPDM, VARIANT_LOGDM, VARIANT_ODDM)

DEFAULT_LAMBDA = 0.2
DEFAULT_MAX_REVERSE_STEPS = 4
DEFAULT_NEWTON_TOL = 0.01
DEFAULT_NEWTON_MAX_ITER = 50

FIDELITY_ANNEALED = 'annealed'
FIDELITY_CONSTANT = 'constant'
FIDELITY_SCHEDULES = (FIDELITY_ANNEALED, FIDELITY_CONSTANT)

# exp(g - z) is evaluated with the exponent clipped here
_MAX_EXPONENT = 700.0
_MAX_HALVINGS = 60


class SolverConfig:

    def __init__(self, fidelity_weight: float = DEFAULT_LAMBDA, max_reverse_steps: int = DEFAULT_MAX_REVERSE_STEPS,
                 newton_tol: float = DEFAULT_NEWTON_TOL, newton_max_iter: int = DEFAULT_NEWTON_MAX_ITER,
                 seed: int = 0, noise_estimator: str = WaveletMadNoiseEstimator.name,
                 fidelity_schedule: str = FIDELITY_ANNEALED):
        """
        Parameters of the reverse despeckling procedure
        :param fidelity_weight: lambda, weight of the coupling (lambda / 2) ||z - u||^2
        :param max_reverse_steps: cap on the number of reverse steps
        :param newton_tol: a pixel stops iterating once |z_{k+1} - z_k| <= newton_tol
        :param newton_max_iter: cap on the Newton iterations of one fidelity step
        :param seed: seed of the noise injected by the reverse steps
        :param noise_estimator: name of the noise level estimator
        :param fidelity_schedule: 'annealed' divides lambda by the variance of the noise left in the prior output
            u, 'constant' uses lambda at every step
        """
        if fidelity_schedule not in FIDELITY_SCHEDULES:
            raise SolverException("Unknown fidelity schedule '{}', expected one of {}"
                                  .format(fidelity_schedule, ', '.join(FIDELITY_SCHEDULES)))
        if not np.isfinite(fidelity_weight) or fidelity_weight < 0:
            raise SolverException("lambda must be finite and >= 0, got {}".format(fidelity_weight))
        if int(max_reverse_steps) != max_reverse_steps or max_reverse_steps < 1:
            raise SolverException("max_reverse_steps must be an integer >= 1, got {}".format(max_reverse_steps))
        if not newton_tol > 0:
            raise SolverException("newton_tol must be > 0, got {}".format(newton_tol))
        if int(newton_max_iter) != newton_max_iter or newton_max_iter < 1:
            raise SolverException("newton_max_iter must be an integer >= 1, got {}".format(newton_max_iter))
        self.fidelity_weight = float(fidelity_weight)
        self.max_reverse_steps = int(max_reverse_steps)
        self.newton_tol = float(newton_tol)
        self.newton_max_iter = int(newton_max_iter)
        self.seed = int(seed)
        self.noise_estimator = noise_estimator
        self.fidelity_schedule = fidelity_schedule

    def coupling_weight(self, prior_std: float) -> float:
        """
        Coupling weight of a fidelity step whose prior output still carries noise of standard deviation prior_std
        (data domain units).
        """
        if self.fidelity_schedule == FIDELITY_CONSTANT:
            return self.fidelity_weight
        return self.fidelity_weight / prior_std ** 2

    def to_dict(self):
        return {'lambda': self.fidelity_weight, 'max_reverse_steps': self.max_reverse_steps,
                'newton_tol': self.newton_tol, 'newton_max_iter': self.newton_max_iter, 'seed': self.seed,
                'noise_estimator': self.noise_estimator, 'fidelity_schedule': self.fidelity_schedule}


class DespeckleTrace:
    """
    Diagnostics of one despeckling run.
    """

    def __init__(self, variant: str):
        self.variant = variant
        self.sigma_est = None
        self.sigma_est_normalized = None
        self.truncation_step = None
        self.start_step = None
        self.saturated = False
        self.steps = []
        self.objective_values = []
        self.newton_iterations = []
        self.capped_pixels = []
        self.fidelity_weights = []

    def record(self, t: int, objective: float, iterations: int, capped: int, fidelity_weight: float):
        if not np.isfinite(objective):
            raise SolverException("Non finite objective value {} at step {}".format(objective, t))
        self.steps.append(int(t))
        self.objective_values.append(float(objective))
        self.newton_iterations.append(int(iterations))
        self.capped_pixels.append(int(capped))
        self.fidelity_weights.append(float(fidelity_weight))

    @property
    def total_capped_pixels(self) -> int:
        return int(sum(self.capped_pixels))

    def to_dict(self):
        return {'variant': self.variant, 'sigma_est': self.sigma_est,
                'sigma_est_normalized': self.sigma_est_normalized, 'truncation_step': self.truncation_step,
                'start_step': self.start_step, 'saturated': self.saturated, 'steps': list(self.steps),
                'objective_values': list(self.objective_values), 'newton_iterations': list(self.newton_iterations),
                'capped_pixels': list(self.capped_pixels), 'fidelity_weights': list(self.fidelity_weights)}


def _as_grids(z, g, u):
    z = np.asarray(z, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if not (z.shape == g.shape == u.shape):
        raise SolverException("Shape mismatch between z {}, g {} and u {}".format(z.shape, g.shape, u.shape))
    return z, g, u


def _pixel_objective(z, g, u, fidelity_weight):
    return z + np.exp(np.minimum(g - z, _MAX_EXPONENT)) + 0.5 * fidelity_weight * (z - u) ** 2


def objective_value(z, g, u, fidelity_weight: float) -> float:
    """
    sum_s (z_s + exp(g_s - z_s)) + (lambda / 2) ||z - u||^2
    """
    z, g, u = _as_grids(z, g, u)
    return float(np.sum(_pixel_objective(z, g, u, fidelity_weight)))


def _raise_non_finite(values, active_index, shape):
    bad = np.flatnonzero(~np.isfinite(values))[0]
    index = tuple(int(i) for i in np.unravel_index(active_index[bad], shape))
    raise NewtonDivergenceException("Newton iteration produced a non finite value at pixel {}".format(index),
                                    index=index)


def solve_fidelity_step(z_init, g, u, fidelity_weight: float, tol: float = DEFAULT_NEWTON_TOL,
                        max_iter: int = DEFAULT_NEWTON_MAX_ITER):
    """
    Per pixel Newton iteration z_{k+1} = z_k - (1 - e^(g-z) + lambda (z - u)) / (e^(g-z) + lambda). A step that
    would increase the pixel objective is halved until it does not.
    :return: (z, iterations run, number of pixels that hit the iteration cap)
    """
    z, g, u = _as_grids(z_init, g, u)
    if not np.isfinite(fidelity_weight) or fidelity_weight < 0:
        raise SolverException("lambda must be finite and >= 0, got {}".format(fidelity_weight))
    if not tol > 0 or max_iter < 1:
        raise SolverException("Invalid Newton settings tol={} max_iter={}".format(tol, max_iter))
    if fidelity_weight == 0:
        return g.copy(), 0, 0

    shape = z.shape
    z = z.reshape(-1).copy()
    g = g.reshape(-1)
    u = u.reshape(-1)
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(g)) and np.all(np.isfinite(u))):
        raise SolverException("The fidelity step received non finite values")
    active = np.arange(z.size)
    iterations = 0
    while active.size and iterations < max_iter:
        iterations += 1
        za, ga, ua = z[active], g[active], u[active]
        expo = np.exp(np.minimum(ga - za, _MAX_EXPONENT))
        step = (1.0 - expo + fidelity_weight * (za - ua)) / (expo + fidelity_weight)
        current = _pixel_objective(za, ga, ua, fidelity_weight)
        scale = np.ones_like(za)
        candidate = za - step
        for _ in range(_MAX_HALVINGS):
            worse = _pixel_objective(candidate, ga, ua, fidelity_weight) > current + 1e-12 * (1.0 + np.abs(current))
            if not np.any(worse):
                break
            scale[worse] *= 0.5
            candidate = za - scale * step
        if not np.all(np.isfinite(candidate)):
            _raise_non_finite(candidate, active, shape)
        z[active] = candidate
        active = active[np.abs(candidate - za) > tol]
    return z.reshape(shape), iterations, int(active.size)


def newton_z_update(z_init, g, u, fidelity_weight: float, tol: float = DEFAULT_NEWTON_TOL,
                    max_iter: int = DEFAULT_NEWTON_MAX_ITER) -> np.ndarray:
    """
    Minimizer of the per pixel fidelity objective, started from z_init.
    """
    z, _, _ = solve_fidelity_step(z_init, g, u, fidelity_weight, tol, max_iter)
    return z


def _check_observation(noisy):
    noisy = np.asarray(noisy, dtype=np.float64)
    if noisy.ndim != 2:
        raise SolverException("Expected a 2D image, got shape {}".format(noisy.shape))
    if not np.all(np.isfinite(noisy)) or noisy.min() < 0 or noisy.max() > 1:
        raise SolverException("Noisy images must hold finite values in [0, 1]")
    return noisy


def _check_domain(predictor, domain, variant):
    if predictor.domain != domain:
        raise SolverException("Variant '{}' needs a predictor trained on {} data, got {} data"
                              .format(variant, domain, predictor.domain))


def _reverse_loop(observation, anchor, predictor, normalizer: LogNormalizer, schedule: NoiseSchedule,
                  cfg: SolverConfig, trace: DespeckleTrace, fidelity: bool, to_log=None):
    """
    The iterate lives in the data domain. At step t it is normalized and scaled by sqrt(alpha_bar_t), so that an
    observation whose noise matches the relative noise level of t is distributed like x_t, then the respaced jump to
    the next visited step s is mapped back by 1 / sqrt(alpha_bar_s).
    """
    sigma_est = estimate_noise_std(observation, cfg.noise_estimator)
    trace.sigma_est = sigma_est
    trace.sigma_est_normalized = normalizer.scale_std(sigma_est)
    trace.truncation_step = matching_step(trace.sigma_est_normalized, schedule)
    visited = respaced_steps(trace.truncation_step, cfg.max_reverse_steps)
    trace.start_step = visited[0]
    trace.saturated = trace.truncation_step == schedule.steps
    if trace.saturated:
        log.warning("The noise estimate {:.5f} reaches the end of the schedule, the reverse process starts at "
                    "step {}".format(sigma_est, schedule.steps))
    log.debug("Noise estimate {:.5f} ({:.5f} normalized), truncation step {}, visiting steps {}"
              .format(sigma_est, trace.sigma_est_normalized, trace.truncation_step, visited))

    rng = np.random.Generator(np.random.Philox(cfg.seed))
    state = DiffusionState(observation.copy(), trace.start_step, schedule)
    for s in visited[1:] + [0]:
        t = state.t
        x_t = schedule.signal_level(t) * normalizer.normalize(state.x)
        eps = predictor.predict(x_t, t)
        noise = rng.standard_normal(x_t.shape) if s > 0 else None
        u = normalizer.denormalize(reverse_jump(x_t, t, s, eps, schedule, noise) / schedule.signal_level(s))
        # u at s = 0 is noise free, its weight is taken at the first step
        weight = cfg.coupling_weight(normalizer.half_range * schedule.relative_noise_level(max(s, 1)))
        if fidelity:
            z, iterations, capped = solve_fidelity_step(state.x, observation, u, weight, cfg.newton_tol,
                                                        cfg.newton_max_iter)
        else:
            z, iterations, capped = u, 0, 0
        z_log = z if to_log is None else to_log(z)
        u_log = u if to_log is None else to_log(u)
        trace.record(t, objective_value(z_log, anchor, u_log, weight), iterations, capped, weight)
        log.debug("Step {} -> {}: lambda {:.4g}, objective {:.6g}, Newton iterations {}, capped pixels {}"
                  .format(t, s, weight, trace.objective_values[-1], iterations, capped))
        state = DiffusionState(z, s, schedule)
    if trace.total_capped_pixels:
        log.warning("{} pixel updates stopped at the Newton iteration cap".format(trace.total_capped_pixels))
    return state.x


def _run(variant, body):
    trace = DespeckleTrace(variant)
    try:
        return body(trace), trace
    except AppException as e:
        raise DespeckleException("Despeckling ({}) failed: {}".format(variant, e.value), trace=trace) from e


def despeckle(noisy, predictor, schedule: NoiseSchedule, speckle: SpeckleParams = None, cfg: SolverConfig = None):
    """
    Content preserving despeckling: log transform, noise driven truncation, then for t = t_start..1 a reverse
    diffusion step followed by the Newton fidelity step anchored to the original log observation.
    :param noisy: speckled image in [0, 1]
    :param predictor: NoisePredictor trained on log data
    :param schedule: noise schedule of the predictor
    :param speckle: speckle parameters (log floor)
    :param cfg: solver configuration
    :return: (despeckled image, DespeckleTrace)
    """
    speckle = speckle or SpeckleParams()
    cfg = cfg or SolverConfig()

    def body(trace):
        _check_domain(predictor, DOMAIN_LOG, VARIANT_CPDM)
        observation = log_transform(_check_observation(noisy), speckle.log_floor)
        normalizer = predictor.normalizer or LogNormalizer.for_log_floor(speckle.log_floor)
        z = _reverse_loop(observation, observation, predictor, normalizer, schedule, cfg, trace, fidelity=True)
        return exp_transform(z)

    return _run(VARIANT_CPDM, body)


def despeckle_prior_only(noisy, predictor, schedule: NoiseSchedule, cfg: SolverConfig = None,
                         speckle: SpeckleParams = None):
    """
    Log domain reverse diffusion without the fidelity step (z = u at every step).
    :return: (despeckled image, DespeckleTrace)
    """
    speckle = speckle or SpeckleParams()
    cfg = cfg or SolverConfig()

    def body(trace):
        _check_domain(predictor, DOMAIN_LOG, VARIANT_LOGDM)
        observation = log_transform(_check_observation(noisy), speckle.log_floor)
        normalizer = predictor.normalizer or LogNormalizer.for_log_floor(speckle.log_floor)
        z = _reverse_loop(observation, observation, predictor, normalizer, schedule, cfg, trace, fidelity=False)
        return exp_transform(z)

    return _run(VARIANT_LOGDM, body)


def despeckle_linear_prior(noisy, predictor, schedule: NoiseSchedule, cfg: SolverConfig = None,
                           speckle: SpeckleParams = None):
    """
    Reverse diffusion run directly on the intensities, treating speckle as additive Gaussian noise: no log transform
    and no fidelity step.
    :return: (despeckled image, DespeckleTrace)
    """
    speckle = speckle or SpeckleParams()
    cfg = cfg or SolverConfig()

    def body(trace):
        _check_domain(predictor, DOMAIN_LINEAR, VARIANT_ODDM)
        observation = _check_observation(noisy)
        anchor = log_transform(observation, speckle.log_floor)
        normalizer = predictor.normalizer or LogNormalizer.for_unit_interval()
        z = _reverse_loop(observation, anchor, predictor, normalizer, schedule, cfg, trace, fidelity=False,
                          to_log=lambda values: np.log(np.clip(values, speckle.log_floor, None)))
        return np.clip(z, 0.0, 1.0)

    return _run(VARIANT_ODDM, body)


DESPECKLERS = {
    VARIANT_CPDM: lambda noisy, predictor, schedule, speckle, cfg: despeckle(noisy, predictor, schedule, speckle,
                                                                            cfg),
    VARIANT_LOGDM: lambda noisy, predictor, schedule, speckle, cfg: despeckle_prior_only(noisy, predictor, schedule,
                                                                                         cfg, speckle),
    VARIANT_ODDM: lambda noisy, predictor, schedule, speckle, cfg: despeckle_linear_prior(noisy, predictor, schedule,
                                                                                          cfg, speckle),
}
