from pycpdm.despeckling.cpdm_solver import DESPECKLERS, VARIANTS, VARIANT_CPDM, SolverConfig, DEFAULT_LAMBDA, \
    DEFAULT_MAX_REVERSE_STEPS, DEFAULT_NEWTON_TOL, DEFAULT_NEWTON_MAX_ITER, FIDELITY_ANNEALED
from pycpdm.despeckling.exceptions import DespeckleException
from pycpdm.imaging.checkpoint import load_checkpoint
from pycpdm.imaging.pgm import read_image, write_image
from pycpdm.speckle.noise_estimation import WaveletMadNoiseEstimator
from pycpdm.speckle.speckle_model import SpeckleParams, DEFAULT_LOG_FLOOR
from pycpdm.toolbox.general import ParameterConfiguration, write_json


class DespecklingService(ParameterConfiguration):
    CONFIG_KEY_DESPECKLING = 'despeckling'
    CONFIG_INPUT_IMAGE = 'input'
    CONFIG_CHECKPOINT = 'ckpt'
    CONFIG_OUTPUT_IMAGE = 'out'
    CONFIG_TRACE = 'trace'
    CONFIG_VARIANT = 'variant'
    CONFIG_LAMBDA = 'lambda'
    CONFIG_FIDELITY_SCHEDULE = 'fidelity_schedule'
    CONFIG_MAX_STEPS = 'max_steps'
    CONFIG_NEWTON_TOL = 'newton_tol'
    CONFIG_NEWTON_MAX_ITER = 'newton_max_iter'
    CONFIG_NOISE_ESTIMATOR = 'noise_estimator'
    CONFIG_SEED = 'seed'
    CONFIG_LOOKS = 'looks'
    CONFIG_LOG_FLOOR = 'log_floor'
    CONFIG_BIT_DEPTH = 'bit_depth'

    def __init__(self, config_data, pipeline_arguments):
        super(DespecklingService, self).__init__(self.CONFIG_KEY_DESPECKLING, config_data, pipeline_arguments)
        self._input = self.get_configuration_value(self.CONFIG_INPUT_IMAGE, None)
        self._checkpoint = self.get_configuration_value(self.CONFIG_CHECKPOINT, None)
        self._output = self.get_configuration_value(self.CONFIG_OUTPUT_IMAGE, 'despeckled.pgm')
        self._trace = self.get_configuration_value(self.CONFIG_TRACE, None)
        self._variant = self.get_configuration_value(self.CONFIG_VARIANT, VARIANT_CPDM)
        self._bit_depth = int(self.get_configuration_value(self.CONFIG_BIT_DEPTH, 16))
        if self._input is None or self._checkpoint is None:
            raise DespeckleException("Despeckling needs an input image and a checkpoint")
        if self._variant not in VARIANTS:
            raise DespeckleException("Unknown variant '{}', use one of {}".format(self._variant, VARIANTS))

        self._speckle = SpeckleParams(
            looks=float(self.get_configuration_value(self.CONFIG_LOOKS, 4.0)),
            log_floor=float(self.get_configuration_value(self.CONFIG_LOG_FLOOR, DEFAULT_LOG_FLOOR)))
        self._solver_config = SolverConfig(
            fidelity_weight=float(self.get_configuration_value(self.CONFIG_LAMBDA, DEFAULT_LAMBDA)),
            max_reverse_steps=int(self.get_configuration_value(self.CONFIG_MAX_STEPS, DEFAULT_MAX_REVERSE_STEPS)),
            newton_tol=float(self.get_configuration_value(self.CONFIG_NEWTON_TOL, DEFAULT_NEWTON_TOL)),
            newton_max_iter=int(self.get_configuration_value(self.CONFIG_NEWTON_MAX_ITER, DEFAULT_NEWTON_MAX_ITER)),
            seed=int(self.get_configuration_value(self.CONFIG_SEED, 0)),
            noise_estimator=self.get_configuration_value(self.CONFIG_NOISE_ESTIMATOR,
                                                         WaveletMadNoiseEstimator.name),
            fidelity_schedule=self.get_configuration_value(self.CONFIG_FIDELITY_SCHEDULE, FIDELITY_ANNEALED))

    def despeckle(self):
        """
        Run the configured variant on the input image and write the result, plus the trace when requested.
        :return: (despeckled image, DespeckleTrace)
        """
        checkpoint = load_checkpoint(self._checkpoint)
        noisy = read_image(self._input)
        self.get_logger().info("Despeckling {} ({}x{}) with variant {} and {}"
                               .format(self._input, noisy.shape[1], noisy.shape[0], self._variant,
                                       self._solver_config.to_dict()))
        try:
            img, trace = DESPECKLERS[self._variant](noisy, checkpoint.to_predictor(), checkpoint.schedule,
                                                    self._speckle, self._solver_config)
        except DespeckleException as e:
            if self._trace is not None and e.trace is not None:
                self.write_trace(e.trace)
            raise
        self.get_logger().info("Reverse diffusion ran from step {} (truncation step {}, noise estimate {:.5f})"
                               .format(trace.start_step, trace.truncation_step, trace.sigma_est))
        write_image(self._output, img, bit_depth=self._bit_depth)
        self.get_logger().info("Despeckled image written to {}".format(self._output))
        if self._trace is not None:
            self.write_trace(trace)
        return img, trace

    def write_trace(self, trace):
        data = trace.to_dict()
        data['looks'] = self._speckle.looks
        data['log_floor'] = self._speckle.log_floor
        data['solver'] = self._solver_config.to_dict()
        data['input'] = self._input
        write_json(data, self._trace)
        self.get_logger().info("Trace written to {}".format(self._trace))
