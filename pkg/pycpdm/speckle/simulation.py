from pycpdm.imaging.pgm import write_image
from pycpdm.imaging.phantom import read_phantom_spec, default_phantom_spec, generate_phantom
from pycpdm.speckle.speckle_model import apply_speckle
from pycpdm.toolbox.general import ParameterConfiguration


class SpeckleSimulationService(ParameterConfiguration):
    """
    Renders a clean phantom and its multiplicative gamma speckle observation.
    """
    CONFIG_KEY_SIMULATION = 'speckle_simulation'
    CONFIG_SPEC_FILE = 'spec'
    CONFIG_LOOKS = 'looks'
    CONFIG_SEED = 'seed'
    CONFIG_OUTPUT_CLEAN = 'out_clean'
    CONFIG_OUTPUT_NOISY = 'out_noisy'
    CONFIG_WIDTH = 'width'
    CONFIG_HEIGHT = 'height'
    CONFIG_BIT_DEPTH = 'bit_depth'

    def __init__(self, config_data, pipeline_arguments):
        super(SpeckleSimulationService, self).__init__(self.CONFIG_KEY_SIMULATION, config_data, pipeline_arguments)
        self._spec_file = self.get_configuration_value(self.CONFIG_SPEC_FILE, None)
        self._looks = float(self.get_configuration_value(self.CONFIG_LOOKS, 4.0))
        self._seed = self.get_configuration_value(self.CONFIG_SEED, None)
        self._out_clean = self.get_configuration_value(self.CONFIG_OUTPUT_CLEAN, 'clean.pgm')
        self._out_noisy = self.get_configuration_value(self.CONFIG_OUTPUT_NOISY, 'noisy.pgm')
        self._width = int(self.get_configuration_value(self.CONFIG_WIDTH, 128))
        self._height = int(self.get_configuration_value(self.CONFIG_HEIGHT, 128))
        self._bit_depth = int(self.get_configuration_value(self.CONFIG_BIT_DEPTH, 16))

    def simulate(self):
        """
        Write the clean phantom and the speckled image. The seed drives both the phantom jitter and the speckle; when
        it is not configured the seed of the phantom file is used (0 for the built-in phantom).
        :return: (clean, noisy) arrays
        """
        if self._spec_file is not None:
            spec = read_phantom_spec(self._spec_file)
            if self._seed is not None:
                spec = spec.with_seed(int(self._seed))
        else:
            spec = default_phantom_spec(self._width, self._height, int(self._seed or 0))
        self.get_logger().info("Rendering a {}x{} phantom with {} layers (seed {})"
                               .format(spec.width, spec.height, len(spec.layers), spec.seed))
        clean = generate_phantom(spec)
        noisy = apply_speckle(clean, self._looks, spec.seed)
        # values above 1 saturate at the file's maxval
        write_image(self._out_clean, clean, bit_depth=self._bit_depth)
        write_image(self._out_noisy, noisy, bit_depth=self._bit_depth)
        self.get_logger().info("Clean image written to {}, speckled image (M={}) to {}"
                               .format(self._out_clean, self._looks, self._out_noisy))
        return clean, noisy
