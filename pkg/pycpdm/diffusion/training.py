import numpy as np
import pandas as pd

from pycpdm.diffusion.exceptions import DiffusionException
from pycpdm.diffusion.models import PredictorConfig, TrainingConfig, LogNormalizer
from pycpdm.diffusion.noise_predictor import train, DOMAINS, DOMAIN_LOG
from pycpdm.diffusion.schedule import linear_beta_schedule, DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END
from pycpdm.imaging.checkpoint import Checkpoint, save_checkpoint
from pycpdm.imaging.pgm import read_image
from pycpdm.speckle.speckle_model import log_transform, DEFAULT_LOG_FLOOR
from pycpdm.toolbox.general import ParameterConfiguration, list_files_with_extension


class PredictorTrainingService(ParameterConfiguration):
    CONFIG_KEY_TRAINING = 'predictor_training'
    CONFIG_DATA_FOLDER = 'data'
    CONFIG_OUTPUT_CHECKPOINT = 'out'
    CONFIG_EPOCHS = 'epochs'
    CONFIG_BATCH_SIZE = 'batch_size'
    CONFIG_LEARNING_RATE = 'learning_rate'
    CONFIG_LR_DECAY = 'lr_decay'
    CONFIG_LR_PERIOD = 'lr_period'
    CONFIG_STEPS = 'steps'
    CONFIG_BETA_START = 'beta_start'
    CONFIG_BETA_END = 'beta_end'
    CONFIG_SEED = 'seed'
    CONFIG_DOMAIN = 'domain'
    CONFIG_LOG_FLOOR = 'log_floor'
    CONFIG_HIDDEN_WIDTH = 'width'
    CONFIG_HIDDEN_LAYERS = 'hidden_layers'
    CONFIG_KERNEL_SIZE = 'kernel_size'
    CONFIG_EMBEDDING_DIM = 'embedding_dim'
    CONFIG_LOSS_TRACE = 'loss_trace'

    IMAGE_EXTENSIONS = ('.pgm',)

    def __init__(self, config_data, pipeline_arguments):
        super(PredictorTrainingService, self).__init__(self.CONFIG_KEY_TRAINING, config_data, pipeline_arguments)
        self._data_folder = self.get_configuration_value(self.CONFIG_DATA_FOLDER, None)
        self._output = self.get_configuration_value(self.CONFIG_OUTPUT_CHECKPOINT, 'predictor.ckpt')
        self._loss_trace = self.get_configuration_value(self.CONFIG_LOSS_TRACE, None)
        self._domain = self.get_configuration_value(self.CONFIG_DOMAIN, DOMAIN_LOG)
        self._log_floor = float(self.get_configuration_value(self.CONFIG_LOG_FLOOR, DEFAULT_LOG_FLOOR))
        if self._data_folder is None:
            raise DiffusionException("No training data folder given")
        if self._domain not in DOMAINS:
            raise DiffusionException("Unknown data domain '{}', use one of {}".format(self._domain, DOMAINS))

        self._training_config = TrainingConfig(
            epochs=int(self.get_configuration_value(self.CONFIG_EPOCHS, 50)),
            batch_size=int(self.get_configuration_value(self.CONFIG_BATCH_SIZE, 2)),
            learning_rate=float(self.get_configuration_value(self.CONFIG_LEARNING_RATE, 1e-4)),
            lr_decay=float(self.get_configuration_value(self.CONFIG_LR_DECAY, 0.5)),
            lr_period=int(self.get_configuration_value(self.CONFIG_LR_PERIOD, 5)),
            seed=int(self.get_configuration_value(self.CONFIG_SEED, 0)))
        width = int(self.get_configuration_value(self.CONFIG_HIDDEN_WIDTH, 16))
        layers = int(self.get_configuration_value(self.CONFIG_HIDDEN_LAYERS, 3))
        self._predictor_config = PredictorConfig(
            hidden_channels=(width,) * layers,
            kernel_size=int(self.get_configuration_value(self.CONFIG_KERNEL_SIZE, 3)),
            embedding_dim=int(self.get_configuration_value(self.CONFIG_EMBEDDING_DIM, 32)))
        self._schedule = linear_beta_schedule(
            int(self.get_configuration_value(self.CONFIG_STEPS, DEFAULT_STEPS)),
            float(self.get_configuration_value(self.CONFIG_BETA_START, DEFAULT_BETA_START)),
            float(self.get_configuration_value(self.CONFIG_BETA_END, DEFAULT_BETA_END)))

    def load_dataset(self):
        """
        Read every PGM of the data folder, in name order, and map it to the training domain.
        :return: list of grids
        """
        files = list_files_with_extension(self._data_folder, self.IMAGE_EXTENSIONS)
        if not files:
            raise DiffusionException("No PGM images found in '{}'".format(self._data_folder))
        self.get_logger().info("Loading {} training images from {}".format(len(files), self._data_folder))
        images = [read_image(path) for path in files]
        if self._domain == DOMAIN_LOG:
            return [log_transform(img, self._log_floor) for img in images]
        return images

    def train_predictor(self):
        dataset = self.load_dataset()
        normalizer = LogNormalizer.fit(dataset)
        self.get_logger().info("Training a {} predictor ({} domain, {}) for {} epochs"
                               .format(self._predictor_config, self._domain, normalizer,
                                       self._training_config.epochs))
        params = train(dataset, self._schedule, self._training_config, predictor_config=self._predictor_config,
                       normalizer=normalizer, logger=self.get_logger_for('pycpdm.diffusion.noise_predictor'))
        save_checkpoint(self._output, Checkpoint.from_params(params, self._schedule, normalizer, domain=self._domain))
        self.get_logger().info("Checkpoint with {} parameters written to {}"
                               .format(params.num_parameters(), self._output))
        if self._loss_trace is not None:
            self.write_loss_trace(params.loss_trace)
        return params

    def write_loss_trace(self, trace):
        epochs = np.arange(1, len(trace) + 1)
        table = pd.DataFrame({'epoch': epochs,
                              'loss': trace,
                              'learning_rate': [self._training_config.learning_rate_at(e - 1) for e in epochs]})
        table.to_csv(self._loss_trace, sep='\t', index=False, float_format='%.8g')
        self.get_logger().info("Loss trace written to {}".format(self._loss_trace))
