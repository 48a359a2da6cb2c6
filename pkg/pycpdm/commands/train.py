import click

from pycpdm.commands.utils import echo_success, set_if_given
from pycpdm.diffusion.training import PredictorTrainingService
from pycpdm.toolbox.general import read_yaml_from_file


@click.command('train', short_help='Train the diffusion noise predictor on a folder of clean PGM images')
@click.option('-c', '--config_file', help='Configuration file for the predictor training')
@click.option('--data', required=True, type=click.Path(exists=True, file_okay=False),
              help='Folder with the clean training images (*.pgm)')
@click.option('--out', required=True, help='Output checkpoint')
@click.option('--epochs', type=int, help='Number of epochs (Default: 50)')
@click.option('--batch', type=int, help='Batch size (Default: 2)')
@click.option('--lr', type=float, help='Initial Adam learning rate (Default: 1e-4)')
@click.option('--lr-decay', type=float, help='Learning rate decay factor (Default: 0.5)')
@click.option('--lr-period', type=int, help='Epochs between two learning rate decays (Default: 5)')
@click.option('--t', 'steps', type=int, help='Number of diffusion steps T (Default: 1000)')
@click.option('--beta-start', type=float, help='First beta of the linear schedule (Default: 1e-4)')
@click.option('--beta-end', type=float, help='Last beta of the linear schedule (Default: 6e-3)')
@click.option('--seed', type=int, help='Seed of the initialization, batch order and noise (Default: 0)')
@click.option('--domain', type=click.Choice(['log', 'linear']),
              help='Train on log transformed images (cpdm, logdm) or on intensities (oddm). Default: log')
@click.option('--width', type=int, help='Channels of the hidden layers (Default: 16)')
@click.option('--log-floor', type=float, help='Clamp applied before the log transform (Default: 1e-3)')
@click.option('--loss-trace', help='Write the per-epoch loss as a tab separated file')
def train(config_file, data, out, epochs, batch, lr, lr_decay, lr_period, steps, beta_start, beta_end, seed, domain,
          width, log_floor, loss_trace):
    config_data = None
    if config_file is not None:
        config_data = read_yaml_from_file(config_file)

    pipeline_arguments = {PredictorTrainingService.CONFIG_DATA_FOLDER: data,
                          PredictorTrainingService.CONFIG_OUTPUT_CHECKPOINT: out}
    set_if_given(pipeline_arguments, PredictorTrainingService.CONFIG_EPOCHS, epochs)
    set_if_given(pipeline_arguments, PredictorTrainingService.CONFIG_BATCH_SIZE, batch)
    set_if_given(pipeline_arguments, PredictorTrainingService.CONFIG_LEARNING_RATE, lr)
    set_if_given(pipeline_arguments, PredictorTrainingService.CONFIG_LR_DECAY, lr_decay)
    set_if_given(pipeline_arguments, PredictorTrainingService.CONFIG_LR_PERIOD, lr_period)
    set_if_given(pipeline_arguments, PredictorTrainingService.CONFIG_STEPS, steps)
    set_if_given(pipeline_arguments, PredictorTrainingService.CONFIG_BETA_START, beta_start)
    set_if_given(pipeline_arguments, PredictorTrainingService.CONFIG_BETA_END, beta_end)
    set_if_given(pipeline_arguments, PredictorTrainingService.CONFIG_SEED, seed)
    set_if_given(pipeline_arguments, PredictorTrainingService.CONFIG_DOMAIN, domain)
    set_if_given(pipeline_arguments, PredictorTrainingService.CONFIG_HIDDEN_WIDTH, width)
    set_if_given(pipeline_arguments, PredictorTrainingService.CONFIG_LOG_FLOOR, log_floor)
    set_if_given(pipeline_arguments, PredictorTrainingService.CONFIG_LOSS_TRACE, loss_trace)

    training_service = PredictorTrainingService(config_data, pipeline_arguments)
    params = training_service.train_predictor()
    echo_success("Checkpoint written to {} (final loss {:.6f})".format(out, params.loss_trace[-1])
                 if params.loss_trace else "Checkpoint written to {}".format(out))
