import click

from pycpdm.commands.utils import echo_success, set_if_given
from pycpdm.speckle.simulation import SpeckleSimulationService
from pycpdm.toolbox.general import read_yaml_from_file


@click.command('simulate', short_help='Render a synthetic phantom and its gamma speckle observation')
@click.option('-c', '--config_file', help='Configuration file for the speckle simulation')
@click.option('--spec', type=click.Path(exists=True, dir_okay=False),
              help='YAML phantom description (width, height, background, layers). Default: built-in 5 layer phantom')
@click.option('--m', 'looks', type=float, help='Number of looks M of the gamma speckle (Default: 4)')
@click.option('--seed', type=int, help='Seed of the phantom jitter and of the speckle (Default: 0)')
@click.option('--width', type=int, help='Width of the built-in phantom (Default: 128)')
@click.option('--height', type=int, help='Height of the built-in phantom (Default: 128)')
@click.option('--bit-depth', type=click.Choice(['8', '16']), help='PGM sample depth (Default: 16)')
@click.option('--out-clean', required=True, help='Output PGM of the clean phantom')
@click.option('--out-noisy', required=True, help='Output PGM of the speckled phantom')
def simulate(config_file, spec, looks, seed, width, height, bit_depth, out_clean, out_noisy):
    config_data = None
    if config_file is not None:
        config_data = read_yaml_from_file(config_file)

    pipeline_arguments = {SpeckleSimulationService.CONFIG_OUTPUT_CLEAN: out_clean,
                          SpeckleSimulationService.CONFIG_OUTPUT_NOISY: out_noisy}
    set_if_given(pipeline_arguments, SpeckleSimulationService.CONFIG_SPEC_FILE, spec)
    set_if_given(pipeline_arguments, SpeckleSimulationService.CONFIG_LOOKS, looks)
    set_if_given(pipeline_arguments, SpeckleSimulationService.CONFIG_SEED, seed)
    set_if_given(pipeline_arguments, SpeckleSimulationService.CONFIG_WIDTH, width)
    set_if_given(pipeline_arguments, SpeckleSimulationService.CONFIG_HEIGHT, height)
    set_if_given(pipeline_arguments, SpeckleSimulationService.CONFIG_BIT_DEPTH, bit_depth)

    simulation_service = SpeckleSimulationService(config_data, pipeline_arguments)
    simulation_service.simulate()
    echo_success("Phantom written to {} and {}".format(out_clean, out_noisy))
