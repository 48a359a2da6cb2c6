import click

from pycpdm.commands.utils import echo_success, echo_warning, set_if_given
from pycpdm.despeckling.cpdm_solver import VARIANTS, FIDELITY_SCHEDULES
from pycpdm.despeckling.despeckling import DespecklingService
from pycpdm.toolbox.general import read_yaml_from_file


@click.command('despeckle', short_help='Despeckle a PGM image with a trained diffusion prior')
@click.option('-c', '--config_file', help='Configuration file for the despeckling')
@click.option('--in', 'input_image', required=True, type=click.Path(exists=True, dir_okay=False),
              help='Speckled PGM image')
@click.option('--ckpt', required=True, type=click.Path(exists=True, dir_okay=False),
              help='Checkpoint written by the train command')
@click.option('--out', required=True, help='Output PGM image')
@click.option('--variant', type=click.Choice(VARIANTS),
              help='cpdm: log domain prior with the fidelity step, logdm: log domain prior only, '
                   'oddm: prior on intensities (needs a linear domain checkpoint). Default: cpdm')
@click.option('--lambda', 'fidelity_weight', type=float, help='Weight of the prior coupling (Default: 0.2)')
@click.option('--fidelity-schedule', type=click.Choice(FIDELITY_SCHEDULES),
              help='annealed: lambda divided by the noise variance left in the prior output, '
                   'constant: lambda at every step. Default: annealed')
@click.option('--max-steps', type=int, help='Cap on the reverse diffusion steps (Default: 4)')
@click.option('--newton-tol', type=float, help='Newton stopping tolerance per pixel (Default: 0.01)')
@click.option('--newton-max-iter', type=int, help='Cap on the Newton iterations of one step (Default: 50)')
@click.option('--noise-estimator', type=click.Choice(['wavelet_mad', 'laplacian']),
              help='Noise level estimator driving the truncation (Default: wavelet_mad)')
@click.option('--seed', type=int, help='Seed of the reverse step noise (Default: 0)')
@click.option('--m', 'looks', type=float, help='Number of looks of the input, recorded in the trace (Default: 4)')
@click.option('--log-floor', type=float, help='Clamp applied before the log transform (Default: 1e-3)')
@click.option('--trace', help='Write the solver trace as JSON')
def despeckle(config_file, input_image, ckpt, out, variant, fidelity_weight, fidelity_schedule, max_steps, newton_tol,
              newton_max_iter, noise_estimator, seed, looks, log_floor, trace):
    config_data = None
    if config_file is not None:
        config_data = read_yaml_from_file(config_file)

    pipeline_arguments = {DespecklingService.CONFIG_INPUT_IMAGE: input_image,
                          DespecklingService.CONFIG_CHECKPOINT: ckpt,
                          DespecklingService.CONFIG_OUTPUT_IMAGE: out}
    set_if_given(pipeline_arguments, DespecklingService.CONFIG_VARIANT, variant)
    set_if_given(pipeline_arguments, DespecklingService.CONFIG_LAMBDA, fidelity_weight)
    set_if_given(pipeline_arguments, DespecklingService.CONFIG_FIDELITY_SCHEDULE, fidelity_schedule)
    set_if_given(pipeline_arguments, DespecklingService.CONFIG_MAX_STEPS, max_steps)
    set_if_given(pipeline_arguments, DespecklingService.CONFIG_NEWTON_TOL, newton_tol)
    set_if_given(pipeline_arguments, DespecklingService.CONFIG_NEWTON_MAX_ITER, newton_max_iter)
    set_if_given(pipeline_arguments, DespecklingService.CONFIG_NOISE_ESTIMATOR, noise_estimator)
    set_if_given(pipeline_arguments, DespecklingService.CONFIG_SEED, seed)
    set_if_given(pipeline_arguments, DespecklingService.CONFIG_LOOKS, looks)
    set_if_given(pipeline_arguments, DespecklingService.CONFIG_LOG_FLOOR, log_floor)
    set_if_given(pipeline_arguments, DespecklingService.CONFIG_TRACE, trace)

    despeckling_service = DespecklingService(config_data, pipeline_arguments)
    _, solver_trace = despeckling_service.despeckle()
    echo_success("Despeckled image written to {} ({} reverse steps)".format(out, len(solver_trace.steps)))
    if solver_trace.total_capped_pixels:
        echo_warning("{} pixel updates stopped at the Newton iteration cap, consider raising --newton-max-iter"
                     .format(solver_trace.total_capped_pixels))
    if solver_trace.saturated:
        echo_warning("The noise estimate reached the end of the noise schedule, the input may be noisier than the "
                     "data the predictor was trained on")
