import click

from pycpdm.commands.utils import echo_success, echo_info, set_if_given
from pycpdm.despeckling.evaluation import EvaluationService
from pycpdm.toolbox.general import read_yaml_from_file


@click.command('evaluate', short_help='Compute CNR, ENL and, with a reference, PSNR of an image')
@click.option('-c', '--config_file', help='Configuration file for the evaluation')
@click.option('--img', required=True, type=click.Path(exists=True, dir_okay=False), help='PGM image to evaluate')
@click.option('--ref', type=click.Path(exists=True, dir_okay=False), help='Clean reference PGM for PSNR')
@click.option('--roi', required=True, type=click.Path(exists=True, dir_okay=False),
              help='Region file, one "kind x y w h" line per region (kind: signal, background, homogeneous)')
@click.option('--report', required=True, help='Output key=value report')
@click.option('--json', 'json_report', help='Also write the metrics as JSON')
def evaluate(config_file, img, ref, roi, report, json_report):
    config_data = None
    if config_file is not None:
        config_data = read_yaml_from_file(config_file)

    pipeline_arguments = {EvaluationService.CONFIG_IMAGE: img,
                          EvaluationService.CONFIG_ROI_FILE: roi,
                          EvaluationService.CONFIG_REPORT: report}
    set_if_given(pipeline_arguments, EvaluationService.CONFIG_REFERENCE, ref)
    set_if_given(pipeline_arguments, EvaluationService.CONFIG_JSON_REPORT, json_report)

    evaluation_service = EvaluationService(config_data, pipeline_arguments)
    metrics = evaluation_service.evaluate()
    for key in ('cnr', 'enl', 'psnr'):
        if key in metrics:
            echo_info("{}={:.4f}".format(key, metrics[key]))
    echo_success("Metrics report written to {}".format(report))
