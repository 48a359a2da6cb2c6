import math
from collections import OrderedDict

from pycpdm.despeckling.exceptions import MetricException
from pycpdm.despeckling.metrics import CNR_FORMULA, cnr_per_region, enl, psnr, mean_absolute_deviation
from pycpdm.imaging.pgm import read_image
from pycpdm.imaging.roi import read_roi
from pycpdm.toolbox.general import ParameterConfiguration, write_json


def _format_value(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ('inf' if value > 0 else '-inf')
    return str(value)


class EvaluationService(ParameterConfiguration):
    """
    Computes the ROI metrics of an image (CNR, ENL) and, given a reference, PSNR and the mean absolute deviation.
    """
    CONFIG_KEY_EVALUATION = 'evaluation'
    CONFIG_IMAGE = 'img'
    CONFIG_REFERENCE = 'ref'
    CONFIG_ROI_FILE = 'roi'
    CONFIG_REPORT = 'report'
    CONFIG_JSON_REPORT = 'json'

    def __init__(self, config_data, pipeline_arguments):
        super(EvaluationService, self).__init__(self.CONFIG_KEY_EVALUATION, config_data, pipeline_arguments)
        self._image = self.get_configuration_value(self.CONFIG_IMAGE, None)
        self._reference = self.get_configuration_value(self.CONFIG_REFERENCE, None)
        self._roi_file = self.get_configuration_value(self.CONFIG_ROI_FILE, None)
        self._report = self.get_configuration_value(self.CONFIG_REPORT, 'metrics.txt')
        self._json_report = self.get_configuration_value(self.CONFIG_JSON_REPORT, None)
        if self._image is None or self._roi_file is None:
            raise MetricException("Evaluation needs an image and a ROI file")

    def compute_metrics(self):
        img = read_image(self._image)
        roi = read_roi(self._roi_file)
        roi.check_bounds(img.shape)
        metrics = OrderedDict()
        metrics['image'] = self._image
        if roi.signal_regions and roi.background_region is not None:
            per_region = cnr_per_region(img, roi)
            metrics['cnr'] = sum(per_region) / len(per_region)
            metrics['cnr_formula'] = CNR_FORMULA
            for index, value in enumerate(per_region):
                metrics['cnr_region_{}'.format(index + 1)] = value
        if roi.homogeneous_region is not None:
            metrics['enl'] = enl(img, roi)
            metrics['enl_infinite'] = math.isinf(metrics['enl'])
        if len(metrics) == 1:
            raise MetricException("ROI file '{}' defines neither a signal/background pair nor a homogeneous region"
                                  .format(self._roi_file))
        if self._reference is not None:
            ref = read_image(self._reference)
            metrics['reference'] = self._reference
            metrics['psnr'] = psnr(img, ref)
            metrics['psnr_infinite'] = math.isinf(metrics['psnr'])
            metrics['mean_absolute_deviation'] = mean_absolute_deviation(img, ref)
        return metrics

    def evaluate(self):
        metrics = self.compute_metrics()
        with open(self._report, 'w') as report:
            for key in sorted(metrics):
                report.write('{}={}\n'.format(key, _format_value(metrics[key])))
        self.get_logger().info("Metrics report written to {}".format(self._report))
        if self._json_report is not None:
            write_json(metrics, self._json_report)
            self.get_logger().info("JSON metrics written to {}".format(self._json_report))
        return metrics
