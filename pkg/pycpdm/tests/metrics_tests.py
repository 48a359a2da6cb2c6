import math
import os
import tempfile
import unittest

import numpy as np

from pycpdm.despeckling.evaluation import EvaluationService
from pycpdm.despeckling.exceptions import MetricException
from pycpdm.despeckling.metrics import Region, RoiSpec, cnr, cnr_per_region, region_cnr, enl, psnr, \
    mean_absolute_deviation
from pycpdm.imaging.exceptions import RoiException
from pycpdm.imaging.pgm import write_image
from pycpdm.imaging.roi import write_roi
from pycpdm.speckle.speckle_model import sample_speckle
from pycpdm.toolbox.general import read_json


def contrast_image():
    """
    8x8 image with a 9/11 checkerboard on the top left quarter and zeros elsewhere
    """
    img = np.zeros((8, 8))
    rows, cols = np.indices((4, 4))
    img[:4, :4] = np.where((rows + cols) % 2 == 0, 9.0, 11.0)
    return img


class CnrTests(unittest.TestCase):

    def setUp(self):
        self.roi = RoiSpec(signal_regions=[Region(0, 0, 4, 4)], background_region=Region(4, 4, 4, 4))

    def test_ten_decibels(self):
        self.assertEqual(cnr(contrast_image(), self.roi), 10.0)

    def test_mean_over_regions(self):
        img = contrast_image()
        img[4:, :4] = 1.0
        roi = RoiSpec(signal_regions=[Region(0, 0, 4, 4), Region(0, 4, 2, 2)], background_region=Region(4, 4, 4, 4))
        with self.assertRaises(MetricException):
            cnr(img, roi)
        img[4, 0] = 3.0
        per_region = cnr_per_region(img, roi)
        self.assertEqual(per_region[0], 10.0)
        self.assertAlmostEqual(cnr(img, roi), 0.5 * (per_region[0] + per_region[1]), places=12)

    def test_no_contrast(self):
        values = np.array([1.0, 2.0, 1.0, 2.0])
        self.assertEqual(region_cnr(values, values[::-1]), float('-inf'))

    def test_constant_regions(self):
        with self.assertRaises(MetricException):
            cnr(np.ones((8, 8)), self.roi)
        for signal, background in ((0.3, 0.1), (0.7, 0.3), (0.1, 0.7)):
            with self.assertRaises(MetricException):
                region_cnr(np.full(64, signal), np.full(64, background))

    def test_one_constant_region(self):
        signal = np.array([0.6, 0.8] * 32)
        self.assertAlmostEqual(region_cnr(signal, np.full(64, 0.3)), 10.0 * math.log10(0.4 / 0.1), places=10)

    def test_shift_invariant(self):
        rng = np.random.Generator(np.random.Philox(0))
        img = rng.uniform(0, 0.5, size=(8, 8))
        img[:4, :4] += 0.4
        self.assertAlmostEqual(cnr(img + 0.3, self.roi), cnr(img, self.roi), places=10)

    def test_missing_regions(self):
        with self.assertRaises(MetricException):
            cnr(contrast_image(), RoiSpec(signal_regions=[Region(0, 0, 4, 4)]))
        with self.assertRaises(MetricException):
            cnr(contrast_image(), RoiSpec(signal_regions=[Region(6, 0, 4, 4)], background_region=Region(0, 0, 2, 2)))


class EnlTests(unittest.TestCase):

    def setUp(self):
        self.roi = RoiSpec(homogeneous_region=Region(0, 0, 64, 64))

    def test_matches_looks(self):
        img = 0.5 * sample_speckle(64, 64, 4, seed=11)
        self.assertAlmostEqual(enl(img, self.roi), 4.0, delta=0.6)

    def test_constant_region(self):
        self.assertEqual(enl(np.full((64, 64), 0.2), self.roi), float('inf'))
        for value in (0.1, 0.3, 0.7):
            self.assertEqual(enl(np.full((64, 64), value), self.roi), float('inf'))

    def test_scale_invariant(self):
        img = sample_speckle(64, 64, 2, seed=3)
        self.assertAlmostEqual(enl(2.0 * img, self.roi), enl(img, self.roi), places=12)

    def test_missing_region(self):
        with self.assertRaises(MetricException):
            enl(np.ones((4, 4)), RoiSpec())
        with self.assertRaises(MetricException):
            enl(np.ones((4, 4)), self.roi)


class PsnrTests(unittest.TestCase):

    def test_identical(self):
        img = np.linspace(0, 1, 64).reshape(8, 8)
        self.assertEqual(psnr(img, img.copy()), float('inf'))
        self.assertEqual(mean_absolute_deviation(img, img), 0.0)

    def test_constant_offset(self):
        ref = np.full((16, 16), 0.5)
        self.assertAlmostEqual(psnr(ref + 0.1, ref), 20.0, places=10)
        self.assertAlmostEqual(mean_absolute_deviation(ref + 0.1, ref), 0.1, places=12)

    def test_gaussian_noise(self):
        rng = np.random.Generator(np.random.Philox(4))
        ref = np.full((256, 256), 0.5)
        self.assertAlmostEqual(psnr(ref + 0.1 * rng.standard_normal(ref.shape), ref), 20.0, delta=0.1)

    def test_invalid(self):
        with self.assertRaises(MetricException):
            psnr(np.zeros((4, 4)), np.zeros((4, 5)))
        with self.assertRaises(MetricException):
            psnr(np.full((4, 4), np.nan), np.zeros((4, 4)))
        with self.assertRaises(MetricException):
            Region(0, 0, 0, 4)
        with self.assertRaises(MetricException):
            Region(-1, 0, 2, 2)


class EvaluationServiceTests(unittest.TestCase):

    def setUp(self):
        self.folder = tempfile.TemporaryDirectory()
        self.addCleanup(self.folder.cleanup)
        self.config_data = {'evaluation': {'logger': {'directory': self.folder.name}}}
        img = np.full((32, 32), 0.25)
        img[4:12, 4:12] = np.where(np.indices((8, 8)).sum(axis=0) % 2 == 0, 0.75, 1.0)
        img[20:28, 20:28] = np.where(np.indices((8, 8)).sum(axis=0) % 2 == 0, 0.0, 0.5)
        self.img = self.path('img.pgm')
        write_image(self.img, img)
        self.roi = self.path('regions.roi')
        write_roi(self.roi, RoiSpec(signal_regions=[Region(4, 4, 8, 8)], background_region=Region(20, 20, 8, 8),
                                    homogeneous_region=Region(16, 0, 16, 16)))

    def path(self, name):
        return os.path.join(self.folder.name, name)

    def arguments(self, **kwargs):
        arguments = {EvaluationService.CONFIG_IMAGE: self.img,
                     EvaluationService.CONFIG_ROI_FILE: self.roi,
                     EvaluationService.CONFIG_REPORT: self.path('metrics.txt')}
        arguments.update(kwargs)
        return arguments

    def read_report(self):
        with open(self.path('metrics.txt')) as report:
            lines = report.read().splitlines()
        return lines, dict(line.split('=', 1) for line in lines)

    def test_report(self):
        metrics = EvaluationService(self.config_data, self.arguments(ref=self.img,
                                                                     json=self.path('metrics.json'))).evaluate()
        self.assertAlmostEqual(metrics['cnr'], 10.0 * math.log10(0.625 / math.sqrt(0.125 ** 2 + 0.25 ** 2)),
                               places=3)
        self.assertTrue(metrics['enl_infinite'])
        self.assertEqual(metrics['psnr'], float('inf'))

        lines, report = self.read_report()
        self.assertEqual(lines, sorted(lines))
        self.assertEqual(report['enl'], 'inf')
        self.assertEqual(report['enl_infinite'], 'true')
        self.assertEqual(report['psnr'], 'inf')
        self.assertEqual(report['mean_absolute_deviation'], '0.0')
        self.assertEqual(float(report['cnr_region_1']), metrics['cnr'])
        self.assertIn('cnr_formula', report)

        data = read_json(self.path('metrics.json'))
        self.assertIsNone(data['psnr'])
        self.assertTrue(data['psnr_infinite'])
        self.assertEqual(data['image'], self.img)

    def test_without_reference(self):
        metrics = EvaluationService(self.config_data, self.arguments()).evaluate()
        self.assertNotIn('psnr', metrics)
        _, report = self.read_report()
        self.assertNotIn('reference', report)

    def test_regions_without_metric(self):
        write_roi(self.roi, RoiSpec(signal_regions=[Region(4, 4, 8, 8)]))
        with self.assertRaises(MetricException):
            EvaluationService(self.config_data, self.arguments()).evaluate()

    def test_region_outside_image(self):
        write_roi(self.roi, RoiSpec(homogeneous_region=Region(30, 30, 8, 8)))
        with self.assertRaises(MetricException):
            EvaluationService(self.config_data, self.arguments()).evaluate()

    def test_bad_roi_file(self):
        with open(self.roi, 'w') as roi:
            roi.write('speckle 0 0 4 4\n')
        with self.assertRaises(RoiException):
            EvaluationService(self.config_data, self.arguments()).evaluate()


if __name__ == '__main__':
    unittest.main()
