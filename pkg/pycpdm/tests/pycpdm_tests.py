import os
import unittest

from click.testing import CliRunner

import pycpdm
from pycpdm.despeckling.metrics import Region, RoiSpec
from pycpdm.imaging.pgm import read_image
from pycpdm.imaging.roi import write_roi
from pycpdm.pycpdm_cli import cli, main
from pycpdm.toolbox.general import read_json

PACKAGED_CONFIG = os.path.join(os.path.dirname(pycpdm.__file__), 'config', 'cpdm_config.yaml')


def read_bytes(path):
    with open(path, 'rb') as f:
        return f.read()


class PycpdmRunnerTests(unittest.TestCase):

    def setUp(self):
        self.runner = CliRunner()

    def simulate(self, seed, out_clean, out_noisy):
        return self.runner.invoke(cli, ['simulate', '--seed', str(seed), '--m', '4', '--width', '64', '--height', '64',
                                        '--out-clean', out_clean, '--out-noisy', out_noisy])

    def train(self, domain='log'):
        os.makedirs('data')
        for seed in range(3):
            result = self.simulate(seed, os.path.join('data', 'clean-{}.pgm'.format(seed)),
                                   'noisy-{}.pgm'.format(seed))
            self.assertEqual(result.exit_code, 0, result.output)
        return self.runner.invoke(cli, ['train', '--data', 'data', '--out', 'model.ckpt', '--epochs', '2',
                                        '--t', '100', '--beta-end', '0.02', '--width', '4', '--domain', domain,
                                        '--lr', '1e-3', '--loss-trace', 'loss.tsv'])

    def despeckle(self, out, *options):
        return self.runner.invoke(cli, ['despeckle', '--in', 'noisy-0.pgm', '--ckpt', 'model.ckpt',
                                        '--out', out] + list(options))

    def test_simulate(self):
        """
        Test the simulation of a phantom and its speckled observation
        """
        with self.runner.isolated_filesystem():
            result = self.simulate(3, 'clean.pgm', 'noisy.pgm')
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertEqual(read_image('clean.pgm').shape, (64, 64))
            self.assertEqual(read_image('noisy.pgm').shape, (64, 64))
            self.simulate(3, 'clean-again.pgm', 'noisy-again.pgm')
            self.assertEqual(read_bytes('noisy.pgm'), read_bytes('noisy-again.pgm'))
            self.simulate(4, 'clean-other.pgm', 'noisy-other.pgm')
            self.assertNotEqual(read_bytes('noisy.pgm'), read_bytes('noisy-other.pgm'))

    def test_simulate_with_config_file(self):
        with self.runner.isolated_filesystem():
            result = self.runner.invoke(cli, ['simulate', '--config_file', PACKAGED_CONFIG, '--width', '64',
                                              '--height', '64', '--bit-depth', '8', '--out-clean', 'clean.pgm',
                                              '--out-noisy', 'noisy.pgm'])
            self.assertEqual(result.exit_code, 0, result.output)
            with open('clean.pgm', 'rb') as f:
                self.assertTrue(f.read().startswith(b'P5\n64 64\n255\n'))

    def test_pipeline(self):
        """
        Test simulate, train, despeckle and evaluate chained on 64x64 phantoms
        """
        with self.runner.isolated_filesystem():
            result = self.train()
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertTrue(os.path.isfile('model.ckpt'))
            with open('loss.tsv') as trace:
                self.assertEqual(len(trace.read().splitlines()), 3)

            result = self.despeckle('cpdm.pgm', '--trace', 'trace.json', '--newton-tol', '1e-6')
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertEqual(read_image('cpdm.pgm').shape, (64, 64))
            trace = read_json('trace.json')
            self.assertEqual(trace['variant'], 'cpdm')
            self.assertLessEqual(len(trace['steps']), 4)
            self.assertEqual(trace['steps'][0], trace['start_step'])
            self.assertEqual(trace['solver']['fidelity_schedule'], 'annealed')

            result = self.despeckle('cpdm-again.pgm', '--newton-tol', '1e-6')
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertEqual(read_bytes('cpdm.pgm'), read_bytes('cpdm-again.pgm'))

            result = self.despeckle('logdm.pgm', '--variant', 'logdm')
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertNotEqual(read_bytes('cpdm.pgm'), read_bytes('logdm.pgm'))

            result = self.despeckle('constant.pgm', '--fidelity-schedule', 'constant', '--trace', 'constant.json')
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertEqual(set(read_json('constant.json')['fidelity_weights']), {0.2})

            result = self.despeckle('capped.pgm', '--newton-tol', '1e-12', '--newton-max-iter', '1')
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertIn('Newton iteration cap', result.output)

            write_roi('regions.roi', RoiSpec(signal_regions=[Region(24, 24, 16, 16)],
                                             background_region=Region(0, 0, 8, 8),
                                             homogeneous_region=Region(56, 56, 8, 8)))
            result = self.runner.invoke(cli, ['evaluate', '--img', 'cpdm.pgm', '--ref', 'data/clean-0.pgm',
                                              '--roi', 'regions.roi', '--report', 'metrics.txt',
                                              '--json', 'metrics.json'])
            self.assertEqual(result.exit_code, 0, result.output)
            with open('metrics.txt') as report:
                keys = [line.split('=', 1)[0] for line in report.read().splitlines()]
            for key in ('cnr', 'enl', 'psnr', 'mean_absolute_deviation'):
                self.assertIn(key, keys)
            self.assertEqual(read_json('metrics.json')['reference'], 'data/clean-0.pgm')

    def test_linear_checkpoint_variant(self):
        with self.runner.isolated_filesystem():
            result = self.train(domain='linear')
            self.assertEqual(result.exit_code, 0, result.output)
            result = self.despeckle('oddm.pgm', '--variant', 'oddm')
            self.assertEqual(result.exit_code, 0, result.output)
            result = self.despeckle('cpdm.pgm')
            self.assertEqual(result.exit_code, 1)
            self.assertIn('ERROR', result.output)
            self.assertFalse(os.path.exists('cpdm.pgm'))

    def test_missing_checkpoint_option(self):
        with self.runner.isolated_filesystem():
            self.simulate(0, 'clean.pgm', 'noisy-0.pgm')
            result = self.runner.invoke(cli, ['despeckle', '--in', 'noisy-0.pgm', '--out', 'out.pgm'])
            self.assertEqual(result.exit_code, 2)
            self.assertIn('Usage', result.output)
            self.assertIn('--ckpt', result.output)

    def test_invalid_checkpoint(self):
        with self.runner.isolated_filesystem():
            self.simulate(0, 'clean.pgm', 'noisy-0.pgm')
            result = self.runner.invoke(cli, ['despeckle', '--in', 'noisy-0.pgm', '--ckpt', 'clean.pgm',
                                              '--out', 'out.pgm'])
            self.assertEqual(result.exit_code, 1)
            self.assertIn('ERROR', result.output)

    def test_main_exit_codes(self):
        with self.runner.isolated_filesystem():
            self.assertEqual(main(['--version']), 0)
            self.simulate(0, 'clean.pgm', 'noisy-0.pgm')
            self.assertEqual(main(['despeckle', '--in', 'noisy-0.pgm', '--out', 'out.pgm']), 2)
            self.assertEqual(main(['despeckle', '--in', 'noisy-0.pgm', '--ckpt', 'clean.pgm', '--out', 'out.pgm']), 1)
            self.assertEqual(main(['simulate', '--width', '64', '--height', '64', '--out-clean', 'a.pgm',
                                   '--out-noisy', 'b.pgm']), 0)


if __name__ == '__main__':
    unittest.main()
