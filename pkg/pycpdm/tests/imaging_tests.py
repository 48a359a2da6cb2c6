import os
import struct
import tempfile
import unittest

import numpy as np
import simplejson

from pycpdm.despeckling.metrics import Region, RoiSpec
from pycpdm.diffusion.models import PredictorConfig, LogNormalizer
from pycpdm.diffusion.network import PredictorParams
from pycpdm.diffusion.noise_predictor import DOMAIN_LINEAR
from pycpdm.diffusion.schedule import linear_beta_schedule
from pycpdm.imaging.checkpoint import Checkpoint, save_checkpoint, load_checkpoint, CHECKPOINT_VERSION
from pycpdm.imaging.exceptions import ImageFormatException, UnsupportedFormatException, CheckpointException, \
    CheckpointVersionException, CheckpointShapeException, CheckpointTruncatedException, PhantomException, \
    RoiException
from pycpdm.imaging.pgm import read_image, write_image
from pycpdm.imaging.phantom import PhantomSpec, LayerSpec, default_phantom_spec, generate_phantom, \
    read_phantom_spec
from pycpdm.imaging.roi import read_roi, write_roi


class ImagingTestCase(unittest.TestCase):

    def setUp(self):
        self._folder = tempfile.TemporaryDirectory()
        self.folder = self._folder.name

    def tearDown(self):
        self._folder.cleanup()

    def path(self, name):
        return os.path.join(self.folder, name)

    def write_bytes(self, name, data):
        with open(self.path(name), 'wb') as f:
            f.write(data)
        return self.path(name)


class PgmTests(ImagingTestCase):

    def test_8bit_ramp(self):
        ramp = bytes(range(256))
        path = self.write_bytes('ramp.pgm', b'P5\n# a ramp\n256 1\n255\n' + ramp)
        img = read_image(path)
        self.assertEqual(img.shape, (1, 256))
        np.testing.assert_array_equal(img[0], np.arange(256) / 255.0)

    def test_16bit_round_trip(self):
        rng = np.random.Generator(np.random.Philox(1))
        img = rng.uniform(0.0, 1.0, size=(37, 23))
        write_image(self.path('img.pgm'), img)
        back = read_image(self.path('img.pgm'))
        self.assertEqual(back.shape, img.shape)
        self.assertLessEqual(float(np.max(np.abs(back - img))), 1.0 / 65535)
        # written levels are read back bit exactly
        write_image(self.path('again.pgm'), back)
        with open(self.path('img.pgm'), 'rb') as first, open(self.path('again.pgm'), 'rb') as second:
            self.assertEqual(first.read(), second.read())

    def test_8bit_round_trip(self):
        img = np.arange(64, dtype=np.float64).reshape(8, 8) / 255.0
        write_image(self.path('img.pgm'), img, bit_depth=8)
        np.testing.assert_array_equal(read_image(self.path('img.pgm')), img)
        with open(self.path('img.pgm'), 'rb') as f:
            self.assertTrue(f.read().startswith(b'P5\n8 8\n255\n'))

    def test_big_endian_samples(self):
        path = self.write_bytes('two.pgm', b'P5 2 1 65535\n' + struct.pack('>HH', 1, 65535))
        np.testing.assert_array_equal(read_image(path), np.array([[1.0 / 65535, 1.0]]))

    def test_rejects_ascii_pgm(self):
        path = self.write_bytes('ascii.pgm', b'P2\n2 2\n255\n0 1 2 3\n')
        with self.assertRaises(UnsupportedFormatException):
            read_image(path)

    def test_malformed_files(self):
        with self.assertRaises(ImageFormatException):
            read_image(self.write_bytes('bad.pgm', b'JUNK'))
        with self.assertRaises(ImageFormatException):
            read_image(self.write_bytes('header.pgm', b'P5\n4 4\n'))
        with self.assertRaises(ImageFormatException):
            read_image(self.write_bytes('short.pgm', b'P5\n4 4\n255\n' + bytes(10)))
        with self.assertRaises(ImageFormatException):
            read_image(self.write_bytes('maxval.pgm', b'P5\n1 1\n70000\n\x00\x00'))
        with self.assertRaises(ImageFormatException):
            read_image(self.path('missing.pgm'))

    def test_write_clips(self):
        write_image(self.path('clip.pgm'), np.array([[-0.5, 2.0]]))
        np.testing.assert_array_equal(read_image(self.path('clip.pgm')), np.array([[0.0, 1.0]]))
        with self.assertRaises(UnsupportedFormatException):
            write_image(self.path('depth.pgm'), np.zeros((2, 2)), bit_depth=12)


class PhantomTests(ImagingTestCase):

    def test_no_layers(self):
        img = generate_phantom(PhantomSpec(width=20, height=10, layers=[], background=0.2))
        np.testing.assert_array_equal(img, np.full((10, 20), 0.2))

    def test_deterministic(self):
        spec = default_phantom_spec(64, 64, seed=3)
        np.testing.assert_array_equal(generate_phantom(spec), generate_phantom(spec))
        self.assertFalse(np.array_equal(generate_phantom(spec), generate_phantom(spec.with_seed(4))))

    def test_default_coverage(self):
        img = generate_phantom(default_phantom_spec())
        self.assertEqual(img.shape, (128, 128))
        self.assertGreaterEqual(float(np.mean(img > 0.5)), 0.10)
        self.assertGreaterEqual(float(np.mean(img < 0.1)), 0.40)
        self.assertGreaterEqual(float(img.min()), 0.0)
        self.assertLessEqual(float(img.max()), 1.0)

    def test_degenerate_geometry(self):
        far = LayerSpec(radius=5, thickness=2, intensity=0.5, center_x=500, center_y=500)
        with self.assertRaises(PhantomException):
            generate_phantom(PhantomSpec(width=32, height=32, layers=[far]))
        with self.assertRaises(PhantomException):
            LayerSpec(radius=10, thickness=2, intensity=1.5, center_x=0, center_y=0)
        with self.assertRaises(PhantomException):
            PhantomSpec(width=0, height=10)

    def test_spec_file(self):
        path = self.write_bytes('spec.yaml', b'width: 48\nheight: 32\nbackground: 0.05\nseed: 2\n'
                                             b'layers:\n  - {radius: 40, thickness: 6, intensity: 0.8, '
                                             b'center_x: 24, center_y: 60}\n')
        spec = read_phantom_spec(path)
        self.assertEqual((spec.width, spec.height, len(spec.layers)), (48, 32, 1))
        img = generate_phantom(spec)
        self.assertEqual(img.shape, (32, 48))
        self.assertAlmostEqual(float(img.max()), 0.8, delta=0.05)
        self.assertAlmostEqual(float(np.median(img)), 0.05, places=12)


class CheckpointTests(ImagingTestCase):

    def setUp(self):
        super(CheckpointTests, self).setUp()
        params = PredictorParams.initialize(PredictorConfig(hidden_channels=(4, 4), embedding_dim=8), seed=1,
                                            zero_final=False)
        params.loss_trace = [0.9, 0.5]
        self.checkpoint = Checkpoint.from_params(params, linear_beta_schedule(), LogNormalizer.for_log_floor(1e-3))
        save_checkpoint(self.path('model.ckpt'), self.checkpoint)
        with open(self.path('model.ckpt'), 'rb') as f:
            self.data = f.read()

    def test_round_trip(self):
        loaded = load_checkpoint(self.path('model.ckpt'))
        self.assertEqual(loaded.config, self.checkpoint.config)
        self.assertEqual(list(loaded.tensors), list(self.checkpoint.tensors))
        for name, value in self.checkpoint.tensors.items():
            self.assertEqual(loaded.tensors[name].dtype, np.float32)
            np.testing.assert_array_equal(loaded.tensors[name], value)
        self.assertEqual(loaded.schedule.steps, 1000)
        np.testing.assert_array_equal(loaded.schedule.betas, self.checkpoint.schedule.betas)
        self.assertEqual(loaded.normalizer.to_dict(), self.checkpoint.normalizer.to_dict())
        self.assertEqual(loaded.domain, 'log')
        self.assertEqual(loaded.loss_trace, [0.9, 0.5])
        predictor = loaded.to_predictor()
        self.assertEqual(predictor.domain, 'log')
        self.assertEqual(predictor.predict(np.zeros((8, 8)), 3).shape, (8, 8))

    def test_saved_twice_is_identical(self):
        save_checkpoint(self.path('copy.ckpt'), load_checkpoint(self.path('model.ckpt')))
        with open(self.path('copy.ckpt'), 'rb') as f:
            self.assertEqual(f.read(), self.data)

    def test_linear_domain(self):
        params = PredictorParams.initialize(PredictorConfig(hidden_channels=(2,), embedding_dim=4))
        ckpt = Checkpoint.from_params(params, linear_beta_schedule(10, 1e-3, 1e-2), LogNormalizer.for_unit_interval(),
                                      domain=DOMAIN_LINEAR)
        save_checkpoint(self.path('linear.ckpt'), ckpt)
        self.assertEqual(load_checkpoint(self.path('linear.ckpt')).domain, DOMAIN_LINEAR)

    def test_corrupted_length(self):
        corrupted = self.data[:12] + struct.pack('<Q', 10 ** 12) + self.data[20:]
        with self.assertRaises(CheckpointTruncatedException):
            load_checkpoint(self.write_bytes('length.ckpt', corrupted))

    def test_truncated_payload(self):
        with self.assertRaises(CheckpointTruncatedException):
            load_checkpoint(self.write_bytes('cut.ckpt', self.data[:-4]))
        with self.assertRaises(CheckpointTruncatedException):
            load_checkpoint(self.write_bytes('tiny.ckpt', self.data[:10]))

    def test_foreign_version(self):
        foreign = self.data[:8] + struct.pack('<I', 7) + self.data[12:]
        with self.assertRaises(CheckpointVersionException) as context:
            load_checkpoint(self.write_bytes('version.ckpt', foreign))
        message = str(context.exception)
        self.assertIn('version 7', message)
        self.assertIn('version {}'.format(CHECKPOINT_VERSION), message)

    def test_shape_mismatch(self):
        with self.assertRaises(CheckpointShapeException):
            load_checkpoint(self.write_bytes('long.ckpt', self.data + bytes(4)))
        tensors = dict(self.checkpoint.tensors)
        tensors['conv0.bias'] = np.zeros(5)
        with self.assertRaises(CheckpointShapeException):
            Checkpoint(self.checkpoint.config, self.checkpoint.schedule, self.checkpoint.normalizer, tensors)

    def test_offset_outside_payload(self):
        header_length = struct.unpack_from('<Q', self.data, 12)[0]
        header = simplejson.loads(self.data[20:20 + header_length].decode('utf-8'))
        header['tensors'][-1]['offset'] += 1000
        header_bytes = simplejson.dumps(header, sort_keys=True).encode('utf-8')
        corrupted = self.data[:12] + struct.pack('<Q', len(header_bytes)) + header_bytes \
            + self.data[20 + header_length:]
        with self.assertRaises(CheckpointShapeException) as context:
            load_checkpoint(self.write_bytes('offset.ckpt', corrupted))
        self.assertIn(header['tensors'][-1]['name'], context.exception.value)

    def test_not_a_checkpoint(self):
        with self.assertRaises(CheckpointException):
            load_checkpoint(self.write_bytes('junk.ckpt', b'NOTACKPT' + self.data[8:]))
        with self.assertRaises(CheckpointException):
            load_checkpoint(self.path('missing.ckpt'))


class RoiTests(ImagingTestCase):

    def test_read(self):
        path = self.write_bytes('roi.txt', b'# kind x y w h\nsignal 1 2 3 4\nsignal 10 10 5 5\n'
                                           b'background 0 20 8 8\n\nhomogeneous 4 4 6 6\n')
        roi = read_roi(path)
        self.assertEqual(roi.signal_regions, [Region(1, 2, 3, 4), Region(10, 10, 5, 5)])
        self.assertEqual(roi.background_region, Region(0, 20, 8, 8))
        self.assertEqual(roi.homogeneous_region, Region(4, 4, 6, 6))

    def test_write_then_read(self):
        roi = RoiSpec([Region(1, 1, 2, 2)], Region(5, 5, 3, 3), None)
        write_roi(self.path('roi.txt'), roi)
        back = read_roi(self.path('roi.txt'))
        self.assertEqual(back.signal_regions, roi.signal_regions)
        self.assertEqual(back.background_region, roi.background_region)
        self.assertIsNone(back.homogeneous_region)

    def test_errors(self):
        with self.assertRaises(RoiException):
            read_roi(self.write_bytes('kind.txt', b'lesion 1 1 2 2\n'))
        with self.assertRaises(RoiException):
            read_roi(self.write_bytes('short.txt', b'signal 1 1 2\n'))
        with self.assertRaises(RoiException):
            read_roi(self.write_bytes('text.txt', b'signal a 1 2 2\n'))
        with self.assertRaises(RoiException):
            read_roi(self.write_bytes('size.txt', b'signal 1 1 0 2\n'))
        with self.assertRaises(RoiException):
            read_roi(self.write_bytes('empty.txt', b'# nothing\n'))
        with self.assertRaises(RoiException):
            read_roi(self.write_bytes('two.txt', b'background 1 1 2 2\nbackground 3 3 2 2\n'))
        with self.assertRaises(RoiException):
            read_roi(self.path('missing.txt'))


if __name__ == '__main__':
    unittest.main()
