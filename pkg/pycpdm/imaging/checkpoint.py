"""
Checkpoint container of a trained noise predictor.

Layout: 8 byte magic, little endian uint32 format version, little endian uint64 header length, a JSON header
(architecture, schedule, normalization, data domain, tensor table, loss trace) and the tensors as little endian
float32, in header order.
"""
import struct
from collections import OrderedDict

import numpy as np
import simplejson

from pycpdm.diffusion.exceptions import DiffusionException
from pycpdm.diffusion.models import PredictorConfig, LogNormalizer
from pycpdm.diffusion.network import PredictorParams, parameter_shapes
from pycpdm.diffusion.noise_predictor import ConvNoisePredictor, DOMAINS, DOMAIN_LOG
from pycpdm.diffusion.schedule import NoiseSchedule
from pycpdm.imaging.exceptions import CheckpointException, CheckpointVersionException, CheckpointShapeException, \
    CheckpointTruncatedException

CHECKPOINT_MAGIC = b'CPDMCKPT'
CHECKPOINT_VERSION = 1
_PREAMBLE = struct.Struct('<8sIQ')
_PAYLOAD_DTYPE = np.dtype('<f4')


class Checkpoint:

    def __init__(self, config: PredictorConfig, schedule: NoiseSchedule, normalizer: LogNormalizer, tensors,
                 domain: str = DOMAIN_LOG, loss_trace=None):
        """
        :param config: predictor architecture
        :param schedule: noise schedule the predictor was trained with
        :param normalizer: data domain to network range map
        :param tensors: mapping name -> array, stored as float32
        :param domain: 'log' or 'linear'
        :param loss_trace: per-epoch training loss
        """
        if domain not in DOMAINS:
            raise CheckpointException("Unknown data domain '{}'".format(domain))
        self.config = config
        self.schedule = schedule
        self.normalizer = normalizer
        self.domain = domain
        self.tensors = OrderedDict((name, np.asarray(value, dtype=np.float32)) for name, value in tensors.items())
        self.loss_trace = [float(v) for v in (loss_trace or [])]
        expected = parameter_shapes(config)
        if list(expected) != list(self.tensors):
            raise CheckpointShapeException("Tensors {} do not match the architecture {}"
                                           .format(list(self.tensors), list(expected)))
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise CheckpointShapeException("Tensor '{}' has shape {}, the architecture needs {}"
                                               .format(name, self.tensors[name].shape, shape))

    @classmethod
    def from_params(cls, params: PredictorParams, schedule: NoiseSchedule, normalizer: LogNormalizer,
                    domain: str = DOMAIN_LOG):
        return cls(params.config, schedule, normalizer, params.tensors, domain=domain, loss_trace=params.loss_trace)

    def to_params(self) -> PredictorParams:
        return PredictorParams(self.config, OrderedDict((n, v.astype(np.float64)) for n, v in self.tensors.items()),
                               loss_trace=self.loss_trace)

    def to_predictor(self) -> ConvNoisePredictor:
        return ConvNoisePredictor(self.to_params(), normalizer=self.normalizer, domain=self.domain)


def save_checkpoint(path, ckpt: Checkpoint):
    table = []
    offset = 0
    for name, value in ckpt.tensors.items():
        table.append({'name': name, 'shape': list(value.shape), 'offset': offset, 'count': int(value.size)})
        offset += int(value.size)
    header = {
        'format': 'pycpdm-checkpoint',
        'version': CHECKPOINT_VERSION,
        'architecture': ckpt.config.to_dict(),
        'schedule': ckpt.schedule.to_dict(),
        'normalization': ckpt.normalizer.to_dict(),
        'domain': ckpt.domain,
        'tensors': table,
        'loss_trace': ckpt.loss_trace,
    }
    header_bytes = simplejson.dumps(header, sort_keys=True, ignore_nan=True).encode('utf-8')
    with open(path, 'wb') as f:
        f.write(_PREAMBLE.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        for value in ckpt.tensors.values():
            f.write(value.astype(_PAYLOAD_DTYPE).tobytes())


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except OSError as e:
        raise CheckpointException("Cannot read checkpoint '{}': {}".format(path, e))
    if len(data) < _PREAMBLE.size:
        raise CheckpointTruncatedException("Checkpoint '{}' is truncated ({} bytes)".format(path, len(data)))
    magic, version, header_length = _PREAMBLE.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointException("'{}' is not a checkpoint file".format(path))
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionException("Checkpoint '{}' has format version {}, this reader supports version {}"
                                         .format(path, version, CHECKPOINT_VERSION))
    header_end = _PREAMBLE.size + header_length
    if header_end > len(data):
        raise CheckpointTruncatedException("Checkpoint '{}' declares a {} byte header but only {} bytes follow"
                                           .format(path, header_length, len(data) - _PREAMBLE.size))
    try:
        header = simplejson.loads(data[_PREAMBLE.size:header_end].decode('utf-8'))
        config = PredictorConfig.from_dict(header['architecture'])
        schedule = NoiseSchedule.from_dict(header['schedule'])
        normalizer = LogNormalizer.from_dict(header['normalization'])
        table = header['tensors']
        domain = header.get('domain', DOMAIN_LOG)
    except (ValueError, KeyError, TypeError, DiffusionException) as e:
        raise CheckpointException("Malformed checkpoint header in '{}': {}".format(path, e))

    payload = data[header_end:]
    total = sum(int(entry['count']) for entry in table)
    if len(payload) < total * _PAYLOAD_DTYPE.itemsize:
        raise CheckpointTruncatedException("Checkpoint '{}' payload has {} bytes, the header declares {}"
                                           .format(path, len(payload), total * _PAYLOAD_DTYPE.itemsize))
    if len(payload) > total * _PAYLOAD_DTYPE.itemsize:
        raise CheckpointShapeException("Checkpoint '{}' payload has {} bytes, the header declares {}"
                                       .format(path, len(payload), total * _PAYLOAD_DTYPE.itemsize))
    values = np.frombuffer(payload, dtype=_PAYLOAD_DTYPE)
    tensors = OrderedDict()
    for entry in table:
        shape = tuple(int(s) for s in entry['shape'])
        count = int(entry['count'])
        if int(np.prod(shape)) != count:
            raise CheckpointShapeException("Tensor '{}' declares shape {} but {} values"
                                           .format(entry['name'], shape, count))
        offset = int(entry['offset'])
        if offset < 0 or offset + count > values.size:
            raise CheckpointShapeException("Tensor '{}' declares values [{}, {}) outside the {} stored values"
                                           .format(entry['name'], offset, offset + count, values.size))
        tensors[entry['name']] = values[offset:offset + count].reshape(shape).astype(np.float32)
    return Checkpoint(config, schedule, normalizer, tensors, domain=domain, loss_trace=header.get('loss_trace'))
