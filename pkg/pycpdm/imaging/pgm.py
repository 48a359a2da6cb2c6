"""
Binary PGM (P5) reader and writer. Samples are mapped linearly between [0, maxval] and [0, 1]; 16-bit samples
are big endian as Netpbm defines them.
"""
import os

import numpy as np

from pycpdm.imaging.exceptions import ImageFormatException, UnsupportedFormatException

PGM_MAGIC = b'P5'
_WHITESPACE = b' \t\n\r\x0b\x0c'


def _read_header(data: bytes, path):
    """
    Parse magic, width, height and maxval, skipping comments.
    :return: (width, height, maxval, offset of the raster)
    """
    if len(data) < 2:
        raise ImageFormatException("'{}' is too short to be a PGM file".format(path))
    magic = data[:2]
    if magic in (b'P1', b'P2', b'P3', b'P4', b'P6', b'P7'):
        raise UnsupportedFormatException("'{}' is a {} Netpbm file, only binary PGM (P5) is supported"
                                         .format(path, magic.decode('ascii')))
    if magic != PGM_MAGIC:
        raise ImageFormatException("'{}' is not a PGM file".format(path))
    tokens = []
    position = 2
    while len(tokens) < 3:
        if position >= len(data):
            raise ImageFormatException("Truncated PGM header in '{}'".format(path))
        char = data[position:position + 1]
        if char == b'#':
            end = data.find(b'\n', position)
            position = len(data) if end < 0 else end + 1
        elif char in _WHITESPACE:
            position += 1
        else:
            start = position
            while position < len(data) and data[position:position + 1] not in _WHITESPACE \
                    and data[position:position + 1] != b'#':
                position += 1
            tokens.append(data[start:position])
    if position >= len(data) or data[position:position + 1] not in _WHITESPACE:
        raise ImageFormatException("Missing whitespace after the PGM header in '{}'".format(path))
    position += 1
    try:
        width, height, maxval = (int(token) for token in tokens)
    except ValueError:
        raise ImageFormatException("Malformed PGM header {} in '{}'".format(tokens, path))
    if width < 1 or height < 1:
        raise ImageFormatException("Invalid PGM size {}x{} in '{}'".format(width, height, path))
    if not 0 < maxval < 65536:
        raise ImageFormatException("Invalid PGM maxval {} in '{}'".format(maxval, path))
    return width, height, maxval, position


def read_image(path) -> np.ndarray:
    """
    Read a binary PGM file
    :param path: file path
    :return: float64 array (height, width) with values in [0, 1]
    """
    if not os.path.isfile(path):
        raise ImageFormatException("Image file '{}' not found".format(path))
    with open(path, 'rb') as f:
        data = f.read()
    width, height, maxval, offset = _read_header(data, path)
    dtype = np.dtype('>u2') if maxval > 255 else np.dtype('u1')
    expected = width * height * dtype.itemsize
    if len(data) - offset < expected:
        raise ImageFormatException("Truncated PGM raster in '{}': expected {} bytes, found {}"
                                   .format(path, expected, len(data) - offset))
    samples = np.frombuffer(data, dtype=dtype, count=width * height, offset=offset).reshape(height, width)
    if samples.max() > maxval:
        raise ImageFormatException("PGM sample above maxval {} in '{}'".format(maxval, path))
    return samples.astype(np.float64) / maxval


def write_image(path, img, bit_depth: int = 16):
    """
    Write a [0, 1] image as binary PGM; values are clipped and rounded to the nearest level.
    :param path: output path
    :param img: 2D array
    :param bit_depth: 8 or 16
    """
    if bit_depth not in (8, 16):
        raise UnsupportedFormatException("PGM bit depth must be 8 or 16, got {}".format(bit_depth))
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ImageFormatException("Only non empty 2D images can be written, got shape {}".format(img.shape))
    if not np.all(np.isfinite(img)):
        raise ImageFormatException("Cannot write an image with non finite values")
    maxval = (1 << bit_depth) - 1
    dtype = np.dtype('>u2') if bit_depth == 16 else np.dtype('u1')
    samples = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(dtype)
    height, width = img.shape
    with open(path, 'wb') as f:
        f.write(b'P5\n%d %d\n%d\n' % (width, height, maxval))
        f.write(samples.tobytes())
