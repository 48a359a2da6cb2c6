"""
Synthetic clean images standing in for anterior segment scans: bright curved bands (cornea, lens capsules, iris)
drawn as circular arcs over a dark background. The geometry is qualitative only.
"""
import numpy as np

from pycpdm.imaging.exceptions import PhantomException
from pycpdm.toolbox.general import read_yaml_from_file

# width, in pixels, of the soft transition at band borders
BAND_EDGE = 1.5

# (center_x, center_y, radius, thickness) as fractions of the width, intensity
_DEFAULT_LAYERS = (
    (0.5, 1.50, 1.30, 0.080, 0.85),
    (0.5, 1.50, 1.22, 0.025, 0.55),
    (0.5, 1.30, 0.90, 0.060, 0.75),
    (0.5, -0.30, 1.00, 0.060, 0.70),
    (0.5, 0.90, 0.45, 0.040, 0.45),
)


class LayerSpec:

    def __init__(self, radius: float, thickness: float, intensity: float, center_x: float, center_y: float,
                 gradient: float = 0.2):
        """
        A circular arc band, in pixel units
        :param radius: radius of the arc (curvature 1 / radius)
        :param thickness: band thickness
        :param intensity: peak intensity in [0, 1]
        :param center_x: arc center column (may lie outside the image)
        :param center_y: arc center row (may lie outside the image)
        :param gradient: relative intensity drop from the center column to the image border, in [0, 1)
        """
        if not radius > 0 or not thickness > 0:
            raise PhantomException("Layer radius and thickness must be > 0, got {} and {}".format(radius, thickness))
        if not 0 <= intensity <= 1:
            raise PhantomException("Layer intensity must be in [0, 1], got {}".format(intensity))
        if not 0 <= gradient < 1:
            raise PhantomException("Layer gradient must be in [0, 1), got {}".format(gradient))
        self.radius = float(radius)
        self.thickness = float(thickness)
        self.intensity = float(intensity)
        self.center_x = float(center_x)
        self.center_y = float(center_y)
        self.gradient = float(gradient)

    def to_dict(self):
        return {'radius': self.radius, 'thickness': self.thickness, 'intensity': self.intensity,
                'center_x': self.center_x, 'center_y': self.center_y, 'gradient': self.gradient}


class PhantomSpec:

    def __init__(self, width: int = 128, height: int = 128, layers=None, background: float = 0.03, seed: int = 0,
                 jitter: float = 1.5):
        """
        :param width: columns
        :param height: rows
        :param layers: list of LayerSpec
        :param background: background intensity in [0, 1]
        :param seed: seed of the geometric jitter
        :param jitter: maximum shift, in pixels, applied to centers and radii
        """
        if int(width) != width or int(height) != height or width < 1 or height < 1:
            raise PhantomException("Phantom size must be positive integers, got {}x{}".format(width, height))
        if not 0 <= background <= 1:
            raise PhantomException("Background intensity must be in [0, 1], got {}".format(background))
        if jitter < 0:
            raise PhantomException("Jitter must be >= 0, got {}".format(jitter))
        self.width = int(width)
        self.height = int(height)
        self.layers = list(layers or [])
        self.background = float(background)
        self.seed = int(seed)
        self.jitter = float(jitter)

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        width = int(data.get('width', 128))
        height = int(data.get('height', 128))
        if 'layers' in data:
            layers = []
            for layer in data['layers'] or []:
                layer = dict(layer)
                layer.setdefault('center_x', 0.5 * width)
                layer.setdefault('center_y', 0.5 * height)
                layers.append(LayerSpec(**layer))
        else:
            layers = default_layers(width)
        return cls(width=width, height=height, layers=layers, background=data.get('background', 0.03),
                   seed=data.get('seed', 0), jitter=data.get('jitter', 1.5))

    def with_seed(self, seed: int):
        return PhantomSpec(self.width, self.height, self.layers, self.background, seed, self.jitter)


def default_layers(width: int = 128):
    return [LayerSpec(radius=r * width, thickness=th * width, intensity=i, center_x=cx * width, center_y=cy * width)
            for cx, cy, r, th, i in _DEFAULT_LAYERS]


def default_phantom_spec(width: int = 128, height: int = 128, seed: int = 0) -> PhantomSpec:
    """
    Five layer anterior segment like phantom
    """
    return PhantomSpec(width=width, height=height, layers=default_layers(width), seed=seed)


def read_phantom_spec(path) -> PhantomSpec:
    return PhantomSpec.from_dict(read_yaml_from_file(path))


def _smoothstep(values):
    values = np.clip(values, 0.0, 1.0)
    return values * values * (3.0 - 2.0 * values)


def generate_phantom(spec: PhantomSpec) -> np.ndarray:
    """
    Render the phantom
    :param spec: phantom description
    :return: float64 array (height, width) in [0, 1]
    """
    rng = np.random.Generator(np.random.Philox(spec.seed))
    rows, cols = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    img = np.full((spec.height, spec.width), spec.background)
    for index, layer in enumerate(spec.layers):
        dx, dy, dr = rng.uniform(-spec.jitter, spec.jitter, size=3)
        distance = np.hypot(cols - (layer.center_x + dx), rows - (layer.center_y + dy))
        offset = np.abs(distance - max(layer.radius + dr, 0.5 * layer.thickness))
        weight = _smoothstep((0.5 * layer.thickness - offset) / BAND_EDGE + 0.5)
        if weight.max() < 0.5:
            raise PhantomException("Layer {} does not intersect the {}x{} image".format(index, spec.width,
                                                                                        spec.height))
        falloff = 1.0 - layer.gradient * np.minimum(np.abs(cols - layer.center_x) / (0.5 * spec.width), 1.0)
        img = np.maximum(img, weight * layer.intensity * falloff)
    return np.clip(img, 0.0, 1.0)
