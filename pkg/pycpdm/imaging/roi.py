"""
Region of interest files: plain text, one region per line as `kind x y w h`, kind one of signal, background or
homogeneous. Lines starting with '#' are comments.
"""
import os

import pandas as pd

from pycpdm.despeckling.exceptions import MetricException
from pycpdm.despeckling.metrics import Region, RoiSpec
from pycpdm.imaging.exceptions import RoiException

ROI_SIGNAL = 'signal'
ROI_BACKGROUND = 'background'
ROI_HOMOGENEOUS = 'homogeneous'
ROI_KINDS = (ROI_SIGNAL, ROI_BACKGROUND, ROI_HOMOGENEOUS)

_COLUMNS = ['kind', 'x', 'y', 'width', 'height']


def read_roi(path) -> RoiSpec:
    if not os.path.isfile(path):
        raise RoiException("ROI file '{}' not found".format(path))
    try:
        table = pd.read_csv(path, sep=r'\s+', comment='#', header=None, names=_COLUMNS, index_col=False,
                            dtype={'kind': str})
    except pd.errors.EmptyDataError:
        raise RoiException("ROI file '{}' holds no regions".format(path))
    except (ValueError, pd.errors.ParserError) as e:
        raise RoiException("Malformed ROI file '{}': {}".format(path, e))
    if table.empty:
        raise RoiException("ROI file '{}' holds no regions".format(path))
    for column in _COLUMNS[1:]:
        table[column] = pd.to_numeric(table[column], errors='coerce')
    if table[_COLUMNS[1:]].isnull().values.any():
        raise RoiException("Every ROI line needs 'kind x y w h' in '{}'".format(path))

    unknown = sorted(set(table['kind']) - set(ROI_KINDS))
    if unknown:
        raise RoiException("Unknown ROI kinds {} in '{}', use one of {}".format(unknown, path, ROI_KINDS))
    try:
        regions = [(row.kind, Region(row.x, row.y, row.width, row.height)) for row in table.itertuples(index=False)]
    except MetricException as e:
        raise RoiException("Invalid region in '{}': {}".format(path, e))

    signal = [region for kind, region in regions if kind == ROI_SIGNAL]
    backgrounds = [region for kind, region in regions if kind == ROI_BACKGROUND]
    homogeneous = [region for kind, region in regions if kind == ROI_HOMOGENEOUS]
    if len(backgrounds) > 1 or len(homogeneous) > 1:
        raise RoiException("At most one background and one homogeneous region are allowed in '{}'".format(path))
    return RoiSpec(signal_regions=signal, background_region=backgrounds[0] if backgrounds else None,
                   homogeneous_region=homogeneous[0] if homogeneous else None)


def write_roi(path, roi: RoiSpec):
    rows = [[ROI_SIGNAL] + region.to_list() for region in roi.signal_regions]
    if roi.background_region is not None:
        rows.append([ROI_BACKGROUND] + roi.background_region.to_list())
    if roi.homogeneous_region is not None:
        rows.append([ROI_HOMOGENEOUS] + roi.homogeneous_region.to_list())
    pd.DataFrame(rows, columns=_COLUMNS).to_csv(path, sep=' ', header=False, index=False)
