"""Band-wise histogram equalization to [-1, 1] and band dropping.

Equalization is rank-based (empirical CDF with midranks for ties), computed
per band over the full scene, so patch values are mutually comparable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .geodata import CANONICAL_BANDS, BandedRaster, SceneBundle

KEPT_BANDS = ["B1", "B2", "B3", "B4", "B5", "B6", "B7", "elevation", "slope"]
DROPPED_BANDS = ["BQA", "NDSI", "NDVI", "NDWI"]


class PreprocessError(Exception):
    pass


class NonFiniteInput(PreprocessError):
    pass


class MissingBand(PreprocessError):
    pass


class RangeInvalid(PreprocessError):
    pass


@dataclass
class HistogramReport:
    band: str
    edges: np.ndarray
    counts: np.ndarray


def equalize_band(values: np.ndarray) -> np.ndarray:
    """Map values to [-1, 1] by empirical CDF position.

    A value's position is its zero-based midrank divided by N-1 (0 when N=1);
    output is 2*position - 1. Ties collapse to a single output value.
    """
    values = np.asarray(values)
    if values.size == 0:
        raise NonFiniteInput("empty input")
    if not np.all(np.isfinite(values)):
        raise NonFiniteInput("input contains NaN or Inf")
    n = values.size
    if n == 1:
        return np.zeros_like(values, dtype=np.float32)
    ranks = rankdata(values.ravel(), method="average") - 1.0  # zero-based midranks
    cdf = ranks / (n - 1)
    return (2.0 * cdf - 1.0).reshape(values.shape).astype(np.float32)


def drop_bands(raster: BandedRaster) -> BandedRaster:
    """Project a canonical 13-band raster down to the 9 model input bands."""
    for name in CANONICAL_BANDS:
        if name not in raster.band_names:
            raise MissingBand(name)
    bands = [(name, raster.band(name)) for name in KEPT_BANDS]
    return BandedRaster(raster.width, raster.height, bands, raster.geotransform)


def preprocess_scene(bundle: SceneBundle) -> SceneBundle:
    """Drop the uninformative bands and equalize the rest over the full scene."""
    reduced = drop_bands(bundle.raster)
    bands = [(name, equalize_band(grid)) for name, grid in reduced.bands]
    raster = BandedRaster(reduced.width, reduced.height, bands, reduced.geotransform)
    return SceneBundle(raster=raster, polygons=bundle.polygons, mask=bundle.mask)


def histogram(
    values: np.ndarray, nbins: int, range_: tuple[float, float], band: str = ""
) -> HistogramReport:
    lo, hi = range_
    if not lo < hi:
        raise RangeInvalid(f"lo={lo} must be < hi={hi}")
    if nbins < 1:
        raise RangeInvalid(f"nbins={nbins} must be >= 1")
    values = np.asarray(values).ravel()
    values = values[(values >= lo) & (values <= hi)]
    counts, edges = np.histogram(values, bins=nbins, range=(lo, hi))
    return HistogramReport(band=band, edges=edges, counts=counts)


def write_histograms_csv(reports: list[HistogramReport], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["band", "bin_lo", "bin_hi", "count"])
        for rep in reports:
            for i, count in enumerate(rep.counts):
                writer.writerow([rep.band, rep.edges[i], rep.edges[i + 1], int(count)])
