"""Raster / polygon data model, GLRD1 file format, synthetic scenes, rendering.

The GLRD1 raster format: bytes ``GLRD1\\n``, a u32-le header length, a UTF-8
JSON header ``{"width","height","bands":[...],"dtype":"f32le",
"geotransform":[6 numbers]}``, then band-sequential row-major f32-le values.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .geometry import Ring, points_in_rings

MAGIC = b"GLRD1\n"

# canonical 13-band order of the raw scenes
CANONICAL_BANDS = [
    "B1", "B2", "B3", "B4", "B5", "B6", "B7",
    "BQA", "elevation", "NDSI", "NDVI", "NDWI", "slope",
]

CLEAN_ICE = "clean_ice"
DEBRIS = "debris"
LABEL_CODES = {CLEAN_ICE: 1, DEBRIS: 2}

Geotransform = tuple[float, float, float, float, float, float]


class GeodataError(Exception):
    pass


class MagicMismatch(GeodataError):
    pass


class HeaderInvalid(GeodataError):
    pass


class TruncatedPayload(GeodataError):
    pass


class IoFailure(GeodataError):
    pass


class DegenerateGeotransform(GeodataError):
    pass


class ConfigInvalid(GeodataError):
    pass


class UnknownBand(GeodataError):
    pass


@dataclass
class BandedRaster:
    """Named multi-band 2D grid of float32 with an affine geotransform.

    Pixel (col, row) centers map to geographic coordinates through
    lon = a + b*(col+0.5) + c*(row+0.5), lat = d + e*(col+0.5) + f*(row+0.5).
    """

    width: int
    height: int
    bands: list[tuple[str, np.ndarray]]
    geotransform: Geotransform

    def validate(self) -> None:
        names = [n for n, _ in self.bands]
        if len(set(names)) != len(names):
            raise HeaderInvalid("duplicate band names")
        if not self.bands:
            raise HeaderInvalid("raster has no bands")
        for name, grid in self.bands:
            if grid.shape != (self.height, self.width):
                raise HeaderInvalid(
                    f"band {name!r} has shape {grid.shape}, "
                    f"expected {(self.height, self.width)}"
                )
            if not np.all(np.isfinite(grid)):
                raise HeaderInvalid(f"band {name!r} contains non-finite values")

    @property
    def band_names(self) -> list[str]:
        return [n for n, _ in self.bands]

    def band(self, name: str) -> np.ndarray:
        for n, grid in self.bands:
            if n == name:
                return grid
        raise UnknownBand(name)


@dataclass
class PolygonFeature:
    rings: list[Ring]
    label: str


@dataclass
class PolygonLayer:
    features: list[PolygonFeature] = field(default_factory=list)


@dataclass
class LabelMask:
    """Grid of label codes: 0 background, 1 clean ice, 2 debris."""

    width: int
    height: int
    values: np.ndarray  # uint8, (height, width)


@dataclass
class SceneBundle:
    raster: BandedRaster
    polygons: PolygonLayer
    mask: LabelMask


def pixel_center_lonlat(gt: Geotransform, col: float, row: float) -> tuple[float, float]:
    """Geographic position of the center of pixel (col, row)."""
    a, b, c, d, e, f = gt
    x = col + 0.5
    y = row + 0.5
    return (a + b * x + c * y, d + e * x + f * y)


def invert_geotransform(gt: Geotransform) -> Geotransform:
    a, b, c, d, e, f = gt
    det = b * f - c * e
    if det == 0.0:
        raise DegenerateGeotransform("geotransform is not invertible")
    return (a, d, f / det, -c / det, -e / det, b / det)  # packed for lonlat_to_pixel


def lonlat_to_pixel(gt: Geotransform, lon: float, lat: float) -> tuple[float, float]:
    """Continuous pixel-center coordinates (col, row) of a geographic point."""
    a, d, inv_b, inv_c, inv_e, inv_f = invert_geotransform(gt)
    dx = lon - a
    dy = lat - d
    col = inv_b * dx + inv_c * dy - 0.5
    row = inv_e * dx + inv_f * dy - 0.5
    return (col, row)


# ---------------------------------------------------------------------------
# GLRD1 I/O
# ---------------------------------------------------------------------------


def write_raster(raster: BandedRaster, path) -> None:
    raster.validate()
    header = {
        "width": raster.width,
        "height": raster.height,
        "bands": raster.band_names,
        "dtype": "f32le",
        "geotransform": [float(v) for v in raster.geotransform],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", len(header_bytes)))
            fh.write(header_bytes)
            for _, grid in raster.bands:
                fh.write(np.ascontiguousarray(grid, dtype="<f4").tobytes())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_raster(path) -> BandedRaster:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(MAGIC)] != MAGIC:
        raise MagicMismatch(f"bad magic at byte 0: {data[:len(MAGIC)]!r}")
    off = len(MAGIC)
    if len(data) < off + 4:
        raise HeaderInvalid(f"missing header length at byte {off}")
    (header_len,) = struct.unpack_from("<I", data, off)
    off += 4
    if len(data) < off + header_len:
        raise HeaderInvalid(f"header truncated at byte {off}")
    try:
        header = json.loads(data[off : off + header_len].decode("utf-8"))
        width = int(header["width"])
        height = int(header["height"])
        names = list(header["bands"])
        gt = tuple(float(v) for v in header["geotransform"])
        dtype = header["dtype"]
    except (ValueError, KeyError, TypeError) as exc:
        raise HeaderInvalid(f"unparseable header at byte {off}: {exc}") from exc
    if dtype != "f32le" or len(gt) != 6 or not names:
        raise HeaderInvalid(f"unsupported header fields at byte {off}")
    off += header_len
    expected = width * height * len(names) * 4
    if len(data) - off != expected:
        raise TruncatedPayload(
            f"payload at byte {off}: expected {expected} bytes, got {len(data) - off}"
        )
    bands = []
    for i, name in enumerate(names):
        start = off + i * width * height * 4
        grid = np.frombuffer(data, dtype="<f4", count=width * height, offset=start)
        bands.append((name, grid.reshape(height, width).copy()))
    raster = BandedRaster(width=width, height=height, bands=bands, geotransform=gt)
    raster.validate()
    return raster


def mask_to_raster(mask: LabelMask, gt: Geotransform) -> BandedRaster:
    grid = mask.values.astype(np.float32)
    return BandedRaster(mask.width, mask.height, [("mask", grid)], gt)


def raster_to_mask(raster: BandedRaster) -> LabelMask:
    grid = raster.band("mask")
    return LabelMask(raster.width, raster.height, grid.astype(np.uint8))


def write_polygons(layer: PolygonLayer, path) -> None:
    features = []
    for feat in layer.features:
        coords = [[[float(x), float(y)] for x, y in ring] for ring in feat.rings]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": coords},
                "properties": {"label": feat.label},
            }
        )
    with open(path, "w") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh)


def read_polygons(path) -> PolygonLayer:
    with open(path) as fh:
        doc = json.load(fh)
    layer = PolygonLayer()
    for feat in doc["features"]:
        rings = [
            [(float(x), float(y)) for x, y in ring]
            for ring in feat["geometry"]["coordinates"]
        ]
        layer.features.append(PolygonFeature(rings=rings, label=feat["properties"]["label"]))
    return layer


# ---------------------------------------------------------------------------
# Rasterization
# ---------------------------------------------------------------------------


def rasterize_polygons(
    polygons: PolygonLayer, width: int, height: int, gt: Geotransform
) -> LabelMask:
    """Label each pixel by the last-listed feature containing its center."""
    invert_geotransform(gt)  # raises DegenerateGeotransform up front
    a, b, c, d, e, f = gt
    cols = np.arange(width) + 0.5
    rows = np.arange(height) + 0.5
    cc, rr = np.meshgrid(cols, rows)
    lons = a + b * cc + c * rr
    lats = d + e * cc + f * rr
    out = np.zeros((height, width), dtype=np.uint8)
    for feat in polygons.features:
        inside = points_in_rings(lons, lats, feat.rings)
        out[inside] = LABEL_CODES[feat.label]
    return LabelMask(width=width, height=height, values=out)


# ---------------------------------------------------------------------------
# Synthetic scenes
# ---------------------------------------------------------------------------

# per-band display ranges; deliberately on very different scales
BAND_RANGES: dict[str, tuple[float, float]] = {
    "B1": (0.0, 255.0),
    "B2": (0.0, 210.0),
    "B3": (0.0, 180.0),
    "B4": (0.0, 150.0),
    "B5": (0.0, 120.0),
    "B6": (90.0, 170.0),
    "B7": (0.0, 100.0),
    "BQA": (672.0, 684.0),
    "elevation": (3000.0, 7000.0),
    "NDSI": (-1.0, 1.0),
    "NDVI": (-1.0, 1.0),
    "NDWI": (-1.0, 1.0),
    "slope": (0.0, 60.0),
}

# additive signal (as a fraction of the band range) inside each class region,
# so a model has something to learn
_CLASS_GAIN = {
    CLEAN_ICE: {"B1": 0.35, "B2": 0.35, "B3": 0.30, "B4": 0.2, "B5": -0.15,
                "NDSI": 0.4, "NDWI": 0.2, "elevation": 0.25, "slope": -0.1},
    DEBRIS: {"B1": -0.15, "B2": -0.1, "B3": -0.1, "B4": -0.05, "B5": 0.2,
             "B7": 0.25, "NDVI": -0.2, "elevation": 0.15, "slope": 0.25},
}


@dataclass
class SceneConfig:
    width: int = 256
    height: int = 256
    clean_ice_blobs: int = 3
    debris_blobs: int = 2
    noise: float = 0.05
    min_radius_frac: float = 0.06
    max_radius_frac: float = 0.16
    geotransform: Geotransform = (86.0, 1e-3, 0.0, 28.5, 0.0, -1e-3)

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ConfigInvalid("width and height must be positive")
        if self.clean_ice_blobs < 0 or self.debris_blobs < 0:
            raise ConfigInvalid("blob counts must be nonnegative")
        if self.noise < 0:
            raise ConfigInvalid("noise must be nonnegative")
        if not (0 < self.min_radius_frac <= self.max_radius_frac < 0.5):
            raise ConfigInvalid("radius fractions must satisfy 0 < min <= max < 0.5")


def _blob_ring(rng: np.random.Generator, cfg: SceneConfig) -> Ring:
    """Radially perturbed polygon in pixel space, mapped to lon/lat."""
    w, h = cfg.width, cfg.height
    cx = rng.uniform(0.2 * w, 0.8 * w)
    cy = rng.uniform(0.2 * h, 0.8 * h)
    base_r = rng.uniform(cfg.min_radius_frac, cfg.max_radius_frac) * min(w, h)
    nvert = 12
    angles = np.linspace(0.0, 2.0 * math.pi, nvert, endpoint=False)
    angles = angles + rng.uniform(0, 2.0 * math.pi / nvert)
    radii = base_r * rng.uniform(0.6, 1.4, size=nvert)
    ring: Ring = []
    for ang, r in zip(angles, radii):
        col = cx + r * math.cos(ang)
        row = cy + r * math.sin(ang)
        ring.append(pixel_center_lonlat(cfg.geotransform, col - 0.5, row - 0.5))
    ring.append(ring[0])
    return ring


def _smooth_field(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Low-frequency random field in [0, 1] via block-upsampled coarse noise."""
    ch = max(height // 16, 1)
    cw = max(width // 16, 1)
    coarse = rng.random((ch, cw))
    field_ = np.repeat(np.repeat(coarse, -(-height // ch), axis=0),
                       -(-width // cw), axis=1)
    return field_[:height, :width]


def synth_scene(seed: int, config: SceneConfig | None = None) -> SceneBundle:
    """Deterministic synthetic 13-band scene with glacier blobs of both classes."""
    cfg = config or SceneConfig()
    cfg.validate()
    rng = np.random.default_rng(seed)
    layer = PolygonLayer()
    for _ in range(cfg.clean_ice_blobs):
        layer.features.append(PolygonFeature([_blob_ring(rng, cfg)], CLEAN_ICE))
    for _ in range(cfg.debris_blobs):
        layer.features.append(PolygonFeature([_blob_ring(rng, cfg)], DEBRIS))
    mask = rasterize_polygons(layer, cfg.width, cfg.height, cfg.geotransform)

    region = {
        CLEAN_ICE: mask.values == LABEL_CODES[CLEAN_ICE],
        DEBRIS: mask.values == LABEL_CODES[DEBRIS],
    }
    bands = []
    for name in CANONICAL_BANDS:
        lo, hi = BAND_RANGES[name]
        span = hi - lo
        grid = lo + span * (0.2 + 0.5 * _smooth_field(rng, cfg.height, cfg.width))
        for label, sel in region.items():
            gain = _CLASS_GAIN[label].get(name, 0.0)
            grid = np.where(sel, grid + gain * span, grid)
        grid = grid + cfg.noise * span * rng.standard_normal((cfg.height, cfg.width))
        if name == "BQA":  # discrete QA codes, heavy ties on purpose
            frac = np.clip((grid - lo) / span, 0.0, 0.999)
            grid = lo + 4.0 * np.floor(frac * 4.0)
        bands.append((name, grid.astype(np.float32)))
    raster = BandedRaster(cfg.width, cfg.height, bands, cfg.geotransform)
    raster.validate()
    return SceneBundle(raster=raster, polygons=layer, mask=mask)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _to_u8(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    scaled = (values.astype(np.float64) - lo) / (hi - lo) * 255.0
    scaled = np.clip(scaled, 0.0, 255.0)
    return np.floor(scaled + 0.5).clip(0, 255).astype(np.uint8)  # round half up


def render_rgb_png(
    raster: BandedRaster,
    band_names: tuple[str, str, str],
    out,
    ranges: list[tuple[float, float]] | None = None,
) -> None:
    """Render three bands as an 8-bit RGB PNG, each affinely mapped to [0,255]."""
    if ranges is None:
        ranges = [BAND_RANGES.get(n, (0.0, 1.0)) for n in band_names]
    channels = []
    for name, (lo, hi) in zip(band_names, ranges):
        channels.append(_to_u8(raster.band(name), lo, hi))
    img = np.stack(channels, axis=-1)
    Image.fromarray(img, mode="RGB").save(out, format="PNG")
