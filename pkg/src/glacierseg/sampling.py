"""Glacier-interior patch-center sampling, patch extraction, and splitting.

Centers are rejection-sampled on the raster's pixel grid; a candidate is
accepted when its pixel-center geographic position falls inside some glacier
polygon and the patch window fits fully inside the raster.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .geodata import (
    LabelMask,
    PolygonLayer,
    SceneBundle,
    mask_to_raster,
    pixel_center_lonlat,
    raster_to_mask,
    read_raster,
    write_raster,
    BandedRaster,
    Geotransform,
)
from .geometry import point_in_polygon  # noqa: F401  (re-exported primitive)

ATTEMPTS_PER_CENTER = 10_000


class SamplingError(Exception):
    pass


class NoValidCenter(SamplingError):
    pass


class WindowOutOfBounds(SamplingError):
    pass


class FractionInvalid(SamplingError):
    pass


@dataclass
class PatchSpec:
    id: str
    col: int
    row: int
    size: int
    split: str = "train"


@dataclass
class Patch:
    spec: PatchSpec
    input: np.ndarray  # (channels, size, size) float32
    mask: LabelMask


def _window(spec: PatchSpec) -> tuple[int, int, int, int]:
    half = spec.size // 2
    return (spec.col - half, spec.row - half, spec.col + half, spec.row + half)


def _window_fits(col: int, row: int, size: int, width: int, height: int) -> bool:
    half = size // 2
    return col - half >= 0 and row - half >= 0 and col + half <= width and row + half <= height


def sample_centers(
    polygons: PolygonLayer,
    n: int,
    width: int,
    height: int,
    gt: Geotransform,
    size: int,
    seed: int,
) -> list[PatchSpec]:
    """Draw n patch centers uniformly over pixels whose center lies in a glacier."""
    if n == 0:
        return []
    if not polygons.features:
        raise NoValidCenter("polygon layer is empty")
    rng = np.random.default_rng(seed)
    specs: list[PatchSpec] = []
    budget = ATTEMPTS_PER_CENTER * n
    attempts = 0
    while len(specs) < n:
        if attempts >= budget:
            raise NoValidCenter(f"no valid center after {budget} attempts")
        attempts += 1
        col = int(rng.integers(0, width))
        row = int(rng.integers(0, height))
        if not _window_fits(col, row, size, width, height):
            continue
        lonlat = pixel_center_lonlat(gt, col, row)
        if any(point_in_polygon(lonlat, feat.rings) for feat in polygons.features):
            specs.append(PatchSpec(id=f"patch_{len(specs):04d}", col=col, row=row, size=size))
    return specs


def extract_patch(scene: SceneBundle, spec: PatchSpec) -> Patch:
    """Pure crop of the raster bands and label mask at the spec window."""
    c0, r0, c1, r1 = _window(spec)
    if c0 < 0 or r0 < 0 or c1 > scene.raster.width or r1 > scene.raster.height:
        raise WindowOutOfBounds(
            f"window {(c0, r0, c1, r1)} outside raster "
            f"{scene.raster.width}x{scene.raster.height}"
        )
    channels = np.stack([grid[r0:r1, c0:c1] for _, grid in scene.raster.bands])
    mask = LabelMask(spec.size, spec.size, scene.mask.values[r0:r1, c0:c1].copy())
    return Patch(spec=spec, input=channels.astype(np.float32), mask=mask)


def split_patches(
    specs: list[PatchSpec], test_fraction: float, seed: int
) -> list[PatchSpec]:
    """Assign train/test splits with a deterministic seeded shuffle."""
    if not 0.0 < test_fraction < 1.0:
        raise FractionInvalid(f"test_fraction={test_fraction} must be in (0, 1)")
    if not specs:
        raise FractionInvalid("specs list is empty")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(specs))
    n_test = round(test_fraction * len(specs))
    test_ids = {specs[i].id for i in order[:n_test]}
    out = []
    for spec in specs:
        split = "test" if spec.id in test_ids else "train"
        out.append(PatchSpec(spec.id, spec.col, spec.row, spec.size, split))
    return out


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def write_specs_csv(specs: list[PatchSpec], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "col", "row", "size", "split"])
        for s in specs:
            writer.writerow([s.id, s.col, s.row, s.size, s.split])


def read_specs_csv(path) -> list[PatchSpec]:
    specs = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            specs.append(
                PatchSpec(row["id"], int(row["col"]), int(row["row"]),
                          int(row["size"]), row["split"])
            )
    return specs


def write_patch(patch: Patch, directory, gt: Geotransform) -> None:
    """Persist a patch as <id>_x.grd / <id>_y.grd GLRD1 files."""
    names = [f"ch{i}" for i in range(patch.input.shape[0])]
    bands = list(zip(names, patch.input))
    raster = BandedRaster(patch.spec.size, patch.spec.size, bands, gt)
    write_raster(raster, f"{directory}/{patch.spec.id}_x.grd")
    write_raster(mask_to_raster(patch.mask, gt), f"{directory}/{patch.spec.id}_y.grd")


def read_patch(spec: PatchSpec, directory) -> Patch:
    x = read_raster(f"{directory}/{spec.id}_x.grd")
    y = read_raster(f"{directory}/{spec.id}_y.grd")
    channels = np.stack([grid for _, grid in x.bands])
    return Patch(spec=spec, input=channels, mask=raster_to_mask(y))
