"""Point-in-polygon primitive shared by rasterization and patch sampling.

Even-odd ray casting over one or more rings. Points that fall exactly on a
ring edge count as inside, which removes nondeterminism at pixel boundaries.
"""

from __future__ import annotations

import numpy as np

Ring = list[tuple[float, float]]


def points_in_rings(xs: np.ndarray, ys: np.ndarray, rings: list[Ring]) -> np.ndarray:
    """Vectorized even-odd test of many points against one polygon.

    ``rings`` is the full ring set of a single polygon (outer ring plus any
    holes); crossing parity is accumulated over all of them. Returns a boolean
    array shaped like ``xs``.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    inside = np.zeros(xs.shape, dtype=bool)
    on_edge = np.zeros(xs.shape, dtype=bool)
    for ring in rings:
        pts = np.asarray(ring, dtype=np.float64)
        for i in range(len(pts) - 1):
            x1, y1 = pts[i]
            x2, y2 = pts[i + 1]
            crosses = (y1 > ys) != (y2 > ys)
            if y1 != y2:
                xint = (x2 - x1) * (ys - y1) / (y2 - y1) + x1
                inside ^= crosses & (xs < xint)
            # exact edge membership: zero cross product, inside the bbox
            cross = (x2 - x1) * (ys - y1) - (y2 - y1) * (xs - x1)
            within = (
                (xs >= min(x1, x2)) & (xs <= max(x1, x2))
                & (ys >= min(y1, y2)) & (ys <= max(y1, y2))
            )
            on_edge |= (cross == 0.0) & within
    return inside | on_edge


def point_in_polygon(point: tuple[float, float], rings: list[Ring]) -> bool:
    """Even-odd containment of a single (lon, lat) point; edges count as inside.

    Scalar twin of :func:`points_in_rings` with identical arithmetic, kept in
    plain Python because it sits on the rejection-sampling hot path.
    """
    x = float(point[0])
    y = float(point[1])
    inside = False
    for ring in rings:
        for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
            if (y1 > y) != (y2 > y):
                if x < (x2 - x1) * (y - y1) / (y2 - y1) + x1:
                    inside = not inside
            cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
            if cross == 0.0 and min(x1, x2) <= x <= max(x1, x2) and min(y1, y2) <= y <= max(y1, y2):
                return True
    return inside
