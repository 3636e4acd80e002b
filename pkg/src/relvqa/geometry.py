"""Deterministic geometry over axis-aligned bounding boxes.

Two consumers: the spatial graph builder (``classify_spatial``) and the
implicit attention's pairwise geometry score (``relative_geometry`` +
``sinusoidal_embed``).

Spatial class codes (stable across versions, they appear in graph dumps):

====  =========================================================
code  meaning for classify_spatial(a, b)
====  =========================================================
0     no relation: centers farther apart than ``far_threshold``
      times the geometric mean of the two box scales
1     a strictly inside b
2     a strictly covers b (b inside a)
3     heavy overlap: IoU >= 0.5 (also coincident centers)
4-11  direction of b's center seen from a's center, in eight
      half-open 45-degree sectors; 4 starts at angle 0 (positive
      x axis, y increasing toward sector 5)
====  =========================================================

Every branch is symmetric by construction: swapping the arguments maps
1 <-> 2, 3 <-> 3, 0 <-> 0 and sector k <-> k+4 (mod 8), exactly, including
boundary angles. All comparisons are arranged multiplicatively so that the
class is invariant under exact translations and uniform scalings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import ConfigError, ValidationError

NO_RELATION = 0
INSIDE = 1
COVER = 2
OVERLAP = 3
FIRST_SECTOR = 4
N_SPATIAL_CLASSES = 11  # codes 1..11; 0 is the absence of a relation

WAVELENGTH_BASE = 1000.0


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner (x, y) and positive extents (w, h)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValidationError(f"degenerate box: w={self.w}, h={self.h} must be positive")

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h


def _strictly_inside(a: BBox, b: BBox) -> bool:
    return a.x > b.x and a.y > b.y and a.x2 < b.x2 and a.y2 < b.y2


def _heavy_overlap(a: BBox, b: BBox) -> bool:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return False
    inter = iw * ih
    union = a.area + b.area - inter
    # IoU >= 0.5 without a division, so integer-valued boxes compare exactly
    return 2.0 * inter >= union


def _sector(dx: float, dy: float) -> int:
    """Index of the half-open 45-degree sector [k*45, (k+1)*45) containing (dx, dy).

    The lower half-plane is handled by reflecting through the origin, which
    makes sector(-dx, -dy) == sector(dx, dy) + 4 (mod 8) exact on floats.
    """
    if dy < 0 or (dy == 0 and dx < 0):
        return (_sector(-dx, -dy) + 4) % 8
    if dy == 0:
        return 0  # dx > 0, angle exactly 0
    if dx > 0:
        return 0 if dy < dx else 1
    return 2 if dy > -dx else 3


def classify_spatial(b_i: BBox, b_j: BBox, far_threshold: float = 4.0) -> int:
    """Spatial relation class of ``b_i`` against ``b_j``.

    Checks run in order: containment, coincident centers, heavy overlap,
    distance pruning, then direction sectors. Containment is checked first,
    so a nested box is ``inside`` regardless of the distance threshold.
    """
    if not far_threshold > 0:
        raise ValidationError(f"far_threshold must be positive, got {far_threshold}")
    if _strictly_inside(b_i, b_j):
        return INSIDE
    if _strictly_inside(b_j, b_i):
        return COVER
    dx = b_j.cx - b_i.cx
    dy = b_j.cy - b_i.cy
    if dx == 0 and dy == 0:
        return OVERLAP
    if _heavy_overlap(b_i, b_j):
        return OVERLAP
    # far iff dist / (area_i * area_j)^(1/4) > threshold, compared as
    # dist^4 > t^4 * area_i * area_j to stay exact and symmetric
    d2 = dx * dx + dy * dy
    t = float(far_threshold)
    if d2 * d2 > (t * t * t * t) * (b_i.area * b_j.area):
        return NO_RELATION
    return FIRST_SECTOR + _sector(dx, dy)


def inverse_spatial_class(code: int) -> int:
    """Class observed from the other endpoint of the same pair."""
    if code == INSIDE:
        return COVER
    if code == COVER:
        return INSIDE
    if code in (NO_RELATION, OVERLAP):
        return code
    return FIRST_SECTOR + (code - FIRST_SECTOR + 4) % 8


def relative_geometry(b_i: BBox, b_j: BBox, eps: float = 1e-3) -> np.ndarray:
    """4-vector (log |dx|/w_i, log |dy|/h_i, log w_j/w_i, log h_j/h_i).

    Offsets below ``eps`` are clamped before the log, which removes the
    singularity for coincident boxes. Each component is computed as a
    difference of logs, so swapping the arguments negates components 3 and 4
    exactly.
    """
    if not eps > 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    dx = max(abs(b_i.x - b_j.x), eps)
    dy = max(abs(b_i.y - b_j.y), eps)
    return np.array(
        [
            math.log(dx) - math.log(b_i.w),
            math.log(dy) - math.log(b_i.h),
            math.log(b_j.w) - math.log(b_i.w),
            math.log(b_j.h) - math.log(b_i.h),
        ]
    )


def sinusoidal_embed(raw: np.ndarray, d_h: int, base: float = WAVELENGTH_BASE) -> np.ndarray:
    """Embed a 4-vector into d_h dims with sin/cos pairs of geometric wavelengths.

    Component c contributes entries sin(c / base^(8t/d_h)), cos(c / base^(8t/d_h))
    for t = 0 .. d_h/8 - 1, laid out component-major with sin before cos.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != (4,):
        raise ValidationError(f"raw geometry feature must be a 4-vector, got shape {raw.shape}")
    if d_h % 8 != 0:
        raise ConfigError(f"d_h must be divisible by 8 to embed 4 components, got {d_h}")
    n_freq = d_h // 8
    t = np.arange(n_freq)
    scaled = raw[:, None] / (base ** (8.0 * t / d_h))[None, :]
    out = np.empty((4, n_freq, 2))
    out[:, :, 0] = np.sin(scaled)
    out[:, :, 1] = np.cos(scaled)
    return out.reshape(d_h)


def pair_geometry_embedding(boxes, d_h: int, eps: float = 1e-3, base: float = WAVELENGTH_BASE) -> np.ndarray:
    """(K*K, d_h) matrix of embedded pair geometry, row i*K+j for the pair (i, j)."""
    k = len(boxes)
    out = np.empty((k * k, d_h))
    for i, bi in enumerate(boxes):
        for j, bj in enumerate(boxes):
            out[i * k + j] = sinusoidal_embed(relative_geometry(bi, bj, eps), d_h, base)
    return out
