"""Padded bounding boxes of tuple sets and their normalized overlap."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import DiscretizationConfig
from .errors import InvalidInputError


@dataclass(frozen=True)
class BoundingBox:
    """Half-open planar box ``[x_min, x_max) x [y_min, y_max)`` in meters."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvalidInputError(f"degenerate box {self}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def contains(self, other: "BoundingBox") -> bool:
        return (
            self.x_min <= other.x_min
            and self.y_min <= other.y_min
            and other.x_max <= self.x_max
            and other.y_max <= self.y_max
        )

    def as_tuple(self):
        return (self.x_min, self.y_min, self.x_max, self.y_max)


def cell_extent(tuples: Iterable):
    """Min/max cell indexes ``(cx_min, cy_min, cx_max, cy_max)`` of a tuple set."""
    it = iter(tuples)
    try:
        x0, y0, _ = next(it)
    except StopIteration:
        raise InvalidInputError("bounding box of an empty tuple set") from None
    xmin = xmax = x0
    ymin = ymax = y0
    for x, y, _ in it:
        if x < xmin:
            xmin = x
        elif x > xmax:
            xmax = x
        if y < ymin:
            ymin = y
        elif y > ymax:
            ymax = y
    return xmin, ymin, xmax, ymax


def bounding_box(tuples, cfg: DiscretizationConfig) -> BoundingBox:
    """Box spanning the lower corners of all cells, padded by one cell edge.

    Accepts a trace, a leak, or any iterable of ``(x, y, t)`` tuples.
    """
    tuples = getattr(tuples, "tuples", tuples)
    cx0, cy0, cx1, cy1 = cell_extent(tuples)
    ox, oy = cfg.origin
    d = cfg.delta_xy
    return BoundingBox(ox + cx0 * d, oy + cy0 * d, ox + cx1 * d + d, oy + cy1 * d + d)


def overlap(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over the smaller box's area; 0 when disjoint."""
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0.0
    return (w * h) / min(a.area, b.area)


def overlap_many(box, boxes: np.ndarray) -> np.ndarray:
    """Vectorized :func:`overlap` of one box against an ``(n, 4)`` array of boxes."""
    if isinstance(box, BoundingBox):
        box = box.as_tuple()
    x0, y0, x1, y1 = box
    w = np.minimum(x1, boxes[:, 2]) - np.maximum(x0, boxes[:, 0])
    h = np.minimum(y1, boxes[:, 3]) - np.maximum(y0, boxes[:, 1])
    inter = np.where((w > 0) & (h > 0), w * h, 0.0)
    areas = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
    return inter / np.minimum((x1 - x0) * (y1 - y0), areas)
