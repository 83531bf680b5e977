"""Fixed five-crop plan: four corners and one middle, side ratio sigma."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class CropPlan:
    """Five (x, y, w, h) rectangles in normalized [0,1] coordinates."""

    sigma: float
    regions: tuple[tuple[float, float, float, float], ...]

    def __post_init__(self):
        if len(self.regions) != 5:
            raise ValueError("a crop plan has exactly five rectangles")
        for x, y, w, h in self.regions:
            if not (0 <= x and 0 <= y and x + w <= 1 + 1e-9 and y + h <= 1 + 1e-9):
                raise ValueError("crop rectangle outside the unit square")

    def pixel_boxes(self, width: int, height: int):
        """PIL-style (left, upper, right, lower) boxes for an image size."""
        boxes = []
        for x, y, w, h in self.regions:
            left = round(x * width)
            upper = round(y * height)
            right = max(left + 1, round((x + w) * width))
            lower = max(upper + 1, round((y + h) * height))
            boxes.append((left, upper, right, lower))
        return boxes


def crop_plan(sigma: float) -> CropPlan:
    """Corners in reading order (top-left, top-right, bottom-left,
    bottom-right), then the centered middle crop."""
    if not 0.0 < sigma <= 1.0:
        raise ValueError("sigma must lie in (0, 1]")
    s = float(sigma)
    edge = 1.0 - s
    mid = edge / 2.0
    return CropPlan(
        sigma=s,
        regions=(
            (0.0, 0.0, s, s),
            (edge, 0.0, s, s),
            (0.0, edge, s, s),
            (edge, edge, s, s),
            (mid, mid, s, s),
        ),
    )
