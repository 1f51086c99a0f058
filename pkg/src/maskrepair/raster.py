"""Pixel-level helpers: components, erosion, hole filling, centroids, histograms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .masks import BinaryMask, RgbFrame, check_same_shape

_STRUCTURE = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


class EmptyMaskError(ValueError):
    """Raised where an operation needs at least one foreground pixel."""


def _structure(connectivity: int) -> np.ndarray:
    try:
        return _STRUCTURE[connectivity]
    except KeyError:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}") from None


def label_components(mask: BinaryMask, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label image with components numbered in scanline order of their first pixel."""
    labels, count = ndimage.label(mask, structure=_structure(connectivity))
    return labels, count


def connected_components(mask: BinaryMask, connectivity: int = 8) -> list[BinaryMask]:
    labels, count = label_components(mask, connectivity)
    return [labels == k for k in range(1, count + 1)]


def component_areas(labels: np.ndarray, count: int) -> np.ndarray:
    """Areas indexed by label; entry 0 is the background count."""
    return np.bincount(labels.ravel(), minlength=count + 1)


def erode(mask: BinaryMask, radius: int) -> BinaryMask:
    """Square-element erosion; pixels outside the raster count as background."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    mask = np.asarray(mask, dtype=bool)
    if radius == 0:
        return mask.copy()
    size = 2 * radius + 1
    return ndimage.binary_erosion(mask, structure=np.ones((size, size), bool), border_value=0)


def remove_small_components(mask: BinaryMask, min_area: int, connectivity: int = 8) -> BinaryMask:
    mask = np.asarray(mask, dtype=bool)
    if min_area <= 0:
        return mask.copy()
    labels, count = label_components(mask, connectivity)
    keep = component_areas(labels, count) >= min_area
    keep[0] = False
    return keep[labels]


def fill_small_holes(mask: BinaryMask, max_hole_area: int) -> BinaryMask:
    """Fill background pockets of at most ``max_hole_area`` pixels.

    Holes are 4-connected background components that do not touch the
    raster border.
    """
    mask = np.asarray(mask, dtype=bool)
    if max_hole_area <= 0:
        return mask.copy()
    labels, count = label_components(~mask, 4)
    if count == 0:
        return mask.copy()
    sizes = component_areas(labels, count)
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    fill = sizes <= max_hole_area
    fill[border] = False
    fill[0] = False
    return mask | fill[labels]


def center_of_mass(mask: BinaryMask) -> tuple[float, float]:
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise EmptyMaskError("centroid of an empty mask is undefined")
    return float(rows.mean()), float(cols.mean())


def shift_mask(mask: BinaryMask, drow: int, dcol: int) -> BinaryMask:
    """Integer translation; pixels shifted off the raster are dropped."""
    h, w = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    if abs(drow) >= h or abs(dcol) >= w:
        return out
    src_r = slice(max(0, -drow), h - max(0, drow))
    dst_r = slice(max(0, drow), h - max(0, -drow))
    src_c = slice(max(0, -dcol), w - max(0, dcol))
    dst_c = slice(max(0, dcol), w - max(0, -dcol))
    out[dst_r, dst_c] = mask[src_r, src_c]
    return out


@dataclass(frozen=True)
class RgbHistogram:
    """Per-channel intensity counts, concatenated R, G, B."""

    bins_per_channel: int
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def histogram_region(frame: RgbFrame, region: BinaryMask, bins_per_channel: int = 32) -> RgbHistogram:
    check_same_shape(frame, region)
    if bins_per_channel < 1 or 256 % bins_per_channel:
        raise ValueError("bins_per_channel must divide 256")
    width = 256 // bins_per_channel
    pixels = frame[np.asarray(region, dtype=bool)]
    buckets = pixels.astype(np.int64) // width
    # offset each channel into its own slice of the concatenated vector
    buckets += np.arange(3) * bins_per_channel
    counts = np.bincount(buckets.ravel(), minlength=3 * bins_per_channel)
    return RgbHistogram(bins_per_channel, counts)


def manhattan_distance(h1: RgbHistogram, h2: RgbHistogram) -> float:
    if h1.bins_per_channel != h2.bins_per_channel:
        raise ValueError(
            f"histogram bin counts differ: {h1.bins_per_channel} vs {h2.bins_per_channel}"
        )
    return float(np.abs(h1.counts.astype(np.int64) - h2.counts.astype(np.int64)).sum())
