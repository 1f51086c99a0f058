"""Raster and sequence types shared across the package.

Frames, label maps and binary masks are plain numpy arrays:

* ``RgbFrame``   -- ``(H, W, 3)`` ``uint8``
* ``LabelMap``   -- ``(H, W)`` ``uint16``, 0 is background
* ``BinaryMask`` -- ``(H, W)`` ``bool``

A :class:`SequenceBundle` stacks them along a leading time axis and is
read-only once built.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numpy.typing import NDArray

RgbFrame = NDArray[np.uint8]
LabelMap = NDArray[np.uint16]
BinaryMask = NDArray[np.bool_]

LABEL_DTYPE = np.uint16


class ShapeMismatchError(ValueError):
    """Two rasters that must share dimensions do not."""


def _frozen(arr, dtype) -> np.ndarray:
    out = np.asarray(arr, dtype=dtype)
    if out.flags.writeable:
        out = out.copy()
        out.flags.writeable = False
    return out


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[:2] != b.shape[:2]:
        raise ShapeMismatchError(f"raster shapes differ: {a.shape[:2]} vs {b.shape[:2]}")


@dataclass(frozen=True)
class SequenceBundle:
    """Ordered frames with their label maps.

    ``frames`` is ``(n, H, W, 3)`` uint8 and ``masks`` is ``(n, H, W)``.
    Index ``i`` along the first axis is time ``t = i``. When ``object_ids`` is
    omitted the registry is every nonzero label present in ``masks``.
    """

    frames: np.ndarray
    masks: np.ndarray
    object_ids: frozenset[int] = None  # type: ignore[assignment]
    name: str = ""
    _ids_cache: tuple[int, ...] = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        frames = _frozen(self.frames, np.uint8)
        masks = _frozen(self.masks, LABEL_DTYPE)
        if frames.ndim != 4 or frames.shape[-1] != 3:
            raise ValueError(f"frames must be (n, H, W, 3), got {frames.shape}")
        if masks.ndim != 3:
            raise ValueError(f"masks must be (n, H, W), got {masks.shape}")
        if frames.shape[0] < 1:
            raise ValueError("a sequence needs at least one frame")
        if frames.shape[0] != masks.shape[0]:
            raise ValueError(f"{frames.shape[0]} frames but {masks.shape[0]} masks")
        if frames.shape[1:3] != masks.shape[1:3]:
            raise ShapeMismatchError(
                f"frame size {frames.shape[1:3]} differs from mask size {masks.shape[1:3]}"
            )
        present = {int(v) for v in np.unique(masks) if v != 0}
        if self.object_ids is None:
            ids = frozenset(present)
        else:
            ids = frozenset(int(i) for i in self.object_ids)
            if 0 in ids:
                raise ValueError("background id 0 cannot be registered")
            missing = present - ids
            if missing:
                raise ValueError(f"labels {sorted(missing)} are not registered")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "object_ids", ids)
        object.__setattr__(self, "_ids_cache", tuple(sorted(ids)))

    @property
    def n_frames(self) -> int:
        return self.masks.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.masks.shape[1], self.masks.shape[2]

    @property
    def frame_area(self) -> int:
        h, w = self.shape
        return h * w

    @property
    def sorted_ids(self) -> tuple[int, ...]:
        return self._ids_cache

    def with_masks(self, masks: np.ndarray, object_ids: Iterable[int] | None = None) -> "SequenceBundle":
        """Same frames and name, new label maps."""
        ids = self.object_ids if object_ids is None else frozenset(object_ids)
        ids = ids | {int(v) for v in np.unique(masks) if v != 0}
        return SequenceBundle(self.frames, masks, ids, self.name)


def extract_object(labels: LabelMap, object_id: int) -> BinaryMask:
    if object_id <= 0:
        raise ValueError("object id must be positive")
    return labels == object_id


def area(mask: BinaryMask) -> int:
    return int(np.count_nonzero(mask))


def union(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    check_same_shape(a, b)
    return np.logical_or(a, b)


def intersect(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    check_same_shape(a, b)
    return np.logical_and(a, b)


def subtract(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    check_same_shape(a, b)
    return np.logical_and(a, np.logical_not(b))
