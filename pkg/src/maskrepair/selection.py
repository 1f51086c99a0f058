"""Object selection: rank proposals by appearance count plus relative size."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .masks import SequenceBundle

CRITERIA = ("combined", "appearance", "size")


@dataclass(frozen=True)
class SelectionConfig:
    alpha: float = 5.0
    top_k: int = 20
    # "appearance" and "size" rank by a single term (ablation modes)
    criterion: str = "combined"

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")


@dataclass(frozen=True)
class ObjectScore:
    id: int
    appearance_count: int
    relative_size: float
    combined: float


def _pixel_counts(bundle: SequenceBundle) -> np.ndarray:
    """``(n_frames, max_label + 1)`` table of per-frame pixel counts."""
    top = int(bundle.masks.max(initial=0))
    if bundle.sorted_ids:
        top = max(top, bundle.sorted_ids[-1])
    return np.stack([np.bincount(m.ravel(), minlength=top + 1) for m in bundle.masks])


def object_size(bundle: SequenceBundle, object_id: int) -> float:
    """Sum over frames of the fraction of the frame the object covers."""
    counts = np.count_nonzero(bundle.masks == object_id, axis=(1, 2))
    return float(counts.sum() / bundle.frame_area)


def appearance_count(bundle: SequenceBundle, object_id: int) -> int:
    """Number of frames with at least one pixel of the object."""
    return int(np.any(bundle.masks == object_id, axis=(1, 2)).sum())


def score_objects(bundle: SequenceBundle, cfg: SelectionConfig | None = None) -> list[ObjectScore]:
    """Score every registered id, best first.

    Ties on the ranking value go to the larger appearance count, then the
    smaller id.
    """
    cfg = cfg or SelectionConfig()
    table = _pixel_counts(bundle)
    scores = []
    for oid in bundle.sorted_ids:
        col = table[:, oid]
        n_appear = int(np.count_nonzero(col))
        size = float(col.sum() / bundle.frame_area)
        scores.append(ObjectScore(oid, n_appear, size, n_appear + cfg.alpha * size))

    if cfg.criterion == "appearance":
        key = lambda s: (-s.appearance_count, s.id)  # noqa: E731
    elif cfg.criterion == "size":
        key = lambda s: (-s.relative_size, -s.appearance_count, s.id)  # noqa: E731
    else:
        key = lambda s: (-s.combined, -s.appearance_count, s.id)  # noqa: E731
    return sorted(scores, key=key)


def select_top(bundle: SequenceBundle, cfg: SelectionConfig | None = None) -> SequenceBundle:
    """Keep only the ``top_k`` best-scoring objects; everything else becomes background.

    Ids are preserved. Registered ids that never appear are never selected.
    """
    cfg = cfg or SelectionConfig()
    ranked = [s for s in score_objects(bundle, cfg) if s.appearance_count > 0]
    keep = sorted(s.id for s in ranked[: cfg.top_k])
    lut_size = max(int(bundle.masks.max(initial=0)), max(keep, default=0)) + 1
    lut = np.zeros(lut_size, dtype=bundle.masks.dtype)
    lut[keep] = keep
    masks = lut[bundle.masks]
    return SequenceBundle(bundle.frames, masks, frozenset(keep), bundle.name)
