"""Region (J) and boundary (F) accuracy, per object and per sequence."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.optimize import linear_sum_assignment

from .masks import BinaryMask, SequenceBundle, check_same_shape

_CROSS = ndimage.generate_binary_structure(2, 1)


def jaccard(pred: BinaryMask, gt: BinaryMask) -> float:
    """Intersection over union; two empty masks agree perfectly."""
    check_same_shape(pred, gt)
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred & gt) / union


def contour(mask: BinaryMask) -> BinaryMask:
    """Foreground pixels with a background 4-neighbour or on the raster edge."""
    mask = np.asarray(mask, dtype=bool)
    interior = ndimage.binary_erosion(mask, structure=_CROSS, border_value=0)
    return mask & ~interior


def default_boundary_tolerance(shape: tuple[int, int]) -> int:
    return math.ceil(0.008 * math.hypot(*shape))


def boundary_f(pred: BinaryMask, gt: BinaryMask, tol: int | None = None) -> float:
    """Contour F-measure with Chebyshev matching tolerance ``tol``."""
    check_same_shape(pred, gt)
    if tol is None:
        tol = default_boundary_tolerance(pred.shape)
    if tol < 0:
        raise ValueError("tol must be non-negative")
    cp, cg = contour(pred), contour(gt)
    n_p, n_g = np.count_nonzero(cp), np.count_nonzero(cg)
    if n_p == 0 and n_g == 0:
        return 1.0
    if n_p == 0 or n_g == 0:
        return 0.0
    square = np.ones((2 * tol + 1, 2 * tol + 1), dtype=bool)
    near_g = ndimage.binary_dilation(cg, structure=square) if tol else cg
    near_p = ndimage.binary_dilation(cp, structure=square) if tol else cp
    precision = np.count_nonzero(cp & near_g) / n_p
    recall = np.count_nonzero(cg & near_p) / n_g
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class ObjectMetrics:
    id: int
    j_mean: float
    f_mean: float
    matched_id: int | None = None

    @property
    def jf(self) -> float:
        return (self.j_mean + self.f_mean) / 2


@dataclass(frozen=True)
class SequenceMetrics:
    name: str
    objects: tuple[ObjectMetrics, ...]

    @property
    def j_mean(self) -> float:
        return float(np.mean([o.j_mean for o in self.objects])) if self.objects else 1.0

    @property
    def f_mean(self) -> float:
        return float(np.mean([o.f_mean for o in self.objects])) if self.objects else 1.0

    @property
    def jf(self) -> float:
        return (self.j_mean + self.f_mean) / 2


def _pair_scores(pred: np.ndarray, gt: np.ndarray, pred_id: int | None, gt_id: int, tol: int | None) -> tuple[float, float]:
    js, fs = [], []
    for p_frame, g_frame in zip(pred, gt):
        p = p_frame == pred_id if pred_id is not None else np.zeros(p_frame.shape, bool)
        g = g_frame == gt_id
        js.append(jaccard(p, g))
        fs.append(boundary_f(p, g, tol))
    return float(np.mean(js)), float(np.mean(fs))


def evaluate_sequence(
    pred: SequenceBundle,
    gt: SequenceBundle,
    matching: str = "hungarian",
    tol: int | None = None,
) -> SequenceMetrics:
    """Average J and F over frames for every ground-truth object.

    With ``matching="hungarian"`` predicted ids are assigned to ground-truth
    ids to maximise the summed J&F; with ``"identity"`` ids are compared
    as-is. Ground-truth objects left without a partner score against an
    empty prediction.
    """
    if pred.n_frames != gt.n_frames:
        raise ValueError(f"frame counts differ: {pred.n_frames} vs {gt.n_frames}")
    if pred.shape != gt.shape:
        raise ValueError(f"frame sizes differ: {pred.shape} vs {gt.shape}")
    gt_ids = gt.sorted_ids
    if matching == "identity":
        results = []
        for g in gt_ids:
            j, f = _pair_scores(pred.masks, gt.masks, g, g, tol)
            results.append(ObjectMetrics(g, j, f, g))
        return SequenceMetrics(gt.name or pred.name, tuple(results))
    if matching != "hungarian":
        raise ValueError(f"unknown matching {matching!r}")

    pred_ids = pred.sorted_ids
    n_g, n_p = len(gt_ids), len(pred_ids)
    pairs = {}
    empty = [_pair_scores(pred.masks, gt.masks, None, g, tol) for g in gt_ids]
    # columns past n_p stand for "no prediction" and are interchangeable
    score = np.zeros((n_g, n_p + n_g))
    for a, g in enumerate(gt_ids):
        for b, p in enumerate(pred_ids):
            pairs[a, b] = _pair_scores(pred.masks, gt.masks, p, g, tol)
            score[a, b] = sum(pairs[a, b]) / 2
        score[a, n_p:] = sum(empty[a]) / 2
    rows, cols = linear_sum_assignment(score, maximize=True) if n_g else ((), ())
    results = []
    for a, b in zip(rows, cols):
        if b < n_p:
            j, f = pairs[a, b]
            results.append(ObjectMetrics(gt_ids[a], j, f, pred_ids[b]))
        else:
            j, f = empty[a]
            results.append(ObjectMetrics(gt_ids[a], j, f, None))
    return SequenceMetrics(gt.name or pred.name, tuple(results))


def global_summary(sequences: list[SequenceMetrics]) -> dict[str, float]:
    """Means over every object of every sequence, as percentages."""
    objs = [o for s in sequences for o in s.objects]
    if not objs:
        return {"J&F": 100.0, "J": 100.0, "F": 100.0}
    j = float(np.mean([o.j_mean for o in objs]))
    f = float(np.mean([o.f_mean for o in objs]))
    return {"J&F": 100 * (j + f) / 2, "J": 100 * j, "F": 100 * f}
