"""Temporal consistency repair of per-object masks.

Three stages run per object and per pass:

1. detection -- sliding-window Mask-over-Union votes flag frames whose mask
   is abnormally small, minus frames that look like a zoom;
2. refinement -- flagged frames whose missing region changes colour between
   neighbouring frames are treated as occlusions and left alone;
3. correction -- the neighbouring mask is projected with dense flow and the
   missing region is transplanted into the deficient frame.

Passes repeat until nothing changes or ``max_passes`` is hit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .flow import FlowField, FlowParams, estimate_flow, negate_flow, warp_mask
from .masks import BinaryMask, SequenceBundle, area, check_same_shape
from .raster import (
    center_of_mass,
    erode,
    fill_small_holes,
    histogram_region,
    label_components,
    manhattan_distance,
    remove_small_components,
    shift_mask,
)


class Status(str, Enum):
    DETECTED = "detected"
    REFINED_AWAY_OCCLUSION = "refined_away_occlusion"
    REFINED_AWAY_ZOOM = "refined_away_zoom"
    CORRECTED = "corrected"
    UNCORRECTABLE = "uncorrectable"


VOTE_REFERENCES = ("max", "mean")


@dataclass(frozen=True)
class TcConfig:
    window: int = 5
    occlusion_tau_min: float = 0.4
    occlusion_tau_max: float = 0.7
    size_ref: float = 0.01
    zoom_centroid_tol: float = 0.2
    min_component_frac: float = 0.0005
    minor_add_frac: float = 0.05
    overseg_cover_frac: float = 0.6
    erosion_radius: int = 1
    max_passes: int | None = None  # None: one pass per frame
    bins_per_channel: int = 32
    refine: bool = True
    use_all_objects: bool = True
    vote_reference: str = "max"
    flow: FlowParams = field(default_factory=FlowParams)

    def __post_init__(self) -> None:
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be odd and >= 3")
        if not 0 <= self.occlusion_tau_min <= self.occlusion_tau_max <= 1:
            raise ValueError("need 0 <= tau_min <= tau_max <= 1")
        if not 0 < self.overseg_cover_frac <= 1:
            raise ValueError("overseg_cover_frac must be in (0, 1]")
        if self.max_passes is not None and self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if self.erosion_radius < 0:
            raise ValueError("erosion_radius must be non-negative")
        if self.size_ref <= 0:
            raise ValueError("size_ref must be positive")
        if self.vote_reference not in VOTE_REFERENCES:
            raise ValueError(f"vote_reference must be one of {VOTE_REFERENCES}")


@dataclass(frozen=True)
class ReportEntry:
    object_id: int
    frame: int
    status: Status
    pass_index: int
    details: str = ""

    def to_record(self) -> dict:
        return {
            "object_id": self.object_id,
            "frame": self.frame,
            "status": self.status.value,
            "pass": self.pass_index,
            "details": self.details,
        }


@dataclass
class InconsistencyReport:
    entries: list[ReportEntry] = field(default_factory=list)
    passes: int = 0
    converged: bool = True

    def with_status(self, status: Status) -> list[ReportEntry]:
        return [e for e in self.entries if e.status == status]

    def corrected(self) -> set[tuple[int, int]]:
        return {(e.object_id, e.frame) for e in self.with_status(Status.CORRECTED)}

    def to_records(self) -> list[dict]:
        return [e.to_record() for e in self.entries]

    def to_text(self) -> str:
        lines = [
            f"pass={e.pass_index} object={e.object_id} frame={e.frame} status={e.status.value}"
            + (f" {e.details}" if e.details else "")
            for e in self.entries
        ]
        return "\n".join(lines)


class UndefinedMouError(ValueError):
    """The object is absent from every frame of the window."""


# -- detection ---------------------------------------------------------------


def _window_starts(n: int, window: int) -> range:
    return range(0, max(n - window, 0) + 1)


def _mou_window(obj: np.ndarray, areas: np.ndarray, t_s: int, window: int) -> np.ndarray | None:
    union_area = np.count_nonzero(obj[t_s : t_s + window].any(axis=0))
    if union_area == 0:
        return None
    return areas[t_s : t_s + window] / union_area


def mou(bundle: SequenceBundle, object_id: int, t: int, t_s: int, window: int) -> float:
    """Mask area at ``t`` over the area of the union across ``[t_s, t_s + window)``."""
    if not t_s <= t < t_s + window:
        raise ValueError("t must lie inside the window")
    if t_s < 0 or t_s + window > bundle.n_frames:
        raise ValueError("window runs past the sequence")
    obj = bundle.masks[t_s : t_s + window] == object_id
    union_area = np.count_nonzero(obj.any(axis=0))
    if union_area == 0:
        raise UndefinedMouError(f"object {object_id} absent from frames {t_s}..{t_s + window - 1}")
    return np.count_nonzero(obj[t - t_s]) / union_area


def _vote_flags(obj: np.ndarray, cfg: TcConfig) -> set[int]:
    n = obj.shape[0]
    window = min(cfg.window, n)
    if n < 2:
        return set()
    areas = np.count_nonzero(obj, axis=(1, 2)).astype(np.float64)
    votes = np.zeros(n, dtype=int)
    seen = np.zeros(n, dtype=int)
    for t_s in _window_starts(n, window):
        seen[t_s : t_s + window] += 1
        values = _mou_window(obj, areas, t_s, window)
        if values is None:
            continue
        sigma = values.std()
        below_mean = (values.mean() - values) > sigma
        if cfg.vote_reference == "max":
            # frames where the object vanished entirely still need to be
            # outliers against the mean, or a one-frame blob would pull
            # every neighbour into the repair
            present = areas[t_s : t_s + window] > 0
            vote = np.where(present, (values.max() - values) > sigma, below_mean)
        else:
            vote = below_mean
        votes[t_s : t_s + window] += vote
    return {int(t) for t in np.nonzero(2 * votes > seen)[0]}


def _looks_like_zoom(obj: np.ndarray, t: int, cfg: TcConfig) -> bool:
    n = obj.shape[0]
    window = min(cfg.window, n)
    t_s = min(max(t - window // 2, 0), n - window)
    span = obj[t_s : t_s + window]
    areas = np.count_nonzero(span, axis=(1, 2))
    if np.any(areas == 0):
        return False
    steps = np.diff(areas)
    if not (np.all(steps >= 0) or np.all(steps <= 0)):
        return False
    centroids = np.array([center_of_mass(m) for m in span])
    moves = np.hypot(*np.diff(centroids, axis=0).T)
    return bool(np.all(moves < cfg.zoom_centroid_tol * math.sqrt(areas.mean())))


def _detect(obj: np.ndarray, cfg: TcConfig) -> tuple[set[int], set[int]]:
    flagged = _vote_flags(obj, cfg)
    zoomed = {t for t in flagged if _looks_like_zoom(obj, t, cfg)}
    return flagged - zoomed, zoomed


def detect_inconsistent(bundle: SequenceBundle, object_id: int, cfg: TcConfig | None = None) -> set[int]:
    """Frames where the object's mask is inconsistent with its window neighbours.

    Each window containing ``t`` votes for ``t`` when the frame's MoU falls
    below the window reference (max or mean MoU) by more than the window's
    MoU standard deviation; a majority of those windows flags the frame.
    Under the max reference, frames where the object is absent are judged
    against the mean instead.
    Flags that look like a zoom (monotone areas, near-fixed centroid) are
    dropped.
    """
    cfg = cfg or TcConfig()
    flagged, _ = _detect(bundle.masks == object_id, cfg)
    return flagged


# -- refinement ----------------------------------------------------------------


def difference_region(mask_a: BinaryMask, mask_b: BinaryMask) -> BinaryMask:
    """Pixels of the larger mask not covered by the smaller one (ties: ``mask_a`` is larger)."""
    check_same_shape(mask_a, mask_b)
    large, small = (mask_a, mask_b) if area(mask_a) >= area(mask_b) else (mask_b, mask_a)
    return large & ~(large & small)


@dataclass(frozen=True)
class OcclusionResult:
    occluded: bool
    mdh_norm: float
    threshold: float


def occlusion_threshold(object_area: int, frame_area: int, cfg: TcConfig) -> float:
    """Tolerant for small objects, strict for large ones."""
    rel = min(1.0, object_area / (cfg.size_ref * frame_area))
    return cfg.occlusion_tau_max - (cfg.occlusion_tau_max - cfg.occlusion_tau_min) * rel


def occlusion_check(
    frame_t: np.ndarray,
    frame_adj: np.ndarray,
    mask_t: BinaryMask,
    mask_adj: BinaryMask,
    cfg: TcConfig | None = None,
) -> OcclusionResult:
    cfg = cfg or TcConfig()
    if area(mask_t) >= area(mask_adj):
        large, small = mask_t, mask_adj
    else:
        large, small = mask_adj, mask_t
    if area(small) > 0:
        (lr, lc), (sr, sc) = center_of_mass(large), center_of_mass(small)
        small = shift_mask(small, round(lr - sr), round(lc - sc))
    region = large & ~small
    threshold = occlusion_threshold(area(large), large.size, cfg)
    region_area = area(region)
    if region_area == 0:
        return OcclusionResult(False, 0.0, threshold)
    mdh = manhattan_distance(
        histogram_region(frame_t, region, cfg.bins_per_channel),
        histogram_region(frame_adj, region, cfg.bins_per_channel),
    )
    norm = mdh / (6.0 * region_area)
    return OcclusionResult(norm > threshold, norm, threshold)


# -- correction ----------------------------------------------------------------


@dataclass
class _PairOutcome:
    frame: int | None = None  # frame whose labels changed
    added: int = 0
    merged: tuple[int, ...] = ()
    relabeled: int = 0
    uncorrectable: bool = False

    def describe(self, t: int, t_adj: int) -> str:
        parts = [f"pair={t}-{t_adj}", f"added={self.added}"]
        if self.merged:
            parts.append("merged_raw=" + ",".join(map(str, self.merged)))
        if self.relabeled:
            parts.append(f"relabeled={self.relabeled}")
        return " ".join(parts)


class _FlowCache:
    def __init__(self, frames: np.ndarray, params: FlowParams):
        self._frames = frames
        self._params = params
        self._cache: dict[tuple[int, int], FlowField] = {}

    def __call__(self, t: int, t_adj: int) -> FlowField:
        key = (t, t_adj)
        if key not in self._cache:
            self._cache[key] = estimate_flow(self._frames[t], self._frames[t_adj], self._params)
        return self._cache[key]


def _id_mdh(frames: np.ndarray, mask_a: BinaryMask, a: int, mask_b: BinaryMask, b: int, bins: int) -> float:
    return manhattan_distance(histogram_region(frames[a], mask_a, bins), histogram_region(frames[b], mask_b, bins))


def _reliable_components(missing: BinaryMask, frame_area: int, cfg: TcConfig) -> tuple[np.ndarray, int]:
    """Drop specks and holes, then keep components that survive erosion."""
    bound = max(1, math.ceil(cfg.min_component_frac * frame_area))
    cleaned = remove_small_components(missing, bound)
    cleaned = fill_small_holes(cleaned, bound)
    core = erode(cleaned, cfg.erosion_radius)
    labels, count = label_components(cleaned, 8)
    keep = np.zeros(count + 1, dtype=bool)
    keep[np.unique(labels[core])] = True
    keep[0] = False
    labels = np.where(keep[labels], labels, 0)
    return labels, count


def _correct_pair(
    frames: np.ndarray,
    labels: np.ndarray,
    raw: np.ndarray | None,
    oid: int,
    t: int,
    t_adj: int,
    cfg: TcConfig,
    flows: _FlowCache,
) -> _PairOutcome:
    """Repair one object between two adjacent frames, mutating ``labels`` in place."""
    out = _PairOutcome()
    mask_t = labels[t] == oid
    mask_a = labels[t_adj] == oid
    area_t, area_a = area(mask_t), area(mask_a)
    if area_t == area_a:
        return out
    flow = flows(t, t_adj)
    if flow.low_confidence:
        out.uncorrectable = True
        return out

    if area_a < area_t:
        deficient, other = t_adj, t
        projected = warp_mask(mask_t, flow)
        own, other_mask = mask_a, mask_t
    else:
        deficient, other = t, t_adj
        projected = warp_mask(mask_a, negate_flow(flow))
        own, other_mask = mask_t, mask_a
    union_f = own | projected
    inter_f = own & projected
    diff_f = union_f & ~inter_f
    missing = diff_f & ~own

    frame_area = own.size
    larger = max(area_t, area_a)
    comp_labels, count = _reliable_components(missing, frame_area, cfg)
    target = labels[deficient]
    bins = cfg.bins_per_channel
    merged: list[int] = []
    for k in range(1, count + 1):
        comp = comp_labels == k
        size = area(comp)
        if size == 0 or size < cfg.minor_add_frac * larger:
            continue
        candidate = comp
        if cfg.use_all_objects and raw is not None:
            raw_d = raw[deficient]
            hits = []
            for b in np.unique(raw_d[comp]):
                b = int(b)
                if b in (0, oid):
                    continue
                raw_b = raw_d == b
                if area(comp & raw_b) >= cfg.overseg_cover_frac * area(raw_b):
                    hits.append(b)
            if hits:
                # the raw proposal is pixel-accurate where the flow projection is not
                candidate = np.isin(raw_d, hits)
                merged.extend(hits)
        current = labels[deficient] == oid
        free = candidate & (target == 0)
        taken = candidate & (target != 0) & ~current
        if free.any():
            target[free] = oid
            out.added += area(free)
        if taken.any():
            now = target == oid
            before = _id_mdh(frames, now, deficient, other_mask, other, bins)
            after = _id_mdh(frames, now | taken, deficient, other_mask, other, bins)
            if after < before:
                target[taken] = oid
                out.added += area(taken)
                out.relabeled += area(taken)
    if out.added:
        out.frame = deficient
        out.merged = tuple(sorted(set(merged)))
    return out


@dataclass(frozen=True)
class CorrectionResult:
    labels_t: np.ndarray
    labels_adj: np.ndarray
    corrected: bool
    status: Status | None
    details: str = ""


def correct_frame(
    bundle_os: SequenceBundle,
    bundle_raw: SequenceBundle | None,
    object_id: int,
    t: int,
    t_adj: int,
    cfg: TcConfig | None = None,
) -> CorrectionResult:
    """Transplant the object's missing region between two adjacent frames.

    Whichever frame holds the smaller mask is treated as deficient and is
    the only one modified.
    """
    cfg = cfg or TcConfig()
    if abs(t - t_adj) != 1:
        raise ValueError("frames must be adjacent")
    labels = np.array(bundle_os.masks, copy=True)
    raw = bundle_raw.masks if bundle_raw is not None else None
    flows = _FlowCache(bundle_os.frames, cfg.flow)
    res = _correct_pair(bundle_os.frames, labels, raw, object_id, t, t_adj, cfg, flows)
    if res.uncorrectable:
        status = Status.UNCORRECTABLE
    elif res.frame is not None:
        status = Status.CORRECTED
    else:
        status = None
    return CorrectionResult(labels[t], labels[t_adj], res.frame is not None, status, res.describe(t, t_adj))


# -- driver ----------------------------------------------------------------------


def _neighbours(t: int, n: int) -> list[int]:
    return [u for u in (t - 1, t + 1) if 0 <= u < n]


def _run_pass(
    frames: np.ndarray,
    labels: np.ndarray,
    raw: np.ndarray | None,
    ids: tuple[int, ...],
    cfg: TcConfig,
    flows: _FlowCache | None,
    pass_index: int,
) -> tuple[list[ReportEntry], bool]:
    """One detect/refine(/correct) sweep. ``flows=None`` means diagnose only."""
    n = labels.shape[0]
    entries: dict[tuple[int, int], ReportEntry] = {}
    changed = False

    def put(oid: int, frame: int, status: Status, details: str = "") -> None:
        entries[(oid, frame)] = ReportEntry(oid, frame, status, pass_index, details)

    for oid in ids:
        obj = labels == oid
        if not obj.any():
            continue
        flagged, zoomed = _detect(obj, cfg)
        for t in sorted(zoomed):
            put(oid, t, Status.REFINED_AWAY_ZOOM, "monotone area, fixed centroid")
        for t in sorted(flagged):
            if (oid, t) not in entries:
                put(oid, t, Status.DETECTED)
            occluded = []
            pairs = _neighbours(t, n)
            for t_adj in pairs:
                if cfg.refine:
                    occ = occlusion_check(frames[t], frames[t_adj], labels[t] == oid, labels[t_adj] == oid, cfg)
                    if occ.occluded:
                        occluded.append(f"{t_adj}:{occ.mdh_norm:.3f}>{occ.threshold:.3f}")
                        continue
                if flows is None:
                    continue
                res = _correct_pair(frames, labels, raw, oid, t, t_adj, cfg, flows)
                if res.frame is not None:
                    changed = True
                    put(oid, res.frame, Status.CORRECTED, res.describe(t, t_adj))
                elif res.uncorrectable and entries[(oid, t)].status == Status.DETECTED:
                    put(oid, t, Status.UNCORRECTABLE, "flow estimation degenerate")
            if pairs and len(occluded) == len(pairs) and entries[(oid, t)].status == Status.DETECTED:
                put(oid, t, Status.REFINED_AWAY_OCCLUSION, "mdh " + " ".join(occluded))
    ordered = [entries[k] for k in sorted(entries)]
    return ordered, changed


def run_tc(
    bundle_os: SequenceBundle,
    bundle_raw: SequenceBundle | None = None,
    cfg: TcConfig | None = None,
) -> tuple[SequenceBundle, InconsistencyReport]:
    """Repeat detect, refine and correct until a pass changes nothing."""
    cfg = cfg or TcConfig()
    if bundle_raw is not None:
        if bundle_raw.masks.shape != bundle_os.masks.shape:
            raise ValueError("raw and selected sequences are not aligned")
    n = bundle_os.n_frames
    max_passes = cfg.max_passes or n
    labels = np.array(bundle_os.masks, copy=True)
    raw = bundle_raw.masks if bundle_raw is not None else None
    flows = _FlowCache(bundle_os.frames, cfg.flow)
    report = InconsistencyReport(converged=False)
    for p in range(max_passes):
        entries, changed = _run_pass(bundle_os.frames, labels, raw, bundle_os.sorted_ids, cfg, flows, p)
        report.entries.extend(entries)
        report.passes = p + 1
        if not changed:
            report.converged = True
            break
    return bundle_os.with_masks(labels), report


def diagnose(bundle_os: SequenceBundle, cfg: TcConfig | None = None) -> InconsistencyReport:
    """Detection and refinement only; masks are not touched."""
    cfg = cfg or TcConfig()
    labels = np.array(bundle_os.masks, copy=True)
    entries, _ = _run_pass(bundle_os.frames, labels, None, bundle_os.sorted_ids, cfg, None, 0)
    return InconsistencyReport(entries, passes=1, converged=True)
