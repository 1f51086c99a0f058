"""DAVIS-style directory layout: frames, raw proposals, ground truth, results.

::

    <root>/JPEGImages/<seq>/00000.jpg   RGB frames (jpg or png)
    <root>/RawMasks/<seq>/00000.png     unfiltered proposals, palette index = id
    <root>/Annotations/<seq>/00000.png  ground truth
    <root>/Results/<seq>/00000.png      written by this package
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .masks import LABEL_DTYPE, SequenceBundle

FRAME_SUFFIXES = (".jpg", ".jpeg", ".png")
_INDEX_NAME = re.compile(r"^(\d{5})\.(jpg|jpeg|png)$", re.IGNORECASE)

ENV_ROOT = "MASKREPAIR_ROOT"
ENV_SUBDIRS = {
    "frames_subdir": "MASKREPAIR_FRAMES",
    "raw_masks_subdir": "MASKREPAIR_RAW",
    "gt_subdir": "MASKREPAIR_GT",
    "output_subdir": "MASKREPAIR_OUTPUT",
}


class SequenceIOError(Exception):
    pass


class MissingFileError(SequenceIOError):
    pass


class IndexGapError(SequenceIOError):
    pass


class DimensionMismatchError(SequenceIOError):
    pass


class UnencodableIdError(SequenceIOError):
    pass


@dataclass(frozen=True)
class DatasetLayout:
    root: Path
    frames_subdir: str = "JPEGImages"
    raw_masks_subdir: str = "RawMasks"
    gt_subdir: str = "Annotations"
    output_subdir: str = "Results"

    @classmethod
    def from_env(cls, root: str | Path | None = None, **overrides) -> "DatasetLayout":
        """Explicit arguments win over ``MASKREPAIR_*`` environment variables."""
        root = root or os.environ.get(ENV_ROOT) or "."
        layout = cls(Path(root))
        fields = {k: os.environ[v] for k, v in ENV_SUBDIRS.items() if v in os.environ}
        fields.update({k: v for k, v in overrides.items() if v is not None})
        return replace(layout, **fields)

    def sequence_dir(self, subdir: str, name: str) -> Path:
        return Path(self.root) / subdir / name

    def sequences(self, subdir: str | None = None) -> list[str]:
        base = Path(self.root) / (subdir or self.frames_subdir)
        if not base.is_dir():
            raise MissingFileError(f"no such directory: {base}")
        return sorted(p.name for p in base.iterdir() if p.is_dir())


def davis_palette() -> list[int]:
    """The standard 256-entry DAVIS/PASCAL colour map, flattened RGB."""
    palette = []
    for i in range(256):
        r = g = b = 0
        c = i
        for j in range(8):
            r |= ((c >> 0) & 1) << (7 - j)
            g |= ((c >> 1) & 1) << (7 - j)
            b |= ((c >> 2) & 1) << (7 - j)
            c >>= 3
        palette.extend((r, g, b))
    return palette


def _indexed_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise MissingFileError(f"no such directory: {directory}")
    found: dict[int, Path] = {}
    for p in directory.iterdir():
        m = _INDEX_NAME.match(p.name)
        if m:
            idx = int(m.group(1))
            if idx in found:
                raise SequenceIOError(f"duplicate frame index {idx} in {directory}")
            found[idx] = p
    if not found:
        raise MissingFileError(f"no indexed images in {directory}")
    indices = sorted(found)
    expected = list(range(indices[0], indices[0] + len(indices)))
    if indices != expected:
        missing = sorted(set(expected) - set(indices))
        raise IndexGapError(f"{directory}: missing indices {missing[:5]}")
    return [found[i] for i in indices]


def read_frame(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def read_mask(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("P", "L"):
            raise SequenceIOError(f"{path}: expected an indexed or grayscale mask, got mode {im.mode}")
        return np.asarray(im, dtype=np.uint8).astype(LABEL_DTYPE)


def load_sequence(layout: DatasetLayout, name: str, masks_subdir: str | None = None) -> SequenceBundle:
    """Frames plus the label maps under ``masks_subdir`` (raw proposals by default)."""
    masks_subdir = masks_subdir or layout.raw_masks_subdir
    frame_files = _indexed_files(layout.sequence_dir(layout.frames_subdir, name))
    mask_dir = layout.sequence_dir(masks_subdir, name)
    if not mask_dir.is_dir():
        raise MissingFileError(f"no such directory: {mask_dir}")
    frames, masks = [], []
    for f in frame_files:
        mask_path = mask_dir / (f.stem + ".png")
        if not mask_path.is_file():
            raise MissingFileError(f"missing mask {mask_path} for frame {f.name}")
        frame = read_frame(f)
        mask = read_mask(mask_path)
        if frame.shape[:2] != mask.shape:
            raise DimensionMismatchError(
                f"{name}/{f.stem}: frame is {frame.shape[:2]} but mask is {mask.shape}"
            )
        if frames and frame.shape != frames[0].shape:
            raise DimensionMismatchError(f"{name}/{f.stem}: frame size changes within the sequence")
        frames.append(frame)
        masks.append(mask)
    extra = sorted(
        p.name for p in mask_dir.iterdir() if _INDEX_NAME.match(p.name) and p.stem not in {f.stem for f in frame_files}
    )
    if extra:
        raise SequenceIOError(f"{mask_dir}: masks without frames: {extra[:5]}")
    return SequenceBundle(np.stack(frames), np.stack(masks), None, name)


def save_masks(bundle: SequenceBundle, layout: DatasetLayout, name: str | None = None, subdir: str | None = None) -> Path:
    """Write one palette PNG per frame; returns the sequence directory."""
    name = name or bundle.name
    out_dir = layout.sequence_dir(subdir or layout.output_subdir, name)
    if bundle.masks.size and int(bundle.masks.max()) > 255:
        raise UnencodableIdError(f"id {int(bundle.masks.max())} does not fit an 8-bit palette image")
    out_dir.mkdir(parents=True, exist_ok=True)
    palette = davis_palette()
    for i, labels in enumerate(bundle.masks):
        im = Image.fromarray(labels.astype(np.uint8), mode="P")
        im.putpalette(palette)
        im.save(out_dir / f"{i:05d}.png")
    return out_dir


def save_frames(bundle: SequenceBundle, layout: DatasetLayout, name: str | None = None) -> Path:
    """Write frames losslessly as PNG."""
    name = name or bundle.name
    out_dir = layout.sequence_dir(layout.frames_subdir, name)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(bundle.frames):
        Image.fromarray(frame, mode="RGB").save(out_dir / f"{i:05d}.png")
    return out_dir
