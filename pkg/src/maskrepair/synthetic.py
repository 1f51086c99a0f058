"""Deterministic synthetic sequences with injectable mask defects.

Scripts are plain JSON::

    {
      "height": 64, "width": 64, "frames": 8, "seed": 0,
      "background": {"color": [90, 110, 90], "texture": 40},
      "objects": [
        {"id": 1, "shape": "rect", "center": [32, 32], "size": [16, 16],
         "velocity": [0, 1], "scale": 1.0, "color": [200, 60, 40], "texture": 30}
      ],
      "defects": [
        {"object_id": 1, "frame": 4, "kind": "drop_part", "fraction": 0.5, "side": "right"}
      ]
    }

``shape`` is ``rect`` (``size`` = [height, width]) or ``disk`` (``size`` =
[diameter, diameter]). ``velocity`` is added to the centre every frame and
``scale`` multiplies the size every frame. ``texture`` is the amplitude of
smooth seeded noise added to the base colour; 0 gives a flat colour.
Objects listed later are drawn on top.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .masks import LABEL_DTYPE, SequenceBundle

SHAPES = ("rect", "disk")
DEFECT_KINDS = ("drop_part", "oversplit", "occlude")
SIDES = ("left", "right", "top", "bottom")


class ScriptError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectScript:
    id: int
    center: tuple[float, float]
    size: tuple[float, float]
    shape: str = "rect"
    velocity: tuple[float, float] = (0.0, 0.0)
    scale: float = 1.0
    color: tuple[int, int, int] = (200, 60, 40)
    texture: float = 30.0


@dataclass(frozen=True)
class Defect:
    object_id: int
    frame: int
    kind: str
    fraction: float = 0.5
    side: str = "right"
    new_id: int | None = None
    color: tuple[int, int, int] = (255, 0, 255)

    def __post_init__(self) -> None:
        if self.kind not in DEFECT_KINDS:
            raise ScriptError(f"unknown defect kind {self.kind!r}")
        if not 0 < self.fraction < 1:
            raise ScriptError(f"defect fraction must be in (0, 1), got {self.fraction}")
        if self.side not in SIDES:
            raise ScriptError(f"unknown side {self.side!r}")


@dataclass(frozen=True)
class SceneScript:
    height: int
    width: int
    frames: int
    objects: tuple[ObjectScript, ...]
    seed: int = 0
    background: tuple[int, int, int] = (90, 110, 90)
    background_texture: float = 40.0
    defects: tuple[Defect, ...] = field(default=())

    @classmethod
    def from_dict(cls, data: dict) -> "SceneScript":
        try:
            bg = data.get("background", {})
            objects = tuple(
                ObjectScript(
                    id=int(o["id"]),
                    center=tuple(o["center"]),
                    size=tuple(o["size"]),
                    shape=o.get("shape", "rect"),
                    velocity=tuple(o.get("velocity", (0.0, 0.0))),
                    scale=float(o.get("scale", 1.0)),
                    color=tuple(o.get("color", (200, 60, 40))),
                    texture=float(o.get("texture", 30.0)),
                )
                for o in data["objects"]
            )
            defects = tuple(
                Defect(
                    object_id=int(d["object_id"]),
                    frame=int(d["frame"]),
                    kind=d["kind"],
                    fraction=float(d.get("fraction", 0.5)),
                    side=d.get("side", "right"),
                    new_id=d.get("new_id"),
                    color=tuple(d.get("color", (255, 0, 255))),
                )
                for d in data.get("defects", ())
            )
            return cls(
                height=int(data["height"]),
                width=int(data["width"]),
                frames=int(data["frames"]),
                objects=objects,
                seed=int(data.get("seed", 0)),
                background=tuple(bg.get("color", (90, 110, 90))),
                background_texture=float(bg.get("texture", 40.0)),
                defects=defects,
            )
        except (KeyError, TypeError) as exc:
            raise ScriptError(f"malformed scene script: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "SceneScript":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "width": self.width,
            "frames": self.frames,
            "seed": self.seed,
            "background": {"color": list(self.background), "texture": self.background_texture},
            "objects": [asdict(o) for o in self.objects],
            "defects": [asdict(d) for d in self.defects],
        }


def _smooth_noise(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    noise = ndimage.gaussian_filter(rng.standard_normal(shape), sigma=(1.5, 1.5, 0), mode="wrap")
    return noise / (noise.std() + 1e-12)


def _object_mask(obj: ObjectScript, k: int, height: int, width: int) -> tuple[np.ndarray, float, float, float]:
    s = obj.scale**k
    cr = obj.center[0] + k * obj.velocity[0]
    cc = obj.center[1] + k * obj.velocity[1]
    rows, cols = np.mgrid[0:height, 0:width]
    if obj.shape == "rect":
        h = max(1, round(obj.size[0] * s))
        w = max(1, round(obj.size[1] * s))
        top = math.floor(cr - h / 2 + 0.5)
        left = math.floor(cc - w / 2 + 0.5)
        if top < 0 or left < 0 or top + h > height or left + w > width:
            raise ScriptError(f"object {obj.id} leaves the canvas at frame {k}")
        mask = (rows >= top) & (rows < top + h) & (cols >= left) & (cols < left + w)
    elif obj.shape == "disk":
        radius = obj.size[0] * s / 2
        if cr - radius < -0.5 or cc - radius < -0.5 or cr + radius > height - 0.5 or cc + radius > width - 0.5:
            raise ScriptError(f"object {obj.id} leaves the canvas at frame {k}")
        mask = (rows - cr) ** 2 + (cols - cc) ** 2 <= radius**2
    else:
        raise ScriptError(f"unknown shape {obj.shape!r}")
    return mask, cr, cc, s


def render(script: SceneScript) -> SequenceBundle:
    """Frames with textured objects over a textured background, plus exact labels."""
    if script.frames < 1 or script.height < 1 or script.width < 1:
        raise ScriptError("canvas and frame count must be positive")
    ids = [o.id for o in script.objects]
    if len(set(ids)) != len(ids) or any(i <= 0 for i in ids):
        raise ScriptError("object ids must be unique and positive")
    rng = np.random.default_rng(script.seed)
    h, w, n = script.height, script.width, script.frames
    bg = np.asarray(script.background, float) + script.background_texture * _smooth_noise(rng, (h, w, 3))
    textures = []
    for obj in script.objects:
        extent = int(math.ceil(max(obj.size))) + 4
        textures.append(_smooth_noise(rng, (extent, extent, 3)))

    frames = np.empty((n, h, w, 3), dtype=np.uint8)
    labels = np.zeros((n, h, w), dtype=LABEL_DTYPE)
    for k in range(n):
        img = bg.copy()
        for obj, tex in zip(script.objects, textures):
            mask, cr, cc, s = _object_mask(obj, k, h, w)
            rows, cols = np.nonzero(mask)
            # texture is attached to the object and scales with it
            half = tex.shape[0] // 2
            tr = np.clip(np.floor((rows - cr) / s + half).astype(int), 0, tex.shape[0] - 1)
            tc = np.clip(np.floor((cols - cc) / s + half).astype(int), 0, tex.shape[1] - 1)
            img[rows, cols] = np.asarray(obj.color, float) + obj.texture * tex[tr, tc]
            labels[k][mask] = obj.id
        frames[k] = np.clip(np.round(img), 0, 255).astype(np.uint8)
    return SequenceBundle(frames, labels, frozenset(ids), name=f"synthetic-{script.seed}")


def _side_region(mask: np.ndarray, fraction: float, side: str) -> np.ndarray:
    rows, cols = np.nonzero(mask)
    if side in ("left", "right"):
        lo, hi, grid = cols.min(), cols.max(), np.arange(mask.shape[1])[None, :]
    else:
        lo, hi, grid = rows.min(), rows.max(), np.arange(mask.shape[0])[:, None]
    cut = max(1, round(fraction * (hi - lo + 1)))
    band = grid > hi - cut if side in ("right", "bottom") else grid < lo + cut
    return mask & band


def inject_defects(
    bundle: SequenceBundle, defects: list[Defect] | tuple[Defect, ...]
) -> tuple[SequenceBundle, list[np.ndarray]]:
    """Apply defects in order; also return the region each one touched.

    ``drop_part`` clears a band of the object's mask on one side,
    ``oversplit`` relabels that band to a fresh id, and ``occlude`` paints
    the band in the frame with a flat colour and clears it from the mask.
    """
    frames = np.array(bundle.frames, copy=True)
    labels = np.array(bundle.masks, copy=True)
    ids = set(bundle.object_ids)
    regions = []
    for d in defects:
        if not 0 <= d.frame < bundle.n_frames:
            raise ScriptError(f"defect frame {d.frame} out of range")
        mask = labels[d.frame] == d.object_id
        if not mask.any():
            raise ScriptError(f"object {d.object_id} absent from frame {d.frame}")
        region = _side_region(mask, d.fraction, d.side)
        if d.kind == "drop_part":
            labels[d.frame][region] = 0
        elif d.kind == "oversplit":
            new_id = d.new_id if d.new_id is not None else max(ids | {int(labels.max())}) + 1
            if new_id in ids or new_id <= 0:
                raise ScriptError(f"oversplit id {new_id} is already in use")
            labels[d.frame][region] = new_id
            ids.add(new_id)
        else:
            frames[d.frame][region] = d.color
            labels[d.frame][region] = 0
        regions.append(region)
    return SequenceBundle(frames, labels, frozenset(ids), bundle.name), regions
