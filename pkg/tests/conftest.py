"""Shared fixtures and independent brute-force oracles."""
from __future__ import annotations

from collections import deque

import numpy as np
import pytest
from hypothesis import settings

from maskrepair.masks import SequenceBundle
from maskrepair.synthetic import Defect, ObjectScript, SceneScript, inject_defects, render

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")

N8 = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]
N4 = [(-1, 0), (1, 0), (0, -1), (0, 1)]


def flood_fill_components(mask: np.ndarray, connectivity: int = 8) -> list[set[tuple[int, int]]]:
    """Breadth-first flood fill from every unvisited foreground pixel."""
    steps = N8 if connectivity == 8 else N4
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for r in range(h):
        for c in range(w):
            if not mask[r, c] or seen[r, c]:
                continue
            comp = set()
            queue = deque([(r, c)])
            seen[r, c] = True
            while queue:
                y, x = queue.popleft()
                comp.add((y, x))
                for dy, dx in steps:
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((ny, nx))
            comps.append(comp)
    return comps


def erode_oracle(mask: np.ndarray, radius: int) -> np.ndarray:
    """Keep a pixel only if its whole (2r+1)^2 neighbourhood lies on the raster and is set."""
    h, w = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    for r in range(h):
        for c in range(w):
            ok = True
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    y, x = r + dy, c + dx
                    if not (0 <= y < h and 0 <= x < w) or not mask[y, x]:
                        ok = False
            out[r, c] = ok
    return out


def textured_scene(
    frames: int = 10,
    height: int = 64,
    width: int = 64,
    velocity=(0.0, 0.0),
    scale: float = 1.0,
    size=(16, 16),
    center=(32, 24),
    seed: int = 3,
    defects=(),
) -> tuple[SequenceBundle, SequenceBundle, list[np.ndarray]]:
    """One textured rectangle; returns (clean, defective, touched regions)."""
    script = SceneScript(
        height=height,
        width=width,
        frames=frames,
        objects=(ObjectScript(1, center, size, velocity=velocity, scale=scale),),
        seed=seed,
    )
    clean = render(script)
    bad, regions = inject_defects(clean, list(defects))
    return clean, bad, regions


def three_object_bundle() -> SequenceBundle:
    """Big persistent (N=10, S=3), tiny persistent (N=10, S=0.1), huge one-frame blob (N=1, S=0.9).

    10x10 frames. The big object shrinks to 3 px in the blob's frame so that
    all three fit; elsewhere it covers 33 px.
    """
    n, h, w = 10, 10, 10
    masks = np.zeros((n, h, w), dtype=np.uint16)
    for t in range(n):
        masks[t, 9, 9] = 2
        if t == 0:
            masks[t, 9, :3] = 1
        else:
            masks[t].flat[:33] = 1
    masks[0].flat[:90] = 3
    rng = np.random.default_rng(0)
    frames = rng.integers(0, 256, size=(n, h, w, 3), dtype=np.uint8)
    return SequenceBundle(frames, masks)


@pytest.fixture
def tiny_defect() -> Defect:
    return Defect(object_id=1, frame=4, kind="drop_part", fraction=0.5, side="right")
