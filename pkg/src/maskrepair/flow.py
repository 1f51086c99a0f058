"""Dense pyramidal iterative Lucas-Kanade flow and mask warping.

Flow vectors are stored as ``(drow, dcol)`` and map a pixel ``p`` of the
source frame to ``p + v(p)`` in the destination frame, i.e. after
convergence ``dst(p + v(p)) ~= src(p)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .masks import BinaryMask, RgbFrame, check_same_shape

_LUMA = np.array([0.299, 0.587, 0.114])
_DERIV = np.array([-0.5, 0.0, 0.5])
# coarsest pyramid level is never made smaller than this on either side
_MIN_LEVEL_SIZE = 8


class FlowParamsError(ValueError):
    pass


@dataclass(frozen=True)
class FlowParams:
    window_size: int = 15
    pyramid_levels: int = 3
    iterations_per_level: int = 5
    eigen_floor: float = 1e-4
    pyramid_sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.window_size < 3 or self.window_size % 2 == 0:
            raise FlowParamsError("window_size must be odd and >= 3")
        if self.pyramid_levels < 1:
            raise FlowParamsError("pyramid_levels must be >= 1")
        if self.iterations_per_level < 1:
            raise FlowParamsError("iterations_per_level must be >= 1")
        if self.eigen_floor < 0:
            raise FlowParamsError("eigen_floor must be non-negative")


@dataclass(frozen=True)
class FlowField:
    vectors: np.ndarray  # (H, W, 2) float64, (drow, dcol)
    low_confidence: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.vectors.shape[0], self.vectors.shape[1]

    @classmethod
    def zeros(cls, shape: tuple[int, int], low_confidence: bool = False) -> "FlowField":
        return cls(np.zeros((*shape, 2)), low_confidence)

    @classmethod
    def uniform(cls, shape: tuple[int, int], drow: float, dcol: float) -> "FlowField":
        vec = np.empty((*shape, 2))
        vec[..., 0] = drow
        vec[..., 1] = dcol
        return cls(vec)


def luminance(frame: RgbFrame) -> np.ndarray:
    """Luma in [0, 1]."""
    return (np.asarray(frame, dtype=np.float64) @ _LUMA) / 255.0


def gaussian_pyramid(image: np.ndarray, levels: int, sigma: float = 1.0) -> list[np.ndarray]:
    """Finest first. Stops early rather than shrink below a few pixels."""
    pyramid = [image]
    while len(pyramid) < levels:
        prev = pyramid[-1]
        if min(prev.shape) // 2 < _MIN_LEVEL_SIZE:
            break
        blurred = ndimage.gaussian_filter(prev, sigma, mode="nearest")
        pyramid.append(blurred[::2, ::2])
    return pyramid


def _gradients(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gy = ndimage.correlate1d(image, _DERIV, axis=0, mode="nearest")
    gx = ndimage.correlate1d(image, _DERIV, axis=1, mode="nearest")
    return gy, gx


def _sample(image: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return ndimage.map_coordinates(image, [rows, cols], order=1, mode="nearest")


def _window(size: int):
    """Gaussian-weighted window spanning ``size`` pixels.

    A flat box would be the textbook choice, but its negative frequency lobes
    make the dense per-pixel iteration amplify high-frequency error.
    """
    sigma = size / 6.0
    return lambda a: ndimage.gaussian_filter(a, sigma, mode="nearest", truncate=3.0)


def min_eigenvalue(syy: np.ndarray, syx: np.ndarray, sxx: np.ndarray) -> np.ndarray:
    half_trace = 0.5 * (syy + sxx)
    return half_trace - np.sqrt((0.5 * (syy - sxx)) ** 2 + syx**2)


def lk_refine(
    src: np.ndarray, dst: np.ndarray, init: np.ndarray, params: FlowParams
) -> tuple[np.ndarray, np.ndarray]:
    """Iterate the windowed LK update at one pyramid level.

    ``src`` and ``dst`` are luminance images, ``init`` an ``(H, W, 2)``
    prior. Returns the refined flow and the boolean gate of pixels whose
    smallest structure-tensor eigenvalue is below ``eigen_floor``; those
    pixels keep their prior untouched.
    """
    h, w = src.shape
    gy, gx = _gradients(src)
    win = _window(params.window_size)
    gyy, gyx, gxx = gy * gy, gy * gx, gx * gx
    gated = min_eigenvalue(win(gyy), win(gyx), win(gxx)) < params.eigen_floor

    flow = np.array(init, dtype=np.float64, copy=True)
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    for _ in range(params.iterations_per_level):
        vr, vc = flow[..., 0], flow[..., 1]
        tr, tc = rows + vr, cols + vc
        # samples that land off the raster carry no information
        valid = ((tr >= 0) & (tr <= h - 1) & (tc >= 0) & (tc <= w - 1)).astype(np.float64)
        it = _sample(dst, tr, tc) - src
        syy, syx, sxx = win(valid * gyy), win(valid * gyx), win(valid * gxx)
        # Residual at window pixel q re-linearised about the centre pixel's
        # flow: it(q) + g(q).(v(p) - v(q)). Solving the window normal
        # equations for v(p) directly keeps per-pixel estimates coupled only
        # through the window and stops high-frequency drift.
        br = win(valid * (gyy * vr + gyx * vc - gy * it))
        bc = win(valid * (gyx * vr + gxx * vc - gx * it))
        skip = gated | (min_eigenvalue(syy, syx, sxx) < params.eigen_floor)
        det = np.where(skip, 1.0, syy * sxx - syx * syx)
        flow[..., 0] = np.where(skip, vr, (sxx * br - syx * bc) / det)
        flow[..., 1] = np.where(skip, vc, (syy * bc - syx * br) / det)
    return flow, gated


def _upsample_flow(flow: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    out = np.empty((h, w, 2))
    for k in range(2):
        out[..., k] = 2.0 * _sample(flow[..., k], rows / 2.0, cols / 2.0)
    return out


def estimate_flow(src: RgbFrame, dst: RgbFrame, params: FlowParams | None = None) -> FlowField:
    """Dense flow from ``src`` to ``dst``.

    Constant-intensity input gives zero flow with ``low_confidence`` set.
    """
    params = params or FlowParams()
    check_same_shape(src, dst)
    lum_src = luminance(src)
    lum_dst = luminance(dst)
    if np.ptp(lum_src) < 1e-9 or np.ptp(lum_dst) < 1e-9:
        return FlowField.zeros(lum_src.shape, low_confidence=True)

    pyr_src = gaussian_pyramid(lum_src, params.pyramid_levels, params.pyramid_sigma)
    pyr_dst = gaussian_pyramid(lum_dst, len(pyr_src), params.pyramid_sigma)
    flow = np.zeros((*pyr_src[-1].shape, 2))
    for level in range(len(pyr_src) - 1, -1, -1):
        s, d = pyr_src[level], pyr_dst[level]
        if flow.shape[:2] != s.shape:
            flow = _upsample_flow(flow, s.shape)
        flow, _ = lk_refine(s, d, flow, params)
    return FlowField(flow)


def negate_flow(flow: FlowField) -> FlowField:
    return FlowField(-flow.vectors, flow.low_confidence)


def warp_mask(mask: BinaryMask, flow: FlowField) -> BinaryMask:
    """Forward nearest-neighbour projection; off-raster targets are dropped."""
    check_same_shape(mask, flow.vectors)
    h, w = mask.shape
    rows, cols = np.nonzero(mask)
    vec = flow.vectors[rows, cols]
    tr = np.floor(rows + vec[:, 0] + 0.5).astype(np.int64)
    tc = np.floor(cols + vec[:, 1] + 0.5).astype(np.int64)
    ok = (tr >= 0) & (tr < h) & (tc >= 0) & (tc < w)
    out = np.zeros((h, w), dtype=bool)
    out[tr[ok], tc[ok]] = True
    return out
