"""Orthogonal periodic Daubechies wavelets, soft-thresholding, and periodic
patch extraction/reassembly."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgumentError

# db4 scaling (reconstruction low-pass) filter, 8 taps, sum = sqrt(2)
DB4 = np.array([
    0.2303778133088965, 0.7148465705529157, 0.6308807679298589, -0.027983769416859854,
    -0.18703481171909309, 0.030841381835560764, 0.0328830116668852, -0.010597401785069032,
])
DEFAULT_LEVELS = 4


def _qmf(h):
    g = h[::-1].copy()
    g[1::2] *= -1
    return g


def _analysis_axis(x, h, g, axis):
    # a[k] = sum_m h[m] x[(2k+m) mod N], likewise d with g
    x = np.moveaxis(x, axis, 0)
    even, odd = x[0::2], x[1::2]
    a = np.zeros_like(even)
    d = np.zeros_like(even)
    for j in range(h.size // 2):
        e = np.roll(even, -j, axis=0)
        o = np.roll(odd, -j, axis=0)
        a += h[2 * j] * e + h[2 * j + 1] * o
        d += g[2 * j] * e + g[2 * j + 1] * o
    return np.moveaxis(np.concatenate([a, d], axis=0), 0, axis)


def _synthesis_axis(y, h, g, axis):
    y = np.moveaxis(y, axis, 0)
    half = y.shape[0] // 2
    a, d = y[:half], y[half:]
    even = np.zeros_like(a)
    odd = np.zeros_like(a)
    for j in range(h.size // 2):
        ra = np.roll(a, j, axis=0)
        rd = np.roll(d, j, axis=0)
        even += h[2 * j] * ra + g[2 * j] * rd
        odd += h[2 * j + 1] * ra + g[2 * j + 1] * rd
    out = np.empty((2 * half,) + a.shape[1:], dtype=np.result_type(a, h))
    out[0::2] = even
    out[1::2] = odd
    return np.moveaxis(out, 0, axis)


@dataclass(frozen=True, eq=False)
class WaveletCoeffs:
    """Pyramid layout: the coarsest approximation sits in the top-left
    ``H / 2**levels`` block, detail subbands fill the rest.

    ``data`` may be larger than ``orig_shape`` when the image was padded up to
    a multiple of ``2**levels``; the padding is stripped by :func:`idwt2`.
    """

    data: np.ndarray
    levels: int
    orig_shape: tuple[int, int]

    def with_data(self, data):
        return WaveletCoeffs(data, self.levels, self.orig_shape)


def _check_levels(shape, levels):
    if levels < 0 or (1 << levels) > min(shape):
        raise InvalidArgumentError(f"{levels} wavelet levels too many for shape {shape}")


def dyadic_shape(shape, levels):
    m = 1 << levels
    return tuple(-(-int(s) // m) * m for s in shape)


def wavedec2(x, levels=DEFAULT_LEVELS, h=DB4):
    """Pyramid transform of an array whose dims are divisible by ``2**levels``."""
    g = _qmf(h)
    out = np.array(x, dtype=np.result_type(x, h), copy=True)
    hh, ww = out.shape
    for _ in range(levels):
        blk = out[:hh, :ww]
        blk = _analysis_axis(_analysis_axis(blk, h, g, 0), h, g, 1)
        out[:hh, :ww] = blk
        hh //= 2
        ww //= 2
    return out


def waverec2(c, levels=DEFAULT_LEVELS, h=DB4):
    g = _qmf(h)
    out = np.array(c, copy=True)
    if levels == 0:
        return out
    hh, ww = out.shape[0] >> (levels - 1), out.shape[1] >> (levels - 1)
    for _ in range(levels):
        blk = out[:hh, :ww]
        out[:hh, :ww] = _synthesis_axis(_synthesis_axis(blk, h, g, 1), h, g, 0)
        hh *= 2
        ww *= 2
    return out


def dwt2(img, levels=DEFAULT_LEVELS) -> WaveletCoeffs:
    """Orthogonal db4 transform with periodic boundaries.

    Images whose dims are not divisible by ``2**levels`` are zero-padded on
    the high-index side first; the padding is recorded in the result.
    """
    x = np.asarray(img)
    if x.ndim != 2:
        raise InvalidArgumentError(f"dwt2 expects a 2D array, got {x.shape}")
    if levels < 0:
        raise InvalidArgumentError(f"levels must be >= 0, got {levels}")
    target = dyadic_shape(x.shape, levels)
    _check_levels(target, levels)
    if target != x.shape:
        xp = np.zeros(target, dtype=x.dtype)
        xp[:x.shape[0], :x.shape[1]] = x
        x = xp
    return WaveletCoeffs(wavedec2(x, levels), levels, tuple(np.shape(img)))


def idwt2(coeffs: WaveletCoeffs) -> np.ndarray:
    x = waverec2(coeffs.data, coeffs.levels)
    h, w = coeffs.orig_shape
    return x[:h, :w]


def soft_threshold(coeffs, tau):
    """Proximal map of ``tau * ||.||_1``; complex values shrink in magnitude.

    Works on arrays and on :class:`WaveletCoeffs`.
    """
    if tau < 0:
        raise InvalidArgumentError(f"threshold must be >= 0, got {tau}")
    if isinstance(coeffs, WaveletCoeffs):
        return coeffs.with_data(soft_threshold(coeffs.data, tau))
    c = np.asarray(coeffs)
    if tau == 0:
        return c.copy()
    mag = np.abs(c)
    scale = np.maximum(0.0, 1.0 - tau / np.maximum(mag, np.finfo(float).tiny))
    return c * scale


# ---------------------------------------------------------------------------
# patches
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PatchMatrix:
    """Vectorised ``b x b`` patches on a periodic grid.

    ``columns[:, m]`` is the row-major patch whose top-left pixel is
    ``(oy[m], ox[m])``; indices wrap around the image borders.
    """

    columns: np.ndarray
    oy: np.ndarray
    ox: np.ndarray
    b: int
    stride: int
    shape: tuple[int, int]

    @property
    def weights(self) -> np.ndarray:
        return patch_weights(self.shape, self.b, self.stride)


def patch_origins(shape, b, stride):
    if b < 2 or not 1 <= stride <= b:
        raise InvalidArgumentError(f"invalid patch size/stride ({b}, {stride})")
    if b > min(shape):
        raise InvalidArgumentError(f"patch size {b} exceeds image {shape}")
    ys = np.arange(0, shape[0], stride)
    xs = np.arange(0, shape[1], stride)
    oy, ox = np.meshgrid(ys, xs, indexing="ij")
    return oy.ravel(), ox.ravel()


def gather_patches(img, oy, ox, b) -> np.ndarray:
    h, w = img.shape
    out = np.empty((b * b, oy.size), dtype=img.dtype)
    for dy in range(b):
        yy = (oy + dy) % h
        for dx in range(b):
            out[dy * b + dx] = img[yy, (ox + dx) % w]
    return out


def extract_patches(img, b, stride) -> PatchMatrix:
    x = np.asarray(img)
    oy, ox = patch_origins(x.shape, b, stride)
    return PatchMatrix(gather_patches(x, oy, ox, b), oy, ox, int(b), int(stride), x.shape)


def patch_weights(shape, b, stride) -> np.ndarray:
    oy, ox = patch_origins(shape, b, stride)
    return kernels.accumulate_patches(np.ones((b * b, oy.size)), oy, ox, b, shape).real


def reassemble_patches(pm: PatchMatrix, shape=None, columns=None, normalize=True) -> np.ndarray:
    """Overlap-add patches back into an image.

    ``columns`` replaces ``pm.columns`` (e.g. with ``D @ A``). With
    ``normalize=False`` this is the exact adjoint of extraction.
    """
    shape = tuple(shape) if shape is not None else pm.shape
    cols = pm.columns if columns is None else columns
    acc = kernels.accumulate_patches(cols, pm.oy, pm.ox, pm.b, shape)
    if not np.iscomplexobj(cols):
        acc = acc.real
    if normalize:
        acc = acc / patch_weights(shape, pm.b, pm.stride)
    return acc
