"""Baseline JPEG lossy stage for 8-bit grayscale images.

Only the lossy part of the baseline sequential codec is modelled: level
shift, 8x8 orthonormal DCT-II, quantisation with the Annex-K luminance table
scaled by the quality factor, and the exact inverse. Entropy coding is
lossless and has no effect on decoded pixels, so it is omitted.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

BLOCK = 8

STD_LUMINANCE_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.int64)


def _dct_matrix(n=BLOCK):
    u = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    c = np.cos((2 * x + 1) * u * np.pi / (2 * n)) * np.sqrt(2.0 / n)
    c[0] /= np.sqrt(2.0)
    return c


DCT8 = _dct_matrix()


def check_quality(qf) -> int:
    if isinstance(qf, bool) or not isinstance(qf, (int, np.integer)) or not 1 <= qf <= 100:
        raise InvalidArgumentError(f"JPEG quality factor must be an integer in 1..100, got {qf!r}")
    return int(qf)


def quality_scale(qf: int) -> int:
    qf = check_quality(qf)
    return 5000 // qf if qf < 50 else 200 - 2 * qf


def quant_table(qf: int) -> np.ndarray:
    """Luminance table scaled the libjpeg way and clamped to [1, 255]."""
    s = quality_scale(qf)
    return np.clip((STD_LUMINANCE_TABLE * s + 50) // 100, 1, 255)


def round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def to_blocks(img):
    """Edge-replicate to multiples of 8 and reshape to (rows, cols, 8, 8)."""
    h, w = img.shape
    ph, pw = -h % BLOCK, -w % BLOCK
    if ph or pw:
        img = np.pad(img, ((0, ph), (0, pw)), mode="edge")
    H, W = img.shape
    return img.reshape(H // BLOCK, BLOCK, W // BLOCK, BLOCK).swapaxes(1, 2)


def from_blocks(blocks, shape):
    r, c = blocks.shape[:2]
    img = blocks.swapaxes(1, 2).reshape(r * BLOCK, c * BLOCK)
    return img[:shape[0], :shape[1]]


@dataclass(frozen=True, eq=False)
class JpegData:
    coeffs: np.ndarray  # (rows, cols, 8, 8) int64 quantised DCT coefficients
    qf: int
    shape: tuple[int, int]


def _as_uint8(img8):
    a = np.asarray(img8)
    if a.ndim != 2:
        raise InvalidArgumentError(f"expected a 2D grayscale image, got {a.shape}")
    if a.dtype != np.uint8:
        if np.any(a < 0) or np.any(a > 255) or np.any(a != np.round(a)):
            raise InvalidArgumentError("image must hold integer grey levels in 0..255")
        a = a.astype(np.uint8)
    return a


def encode(img8, qf) -> JpegData:
    a = _as_uint8(img8)
    q = quant_table(qf)
    blocks = to_blocks(a).astype(np.float64) - 128.0
    coef = DCT8 @ blocks @ DCT8.T
    return JpegData(round_half_away(coef / q).astype(np.int64), int(qf), a.shape)


def decode(data: JpegData) -> np.ndarray:
    q = quant_table(data.qf)
    blocks = DCT8.T @ (data.coeffs * q).astype(np.float64) @ DCT8 + 128.0
    return np.clip(round_half_away(from_blocks(blocks, data.shape)), 0, 255).astype(np.uint8)


def jpeg_codec(img8, qf) -> np.ndarray:
    """Compress and decompress an 8-bit grayscale image at quality ``qf``."""
    return decode(encode(img8, qf))


def pillow_codec(img8, qf) -> np.ndarray:
    """Same round trip through Pillow's libjpeg (for comparison only)."""
    import io

    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(_as_uint8(img8), mode="L").save(buf, format="JPEG", quality=check_quality(qf))
    buf.seek(0)
    return np.asarray(Image.open(buf).convert("L"))
