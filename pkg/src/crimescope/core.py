"""Centered unitary Fourier transforms, coil combination and k-space padding.

Conventions used everywhere in the package:

* images and k-space are 2D complex arrays of shape ``(H, W)``; multi-coil
  data carry a leading coil axis, ``(C, H, W)``;
* k-space is *centered*: the DC sample sits at ``(H // 2, W // 2)``;
* the DFT is unitary (``1/sqrt(H*W)`` scaling in both directions), so
  ``||dft2_centered(x)|| == ||x||``.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError, InvalidInputError

MIN_SIZE = 8


def _check_finite(a, name="input"):
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite values")


def as_image(x, name="image") -> np.ndarray:
    """Validate a single 2D image/k-space array and return it as complex128."""
    a = np.asarray(x)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 2D, got shape {a.shape}")
    _check_finite(a, name)
    return a.astype(np.complex128, copy=False)


def as_multicoil(x, name="multi-coil k-space") -> np.ndarray:
    a = np.asarray(x)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3 or a.shape[0] < 1:
        raise InvalidInputError(f"{name} must have shape (C, H, W), got {a.shape}")
    _check_finite(a, name)
    return a.astype(np.complex128, copy=False)


def dft2_centered(img) -> np.ndarray:
    """Unitary centered 2D DFT over the last two axes."""
    a = np.asarray(img)
    if a.ndim < 2:
        raise InvalidInputError(f"expected at least 2 dims, got shape {a.shape}")
    _check_finite(a)
    axes = (-2, -1)
    return np.fft.fftshift(
        np.fft.fft2(np.fft.ifftshift(a, axes=axes), axes=axes, norm="ortho"), axes=axes)


def idft2_centered(ksp) -> np.ndarray:
    """Inverse of :func:`dft2_centered`."""
    a = np.asarray(ksp)
    if a.ndim < 2:
        raise InvalidInputError(f"expected at least 2 dims, got shape {a.shape}")
    _check_finite(a)
    axes = (-2, -1)
    return np.fft.fftshift(
        np.fft.ifft2(np.fft.ifftshift(a, axes=axes), axes=axes, norm="ortho"), axes=axes)


def padded_shape(shape, factor) -> tuple[int, int]:
    """Output dims of zero-padding by ``factor`` per axis (half-up rounding)."""
    if factor < 1:
        raise InvalidArgumentError(f"zero-pad factor must be >= 1, got {factor}")
    h, w = shape[-2:]
    return int(np.floor(h * factor + 0.5)), int(np.floor(w * factor + 0.5))


def block_offsets(outer, inner) -> tuple[int, int]:
    """Top-left corner of the centered ``inner`` block inside ``outer``.

    The block is placed so both shapes share the same DC index
    (``n // 2``); any odd/even surplus therefore lands on the low side.
    """
    return tuple(o // 2 - i // 2 for o, i in zip(outer[-2:], inner[-2:]))


def zero_pad_kspace(mck, factor) -> np.ndarray:
    """Embed (multi-coil) k-space in a zero array ``factor`` times larger per axis.

    Accepts ``(H, W)`` or ``(C, H, W)``; returns the same rank. ``factor == 1``
    returns the input array itself.
    """
    a = np.asarray(mck)
    if a.ndim not in (2, 3):
        raise InvalidInputError(f"expected (H, W) or (C, H, W), got {a.shape}")
    out_hw = padded_shape(a.shape, factor)
    if out_hw == a.shape[-2:]:
        return a
    out = np.zeros(a.shape[:-2] + out_hw, dtype=a.dtype)
    oy, ox = block_offsets(out_hw, a.shape)
    out[..., oy:oy + a.shape[-2], ox:ox + a.shape[-1]] = a
    return out


def center_crop(ksp, target_shape) -> np.ndarray:
    """Extract the centered block placed by :func:`zero_pad_kspace`."""
    a = np.asarray(ksp)
    th, tw = (int(t) for t in target_shape[-2:])
    h, w = a.shape[-2:]
    if th > h or tw > w or th < 1 or tw < 1:
        raise InvalidArgumentError(f"cannot crop {a.shape[-2:]} to {(th, tw)}")
    oy, ox = block_offsets((h, w), (th, tw))
    return a[..., oy:oy + th, ox:ox + tw]


def rss_combine(coil_images) -> np.ndarray:
    """Root sum-of-squares over the coil axis; returns a real non-negative image.

    ``coil_images`` may be a ``(C, H, W)`` array or a sequence of ``(H, W)``
    arrays.
    """
    if isinstance(coil_images, np.ndarray):
        stack = coil_images
        if stack.ndim == 2:
            stack = stack[None]
    else:
        imgs = [np.asarray(c) for c in coil_images]
        if not imgs:
            raise InvalidInputError("rss_combine needs at least one coil")
        if len({i.shape for i in imgs}) != 1:
            raise InvalidInputError("coil images have mismatched shapes")
        stack = np.stack(imgs)
    if stack.ndim != 3 or stack.shape[0] < 1:
        raise InvalidInputError(f"expected (C, H, W) coil stack, got {stack.shape}")
    _check_finite(stack, "coil images")
    return np.sqrt(np.sum(np.abs(stack) ** 2, axis=0))


def mirror_index(shape):
    """Index arrays mapping each centered k-space location k to -k."""
    h, w = shape[-2:]
    iy = (2 * (h // 2) - np.arange(h)) % h
    ix = (2 * (w // 2) - np.arange(w)) % w
    return iy[:, None], ix[None, :]


def conjugate_symmetry_error(ksp) -> float:
    """max |K(k) - conj(K(-k))| over a centered k-space array."""
    a = np.asarray(ksp)
    iy, ix = mirror_index(a.shape)
    return float(np.max(np.abs(a - np.conj(a[..., iy, ix]))))
