import numpy as np

from ..errors import InvalidInputError
from ..sampling import SamplingMask

_AX = (-2, -1)


def fft2c(x):
    # unchecked twin of core.dft2_centered for inner loops
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(x, axes=_AX), norm="ortho"), axes=_AX)


def ifft2c(k):
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(k, axes=_AX), norm="ortho"), axes=_AX)


def prepare(y, mask):
    """Validate and return (masked k-space, boolean mask)."""
    m = mask.mask if isinstance(mask, SamplingMask) else np.asarray(mask)
    y = np.asarray(y)
    if y.ndim != 2 or m.shape != y.shape:
        raise InvalidInputError(f"k-space {y.shape} and mask {m.shape} must be matching 2D arrays")
    if not np.all(np.isfinite(y[m.astype(bool)])):
        raise InvalidInputError("observed k-space samples must be finite")
    m = m.astype(bool)
    return np.where(m, y, 0).astype(np.complex128), m


def data_term(x, y, mask):
    """0.5 * ||U F x - U y||^2."""
    yo, m = prepare(y, mask)
    r = (fft2c(np.asarray(x, dtype=np.complex128)) - yo)[m]
    return 0.5 * float(np.vdot(r, r).real)
