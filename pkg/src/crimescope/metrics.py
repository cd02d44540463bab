"""NRMSE and SSIM on image magnitudes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import InvalidInputError, UndefinedMetricError

NRMSE_NORMS = ("range", "l2")


@dataclass(frozen=True)
class MetricReport:
    nrmse: float
    ssim: float
    case_id: int = -1
    variant: str = ""


def _magnitudes(ref, est):
    r = np.abs(np.asarray(ref))
    e = np.abs(np.asarray(est))
    if r.shape != e.shape:
        raise InvalidInputError(f"shape mismatch: {r.shape} vs {e.shape}")
    return r, e


def nrmse(ref, est, norm: str = "range") -> float:
    """Root-mean-square error of ``|est|`` vs ``|ref|``.

    ``norm="range"`` divides by ``max|ref| - min|ref|``; ``norm="l2"`` divides
    by the RMS of ``|ref|``.
    """
    r, e = _magnitudes(ref, est)
    rmse = np.sqrt(np.mean((e - r) ** 2))
    if norm == "range":
        denom = r.max() - r.min()
    elif norm == "l2":
        denom = np.sqrt(np.mean(r ** 2))
    else:
        raise InvalidInputError(f"unknown NRMSE normalisation {norm!r}")
    if denom == 0:
        raise UndefinedMetricError("reference image has zero dynamic range")
    return float(rmse / denom)


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """Normalised 1D Gaussian; the 2D window is its outer product."""
    t = np.arange(size) - (size - 1) / 2
    g = np.exp(-(t ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _filter_valid(x, g):
    y = correlate1d(correlate1d(x, g, axis=0, mode="constant"), g, axis=1, mode="constant")
    m = g.size // 2
    return y[m:x.shape[0] - m, m:x.shape[1] - m]


def ssim_map(ref, est, win: int = 11, sigma: float = 1.5, k1: float = 0.01, k2: float = 0.03):
    """Local SSIM over every fully-contained ``win x win`` Gaussian window."""
    r, e = _magnitudes(ref, est)
    if min(r.shape) < win:
        raise InvalidInputError(f"image {r.shape} smaller than SSIM window {win}")
    L = r.max() - r.min()
    if L == 0:
        raise UndefinedMetricError("reference image has zero dynamic range")
    c1 = (k1 * L) ** 2
    c2 = (k2 * L) ** 2
    g = gaussian_window(win, sigma)
    mu_x = _filter_valid(r, g)
    mu_y = _filter_valid(e, g)
    sxx = _filter_valid(r * r, g) - mu_x * mu_x
    syy = _filter_valid(e * e, g) - mu_y * mu_y
    sxy = _filter_valid(r * e, g) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    return num / den


def ssim(ref, est, **kwargs) -> float:
    """Mean local SSIM (Gaussian 11x11, sigma 1.5, K1=0.01, K2=0.03).

    The dynamic range comes from the reference, so the value is not
    symmetric in its arguments.
    """
    return float(np.mean(ssim_map(ref, est, **kwargs)))


def evaluate(ref, est, case_id=-1, variant="", norm="range") -> MetricReport:
    return MetricReport(nrmse(ref, est, norm), ssim(ref, est), case_id, variant)
