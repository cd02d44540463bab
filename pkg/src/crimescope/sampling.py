"""Variable-density k-space sampling: densities, Monte-Carlo masks and the
global vs. effective sampling-rate bookkeeping behind zero-padded data."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .core import block_offsets, center_crop, padded_shape
from .errors import InfeasibleRateError, InvalidArgumentError
from .seeding import stream_seed_for

SCHEME_KINDS = ("uniform", "weak_vd", "strong_vd")
WEAK_VD_POWER = 7
STRONG_VD_POWERS = {2: 1, 3: 2, 4: 3}
STRONG_VD_DEFAULT_POWER = 3


@dataclass(frozen=True)
class SamplingScheme:
    kind: str
    power: int = 0

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise InvalidArgumentError(f"unknown sampling scheme {self.kind!r}")
        if self.kind != "uniform" and self.power < 1:
            raise InvalidArgumentError("VD schemes need a positive integer power")

    @classmethod
    def uniform(cls):
        return cls("uniform", 0)

    @classmethod
    def weak_vd(cls, power: int = WEAK_VD_POWER):
        return cls("weak_vd", power)

    @classmethod
    def strong_vd(cls, R: float | None = None, power: int | None = None):
        """Strong VD; the power follows R (2->1, 3->2, 4->3) unless given."""
        if power is None:
            power = STRONG_VD_POWERS.get(int(round(R)) if R else 0, STRONG_VD_DEFAULT_POWER)
        return cls("strong_vd", power)

    @classmethod
    def from_name(cls, name: str, R: float | None = None, power: int | None = None):
        if name == "uniform":
            return cls.uniform()
        if name == "weak_vd":
            return cls.weak_vd(power or WEAK_VD_POWER)
        if name == "strong_vd":
            return cls.strong_vd(R, power)
        raise InvalidArgumentError(f"unknown sampling scheme {name!r}")

    @property
    def label(self):
        return self.kind if self.kind == "uniform" else f"{self.kind}(p={self.power})"


@dataclass(frozen=True, eq=False)
class SamplingPdf:
    prob: np.ndarray
    target_rate: float
    calib_shape: tuple[int, int]


@dataclass(frozen=True, eq=False)
class SamplingMask:
    mask: np.ndarray
    seed: int
    realized_rate: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "realized_rate", float(np.count_nonzero(self.mask)) / self.mask.size)

    @property
    def shape(self):
        return self.mask.shape


def calib_block(shape, calib_shape) -> np.ndarray:
    """Boolean array marking the centered calibration block."""
    out = np.zeros(shape, dtype=bool)
    ch, cw = calib_shape
    if ch <= 0 or cw <= 0:
        return out
    if ch > shape[0] or cw > shape[1]:
        raise InvalidArgumentError(f"calibration block {calib_shape} does not fit in {shape}")
    oy, ox = block_offsets(shape, (ch, cw))
    out[oy:oy + ch, ox:ox + cw] = True
    return out


def scaled_calib(calib_shape, factor) -> tuple[int, int]:
    """Calibration block grown with the image when k-space is zero-padded."""
    return padded_shape(calib_shape, factor) if factor != 1 else tuple(calib_shape)


def radial_distance(shape) -> np.ndarray:
    """Euclidean distance from the k-space center on per-axis [-1, 1] coordinates, clipped at 1."""
    h, w = shape
    u = (np.arange(h) - h // 2) / (h / 2)
    v = (np.arange(w) - w // 2) / (w / 2)
    return np.minimum(1.0, np.hypot(u[:, None], v[None, :]))


def base_density(shape, scheme: SamplingScheme, target_rate: float) -> np.ndarray:
    if scheme.kind == "uniform":
        return np.full(shape, target_rate, dtype=np.float64)
    return (1.0 - radial_distance(shape)) ** scheme.power


def build_pdf(shape, scheme: SamplingScheme, target_rate: float, calib_shape=(0, 0),
              tol: float = 1e-12, max_iter: int = 200) -> SamplingPdf:
    """Sampling density whose mean equals ``target_rate``.

    The base profile ``(1 - r)**p`` (or a constant for the uniform scheme) is
    shifted by a scalar offset, clipped to [0, 1], and the offset found by
    bisection. The calibration block is fixed at 1.
    """
    shape = tuple(int(s) for s in shape)
    if not 0 < target_rate <= 1:
        raise InvalidArgumentError(f"target_rate must be in (0, 1], got {target_rate}")
    calib = calib_block(shape, calib_shape)
    n = calib.size
    n_cal = int(calib.sum())
    if n_cal / n > target_rate + 1e-15:
        raise InfeasibleRateError(
            f"calibration block alone samples {n_cal / n:.4f} > target {target_rate}")
    f = base_density(shape, scheme, target_rate)[~calib]

    def mean_at(offset):
        return (n_cal + np.clip(f + offset, 0.0, 1.0).sum()) / n

    lo, hi = -1.0, 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mean_at(mid) > target_rate:
            hi = mid
        else:
            lo = mid
        if hi - lo < tol:
            break
    offset = lo if abs(mean_at(lo) - target_rate) <= abs(mean_at(hi) - target_rate) else hi
    prob = np.ones(shape, dtype=np.float64)
    prob[~calib] = np.clip(f + offset, 0.0, 1.0)
    return SamplingPdf(prob=prob, target_rate=float(target_rate), calib_shape=tuple(calib_shape))


def draw_mask(pdf: SamplingPdf, seed: int) -> SamplingMask:
    """Independent Bernoulli draw per pixel from a counter-based stream keyed by ``seed``."""
    u = kernels.uniform_grid(seed, pdf.prob.shape)
    mask = u < pdf.prob
    mask |= calib_block(pdf.prob.shape, pdf.calib_shape)
    return SamplingMask(mask=mask, seed=int(seed))


def effective_rate(mask, original_extent) -> float:
    """Sampling rate inside the centered ``original_extent`` block only."""
    m = mask.mask if isinstance(mask, SamplingMask) else np.asarray(mask)
    h, w = (int(e) for e in original_extent)
    if h > m.shape[0] or w > m.shape[1]:
        raise InvalidArgumentError(f"extent {(h, w)} larger than mask {m.shape}")
    return float(np.count_nonzero(center_crop(m, (h, w)))) / (h * w)


@dataclass(frozen=True)
class MaskStatRow:
    scheme: str
    padding: float
    target_rate: float
    mean_effective: float
    std_effective: float
    n_masks: int


def mask_statistics(schemes, paddings, target_rate, n_masks, base_shape=(320, 320),
                    base_calib=(6, 6), master_seed=0) -> list[MaskStatRow]:
    """Mean/std of the effective rate over ``n_masks`` seeds per (scheme, padding)."""
    if n_masks < 1:
        raise InvalidArgumentError("n_masks must be >= 1")
    rows = []
    for si, scheme in enumerate(schemes):
        for pi, fac in enumerate(paddings):
            shape = padded_shape(base_shape, fac)
            pdf = build_pdf(shape, scheme, target_rate, scaled_calib(base_calib, fac))
            rates = np.array([
                effective_rate(draw_mask(pdf, stream_seed_for(master_seed, si, pi, k)), base_shape)
                for k in range(n_masks)])
            rows.append(MaskStatRow(scheme.label, float(fac), float(target_rate), float(rates.mean()),
                                    float(rates.std(ddof=1)) if n_masks > 1 else 0.0, n_masks))
    return rows


def save_mask(mask: SamplingMask, path) -> None:
    """Write ``<path>.png`` (binary, 0/255) and ``<path>.npy``."""
    from PIL import Image

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(mask.mask.astype(np.uint8) * 255, mode="L").save(path.with_suffix(".png"))
    np.save(path.with_suffix(".npy"), mask.mask)
