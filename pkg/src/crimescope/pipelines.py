"""Hidden preprocessing pipelines (scanner zero-pad + RSS, JPEG), k-space
synthesis from preprocessed images, raw-data I/O and synthetic phantoms."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from . import jpeg
from .core import as_multicoil, dft2_centered, idft2_centered, rss_combine, zero_pad_kspace
from .errors import IngestError, InvalidArgumentError, InvalidInputError

NC = "NC"


@dataclass(frozen=True, eq=False)
class RawCase:
    mck: np.ndarray  # (C, H, W) complex, centered k-space per coil
    source_id: str

    def __post_init__(self):
        object.__setattr__(self, "mck", as_multicoil(self.mck))

    @property
    def shape(self):
        return self.mck.shape[-2:]

    @property
    def n_coils(self):
        return self.mck.shape[0]


@dataclass(frozen=True)
class Provenance:
    pipeline: str
    source_id: str
    original_shape: tuple[int, int]
    zero_pad_factor: float = 1.0
    qf: str | int = NC
    norm_factor: float = 1.0
    scale_8bit: float | None = None
    jpeg_engine: str | None = None
    padding_convention: str = "per-axis"
    quantisation: str | None = None

    def to_json(self):
        d = asdict(self)
        d["original_shape"] = list(self.original_shape)
        return d

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        d["original_shape"] = tuple(d["original_shape"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class PreprocessedCase:
    gold: np.ndarray  # real, non-negative
    synth_kspace: np.ndarray
    provenance: Provenance = field(compare=False)


def coil_images(mck) -> np.ndarray:
    return idft2_centered(as_multicoil(mck))


def synthesize_kspace(gold) -> np.ndarray:
    """Forward unitary DFT of a (real, non-negative) preprocessed image."""
    g = np.asarray(gold)
    if np.iscomplexobj(g) and np.any(g.imag != 0):
        raise InvalidInputError("gold image must be real")
    g = g.real if np.iscomplexobj(g) else g
    if np.any(g < 0):
        raise InvalidInputError("gold image must be non-negative")
    return dft2_centered(g)


def scanner_pipeline(raw: RawCase, zero_pad_factor: float = 1.0) -> PreprocessedCase:
    """Zero-pad each coil's k-space, inverse DFT, RSS-combine, scale to max 1."""
    padded = zero_pad_kspace(raw.mck, zero_pad_factor)
    img = rss_combine(coil_images(padded))
    peak = float(img.max())
    if peak <= 0:
        raise InvalidInputError(f"case {raw.source_id}: image is identically zero")
    gold = img / peak
    prov = Provenance("scanner", raw.source_id, tuple(raw.shape),
                      zero_pad_factor=float(zero_pad_factor), norm_factor=peak)
    return PreprocessedCase(gold, synthesize_kspace(gold), prov)


def _check_qf(qf):
    if isinstance(qf, str):
        if qf.upper() != NC:
            raise InvalidArgumentError(f"quality factor must be 1..100 or 'NC', got {qf!r}")
        return NC
    return jpeg.check_quality(qf)


def jpeg_pipeline(raw: RawCase, quality_factor=75, engine: str = "builtin") -> PreprocessedCase:
    """RSS image (no zero-padding), 8-bit quantised and JPEG round-tripped.

    ``quality_factor="NC"`` skips both the 8-bit step and compression.
    """
    qf = _check_qf(quality_factor)
    img = rss_combine(coil_images(raw.mck))
    peak = float(img.max())
    if peak <= 0:
        raise InvalidInputError(f"case {raw.source_id}: image is identically zero")
    scale = 255.0 / peak
    if qf == NC:
        gold = img / peak
        prov = Provenance("jpeg", raw.source_id, tuple(raw.shape), qf=NC, norm_factor=peak)
    else:
        img8 = np.clip(np.floor(img * scale + 0.5), 0, 255).astype(np.uint8)
        if engine == "builtin":
            dec = jpeg.jpeg_codec(img8, qf)
        elif engine == "pillow":
            dec = jpeg.pillow_codec(img8, qf)
        else:
            raise InvalidArgumentError(f"unknown JPEG engine {engine!r}")
        gold = dec.astype(np.float64) / 255.0
        prov = Provenance("jpeg", raw.source_id, tuple(raw.shape), qf=qf, norm_factor=peak,
                          scale_8bit=scale, jpeg_engine=engine,
                          quantisation="linear max->255, round half up")
    return PreprocessedCase(gold, synthesize_kspace(gold), prov)


def rerun(prov: Provenance, raw: RawCase) -> PreprocessedCase:
    """Reproduce a case from its provenance record and source data."""
    if prov.pipeline == "scanner":
        return scanner_pipeline(raw, prov.zero_pad_factor)
    return jpeg_pipeline(raw, prov.qf, engine=prov.jpeg_engine or "builtin")


# ---------------------------------------------------------------------------
# raw-data container
# ---------------------------------------------------------------------------

def ingest_dataset(path, key: str = "kspace") -> Iterator[RawCase]:
    """Stream one :class:`RawCase` per slice from an HDF5 file.

    The dataset ``key`` must be complex with shape (slices, coils, H, W).
    Slices are read lazily, one at a time.
    """
    import h5py

    path = Path(path)
    try:
        f = h5py.File(path, "r")
    except OSError as exc:
        raise IngestError(f"{path}: cannot open as HDF5 ({exc})") from exc
    with f:
        if key not in f:
            raise IngestError(f"{path}: missing dataset {key!r} (found: {sorted(f.keys())})")
        ds = f[key]
        if ds.ndim != 4:
            raise IngestError(f"{path}: {key!r} must have rank 4 (slices, coils, H, W), got shape {ds.shape}")
        if ds.dtype.kind != "c":
            raise IngestError(f"{path}: {key!r} must be complex, got dtype {ds.dtype}")
        for s in range(ds.shape[0]):
            yield RawCase(ds[s], f"{path.stem}:{s}")


def read_raw_cases(path, key="kspace") -> list[RawCase]:
    return list(ingest_dataset(path, key))


def export_dataset(cases, path, key: str = "kspace", dtype=np.complex64) -> Path:
    """Write raw cases (equal shapes) as one (slices, coils, H, W) dataset."""
    import h5py

    cases = list(cases)
    if not cases:
        raise InvalidArgumentError("nothing to export")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stack = np.stack([c.mck for c in cases]).astype(dtype)
    with h5py.File(path, "w") as f:
        f.create_dataset(key, data=stack)
    return path


# ---------------------------------------------------------------------------
# preprocessed case directories
# ---------------------------------------------------------------------------

def save_case(case: PreprocessedCase, outdir) -> Path:
    """gold.png (16-bit), gold.npy, kspace.npy and provenance.json."""
    from PIL import Image

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    g16 = np.clip(np.floor(case.gold * 65535 + 0.5), 0, 65535).astype(np.uint16)
    Image.fromarray(g16).save(outdir / "gold.png")
    np.save(outdir / "gold.npy", case.gold)
    np.save(outdir / "kspace.npy", case.synth_kspace)
    (outdir / "provenance.json").write_text(json.dumps(case.provenance.to_json(), indent=2))
    return outdir


def load_case(casedir) -> PreprocessedCase:
    casedir = Path(casedir)
    prov = Provenance.from_json(json.loads((casedir / "provenance.json").read_text()))
    return PreprocessedCase(np.load(casedir / "gold.npy"), np.load(casedir / "kspace.npy"), prov)


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------

# modified Shepp-Logan: intensity, semi-axes (a, b), centre (x0, y0), angle [deg]
SHEPP_LOGAN = np.array([
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
])


def _grid(shape):
    h, w = shape
    y = (np.arange(h) - h // 2) / (h / 2)
    x = (np.arange(w) - w // 2) / (w / 2)
    return np.meshgrid(x, -y, indexing="xy")


def ellipse_image(shape, ellipses) -> np.ndarray:
    X, Y = _grid(shape)
    img = np.zeros(shape)
    for rho, a, b, x0, y0, phi in ellipses:
        t = np.deg2rad(phi)
        xr = (X - x0) * np.cos(t) + (Y - y0) * np.sin(t)
        yr = -(X - x0) * np.sin(t) + (Y - y0) * np.cos(t)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += rho
    return img


def jittered_ellipses(rng, jitter=1.0) -> np.ndarray:
    e = SHEPP_LOGAN.copy()
    head = rng.uniform(0.85, 1.0)
    e[:, 1:5] *= head
    n = len(e)
    inner = slice(2, n)
    e[inner, 1:3] *= 1 + jitter * rng.uniform(-0.15, 0.15, size=(n - 2, 2))
    e[inner, 3:5] += jitter * rng.uniform(-0.03, 0.03, size=(n - 2, 2))
    e[inner, 5] += jitter * rng.uniform(-10, 10, size=n - 2)
    e[inner, 0] *= 1 + jitter * rng.uniform(-0.3, 0.3, size=n - 2)
    return e


def smooth_field(rng, shape, n_terms=6, max_freq=3.0) -> np.ndarray:
    """Sum of a few random low-frequency cosines, unit peak amplitude."""
    X, Y = _grid(shape)
    f = np.zeros(shape)
    for _ in range(n_terms):
        kx, ky = rng.uniform(-max_freq, max_freq, size=2)
        f += np.cos(np.pi * (kx * X + ky * Y) + rng.uniform(0, 2 * np.pi))
    return f / n_terms


def coil_sensitivities(rng, shape, n_coils) -> np.ndarray:
    """Smooth complex low-order polynomial maps, normalised to unit RSS."""
    X, Y = _grid(shape)
    maps = np.empty((n_coils,) + tuple(shape), dtype=np.complex128)
    for c in range(n_coils):
        th = 2 * np.pi * c / n_coils + rng.uniform(-0.2, 0.2)
        u = X * np.cos(th) + Y * np.sin(th)
        v = -X * np.sin(th) + Y * np.cos(th)
        mag = 1 + 0.6 * u + 0.2 * u ** 2 + rng.uniform(-0.1, 0.1) * u * v
        phase = rng.uniform(0, 2 * np.pi) + rng.uniform(-0.5, 0.5) * u + rng.uniform(-0.5, 0.5) * v
        maps[c] = mag * np.exp(1j * phase)
    return maps / np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))


def _phantom_image(rng, shape, phase, texture, inner=None):
    e = jittered_ellipses(rng)
    if inner is not None:
        e[1, 0] = -float(inner)
    img = np.clip(ellipse_image(shape, e), 0, None)
    if texture:
        img = img * (1 + texture * smooth_field(rng, shape, max_freq=8.0))
    img = img.astype(np.complex128)
    if phase:
        img = img * np.exp(1j * np.pi / 2 * smooth_field(rng, shape, n_terms=3, max_freq=1.0))
    return img


def phantom_image(shape=(256, 256), seed=0, phase: bool = True, texture: float = 0.05,
                  inner: float | None = None) -> np.ndarray:
    """The complex object behind :func:`phantom` (before coils and noise)."""
    return _phantom_image(np.random.default_rng(seed), tuple(int(s) for s in shape), phase,
                          texture, inner)


def phantom(shape=(256, 256), n_coils=4, seed=0, snr_db: float | None = 40.0,
            sensitivities: str = "smooth", phase: bool = True, texture: float = 0.05,
            inner: float | None = None, source_id: str | None = None) -> RawCase:
    """Multi-coil k-space of a seed-jittered Shepp-Logan-style phantom.

    ``sensitivities="identity"`` (single coil only) skips coil modulation;
    ``snr_db=None`` disables the complex Gaussian noise. ``inner`` overrides
    the intensity drop from the bright rim to the interior (0.8 classically;
    smaller values give a low-contrast, noise-dominated object).
    """
    if n_coils < 1:
        raise InvalidArgumentError("n_coils must be >= 1")
    shape = tuple(int(s) for s in shape)
    rng = np.random.default_rng(seed)
    img = _phantom_image(rng, shape, phase, texture, inner)
    if sensitivities == "identity":
        if n_coils != 1:
            raise InvalidArgumentError("identity sensitivities need n_coils == 1")
        maps = np.ones((1,) + shape, dtype=np.complex128)
    elif sensitivities == "smooth":
        maps = coil_sensitivities(rng, shape, n_coils)
    else:
        raise InvalidArgumentError(f"unknown sensitivity model {sensitivities!r}")
    ksp = dft2_centered(maps * img)
    if snr_db is not None:
        sigma = np.sqrt(np.mean(np.abs(ksp) ** 2) / 10 ** (snr_db / 10) / 2)
        ksp = ksp + sigma * (rng.standard_normal(ksp.shape) + 1j * rng.standard_normal(ksp.shape))
    return RawCase(ksp, source_id if source_id is not None else f"phantom:{seed}")
