"""Experiment configuration: TOML schema, validation and canonical hashing."""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from ..errors import ConfigError
from ..metrics import NRMSE_NORMS
from ..pipelines import NC
from ..sampling import SCHEME_KINDS as SCHEMES

CRIME_KINDS = ("I", "II", "mask-stats")
SOLVERS = ("cs", "dictl")

DEFAULT_ZERO_PAD = (1.0, 1.25, 1.5, 1.75, 2.0)
DEFAULT_QF = (NC, 75, 50, 20)
DEFAULT_LAMBDA_GRID = tuple(10.0 ** -k for k in range(9, 0, -1))


@dataclass(frozen=True)
class CorpusSpec:
    count: int = 30
    shape: tuple[int, int] = (256, 256)
    coils: int = 4
    seed: int = 0
    snr_db: float | None = 40.0
    inner: float | None = None
    texture: float = 0.05
    ingest: str | None = None
    key: str = "kspace"


@dataclass(frozen=True)
class SplitSpec:
    calibration: int = 10
    test: int = 20


@dataclass(frozen=True)
class SamplingSpec:
    scheme: str = "strong_vd"
    R: float = 4.0
    power: int | None = None
    calib: tuple[int, int] = (6, 6)

    @property
    def target_rate(self) -> float:
        return 1.0 / self.R


@dataclass(frozen=True)
class CsGrid:
    lam: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    max_iters: int = 200
    rel_tol: float = 1e-6
    levels: int = 4


@dataclass(frozen=True)
class DictlGrid:
    n_atoms: tuple[int, ...] = (64, 128)
    sparsity: tuple[int, ...] = (5, 9)
    lam: tuple[float, ...] = (1e-3, 1e-2)
    block: tuple[int, ...] = (8,)
    n_iter: tuple[int, ...] = (5, 9)
    stride: int = 2
    ksvd_sweeps: int = 10
    n_train: int | None = None

    @property
    def size(self) -> int:
        return len(self.n_atoms) * len(self.sparsity) * len(self.lam) * len(self.block) * len(self.n_iter)


@dataclass(frozen=True)
class MaskStatsSpec:
    schemes: tuple[str, ...] = SCHEMES
    paddings: tuple[float, ...] = (1.0, 1.5, 2.0, 3.0)
    target_rate: float = 0.17
    n_masks: int = 15
    base_shape: tuple[int, int] = (320, 320)
    calib: tuple[int, int] = (6, 6)


@dataclass(frozen=True)
class ExperimentConfig:
    crime: str
    variants: tuple = ()
    solvers: tuple[str, ...] = SOLVERS
    master_seed: int = 0
    outdir: str = "results"
    metric_norm: str = "range"
    sampling: SamplingSpec = field(default_factory=SamplingSpec)
    corpus: CorpusSpec = field(default_factory=CorpusSpec)
    split: SplitSpec = field(default_factory=SplitSpec)
    cs: CsGrid = field(default_factory=CsGrid)
    dictl: DictlGrid = field(default_factory=DictlGrid)
    mask_stats: MaskStatsSpec = field(default_factory=MaskStatsSpec)

    def __post_init__(self):
        validate(self)

    @property
    def calibration_ids(self) -> tuple[int, ...]:
        return tuple(range(self.split.calibration))

    @property
    def test_ids(self) -> tuple[int, ...]:
        c = self.split.calibration
        return tuple(range(c, c + self.split.test))

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, master_seed=int(seed))

    def with_outdir(self, outdir) -> "ExperimentConfig":
        return replace(self, outdir=str(outdir))

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form (output directory excluded)."""
        d = self.to_dict()
        d.pop("outdir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def normalize_variant(crime: str, v):
    if crime == "I":
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 1:
            raise ConfigError(f"zero-pad factor must be a number >= 1, got {v!r}")
        return float(v)
    if crime == "II":
        if isinstance(v, str) and v.upper() == NC:
            return NC
        if isinstance(v, bool) or not isinstance(v, int) or not 1 <= v <= 100:
            raise ConfigError(f"JPEG variant must be 'NC' or an integer QF in 1..100, got {v!r}")
        return int(v)
    raise ConfigError(f"variants are not used by crime kind {crime!r}")


def variant_label(v) -> str:
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


def validate(cfg: ExperimentConfig) -> None:
    if cfg.crime not in CRIME_KINDS:
        raise ConfigError(f"crime must be one of {CRIME_KINDS}, got {cfg.crime!r}")
    if cfg.metric_norm not in NRMSE_NORMS:
        raise ConfigError(f"metric_norm must be one of {NRMSE_NORMS}")
    if cfg.crime == "mask-stats":
        ms = cfg.mask_stats
        if not ms.schemes or not ms.paddings or ms.n_masks < 1:
            raise ConfigError("mask_stats needs schemes, paddings and n_masks >= 1")
        if any(s not in SCHEMES for s in ms.schemes):
            raise ConfigError(f"unknown scheme in {ms.schemes}")
        if not 0 < ms.target_rate <= 1:
            raise ConfigError("mask_stats.target_rate must be in (0, 1]")
        return
    if not cfg.variants:
        raise ConfigError("variants must be non-empty")
    if len(set(cfg.variants)) != len(cfg.variants):
        raise ConfigError("duplicate variants")
    if not cfg.solvers or any(s not in SOLVERS for s in cfg.solvers):
        raise ConfigError(f"solvers must be a non-empty subset of {SOLVERS}")
    if cfg.sampling.scheme not in SCHEMES:
        raise ConfigError(f"unknown sampling scheme {cfg.sampling.scheme!r}")
    if not cfg.sampling.R >= 1:
        raise ConfigError("R must be >= 1")
    sp = cfg.split
    if sp.calibration < 1 or sp.test < 1:
        raise ConfigError("split needs at least one calibration and one test case")
    if cfg.corpus.ingest is None and cfg.corpus.count < sp.calibration + sp.test:
        raise ConfigError(f"corpus of {cfg.corpus.count} cannot hold {sp.calibration} + {sp.test} cases")
    if "cs" in cfg.solvers and not cfg.cs.lam:
        raise ConfigError("CS lambda grid is empty")
    if "dictl" in cfg.solvers and cfg.dictl.size == 0:
        raise ConfigError("DictL grid is empty")


# ---------------------------------------------------------------------------
# TOML loading
# ---------------------------------------------------------------------------

_SECTIONS = {"sampling": SamplingSpec, "corpus": CorpusSpec, "split": SplitSpec,
             "cs": CsGrid, "dictl": DictlGrid, "mask_stats": MaskStatsSpec}
_TOP = {"crime", "variants", "solvers", "master_seed", "outdir", "metric_norm"}


def _build(cls, table: dict, where: str):
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    known = {f.name: f for f in fields(cls)}
    unknown = set(table) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {sorted(unknown)}")
    kw = {}
    for k, v in table.items():
        default = getattr(cls(), k)
        if isinstance(v, list):
            v = tuple(v)
        if isinstance(default, tuple) and not isinstance(v, tuple):
            v = (v,)
        if isinstance(default, float) and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        kw[k] = v
    try:
        return cls(**kw)
    except TypeError as e:  # pragma: no cover
        raise ConfigError(f"[{where}]: {e}") from None


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    unknown = set(d) - _TOP - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    if "crime" not in d:
        raise ConfigError("missing required key 'crime'")
    crime = str(d["crime"])
    kw = {"crime": crime}
    for k in ("master_seed", "outdir", "metric_norm"):
        if k in d:
            kw[k] = d[k]
    if "solvers" in d:
        kw["solvers"] = tuple(d["solvers"])
    if crime in ("I", "II"):
        raw = d.get("variants", DEFAULT_ZERO_PAD if crime == "I" else DEFAULT_QF)
        kw["variants"] = tuple(normalize_variant(crime, v) for v in raw)
    elif "variants" in d:
        raise ConfigError("variants are not used by crime kind 'mask-stats'")
    for name, cls in _SECTIONS.items():
        if name in d:
            kw[name] = _build(cls, d[name], name)
    try:
        return ExperimentConfig(**kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        with p.open("rb") as fh:
            d = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{p}: {e}") from None
    return config_from_dict(d)
