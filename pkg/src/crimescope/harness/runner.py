"""Calibration and crime sweeps.

The coordinator turns a config into a flat list of reconstruction work
items. Workers are stateless: each one rebuilds its case from the corpus
settings and its mask from :func:`mask_seed_for`, so a result never depends on
which process ran it or in what order. Results are folded in case-id order.
"""
from __future__ import annotations

import functools
import itertools
import os
import time
from concurrent.futures import FIRST_EXCEPTION, ProcessPoolExecutor, wait
from dataclasses import dataclass, field, replace

import numpy as np

from ..core import center_crop, dft2_centered, idft2_centered, padded_shape
from ..errors import ConfigError, CrimescopeError, InvalidArgumentError
from ..metrics import nrmse, ssim
from ..pipelines import NC, jpeg_pipeline, phantom, read_raw_cases, scanner_pipeline
from ..sampling import (SamplingScheme, build_pdf, draw_mask, effective_rate, mask_statistics,
                        scaled_calib)
from ..seeding import case_seed_for, mask_seed_for, stream_seed_for
from ..solvers import CsParams, DictlParams, cs_fista, dictl_reconstruct
from .config import ExperimentConfig, variant_label


class CaseFailure(CrimescopeError):
    """A single reconstruction failed; carries the case id that aborted the run."""

    def __init__(self, case_id, variant, solver, message):
        super().__init__(f"case {case_id} (variant {variant}, solver {solver}) failed: {message}")
        self.case_id = case_id
        self.variant = variant
        self.solver = solver
        self.message = message

    def __reduce__(self):
        return type(self), (self.case_id, self.variant, self.solver, self.message)


@dataclass(frozen=True)
class CaseResult:
    crime: str
    variant: str
    solver: str
    scheme: str
    R: float
    case_id: int
    nrmse: float
    ssim: float
    oracle_nrmse: float
    effective_rate: float
    seed: int


@dataclass(frozen=True)
class SummaryRow:
    variant: str
    solver: str
    scheme: str
    R: float
    mean_nrmse: float
    std_nrmse: float
    mean_ssim: float
    std_ssim: float
    mean_oracle_nrmse: float
    mean_effective_rate: float
    n_cases: int
    chosen_hyperparams: str


@dataclass
class ResultsTable:
    crime: str
    cases: list = field(default_factory=list)
    summary: list = field(default_factory=list)
    hyperparams: dict = field(default_factory=dict)
    calibration: list = field(default_factory=list)
    mask_stats: list = field(default_factory=list)
    config: ExperimentConfig | None = None
    wall_times: dict = field(default_factory=dict)

    def row(self, variant, solver) -> SummaryRow:
        label = variant_label(variant) if not isinstance(variant, str) else variant
        for r in self.summary:
            if r.variant == label and r.solver == solver:
                return r
        raise KeyError((variant, solver))

    def column(self, name, variant, solver) -> np.ndarray:
        label = variant_label(variant) if not isinstance(variant, str) else variant
        return np.array([getattr(c, name) for c in self.cases
                         if c.variant == label and c.solver == solver])


# ---------------------------------------------------------------------------
# cases and masks (rebuilt inside every worker, cached per process)
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=4)
def _ingested(path, key):
    return tuple(read_raw_cases(path, key))


@functools.lru_cache(maxsize=256)
def raw_case(corpus, case_id):
    if corpus.ingest is not None:
        cases = _ingested(corpus.ingest, corpus.key)
        if case_id >= len(cases):
            raise InvalidArgumentError(f"case {case_id} not in {corpus.ingest} ({len(cases)} cases)")
        return cases[case_id]
    return phantom(tuple(corpus.shape), corpus.coils, seed=case_seed_for(corpus.seed, case_id),
                   snr_db=corpus.snr_db, texture=corpus.texture, inner=corpus.inner,
                   source_id=f"phantom:{corpus.seed}:{case_id}")


def preprocess(cfg: ExperimentConfig, variant, case_id):
    raw = raw_case(cfg.corpus, case_id)
    if cfg.crime == "I":
        return scanner_pipeline(raw, variant)
    return jpeg_pipeline(raw, variant)


def scheme_of(cfg: ExperimentConfig) -> SamplingScheme:
    s = cfg.sampling
    return SamplingScheme.from_name(s.scheme, s.R, s.power)


@functools.lru_cache(maxsize=32)
def _pdf(shape, scheme, rate, calib):
    return build_pdf(shape, scheme, rate, calib)


def case_mask(cfg: ExperimentConfig, variant, case_id, shape):
    """Mask for ``case_id`` over the full (possibly padded) k-space grid."""
    calib = tuple(cfg.sampling.calib)
    if cfg.crime == "I":
        calib = scaled_calib(calib, variant)
    pdf = _pdf(tuple(shape), scheme_of(cfg), cfg.sampling.target_rate, calib)
    return draw_mask(pdf, mask_seed_for(cfg.master_seed, case_id, 0))


def original_geometry(recon, case, ref_case):
    """Bring a reconstruction back to the unprocessed image grid and scale."""
    prov = case.provenance
    if recon.shape == ref_case.gold.shape:
        return recon
    k = center_crop(dft2_centered(recon), ref_case.gold.shape)
    return idft2_centered(k) * (prov.norm_factor / ref_case.provenance.norm_factor)


# ---------------------------------------------------------------------------
# work items
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WorkItem:
    variant: object
    solver: str
    case_id: int
    params: object               # CsParams or DictlParams
    score_at: tuple = ()         # DictL: N_iter values scored from one run
    test: bool = False


def dictl_seed(cfg, case_id):
    return stream_seed_for(cfg.master_seed, case_id, 0xD1C7)


def _reconstruct(cfg, item, case, mask, score=None):
    y = case.synth_kspace
    if item.solver == "cs":
        return cs_fista(y, mask, item.params)
    cb = None
    if score is not None:
        wanted = set(item.score_at)
        cb = lambda it, x, z: score(it + 1, x) if it + 1 in wanted else None  # noqa: E731
    return dictl_reconstruct(y, mask, item.params, seed=dictl_seed(cfg, item.case_id), callback=cb)


def run_item(cfg: ExperimentConfig, item: WorkItem):
    try:
        case = preprocess(cfg, item.variant, item.case_id)
        mask = case_mask(cfg, item.variant, item.case_id, case.gold.shape)
        norm = cfg.metric_norm
        if not item.test:
            scores = {}

            def score(n_iter, x):
                scores[n_iter] = nrmse(case.gold, x, norm)

            x = _reconstruct(cfg, item, case, mask, score if item.solver == "dictl" else None)
            if item.solver == "cs":
                return {None: nrmse(case.gold, x, norm)}
            return scores
        x = _reconstruct(cfg, item, case, mask)
        ref = preprocess(cfg, 1.0 if cfg.crime == "I" else NC, item.case_id)
        oracle = nrmse(ref.gold, original_geometry(x, case, ref), norm)
        return CaseResult(
            crime=cfg.crime, variant=variant_label(item.variant), solver=item.solver,
            scheme=scheme_of(cfg).label, R=float(cfg.sampling.R), case_id=int(item.case_id),
            nrmse=nrmse(case.gold, x, norm), ssim=ssim(case.gold, x), oracle_nrmse=oracle,
            effective_rate=effective_rate(mask, case.provenance.original_shape),
            seed=int(mask.seed))
    except CaseFailure:
        raise
    except Exception as e:
        raise CaseFailure(item.case_id, variant_label(item.variant), item.solver,
                          f"{type(e).__name__}: {e}") from e


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

_LIMITS = None


def _init_worker():
    global _LIMITS
    from threadpoolctl import threadpool_limits
    _LIMITS = threadpool_limits(1)


def execute(cfg: ExperimentConfig, items, jobs: int = 1) -> list:
    """Run items and return their results in item order; abort on first failure."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        from threadpoolctl import threadpool_limits
        with threadpool_limits(1):
            return [run_item(cfg, it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker) as pool:
        futures = [pool.submit(run_item, cfg, it) for it in items]
        done, pending = wait(futures, return_when=FIRST_EXCEPTION)
        failed = [f for f in futures if f.done() and f.exception() is not None]
        if failed:
            for f in pending:
                f.cancel()
            raise failed[0].exception()
        return [f.result() for f in futures]


def default_jobs() -> int:
    return max(1, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

def cs_candidates(cfg: ExperimentConfig, grid=None):
    g = cfg.cs
    lams = sorted(float(v) for v in (g.lam if grid is None else grid))
    if not lams:
        raise ConfigError("empty lambda grid")
    return [CsParams(lam, g.max_iters, g.rel_tol, g.levels) for lam in lams]


def dictl_candidates(cfg: ExperimentConfig):
    """Grid points in lexicographic (P, K, lambda_D, b, N_iter) order."""
    g = cfg.dictl
    out = []
    for P, K, lam, b, n in itertools.product(sorted(g.n_atoms), sorted(g.sparsity), sorted(g.lam),
                                             sorted(g.block), sorted(g.n_iter)):
        out.append(DictlParams(n_atoms=P, sparsity=K, lam=float(lam), block=b, n_iter=n,
                               n_train=g.n_train, stride=g.stride, ksvd_sweeps=g.ksvd_sweeps))
    if not out:
        raise ConfigError("empty DictL grid")
    return out


def _calibration_items(cfg, variant, solver):
    """Work items plus a decoder mapping their results to per-candidate scores."""
    ids = cfg.calibration_ids
    if solver == "cs":
        cands = cs_candidates(cfg)
        items = [WorkItem(variant, "cs", cid, p) for p in cands for cid in ids]

        def decode(results):
            n = len(ids)
            return [(p, float(np.mean([r[None] for r in results[i * n:(i + 1) * n]])))
                    for i, p in enumerate(cands)]
        return items, decode
    cands = dictl_candidates(cfg)
    # one run per (P, K, lambda, b) scored at every requested N_iter
    groups = {}
    for p in cands:
        groups.setdefault((p.n_atoms, p.sparsity, p.lam, p.block), []).append(p)
    items = []
    keys = list(groups)
    for k in keys:
        ps = groups[k]
        top = max(ps, key=lambda p: p.n_iter)
        at = tuple(sorted(p.n_iter for p in ps))
        items += [WorkItem(variant, "dictl", cid, top, score_at=at) for cid in ids]

    def decode(results):
        n = len(ids)
        out = []
        for gi, k in enumerate(keys):
            chunk = results[gi * n:(gi + 1) * n]
            for p in groups[k]:
                out.append((p, float(np.mean([r[p.n_iter] for r in chunk]))))
        return out
    return items, decode


def _pick(scored, key):
    """Lowest mean NRMSE; ties go to the candidate ordered first by ``key``."""
    best = None
    for p, s in sorted(scored, key=lambda ps: key(ps[0])):
        if best is None or s < best[1]:
            best = (p, s)
    return best


def _cs_key(p):
    return p.lam


def _dictl_key(p):
    return (p.n_atoms, p.sparsity, p.lam, p.block, p.n_iter)


def calibrate_cs(cfg: ExperimentConfig, variant, grid=None, jobs: int = 1):
    """Pick the lambda with the lowest mean NRMSE over the calibration cases."""
    if grid is not None:
        if not list(grid):
            raise ConfigError("empty lambda grid")
        cfg = replace(cfg, cs=replace(cfg.cs, lam=tuple(float(v) for v in grid)))
    items, decode = _calibration_items(cfg, variant, "cs")
    scored = decode(execute(cfg, items, jobs))
    return _pick(scored, _cs_key)[0], scored


def calibrate_dictl(cfg: ExperimentConfig, variant, jobs: int = 1):
    """Exhaustive product-grid search; returns the best params and all scores."""
    items, decode = _calibration_items(cfg, variant, "dictl")
    scored = decode(execute(cfg, items, jobs))
    return _pick(scored, _dictl_key)[0], scored


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def describe_params(p) -> str:
    if isinstance(p, CsParams):
        return f"lam={p.lam:g}"
    return f"P={p.n_atoms};K={p.sparsity};lam={p.lam:g};b={p.block};N_iter={p.n_iter}"


def _sd(a):
    return float(a.std(ddof=1)) if a.size > 1 else 0.0


def _summarize_loaded(cases, hyper) -> list:
    """Aggregate per-case rows by (variant, solver), keeping first-seen order."""
    keys = []
    for c in cases:
        if (c.variant, c.solver) not in keys:
            keys.append((c.variant, c.solver))
    rows = []
    for v, s in keys:
        sel = [c for c in cases if c.variant == v and c.solver == s]
        nr = np.array([c.nrmse for c in sel])
        ss = np.array([c.ssim for c in sel])
        rows.append(SummaryRow(
            v, s, sel[0].scheme, sel[0].R, float(nr.mean()), _sd(nr), float(ss.mean()), _sd(ss),
            float(np.mean([c.oracle_nrmse for c in sel])),
            float(np.mean([c.effective_rate for c in sel])), len(sel), hyper.get((v, s), "")))
    return rows


def _summarize(cfg, cases, chosen):
    hyper = {k: describe_params(p) for k, p in chosen.items()}
    return _summarize_loaded(sorted(cases, key=lambda c: (
        [variant_label(v) for v in cfg.variants].index(c.variant),
        cfg.solvers.index(c.solver), c.case_id)), hyper)


def run_crime(cfg: ExperimentConfig, jobs: int = 1, log=None) -> ResultsTable:
    """Per-variant calibration, then one fresh-mask reconstruction per test case."""
    if cfg.crime not in ("I", "II"):
        raise InvalidArgumentError(f"run_crime needs crime I or II, got {cfg.crime!r}")
    if cfg.corpus.ingest is not None:
        n = len(_ingested(cfg.corpus.ingest, cfg.corpus.key))
        need = cfg.split.calibration + cfg.split.test
        if n < need:
            raise InvalidArgumentError(f"{cfg.corpus.ingest} holds {n} cases, split needs {need}")
    table = ResultsTable(cfg.crime, config=cfg)
    t0 = time.perf_counter()

    # calibration: every (variant, solver) searched on that variant's own data
    items, decoders = [], []
    for v in cfg.variants:
        for s in cfg.solvers:
            its, dec = _calibration_items(cfg, v, s)
            decoders.append((v, s, len(items), len(its), dec))
            items += its
    results = execute(cfg, items, jobs)
    chosen = {}
    for v, s, start, n, dec in decoders:
        scored = dec(results[start:start + n])
        best = _pick(scored, _cs_key if s == "cs" else _dictl_key)[0]
        chosen[(variant_label(v), s)] = best
        table.calibration += [(variant_label(v), s, describe_params(p), sc) for p, sc in scored]
        if log:
            log(f"calibrated {s} for variant {variant_label(v)}: {describe_params(best)}")
    table.hyperparams = {k: describe_params(p) for k, p in chosen.items()}
    t1 = time.perf_counter()

    items = [WorkItem(v, s, cid, chosen[(variant_label(v), s)], test=True)
             for v in cfg.variants for s in cfg.solvers for cid in cfg.test_ids]
    table.cases = execute(cfg, items, jobs)
    t2 = time.perf_counter()
    table.summary = _summarize(cfg, table.cases, chosen)
    table.wall_times = {"calibration_s": t1 - t0, "test_s": t2 - t1, "total_s": t2 - t0}
    return table


def run_crime1(cfg: ExperimentConfig, jobs: int = 1, log=None) -> ResultsTable:
    if cfg.crime != "I":
        raise InvalidArgumentError("config is not a crime I experiment")
    return run_crime(cfg, jobs, log)


def run_crime2(cfg: ExperimentConfig, jobs: int = 1, log=None) -> ResultsTable:
    if cfg.crime != "II":
        raise InvalidArgumentError("config is not a crime II experiment")
    return run_crime(cfg, jobs, log)


def run_mask_stats(cfg: ExperimentConfig, jobs: int = 1, log=None) -> ResultsTable:
    ms = cfg.mask_stats
    t0 = time.perf_counter()
    schemes = [SamplingScheme.from_name(s, 1.0 / ms.target_rate, cfg.sampling.power
                                        if s == cfg.sampling.scheme else None)
               for s in ms.schemes]
    rows = mask_statistics(schemes, ms.paddings, ms.target_rate, ms.n_masks,
                           tuple(ms.base_shape), tuple(ms.calib), cfg.master_seed)
    table = ResultsTable("mask-stats", mask_stats=rows, config=cfg)
    table.wall_times = {"total_s": time.perf_counter() - t0}
    return table


def padded_geometry(cfg: ExperimentConfig, variant):
    if cfg.crime == "I":
        return padded_shape(tuple(cfg.corpus.shape), variant)
    return tuple(cfg.corpus.shape)
