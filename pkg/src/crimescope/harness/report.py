"""Result emission: per-case CSV, summary CSV, SVG line plots and a run manifest."""
from __future__ import annotations

import csv
import json
import platform
from dataclasses import asdict, fields
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .runner import CaseResult, ResultsTable, SummaryRow

CSV_COLUMNS = ("crime", "variant", "solver", "scheme", "R", "case_id", "nrmse", "ssim",
               "oracle_nrmse", "effective_rate", "seed")
MASK_COLUMNS = ("scheme", "padding", "target_rate", "mean_effective", "std_effective", "n_masks")
RESULTS_CSV = "results.csv"
SUMMARY_CSV = "summary.csv"
MASK_CSV = "mask_stats.csv"
MANIFEST = "manifest.json"


def _fmt(v) -> str:
    # repr of a Python float round-trips exactly
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _write_rows(path: Path, columns, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in columns])


def write_results_csv(cases, path) -> Path:
    path = Path(path)
    _write_rows(path, CSV_COLUMNS, cases)
    return path


def read_results_csv(path) -> list[CaseResult]:
    types = {f.name: f.type for f in fields(CaseResult)}
    conv = {"float": float, "int": int, "str": str}
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            out.append(CaseResult(**{k: conv[types[k]](v) for k, v in row.items()}))
    return out


def write_summary_csv(summary, path) -> Path:
    path = Path(path)
    _write_rows(path, tuple(f.name for f in fields(SummaryRow)), summary)
    return path


def write_mask_csv(rows, path) -> Path:
    path = Path(path)
    _write_rows(path, MASK_COLUMNS, rows)
    return path


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def svg_lineplot(x_labels, series: dict, title: str, ylabel: str, width=640, height=400) -> str:
    """Categorical-x line plot; ``series`` maps name -> (means, stds)."""
    ml, mr, mt, mb = 70, 160, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    n = len(x_labels)
    lo = min(float(np.min(np.asarray(m) - np.asarray(s))) for m, s in series.values())
    hi = max(float(np.max(np.asarray(m) + np.asarray(s))) for m, s in series.values())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def px(i):
        return ml + (pw * (i + 0.5) / n)

    def py(v):
        return mt + ph * (1 - (v - lo) / (hi - lo))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
           f'<text x="16" y="{mt + ph / 2:.1f}" font-size="12" transform="rotate(-90 16 {mt + ph / 2:.1f})" '
           f'text-anchor="middle">{escape(ylabel)}</text>']
    for i, lab in enumerate(x_labels):
        out.append(f'<text x="{px(i):.1f}" y="{mt + ph + 18}" text-anchor="middle" '
                   f'font-size="12">{escape(str(lab))}</text>')
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        out.append(f'<text x="{ml - 6}" y="{py(v) + 4:.1f}" text-anchor="end" font-size="10">{v:.4g}</text>')
    for si, (name, (means, stds)) in enumerate(series.items()):
        c = _COLORS[si % len(_COLORS)]
        pts = " ".join(f"{px(i):.2f},{py(m):.2f}" for i, m in enumerate(means))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="2" points="{pts}"/>')
        for i, (m, s) in enumerate(zip(means, stds)):
            out.append(f'<line x1="{px(i):.2f}" y1="{py(m - s):.2f}" x2="{px(i):.2f}" '
                       f'y2="{py(m + s):.2f}" stroke="{c}"/>')
            out.append(f'<circle cx="{px(i):.2f}" cy="{py(m):.2f}" r="3" fill="{c}"/>')
        ly = mt + 16 * si + 8
        out.append(f'<line x1="{ml + pw + 12}" y1="{ly}" x2="{ml + pw + 32}" y2="{ly}" stroke="{c}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 36}" y="{ly + 4}" font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _metric_series(table: ResultsTable, metric: str):
    variants = []
    for r in table.summary:
        if r.variant not in variants:
            variants.append(r.variant)
    series = {}
    for r in table.summary:
        series.setdefault(f"{r.solver} {r.scheme} R={r.R:g}", {})[r.variant] = r
    out = {}
    for name, by_v in series.items():
        means, stds = [], []
        for v in variants:
            vals = table.column(metric, v, by_v[v].solver)
            means.append(float(vals.mean()))
            stds.append(float(vals.std(ddof=1)) if vals.size > 1 else 0.0)
        out[name] = (means, stds)
    return variants, out


# ---------------------------------------------------------------------------
# manifest and top-level report
# ---------------------------------------------------------------------------

def _versions():
    import numpy
    import scipy

    from .. import __version__
    v = {"crimescope": __version__, "python": platform.python_version(),
         "numpy": numpy.__version__, "scipy": scipy.__version__}
    try:
        import numba
        v["numba"] = numba.__version__
    except ImportError:  # pragma: no cover
        pass
    from .._accel import NUMBA_ENABLED
    v["numba_enabled"] = NUMBA_ENABLED
    return v


def manifest(table: ResultsTable) -> dict:
    cfg = table.config
    return {
        "crime": table.crime,
        "config_hash": cfg.config_hash() if cfg is not None else None,
        "master_seed": cfg.master_seed if cfg is not None else None,
        "config": cfg.to_dict() if cfg is not None else None,
        "versions": _versions(),
        "wall_times_s": table.wall_times,
        "hyperparams": {f"{v}/{s}": p for (v, s), p in sorted(table.hyperparams.items())},
        "n_cases": len(table.cases),
    }


def report(table: ResultsTable, outdir) -> list[Path]:
    """Write CSVs, SVG plots and the manifest into ``outdir`` (created on demand)."""
    if not table.cases and not table.mask_stats:
        raise ValueError("nothing to report: empty results table")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if table.mask_stats:
        written.append(write_mask_csv(table.mask_stats, out / MASK_CSV))
        pads = sorted({r.padding for r in table.mask_stats})
        series = {}
        for r in table.mask_stats:
            series.setdefault(r.scheme, {})[r.padding] = r
        data = {k: ([v[p].mean_effective for p in pads], [v[p].std_effective for p in pads])
                for k, v in series.items()}
        p = out / "effective_rate.svg"
        p.write_text(svg_lineplot([f"{x:g}" for x in pads], data, "Effective vs. global rate",
                                  "effective rate"))
        written.append(p)
    if table.cases:
        written.append(write_results_csv(table.cases, out / RESULTS_CSV))
        written.append(write_summary_csv(table.summary, out / SUMMARY_CSV))
        for metric, label in (("nrmse", "NRMSE"), ("ssim", "SSIM"), ("oracle_nrmse", "oracle NRMSE")):
            variants, series = _metric_series(table, metric)
            p = out / f"{metric}.svg"
            p.write_text(svg_lineplot(variants, series, f"Crime {table.crime}: {label}", label))
            written.append(p)
        if table.calibration:
            p = out / "calibration.csv"
            with p.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(("variant", "solver", "params", "mean_nrmse"))
                for v, s, prm, sc in table.calibration:
                    w.writerow((v, s, prm, _fmt(sc)))
            written.append(p)
    p = out / MANIFEST
    p.write_text(json.dumps(manifest(table), indent=2, sort_keys=True) + "\n")
    written.append(p)
    return written


def load_table(outdir, config=None) -> ResultsTable:
    """Rebuild a table from a previous run's ``results.csv`` (and manifest, if present)."""
    from .runner import _summarize_loaded
    out = Path(outdir)
    cases = read_results_csv(out / RESULTS_CSV)
    hyper = {}
    mpath = out / MANIFEST
    if mpath.exists():
        for k, v in json.loads(mpath.read_text()).get("hyperparams", {}).items():
            var, solver = k.rsplit("/", 1)
            hyper[(var, solver)] = v
    table = ResultsTable(cases[0].crime if cases else "", cases=cases, hyperparams=hyper,
                         config=config)
    table.summary = _summarize_loaded(cases, hyper)
    return table


def summary_dicts(table: ResultsTable) -> list[dict]:
    return [asdict(r) for r in table.summary]
