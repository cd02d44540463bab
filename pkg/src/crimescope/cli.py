"""Command-line entry point.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p, config_required=True):
    p.add_argument("--config", required=config_required, help="experiment TOML file")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--out", default=None, help="output directory (default: config outdir)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="crimescope", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (("mask-stats", "effective vs. global sampling rate table"),
                        ("crime1", "zero-padding sweep"), ("crime2", "JPEG sweep")):
        _common(sub.add_parser(name, help=help_))

    p = sub.add_parser("preprocess", help="run one hidden-preprocessing pipeline over a dataset")
    p.add_argument("--pipeline", choices=("scanner", "jpeg"), required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--zero-pad", type=float, default=None)
    g.add_argument("--qf", default=None, help="JPEG quality 1..100 or NC")
    p.add_argument("--in", dest="inp", default=None,
                   help="HDF5 file with multi-coil k-space (default: synthetic phantoms)")
    p.add_argument("--key", default="kspace")
    p.add_argument("--count", type=int, default=1, help="phantoms to synthesise without --in")
    p.add_argument("--shape", type=int, nargs=2, default=(256, 256))
    p.add_argument("--coils", type=int, default=4)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("reconstruct", help="reconstruct preprocessed cases from fresh masks")
    _common(p)
    p.add_argument("--in", dest="inp", required=True, help="case directory or a directory of them")
    p.add_argument("--solver", choices=("cs", "dictl"), default="cs")

    p = sub.add_parser("report", help="re-emit tables and plots from a results directory")
    _common(p, config_required=False)
    p.add_argument("--in", dest="inp", default=None, help="directory holding results.csv")
    return ap


def _load(args, kind=None):
    from .harness import load_config
    cfg = load_config(args.config)
    if kind is not None and cfg.crime != kind:
        raise ConfigError(f"{args.config}: crime = {cfg.crime!r}, expected {kind!r}")
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out is not None:
        cfg = cfg.with_outdir(args.out)
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    return cfg


def _log(msg):
    print(msg, file=sys.stderr)


def cmd_sweep(args, kind):
    from .harness import report, run_crime, run_mask_stats
    cfg = _load(args, kind)
    table = run_mask_stats(cfg) if kind == "mask-stats" else run_crime(cfg, args.jobs, log=_log)
    for p in report(table, cfg.outdir):
        print(p)
    return EXIT_OK


def cmd_preprocess(args):
    from .pipelines import ingest_dataset, jpeg_pipeline, phantom, save_case, scanner_pipeline
    from .seeding import case_seed_for
    if args.pipeline == "scanner" and args.qf is not None:
        raise ConfigError("--qf applies to the jpeg pipeline")
    if args.pipeline == "jpeg" and args.zero_pad is not None:
        raise ConfigError("--zero-pad applies to the scanner pipeline")
    if args.inp is not None:
        raws = ingest_dataset(args.inp, args.key)
    else:
        raws = (phantom(tuple(args.shape), args.coils, seed=case_seed_for(args.seed, i),
                        source_id=f"phantom:{args.seed}:{i}") for i in range(args.count))
    qf = args.qf
    if qf is not None and qf.upper() != "NC":
        try:
            qf = int(qf)
        except ValueError:
            raise ConfigError(f"--qf must be an integer or NC, got {qf!r}") from None
    out = Path(args.out)
    for i, raw in enumerate(raws):
        if args.pipeline == "scanner":
            case = scanner_pipeline(raw, args.zero_pad if args.zero_pad is not None else 1.0)
        else:
            case = jpeg_pipeline(raw, qf if qf is not None else 75)
        print(save_case(case, out / f"case_{i:04d}"))
    return EXIT_OK


def _case_dirs(path):
    p = Path(path)
    if (p / "provenance.json").exists():
        return [p]
    dirs = sorted(d for d in p.iterdir() if (d / "provenance.json").exists()) if p.is_dir() else []
    if not dirs:
        raise FileNotFoundError(f"no preprocessed cases under {p}")
    return dirs


def cmd_reconstruct(args):
    from .harness.runner import cs_candidates, dictl_candidates, dictl_seed, scheme_of
    from .metrics import nrmse, ssim
    from .pipelines import load_case
    from .sampling import build_pdf, draw_mask, save_mask, scaled_calib
    from .seeding import mask_seed_for
    from .solvers import cs_fista, dictl_reconstruct
    from .transforms import extract_patches  # noqa: F401  (import check for patch kernels)
    cfg = _load(args)
    dirs = _case_dirs(args.inp)
    out = Path(cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for cid, d in enumerate(dirs):
        case = load_case(d)
        prov = case.provenance
        calib = tuple(cfg.sampling.calib)
        if prov.pipeline == "scanner":
            calib = scaled_calib(calib, prov.zero_pad_factor)
        pdf = build_pdf(case.gold.shape, scheme_of(cfg), cfg.sampling.target_rate, calib)
        mask = draw_mask(pdf, mask_seed_for(cfg.master_seed, cid, 0))
        if args.solver == "cs":
            params = cs_candidates(cfg)[0]
            x = cs_fista(case.synth_kspace, mask, params)
        else:
            params = dictl_candidates(cfg)[0]
            x = dictl_reconstruct(case.synth_kspace, mask, params, seed=dictl_seed(cfg, cid))
        dst = out / d.name
        dst.mkdir(parents=True, exist_ok=True)
        np.save(dst / "recon.npy", x)
        save_mask(mask, dst / "mask")
        metrics = {"case": d.name, "solver": args.solver, "nrmse": nrmse(case.gold, x, cfg.metric_norm),
                   "ssim": ssim(case.gold, x), "realized_rate": mask.realized_rate, "seed": mask.seed}
        (dst / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
        print(json.dumps(metrics))
    return EXIT_OK


def cmd_report(args):
    from .harness import load_config, load_table, report
    cfg = None
    if args.config is not None:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    src = args.inp or args.out or (cfg.outdir if cfg is not None else None)
    if src is None:
        raise ConfigError("report needs --in, --out or --config")
    table = load_table(src, cfg)
    for p in report(table, args.out or src):
        print(p)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command in ("mask-stats", "crime1", "crime2"):
            kind = {"mask-stats": "mask-stats", "crime1": "I", "crime2": "II"}[args.command]
            return cmd_sweep(args, kind)
        return {"preprocess": cmd_preprocess, "reconstruct": cmd_reconstruct,
                "report": cmd_report}[args.command](args)
    except ConfigError as e:
        print(f"crimescope: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - any runtime failure maps to exit 2
        print(f"crimescope: error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
