import json
import pickle
import xml.etree.ElementTree as ET
from dataclasses import replace

import numpy as np
import pytest

from crimescope.errors import ConfigError, InvalidArgumentError
from crimescope.harness import (CaseFailure, config_from_dict, load_config, load_table,
                                read_results_csv, report, run_crime, run_mask_stats,
                                write_results_csv)
from crimescope.harness import runner
from crimescope.harness.config import DEFAULT_QF, DEFAULT_ZERO_PAD
from crimescope.harness.runner import calibrate_cs, calibrate_dictl, dictl_candidates
from crimescope.solvers import CsParams


def small(crime="I", **over):
    d = {
        "crime": crime,
        "variants": [1.0, 1.5] if crime == "I" else ["NC", 50],
        "solvers": ["cs"],
        "sampling": {"scheme": "strong_vd", "R": 3, "calib": [4, 4]},
        "corpus": {"count": 4, "shape": [32, 32], "coils": 2, "seed": 3},
        "split": {"calibration": 2, "test": 2},
        "cs": {"lam": [1e-4, 1e-2], "max_iters": 15},
        "dictl": {"n_atoms": [16], "sparsity": [2], "lam": [1e-2], "block": [4], "n_iter": [1, 2],
                  "ksvd_sweeps": 1, "n_train": 200},
    }
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(d.get(k), dict):
            d[k] = {**d[k], **v}
        else:
            d[k] = v
    return config_from_dict(d)


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def test_shipped_configs_load():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "configs"
    for name in ("crime1.toml", "crime2.toml", "mask_stats.toml"):
        cfg = load_config(root / name)
        assert cfg.config_hash() == load_config(root / name).config_hash()
    assert load_config(root / "crime1.toml").variants == DEFAULT_ZERO_PAD


def test_defaults_and_split():
    cfg = config_from_dict({"crime": "II"})
    assert cfg.variants == DEFAULT_QF
    assert cfg.sampling.R == 4 and cfg.sampling.target_rate == 0.25
    assert set(cfg.calibration_ids).isdisjoint(cfg.test_ids)
    assert len(cfg.calibration_ids) == 10 and len(cfg.test_ids) == 20


@pytest.mark.parametrize("bad", [
    {"crime": "III"},
    {"crime": "I", "bogus": 1},
    {"crime": "I", "cs": {"lamda": [1.0]}},
    {"crime": "I", "variants": [0.5]},
    {"crime": "II", "variants": [101]},
    {"crime": "II", "variants": ["NC", "NC"]},
    {"crime": "I", "solvers": ["admm"]},
    {"crime": "I", "sampling": {"scheme": "spiral"}},
    {"crime": "I", "corpus": {"count": 5}},
    {"crime": "mask-stats", "variants": [1.0]},
    {"variants": [1.0]},
])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    p = tmp_path / "bad.toml"
    p.write_text("crime = \n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_config_hash_tracks_content_not_outdir():
    a = small()
    assert a.config_hash() == a.with_outdir("/elsewhere").config_hash()
    assert a.config_hash() != a.with_seed(1).config_hash()
    assert json.loads(a.canonical_json())["crime"] == "I"


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

def test_calibrate_cs_single_point():
    best, scored = calibrate_cs(small(), 1.0, grid=[1e-3])
    assert best.lam == 1e-3 and len(scored) == 1


def test_calibrate_cs_rejects_absurd_lambda():
    cfg = small()
    good, _ = calibrate_cs(cfg, 1.0, grid=[1e-3])
    best, scored = calibrate_cs(cfg, 1.0, grid=[1e6, 1e-3])
    assert best.lam == good.lam
    s = dict((p.lam, v) for p, v in scored)
    assert s[1e6] > s[1e-3]


def test_calibrate_cs_tie_prefers_smaller_lambda():
    assert runner._pick([(CsParams(0.1), 0.5), (CsParams(0.01), 0.5)], runner._cs_key)[0].lam == 0.01


def test_calibrate_dictl_grid_and_single_point():
    cfg = small(solvers=["dictl"])
    best, scored = calibrate_dictl(cfg, 1.0)
    assert len(scored) == cfg.dictl.size == 2
    assert best in [p for p, _ in scored]
    one = replace(cfg, dictl=replace(cfg.dictl, n_iter=(2,)))
    b1, s1 = calibrate_dictl(one, 1.0)
    assert len(s1) == 1 and b1.n_iter == 2
    # scoring N_iter=2 inside the shared run matches a dedicated N_iter=2 run
    assert dict((p.n_iter, v) for p, v in scored)[2] == s1[0][1]


def test_calibrate_dictl_absurd_point_loses():
    cfg = small(solvers=["dictl"], dictl={"lam": [1e-2, 1e6], "n_iter": [2]})
    best, scored = calibrate_dictl(cfg, 1.0)
    assert best.lam == 1e-2


def test_dictl_candidate_order():
    cfg = small(dictl={"n_atoms": [32, 16], "sparsity": [3, 2]})
    keys = [runner._dictl_key(p) for p in dictl_candidates(cfg)]
    assert keys == sorted(keys)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("crime", ["I", "II"])
def test_full_mask_recovers_gold(crime):
    over = {"sampling": {"R": 1, "calib": [4, 4]}, "cs": {"lam": [1e-12], "max_iters": 5},
            "dictl": {"lam": [1e-12], "n_iter": [1]}, "solvers": ["cs", "dictl"]}
    cfg = small(crime, **over)
    t = run_crime(cfg)
    assert len(t.cases) == 2 * 2 * 2
    for c in t.cases:
        assert c.nrmse < 1e-6 and c.ssim > 1 - 1e-6
        assert c.effective_rate == 1.0


def test_run_crime_structure(tmp_path):
    cfg = small()
    t = run_crime(cfg)
    assert [c.case_id for c in t.cases] == [2, 3, 2, 3]
    assert {r.variant for r in t.summary} == {"1", "1.5"}
    assert all(r.n_cases == 2 for r in t.summary)
    assert set(t.wall_times) == {"calibration_s", "test_s", "total_s"}
    # f = 1 leaves the geometry alone, so the oracle score is the plain score
    for c in t.cases:
        if c.variant == "1":
            assert c.oracle_nrmse == c.nrmse
    # the same mask seed serves every variant of a case
    seeds = {(c.case_id, c.variant): c.seed for c in t.cases}
    assert seeds[(2, "1")] == seeds[(2, "1.5")]

    out = tmp_path / "deep" / "dir"
    written = report(t, out)
    names = {p.name for p in written}
    assert {"results.csv", "summary.csv", "nrmse.svg", "ssim.svg", "oracle_nrmse.svg",
            "manifest.json", "calibration.csv"} <= names
    assert read_results_csv(out / "results.csv") == t.cases
    svg = ET.parse(out / "nrmse.svg").getroot()
    assert len(svg.findall("{http://www.w3.org/2000/svg}polyline")) == len(cfg.solvers)
    m = json.loads((out / "manifest.json").read_text())
    assert m["config_hash"] == cfg.config_hash() and m["master_seed"] == cfg.master_seed
    assert "numpy" in m["versions"] and m["n_cases"] == 4
    again = load_table(out, cfg)
    assert again.summary == t.summary


def test_csv_round_trip_exact(tmp_path):
    t = run_crime(small("II"))
    p = write_results_csv(t.cases, tmp_path / "r.csv")
    assert read_results_csv(p) == t.cases
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_results_csv(bad)


def test_jobs_do_not_change_results(tmp_path):
    cfg = small(solvers=["cs", "dictl"])
    a = report(run_crime(cfg, jobs=1), tmp_path / "a")
    b = report(run_crime(cfg, jobs=2), tmp_path / "b")
    for name in ("results.csv", "summary.csv", "calibration.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert len(a) == len(b)


def _boom(cfg, variant, case_id):
    if case_id == 3:
        raise FloatingPointError("synthetic failure")
    return _real_preprocess(cfg, variant, case_id)


_real_preprocess = runner.preprocess


@pytest.mark.parametrize("jobs", [1, 2])
def test_failure_aborts_with_case_id(monkeypatch, jobs):
    monkeypatch.setattr(runner, "preprocess", _boom)
    with pytest.raises(CaseFailure) as ei:
        run_crime(small(), jobs=jobs)
    assert ei.value.case_id == 3 and "synthetic failure" in str(ei.value)


def test_case_failure_pickles():
    e = pickle.loads(pickle.dumps(CaseFailure(7, "NC", "cs", "bad")))
    assert (e.case_id, e.variant, e.solver) == (7, "NC", "cs") and "case 7" in str(e)


def test_run_crime_rejects_mask_stats():
    with pytest.raises(InvalidArgumentError):
        run_crime(config_from_dict({"crime": "mask-stats"}))


def test_report_empty_table(tmp_path):
    with pytest.raises(ValueError):
        report(runner.ResultsTable("I"), tmp_path)


def test_run_mask_stats(tmp_path):
    cfg = config_from_dict({"crime": "mask-stats", "mask_stats": {
        "paddings": [1, 2], "n_masks": 3, "base_shape": [48, 48], "target_rate": 0.25}})
    t = run_mask_stats(cfg)
    assert len(t.mask_stats) == 3 * 2
    for r in t.mask_stats:
        assert r.n_masks == 3 and 0 < r.mean_effective <= 1
    strong = {r.padding: r.mean_effective for r in t.mask_stats if r.scheme.startswith("strong")}
    assert strong[2.0] > strong[1.0]
    written = report(t, tmp_path)
    assert (tmp_path / "mask_stats.csv").exists() and (tmp_path / "effective_rate.svg") in written


def test_dictl_seed_differs_per_case():
    cfg = small()
    assert runner.dictl_seed(cfg, 0) != runner.dictl_seed(cfg, 1)
