import json

import numpy as np
import pytest

from crimescope.core import center_crop, dft2_centered, idft2_centered, rss_combine, zero_pad_kspace
from crimescope.errors import IngestError, InvalidArgumentError, InvalidInputError
from crimescope.pipelines import (NC, Provenance, RawCase, coil_sensitivities, export_dataset,
                                  ingest_dataset, jpeg_pipeline, load_case, phantom, phantom_image,
                                  read_raw_cases, rerun, save_case, scanner_pipeline,
                                  synthesize_kspace)


@pytest.fixture(scope="module")
def raw():
    return phantom((64, 64), 4, seed=5)


def test_raw_case_validation():
    r = RawCase(np.ones((8, 8)), "x")
    assert r.n_coils == 1 and r.shape == (8, 8) and r.mck.dtype == np.complex128
    with pytest.raises(InvalidInputError):
        RawCase(np.full((1, 4, 4), np.nan), "bad")


def test_scanner_factor_one_single_real_coil():
    img = np.random.default_rng(0).random((16, 16)) + 0.1
    case = scanner_pipeline(RawCase(dft2_centered(img), "r"), 1.0)
    assert np.max(np.abs(case.gold - img / img.max())) < 1e-12
    assert case.provenance.norm_factor == pytest.approx(img.max())


def test_scanner_matches_definition(raw):
    case = scanner_pipeline(raw, 1.5)
    ref = rss_combine(idft2_centered(zero_pad_kspace(raw.mck, 1.5)))
    assert np.max(np.abs(case.gold - ref / ref.max())) < 1e-14
    assert case.gold.max() == 1.0 and case.gold.min() >= 0
    assert np.max(np.abs(case.synth_kspace - dft2_centered(case.gold))) < 1e-12


@pytest.mark.parametrize("factor", [1.0, 1.25, 2.0])
def test_synth_kspace_conjugate_symmetric(raw, factor):
    from crimescope.core import conjugate_symmetry_error
    assert conjugate_symmetry_error(scanner_pipeline(raw, factor).synth_kspace) < 1e-10


def test_zero_padding_leaks_energy_into_periphery(raw):
    k = scanner_pipeline(raw, 2.0).synth_kspace
    inner = center_crop(k, (64, 64))
    frac = 1 - np.sum(np.abs(inner) ** 2) / np.sum(np.abs(k) ** 2)
    assert frac > 1e-6


def test_crime_i_preserves_raw_data(raw):
    assert np.array_equal(center_crop(zero_pad_kspace(raw.mck, 2.0), raw.shape), raw.mck)


def test_scanner_rejects_shrink(raw):
    with pytest.raises(InvalidArgumentError):
        scanner_pipeline(raw, 0.5)


def test_jpeg_nc_is_pass_through(raw):
    case = jpeg_pipeline(raw, NC)
    ref = rss_combine(idft2_centered(raw.mck))
    assert np.array_equal(case.gold, ref / ref.max())
    assert case.provenance.scale_8bit is None


def test_jpeg_pipeline_is_8bit(raw):
    case = jpeg_pipeline(raw, 75)
    assert np.array_equal(case.gold * 255, np.round(case.gold * 255))
    assert case.provenance.qf == 75 and case.provenance.jpeg_engine == "builtin"
    assert case.provenance.scale_8bit == pytest.approx(255 / case.provenance.norm_factor)


@pytest.mark.parametrize("qf", [20, 50, 75, 95])
def test_jpeg_constant_image_round_trips(qf):
    from crimescope.jpeg import quant_table
    img = np.full((16, 16), 0.7)
    gold = jpeg_pipeline(RawCase(dft2_centered(img), "c"), qf).gold
    # DC-only blocks stay flat; the level moves by at most half a DC step
    assert np.ptp(gold) == 0
    step = quant_table(qf)[0, 0] / 8
    assert abs(gold[0, 0] - 1.0) * 255 <= max(1, step / 2)


def test_jpeg_error_monotone_in_quality():
    errs = {q: [] for q in (20, 50, 75, 95)}
    for s in range(10):
        r = phantom((64, 64), 2, seed=100 + s)
        ref = jpeg_pipeline(r, NC).gold
        for q in errs:
            errs[q].append(np.mean(np.abs(jpeg_pipeline(r, q).gold - ref)))
    means = [np.mean(errs[q]) for q in (20, 50, 75, 95)]
    assert means == sorted(means, reverse=True)


def test_jpeg_invalid_quality(raw):
    for bad in (0, 101, "high", 7.5):
        with pytest.raises(InvalidArgumentError):
            jpeg_pipeline(raw, bad)
    with pytest.raises(InvalidArgumentError):
        jpeg_pipeline(raw, 50, engine="other")


def test_jpeg_pillow_engine_close(raw):
    a = jpeg_pipeline(raw, 50).gold
    b = jpeg_pipeline(raw, 50, engine="pillow").gold
    assert np.mean(np.abs(a - b)) < 0.5 / 255


def test_synthesize_kspace_contract():
    g = np.random.default_rng(1).random((8, 8))
    k = synthesize_kspace(g)
    assert np.isclose(np.linalg.norm(k), np.linalg.norm(g))
    with pytest.raises(InvalidInputError):
        synthesize_kspace(-g)
    with pytest.raises(InvalidInputError):
        synthesize_kspace(g + 1j)


@pytest.mark.parametrize("pipeline,arg", [("scanner", 1.75), ("jpeg", 20), ("jpeg", NC)])
def test_rerun_from_provenance(raw, pipeline, arg):
    case = scanner_pipeline(raw, arg) if pipeline == "scanner" else jpeg_pipeline(raw, arg)
    prov = Provenance.from_json(json.loads(json.dumps(case.provenance.to_json())))
    again = rerun(prov, raw)
    assert np.array_equal(again.gold, case.gold)
    assert prov == case.provenance


def test_case_directory_round_trip(tmp_path, raw):
    from PIL import Image
    case = jpeg_pipeline(raw, 50)
    d = save_case(case, tmp_path / "c0")
    back = load_case(d)
    assert np.array_equal(back.gold, case.gold)
    assert np.array_equal(back.synth_kspace, case.synth_kspace)
    assert back.provenance == case.provenance
    png = np.asarray(Image.open(d / "gold.png"))
    assert png.dtype == np.uint16 and png.max() == 65535


def test_hdf5_round_trip(tmp_path):
    cases = [phantom((64, 64), 4, seed=s) for s in range(2)]
    path = export_dataset(cases, tmp_path / "raw.h5", dtype=np.complex128)
    back = read_raw_cases(path)
    assert len(back) == 2 and back[0].n_coils == 4 and back[0].shape == (64, 64)
    for a, b in zip(cases, back):
        assert np.array_equal(a.mck, b.mck)


def test_ingest_is_lazy(tmp_path):
    path = export_dataset([phantom((16, 16), 1, seed=s) for s in range(3)], tmp_path / "r.h5")
    it = ingest_dataset(path)
    first = next(it)
    assert first.source_id.endswith(":0")
    it.close()


def test_ingest_errors(tmp_path):
    import h5py
    p = tmp_path / "bad.h5"
    with h5py.File(p, "w") as f:
        f["other"] = np.zeros((1, 1, 4, 4), dtype=np.complex64)
        f["real"] = np.zeros((1, 1, 4, 4))
        f["rank3"] = np.zeros((1, 4, 4), dtype=np.complex64)
    with pytest.raises(IngestError, match="kspace"):
        read_raw_cases(p)
    with pytest.raises(IngestError, match="complex"):
        read_raw_cases(p, key="real")
    with pytest.raises(IngestError, match="rank"):
        read_raw_cases(p, key="rank3")
    (tmp_path / "junk.h5").write_bytes(b"not hdf5")
    with pytest.raises(IngestError):
        read_raw_cases(tmp_path / "junk.h5")


def test_phantom_single_coil_identity_no_noise():
    r = phantom((48, 48), 1, seed=3, snr_db=None, sensitivities="identity")
    img = phantom_image((48, 48), seed=3)
    assert np.max(np.abs(rss_combine(idft2_centered(r.mck)) - np.abs(img))) < 1e-10


def test_phantom_deterministic():
    a, b = phantom((32, 32), 3, seed=9), phantom((32, 32), 3, seed=9)
    assert np.array_equal(a.mck, b.mck) and a.source_id == b.source_id
    assert not np.array_equal(a.mck, phantom((32, 32), 3, seed=10).mck)


def test_sensitivities_normalised():
    maps = coil_sensitivities(np.random.default_rng(0), (64, 64), 8)
    rss = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    assert np.all((rss > 0.9) & (rss < 1.1))


def test_phantom_snr():
    clean = phantom((64, 64), 2, seed=1, snr_db=None)
    noisy = phantom((64, 64), 2, seed=1, snr_db=20.0)
    # the same rng stream feeds image and maps, so the difference is the noise alone
    noise = noisy.mck - clean.mck
    snr = 10 * np.log10(np.mean(np.abs(clean.mck) ** 2) / np.mean(np.abs(noise) ** 2))
    assert abs(snr - 20) < 0.3


def test_phantom_inner_contrast():
    lo = np.abs(phantom_image((64, 64), seed=0, phase=False, texture=0, inner=0.3))
    hi = np.abs(phantom_image((64, 64), seed=0, phase=False, texture=0))
    assert lo[32, 32] > hi[32, 32]
    assert lo.max() == pytest.approx(1.0)


def test_phantom_errors():
    with pytest.raises(InvalidArgumentError):
        phantom((16, 16), 0)
    with pytest.raises(InvalidArgumentError):
        phantom((16, 16), 2, sensitivities="identity")
    with pytest.raises(InvalidArgumentError):
        phantom((16, 16), 2, sensitivities="nope")
