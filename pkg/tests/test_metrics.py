import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crimescope.errors import InvalidInputError, UndefinedMetricError
from crimescope.metrics import MetricReport, evaluate, gaussian_window, nrmse, ssim, ssim_map


def loop_nrmse(ref, est):
    r = [abs(v) for v in np.ravel(ref)]
    e = [abs(v) for v in np.ravel(est)]
    mse = sum((a - b) ** 2 for a, b in zip(e, r)) / len(r)
    return math.sqrt(mse) / (max(r) - min(r))


def loop_ssim(ref, est, win=11, sigma=1.5, k1=0.01, k2=0.03):
    """Direct sliding-window evaluation with an explicit 2D Gaussian."""
    r, e = np.abs(ref), np.abs(est)
    L = r.max() - r.min()
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    t = np.arange(win) - (win - 1) / 2
    g2 = np.exp(-(t[:, None] ** 2 + t[None, :] ** 2) / (2 * sigma ** 2))
    g2 /= g2.sum()
    vals = []
    for i in range(r.shape[0] - win + 1):
        for j in range(r.shape[1] - win + 1):
            a = r[i:i + win, j:j + win]
            b = e[i:i + win, j:j + win]
            ma, mb = np.sum(g2 * a), np.sum(g2 * b)
            va = np.sum(g2 * (a - ma) ** 2)
            vb = np.sum(g2 * (b - mb) ** 2)
            cov = np.sum(g2 * (a - ma) * (b - mb))
            vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma ** 2 + mb ** 2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def test_nrmse_identical_is_zero(rng):
    x = rng.random((16, 16))
    assert nrmse(x, x) == 0.0


def test_nrmse_binary_offset():
    ref = (np.arange(64).reshape(8, 8) % 3 == 0).astype(float)
    assert abs(nrmse(ref, ref + 0.1) - 0.1) < 1e-12


def test_nrmse_loop_oracle(rng):
    ref = rng.standard_normal((12, 9)) + 1j * rng.standard_normal((12, 9))
    est = ref + 0.2 * rng.standard_normal((12, 9))
    assert abs(nrmse(ref, est) - loop_nrmse(ref, est)) < 1e-12


def test_nrmse_l2_convention(rng):
    ref, est = rng.random((8, 8)), rng.random((8, 8))
    expect = np.sqrt(np.mean((est - ref) ** 2)) / np.sqrt(np.mean(ref ** 2))
    assert abs(nrmse(ref, est, "l2") - expect) < 1e-14
    with pytest.raises(InvalidInputError):
        nrmse(ref, est, "max")


@given(st.floats(0.1, 10), st.floats(0, 5), st.integers(0, 2**31))
def test_nrmse_affine_invariance(alpha, beta, seed):
    rng = np.random.default_rng(seed)
    ref, est = rng.random((10, 10)), rng.random((10, 10))
    assert abs(nrmse(alpha * ref + beta, alpha * est + beta) - nrmse(ref, est)) < 1e-12


def test_metric_errors():
    with pytest.raises(UndefinedMetricError):
        nrmse(np.ones((4, 4)), np.zeros((4, 4)))
    with pytest.raises(UndefinedMetricError):
        ssim(np.ones((16, 16)), np.zeros((16, 16)))
    with pytest.raises(InvalidInputError):
        nrmse(np.ones((4, 4)), np.ones((4, 5)))
    with pytest.raises(InvalidInputError):
        ssim(np.random.default_rng(0).random((8, 8)), np.zeros((8, 8)))


def test_gaussian_window():
    g = gaussian_window()
    assert g.size == 11 and abs(g.sum() - 1) < 1e-15 and np.argmax(g) == 5


def test_ssim_identical_is_exactly_one(rng):
    x = rng.random((40, 33))
    assert ssim(x, x) == 1.0
    z = x * np.exp(1j * rng.random(x.shape))
    assert ssim(z, np.abs(z)) == 1.0


def test_ssim_loop_oracle(rng):
    ref = rng.random((32, 32))
    est = ref + 0.3 * rng.standard_normal((32, 32))
    assert abs(ssim(ref, est) - loop_ssim(ref, est)) < 1e-10


def test_ssim_inverted_image(rng):
    ref = rng.random((24, 24))
    assert ssim(ref, ref.max() - ref) < 1


def test_ssim_not_symmetric_in_general(rng):
    ref = rng.random((24, 24))
    est = 3 * ref + rng.random((24, 24))
    assert ssim(ref, est) != ssim(est, ref)


@given(st.integers(0, 2**31), st.floats(0.01, 2))
def test_ssim_bounded(seed, noise):
    rng = np.random.default_rng(seed)
    ref = rng.random((16, 16))
    est = np.abs(ref + noise * rng.standard_normal((16, 16)))
    m = ssim_map(ref, est)
    assert m.shape == (6, 6)
    assert np.all(np.abs(m) <= 1 + 1e-12)


def test_evaluate_report(rng):
    ref = rng.random((16, 16))
    rep = evaluate(ref, ref, case_id=3, variant="NC")
    assert rep == MetricReport(0.0, 1.0, 3, "NC")
