"""l1-wavelet compressed sensing solved with FISTA."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError
from ..transforms import DEFAULT_LEVELS, dwt2, idwt2, soft_threshold
from ._common import data_term, fft2c, ifft2c, prepare


@dataclass(frozen=True)
class CsParams:
    lam: float
    max_iters: int = 200
    rel_tol: float = 1e-6
    levels: int = DEFAULT_LEVELS

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidArgumentError("lambda must be >= 0")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")


def zero_filled(y, mask):
    yo, _ = prepare(y, mask)
    return ifft2c(yo)


def wavelet_prox(x, tau, levels=DEFAULT_LEVELS):
    return idwt2(soft_threshold(dwt2(x, levels), tau))


def evaluate_objective_cs(x, y, mask, lam, levels=DEFAULT_LEVELS) -> float:
    """0.5 ||U F x - y||^2 + lam * ||Psi x||_1 (unobserved y entries ignored)."""
    l1 = float(np.sum(np.abs(dwt2(np.asarray(x, dtype=np.complex128), levels).data)))
    return data_term(x, y, mask) + lam * l1


def cs_fista(y, mask, params: CsParams, x0=None, callback=None) -> np.ndarray:
    """Minimise ``0.5||U F x - y||^2 + lam ||Psi x||_1`` with FISTA.

    Step size is 1: with a unitary F and a binary U the data-term gradient is
    1-Lipschitz. Starts from the zero-filled image unless ``x0`` is given and
    stops after ``max_iters`` or once ``||x_k - x_{k-1}|| < rel_tol ||x_k||``.
    """
    yo, m = prepare(y, mask)
    x = ifft2c(yo) if x0 is None else np.array(x0, dtype=np.complex128)
    z = x
    t = 1.0
    for k in range(params.max_iters):
        r = fft2c(z)
        r[m] -= yo[m]
        r[~m] = 0
        x_new = wavelet_prox(z - ifft2c(r), params.lam, params.levels)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        step = np.linalg.norm(x_new - x)
        scale = np.linalg.norm(x_new)
        x, t = x_new, t_new
        if callback is not None:
            callback(k, x)
        if step <= params.rel_tol * scale:
            break
    return x
