"""Adaptive patch dictionary learning reconstruction.

Alternates between learning a dictionary on patches of the current image
(OMP sparse coding + K-SVD atom refits) and an exact per-frequency
data-consistency update of the image.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import InvalidArgumentError, InvalidInputError
from ..transforms import extract_patches, gather_patches, reassemble_patches
from ._common import data_term, fft2c, ifft2c, prepare


@dataclass(frozen=True)
class DictlParams:
    n_atoms: int = 128          # P
    sparsity: int = 5           # K
    lam: float = 1e-2           # lambda_D
    block: int = 8              # b
    n_iter: int = 5             # N_iter
    n_train: int | None = None  # L; None -> 2 * (#grid patches), capped at 10_000
    stride: int = 2
    ksvd_sweeps: int = 10
    subtract_mean: bool = True

    def __post_init__(self):
        for name in ("n_atoms", "sparsity", "block", "n_iter", "stride", "ksvd_sweeps"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be positive")
        if self.lam < 0:
            raise InvalidArgumentError("lambda_D must be >= 0")
        if self.sparsity > min(self.n_atoms, self.block ** 2):
            raise InvalidArgumentError(
                f"sparsity {self.sparsity} exceeds min(P={self.n_atoms}, b^2={self.block ** 2})")
        if self.n_train is not None and self.n_train < 1:
            raise InvalidArgumentError("n_train must be positive")

    def train_size(self, n_grid_patches: int) -> int:
        if self.n_train is not None:
            return self.n_train
        return min(2 * n_grid_patches, 10_000)


@dataclass(frozen=True, eq=False)
class Dictionary:
    atoms: np.ndarray  # (b*b, P), unit-norm columns

    @property
    def n_atoms(self):
        return self.atoms.shape[1]


@dataclass(frozen=True, eq=False)
class SparseCode:
    codes: np.ndarray  # (P, L)

    def support_sizes(self):
        return np.count_nonzero(self.codes, axis=0)


def overcomplete_dct(b: int, n_atoms: int) -> np.ndarray:
    """Separable overcomplete 2D DCT, lowest spatial frequencies first."""
    m = int(np.ceil(np.sqrt(n_atoms)))
    t = np.arange(b)[:, None]
    d1 = np.cos(t * np.arange(m)[None, :] * np.pi / m)
    d1[:, 1:] -= d1[:, 1:].mean(axis=0)
    d2 = np.kron(d1, d1)
    fy, fx = np.divmod(np.arange(m * m), m)
    order = np.lexsort((fx, fy, fx + fy))[:n_atoms]
    D = d2[:, order]
    return (D / np.linalg.norm(D, axis=0)).astype(np.complex128)


def _atoms(D):
    return D.atoms if isinstance(D, Dictionary) else np.asarray(D)


def _signals(signals):
    return signals.columns if hasattr(signals, "columns") else np.asarray(signals)


def omp(D, signals, K, tol=1e-10) -> SparseCode:
    """Orthogonal matching pursuit on every column of ``signals``.

    Per column: pick the atom with the largest |<residual, d_p>| (lowest
    index on ties), refit all selected coefficients by least squares, stop
    after ``K`` atoms or once the residual norm drops below ``tol``.
    """
    Dm = _atoms(D)
    X = _signals(signals)
    if X.ndim != 2 or X.shape[0] != Dm.shape[0]:
        raise InvalidInputError(f"signal length {X.shape[0]} != atom length {Dm.shape[0]}")
    P = Dm.shape[1]
    if K > P:
        raise InvalidArgumentError(f"sparsity {K} exceeds number of atoms {P}")
    idx, coef = kernels.omp_batch(Dm, X, int(K), tol)
    return SparseCode(_scatter(idx, coef, P))


def _scatter(idx, coef, P):
    L = idx.shape[0]
    A = np.zeros((P, L), dtype=np.complex128)
    rows, slots = np.nonzero(idx >= 0)
    A[idx[rows, slots], rows] = coef[rows, slots]
    return A


def ksvd_update(D, A, signals):
    """One K-SVD sweep over the atoms in index order.

    Each used atom and its code row are replaced by the best rank-1
    approximation of the residual restricted to the signals that use it.
    Unused atoms are re-seeded with the worst-represented signal.
    Returns new ``(atoms, codes)`` arrays; inputs are not modified.
    """
    Dm = np.array(_atoms(D), dtype=np.complex128)
    Am = np.array(A.codes if isinstance(A, SparseCode) else A, dtype=np.complex128)
    X = np.asarray(_signals(signals), dtype=np.complex128)
    if Dm.shape[1] != Am.shape[0] or Am.shape[1] != X.shape[1] or Dm.shape[0] != X.shape[0]:
        raise InvalidInputError("inconsistent dictionary / code / signal shapes")
    # residual kept transposed so the rows of signals using an atom are contiguous
    Et = (X - Dm @ Am).T.copy()
    err = None
    taken = np.zeros(X.shape[1], dtype=bool)
    for p in range(Dm.shape[1]):
        J = np.flatnonzero(Am[p])
        if J.size == 0:
            if err is None:
                err = np.linalg.norm(Et, axis=1)
            cand = np.where(taken, -1.0, err)
            for l in np.argsort(-cand, kind="stable"):
                nrm = np.linalg.norm(X[:, l])
                if taken[l] or nrm <= 1e-12:
                    continue
                Dm[:, p] = X[:, l] / nrm
                taken[l] = True
                break
            continue
        EpT = Et[J] + np.outer(Am[p, J], Dm[:, p])
        d, a = _rank1(EpT)
        Dm[:, p] = d
        Am[p, J] = a
        Et[J] = EpT - np.outer(a, d)
        if err is not None:
            err[J] = np.linalg.norm(Et[J], axis=1)
    return Dm, Am


def _rank1(EpT):
    """Leading singular pair of ``Ep = EpT.T``: (unit left vector u, sigma1 * v1^H)."""
    if EpT.shape[0] < EpT.shape[1]:
        u, sv, vh = np.linalg.svd(EpT.T, full_matrices=False)
        return u[:, 0], sv[0] * vh[0]
    gram = EpT.T @ EpT.conj()
    _, vecs = np.linalg.eigh(gram)
    u = vecs[:, -1]
    return u, EpT @ u.conj()


def dictl_data_update(z, y, mask, lam):
    """Exact minimiser of ``0.5||U F x - y||^2 + lam/2 ||x - z||^2``.

    Per frequency: observed entries become ``(Y + lam Z) / (1 + lam)``,
    unobserved ones keep ``Z``.
    """
    yo, m = prepare(y, mask)
    Z = fft2c(np.asarray(z, dtype=np.complex128))
    X = Z.copy()
    X[m] = (yo[m] + lam * Z[m]) / (1.0 + lam)
    return ifft2c(X)


def evaluate_objective_dictl(x, z, y, mask, lam) -> float:
    """0.5 ||U F x - y||^2 + lam/2 ||x - z||^2."""
    d = np.asarray(x) - np.asarray(z)
    return data_term(x, y, mask) + 0.5 * lam * float(np.vdot(d, d).real)


def _code_patches(D, cols, K, subtract_mean):
    means = cols.mean(axis=0) if subtract_mean else np.zeros(cols.shape[1], dtype=cols.dtype)
    A = omp(D, cols - means, K).codes
    return D @ A + means


def dictl_reconstruct(y, mask, params: DictlParams = DictlParams(), seed: int = 0,
                      callback=None) -> np.ndarray:
    """Jointly learn a patch dictionary and reconstruct the image.

    ``callback(it, x, z)`` is called after every outer iteration with the
    updated image and the patch-synthesised image it was pulled toward.
    """
    yo, m = prepare(y, mask)
    b = params.block
    if b > min(yo.shape):
        raise InvalidArgumentError(f"block size {b} exceeds image {yo.shape}")
    rng = np.random.default_rng(seed)
    x = ifft2c(yo)
    D = overcomplete_dct(b, params.n_atoms)
    h, w = x.shape
    for it in range(params.n_iter):
        pm = extract_patches(x, b, params.stride)
        n_train = params.train_size(pm.oy.size)
        oy = rng.integers(0, h, size=n_train)
        ox = rng.integers(0, w, size=n_train)
        train = gather_patches(x, oy, ox, b)
        if params.subtract_mean:
            train = train - train.mean(axis=0)
        for _ in range(params.ksvd_sweeps):
            A = omp(D, train, params.sparsity).codes
            D, _ = ksvd_update(D, A, train)
        cols = _code_patches(D, pm.columns, params.sparsity, params.subtract_mean)
        z = reassemble_patches(pm, x.shape, columns=cols)
        x = dictl_data_update(z, yo, m, params.lam)
        if callback is not None:
            callback(it, x, z)
    return x
