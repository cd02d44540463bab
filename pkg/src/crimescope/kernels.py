"""Hot inner loops, each in a numba flavour and a pure-numpy flavour.

The public names (``uniform_grid``, ``omp_batch``, ``accumulate_patches``)
point at the numba versions unless ``CRIMESCOPE_DISABLE_NUMBA`` is set.
Both flavours are importable under ``*_numba`` / ``*_numpy`` so tests and
the benchmark can compare them directly.
"""
import numpy as np

from ._accel import NUMBA_ENABLED, njit

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_KEY_SALT = 0xD1B54A32D192ED03
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """splitmix64 finalizer on Python ints (64-bit wraparound)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int) -> int:
    return mix64((seed & MASK64) ^ _KEY_SALT)


# ---------------------------------------------------------------------------
# counter-based uniforms keyed by (seed, i, j)
# ---------------------------------------------------------------------------

def uniform_grid_numpy(seed, shape):
    h, w = shape
    key = np.uint64(stream_key(int(seed)))
    ii = np.arange(h, dtype=np.uint64)[:, None]
    jj = np.arange(w, dtype=np.uint64)[None, :]
    ctr = (ii << np.uint64(32)) | jj
    z = key + (ctr + np.uint64(1)) * np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


@njit
def _uniform_grid_nb(key, h, w):
    out = np.empty((h, w), dtype=np.float64)
    golden = np.uint64(_GOLDEN)
    m1 = np.uint64(_M1)
    m2 = np.uint64(_M2)
    one = np.uint64(1)
    scale = 2.0 ** -53
    for i in range(h):
        hi = np.uint64(i) << np.uint64(32)
        for j in range(w):
            z = key + ((hi | np.uint64(j)) + one) * golden
            z = (z ^ (z >> np.uint64(30))) * m1
            z = (z ^ (z >> np.uint64(27))) * m2
            z = z ^ (z >> np.uint64(31))
            out[i, j] = np.float64(z >> np.uint64(11)) * scale
    return out


def uniform_grid_numba(seed, shape):
    h, w = shape
    return _uniform_grid_nb(np.uint64(stream_key(int(seed))), int(h), int(w))


# ---------------------------------------------------------------------------
# batch orthogonal matching pursuit
# ---------------------------------------------------------------------------

@njit
def _omp_nb(D, G, alpha0, X, K, tol):
    n, P = D.shape
    L = X.shape[1]
    idx = -np.ones((L, K), dtype=np.int64)
    coef = np.zeros((L, K), dtype=np.complex128)
    Lc = np.zeros((K, K), dtype=np.complex128)
    c = np.zeros(K, dtype=np.complex128)
    y = np.zeros(K, dtype=np.complex128)
    r = np.zeros(n, dtype=np.complex128)
    used = np.zeros(P, dtype=np.bool_)
    for l in range(L):
        for i in range(n):
            r[i] = X[i, l]
        used[:] = False
        k = 0
        while k < K:
            rn = 0.0
            for i in range(n):
                rn += r[i].real * r[i].real + r[i].imag * r[i].imag
            if np.sqrt(rn) < tol:
                break
            # correlations via the Gram matrix
            best = -1.0
            j = -1
            for p in range(P):
                if used[p]:
                    continue
                a = alpha0[p, l]
                for q in range(k):
                    a -= G[p, idx[l, q]] * c[q]
                m = a.real * a.real + a.imag * a.imag
                if m > best:
                    best = m
                    j = p
            if j < 0 or np.sqrt(best) <= 1e-14:
                break
            # cholesky append: solve Lc w = G[S, j]
            for q in range(k):
                s = G[idx[l, q], j]
                for t in range(q):
                    s -= Lc[q, t] * y[t]
                y[q] = s / Lc[q, q]
            d = G[j, j].real
            for t in range(k):
                d -= y[t].real * y[t].real + y[t].imag * y[t].imag
            if d <= 1e-24:
                break
            for t in range(k):
                Lc[k, t] = np.conj(y[t])
            Lc[k, k] = np.sqrt(d)
            idx[l, k] = j
            used[j] = True
            k += 1
            # solve Lc Lc^H c = alpha0[S]
            for q in range(k):
                s = alpha0[idx[l, q], l]
                for t in range(q):
                    s -= Lc[q, t] * y[t]
                y[q] = s / Lc[q, q]
            for q in range(k - 1, -1, -1):
                s = y[q]
                for t in range(q + 1, k):
                    s -= np.conj(Lc[t, q]) * c[t]
                c[q] = s / Lc[q, q].real
            for i in range(n):
                s = X[i, l]
                for q in range(k):
                    s -= D[i, idx[l, q]] * c[q]
                r[i] = s
        for q in range(k):
            coef[l, q] = c[q]
    return idx, coef


def omp_batch_numba(D, X, K, tol=1e-10):
    """Greedy sparse coding of every column of ``X``.

    Returns ``(idx, coef)``, both shaped ``(L, K)``; unused slots hold -1/0.
    """
    D = np.ascontiguousarray(D, dtype=np.complex128)
    X = np.ascontiguousarray(X, dtype=np.complex128)
    G = D.conj().T @ D
    alpha0 = np.ascontiguousarray(D.conj().T @ X)
    return _omp_nb(D, G, alpha0, X, int(K), float(tol))


def omp_batch_numpy(D, X, K, tol=1e-10):
    D = np.asarray(D, dtype=np.complex128)
    X = np.asarray(X, dtype=np.complex128)
    n, P = D.shape
    L = X.shape[1]
    Dh = D.conj().T
    G = Dh @ D
    alpha0 = Dh @ X
    idx = -np.ones((L, K), dtype=np.int64)
    coef = np.zeros((L, K), dtype=np.complex128)
    R = X.copy()
    active = np.ones(L, dtype=bool)
    for k in range(K):
        active &= np.linalg.norm(R, axis=0) >= tol
        if not active.any():
            break
        a = np.flatnonzero(active)
        corr = np.abs(Dh @ R[:, a]) ** 2
        if k:
            corr[idx[a, :k].T, np.arange(a.size)[None, :]] = -1.0
        j = np.argmax(corr, axis=0)
        ok = np.sqrt(corr[j, np.arange(a.size)]) > 1e-14
        # reject atoms numerically dependent on the current support
        if k:
            S = idx[a, :k]
            Gss = G[S[:, :, None], S[:, None, :]]
            g = G[S, j[:, None]]
            w = np.linalg.solve(Gss, g[..., None])[..., 0]
            resid = G[j, j].real - np.einsum("li,li->l", g.conj(), w).real
        else:
            resid = G[j, j].real
        ok &= resid > 1e-24
        active[a[~ok]] = False
        a, j = a[ok], j[ok]
        if a.size == 0:
            break
        idx[a, k] = j
        S = idx[a, : k + 1]
        Gss = G[S[:, :, None], S[:, None, :]]
        rhs = alpha0[S, a[:, None]]
        c = np.linalg.solve(Gss, rhs[..., None])[..., 0]
        coef[a, : k + 1] = c
        R[:, a] = X[:, a] - np.einsum("nlk,lk->nl", D[:, S], c)
    return idx, coef


# ---------------------------------------------------------------------------
# periodic patch accumulation (adjoint of extraction)
# ---------------------------------------------------------------------------

@njit
def _accumulate_nb(patches, oy, ox, b, h, w):
    out = np.zeros((h, w), dtype=np.complex128)
    for m in range(oy.size):
        y0 = oy[m]
        x0 = ox[m]
        for dy in range(b):
            yy = (y0 + dy) % h
            for dx in range(b):
                out[yy, (x0 + dx) % w] += patches[dy * b + dx, m]
    return out


def accumulate_patches_numba(patches, oy, ox, b, shape):
    return _accumulate_nb(np.ascontiguousarray(patches, dtype=np.complex128),
                          np.asarray(oy, dtype=np.int64), np.asarray(ox, dtype=np.int64),
                          int(b), int(shape[0]), int(shape[1]))


def accumulate_patches_numpy(patches, oy, ox, b, shape):
    h, w = shape
    out = np.zeros((h, w), dtype=np.complex128)
    oy = np.asarray(oy)
    ox = np.asarray(ox)
    for dy in range(b):
        yy = (oy + dy) % h
        for dx in range(b):
            # np.add.at: origins need not be distinct
            np.add.at(out, (yy, (ox + dx) % w), patches[dy * b + dx])
    return out


if NUMBA_ENABLED:
    uniform_grid = uniform_grid_numba
    omp_batch = omp_batch_numba
    accumulate_patches = accumulate_patches_numba
else:
    uniform_grid = uniform_grid_numpy
    omp_batch = omp_batch_numpy
    accumulate_patches = accumulate_patches_numpy
