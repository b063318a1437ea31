"""Hermite-Gauss-like DFT eigenvectors and the single-angle fractional transform.

The fractional DFT of angle ``alpha`` is ``W_alpha = V diag(lambda) V^T`` with
``lambda[p] = exp(-1j * k(p) * alpha)``.  ``alpha = pi/2`` gives the unitary
DFT ``exp(-2j*pi*n*m/N) / sqrt(N)``.

Eigenvectors come from the commuting matrix ``S`` with diagonal
``2 cos(2 pi n / N) - 4``, unit off-diagonals and unit corners.  ``S`` is split
into even and odd blocks so every returned vector is exactly even or odd under
``n -> (N - n) mod N``.  Within a parity class, vectors are ordered by
decreasing eigenvalue of ``S``, which is Hermite order.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import fileio


@dataclass(frozen=True, eq=False)
class DftEigenbasis:
    n: int
    v: np.ndarray
    eigen_index: np.ndarray
    _half: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def parity(self):
        """+1 for even eigenvectors, -1 for odd ones."""
        return 1 - 2 * (self.eigen_index % 2)


@dataclass(frozen=True)
class FractionalEigenvalues:
    alpha: float
    lam: np.ndarray


def _parity_split(n):
    """Orthogonal ``P`` mapping a vector to its even (top) and odd (bottom) parts."""
    p = np.zeros((n, n))
    h = 1.0 / np.sqrt(2.0)
    r = n // 2
    even = n % 2 == 0
    p[0, 0] = 1.0
    for i in range(1, r - even + 1):
        p[i, i] = h
        p[i, n - i] = h
    if even:
        p[r, r] = 1.0
    for i in range(r + 1, n):
        p[i, i] = -h
        p[i, n - i] = h
    return p


def _fix_signs(v):
    scale = np.abs(v).max(axis=0)
    for col in range(v.shape[1]):
        lead = np.flatnonzero(np.abs(v[:, col]) > 1e-8 * scale[col])[0]
        if v[lead, col] < 0:
            v[:, col] = -v[:, col]
    return v


def build_eigenbasis(n):
    """Construct the eigenvector basis for ``n``-point signals.

    Raises
    ------
    ValueError
        If ``n < 4``.
    """
    n = int(n)
    if n < 4:
        raise ValueError(f"signal length must be >= 4, got {n}")
    idx = np.arange(n)
    s = np.diag(2.0 * np.cos(2.0 * np.pi * idx / n) - 4.0)
    s += np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)
    s[0, n - 1] = s[n - 1, 0] = 1.0

    p = _parity_split(n)
    cs = p @ s @ p.T
    n_even = n // 2 + 1
    n_odd = n - n_even
    _, ve = np.linalg.eigh(cs[:n_even, :n_even])
    _, vo = np.linalg.eigh(cs[n_even:, n_even:])
    # eigh sorts ascending; Hermite order is descending eigenvalue
    even_vecs = p.T[:, :n_even] @ ve[:, ::-1]
    odd_vecs = p.T[:, n_even:] @ vo[:, ::-1]

    v = np.empty((n, n))
    k = np.empty(n, dtype=np.int64)
    v[:, 0 : 2 * n_odd : 2] = even_vecs[:, :n_odd]
    v[:, 1 : 2 * n_odd : 2] = odd_vecs
    v[:, 2 * n_odd :] = even_vecs[:, n_odd:]
    k[: 2 * n_odd] = np.arange(2 * n_odd)
    tail = np.arange(2 * n_odd, 2 * n_even, 2)
    if n % 2 == 0:
        # DFT eigenvalue multiplicity: the index n - 1 is skipped
        tail[-1] = n
    k[2 * n_odd :] = tail
    v = _fix_signs(v)
    return DftEigenbasis(n=n, v=np.ascontiguousarray(v), eigen_index=k)


@lru_cache(maxsize=8)
def load_eigenbasis(n, use_cache=True):
    """Basis for ``n``, read from / written to the on-disk DFEB cache."""
    path = fileio.cache_dir() / f"basis_{int(n)}.dfeb"
    if use_cache and path.exists():
        try:
            v, k = fileio.read_dfeb(path)
            if v.shape == (n, n):
                return DftEigenbasis(n=int(n), v=np.ascontiguousarray(v), eigen_index=k)
        except fileio.FormatError:
            pass
    basis = build_eigenbasis(n)
    if use_cache:
        try:
            fileio.write_dfeb(path, basis.v, basis.eigen_index)
        except OSError:
            pass
    return basis


def fractional_eigenvalues(basis, alpha):
    alpha = float(alpha)
    return FractionalEigenvalues(alpha=alpha, lam=np.exp(-1j * basis.eigen_index * alpha))


def _check_length(basis, x):
    if x.shape[0] != basis.n:
        raise ValueError(f"signal length {x.shape[0]} does not match basis size {basis.n}")


def dfrft(basis, alpha, x):
    """Apply ``W_alpha`` to ``x`` (a vector or the columns of a matrix)."""
    x = np.asarray(x)
    _check_length(basis, x)
    lam = fractional_eigenvalues(basis, alpha).lam
    coef = basis.v.T @ x
    if coef.ndim == 2:
        return basis.v @ (lam[:, None] * coef)
    return basis.v @ (lam * coef)


def dfrft_matrix(basis, alpha):
    lam = fractional_eigenvalues(basis, alpha).lam
    return (basis.v * lam) @ basis.v.T


def dft_matrix(n):
    """Unitary DFT matrix, the reference for ``dfrft(pi/2)``."""
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


def _half_tables(basis):
    if not basis._half:
        n = basis.n
        h = n // 2
        even = basis.parity > 0
        # rows 0..h cover every distinct value of an even or odd vector
        basis._half["even_cols"] = np.flatnonzero(even)
        basis._half["odd_cols"] = np.flatnonzero(~even)
        basis._half["ve"] = np.ascontiguousarray(basis.v[: h + 1][:, even].T)
        basis._half["vo"] = np.ascontiguousarray(basis.v[1 : (n + 1) // 2][:, ~even].T)
    return basis._half


def project_symmetric(basis, x):
    """``V^T x`` using the even/odd symmetry of the columns.

    Folding ``x[n] +/- x[N - n]`` first halves the multiplications of the
    dense product.  Agrees with ``basis.v.T @ x`` to rounding.
    """
    x = np.asarray(x)
    _check_length(basis, x)
    n = basis.n
    t = _half_tables(basis)
    h = n // 2
    lo = x[1 : (n + 1) // 2]
    hi = x[n - 1 : n // 2 : -1]
    folded_even = np.empty((h + 1,) + x.shape[1:], dtype=np.result_type(x, float))
    folded_even[0] = x[0]
    folded_even[1 : (n + 1) // 2] = lo + hi
    if n % 2 == 0:
        folded_even[h] = x[h]
    out = np.empty(x.shape, dtype=np.result_type(x, float))
    out[t["even_cols"]] = t["ve"] @ folded_even
    out[t["odd_cols"]] = t["vo"] @ (lo - hi)
    return out


def zero_crossings(vec, rel_tol=1e-10):
    """Sign changes of an eigenvector viewed with its centre in the middle."""
    c = np.fft.fftshift(np.asarray(vec, dtype=float))
    c = c[np.abs(c) > rel_tol * np.abs(c).max()]
    return int(np.count_nonzero(np.signbit(c[1:]) != np.signbit(c[:-1])))
