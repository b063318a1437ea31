"""Hot inner loops, each in a numba and a pure-numpy flavour.

The numba versions are used when numba imports cleanly and the environment
variable ``FRACIM_NUMBA`` is not set to ``0``.  Both flavours are always
importable so that tests and the benchmark can compare them directly.
"""
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False


def numba_enabled():
    flag = os.environ.get("FRACIM_NUMBA", "1").strip().lower()
    return HAVE_NUMBA and flag not in ("0", "false", "no", "off")


# --------------------------------------------------------------------------
# numpy reference paths
# --------------------------------------------------------------------------


def fold_columns_numpy(v, rho, fold_order, fold_starts, fold_slots, m, n_cols):
    """Folded products ``F[q, n] = sum_{p: pos(p) = q} v[n, p] * rho[p]``.

    ``fold_order`` sorts eigenvector indices by fold position, ``fold_starts``
    marks the start of each group in that order and ``fold_slots`` gives the
    fold position of each group.
    """
    z = v[:n_cols, fold_order] * rho[fold_order]
    grouped = np.add.reduceat(z, fold_starts, axis=1)
    out = np.zeros((m, n_cols), dtype=np.complex128)
    out[fold_slots] = grouped.T
    return out


def sparse_project_numpy(v, idx, vals):
    """``V^T gamma`` for a gamma that is nonzero only at ``idx``."""
    if len(idx) == 0:
        return np.zeros(v.shape[1], dtype=np.complex128)
    return vals @ v[idx, :]


def abs2_numpy(a):
    return a.real * a.real + a.imag * a.imag


# --------------------------------------------------------------------------
# numba paths
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def fold_columns_numba(v, rho, fold_pos, m, n_cols):
        n = v.shape[1]
        out = np.zeros((m, n_cols), dtype=np.complex128)
        for c in range(n_cols):
            for p in range(n):
                out[fold_pos[p], c] += v[c, p] * rho[p]
        return out

    @numba.njit(cache=True)
    def sparse_project_numba(v, idx, vals):
        n = v.shape[1]
        out = np.zeros(n, dtype=np.complex128)
        for i in range(idx.shape[0]):
            row = idx[i]
            g = vals[i]
            for p in range(n):
                out[p] += v[row, p] * g
        return out

    @numba.njit(cache=True)
    def abs2_numba(a):
        out = np.empty(a.shape, dtype=np.float64)
        flat_in = a.ravel()
        flat_out = out.ravel()
        for i in range(flat_in.shape[0]):
            z = flat_in[i]
            flat_out[i] = z.real * z.real + z.imag * z.imag
        return out


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------


class FoldPlan:
    """Precomputed grouping of eigenvectors by fold position ``k(p) mod M``."""

    def __init__(self, eigen_index, m):
        pos = np.mod(np.asarray(eigen_index, dtype=np.int64), m)
        self.m = m
        self.pos = pos
        self.order = np.argsort(pos, kind="stable")
        sorted_pos = pos[self.order]
        self.starts = np.flatnonzero(np.r_[True, sorted_pos[1:] != sorted_pos[:-1]])
        self.slots = sorted_pos[self.starts]


def fold_columns(v, rho, plan, n_cols, use_numba=None):
    if use_numba is None:
        use_numba = numba_enabled()
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    if use_numba and HAVE_NUMBA:
        return fold_columns_numba(v, rho, plan.pos, plan.m, n_cols)
    return fold_columns_numpy(v, rho, plan.order, plan.starts, plan.slots, plan.m, n_cols)


def sparse_project(v, idx, vals, use_numba=None):
    if use_numba is None:
        use_numba = numba_enabled()
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    vals = np.ascontiguousarray(vals, dtype=np.complex128)
    if use_numba and HAVE_NUMBA:
        return sparse_project_numba(v, idx, vals)
    return sparse_project_numpy(v, idx, vals)


def abs2(a, use_numba=None):
    if use_numba is None:
        use_numba = numba_enabled()
    a = np.ascontiguousarray(a, dtype=np.complex128)
    if use_numba and HAVE_NUMBA:
        return abs2_numba(a)
    return abs2_numpy(a)
