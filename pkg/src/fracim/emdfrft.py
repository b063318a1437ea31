"""Multiangle fractional DFT: all ``M`` angles ``2*pi*m/M`` from one change of basis.

For eigen-coefficients ``rho = V^T s``::

    S[m, n] = sum_p exp(-2j*pi*m*k(p)/M) * V[n, p] * rho[p]

The products ``V[n, p] * rho[p]`` are folded by ``k(p) mod M`` and an
``M``-point FFT over the fold index produces every angle at once.  Because
column ``N - n`` of the folded matrix equals column ``n`` scaled by
``(-1)^q``, only ``N/2 + 1`` columns are computed; the rest follow from
``S[m, N - n] = S[(m + M/2) % M, n]``.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .eigenbasis import project_symmetric


@dataclass(frozen=True)
class EmdfrftGrid:
    s: np.ndarray
    m_angles: int

    @property
    def n(self):
        return self.s.shape[1]

    @property
    def m_rs(self):
        """Row holding the range spectrum (angle pi/2)."""
        return self.m_angles // 4

    def angle_of_row(self, m):
        return 2.0 * np.pi * np.asarray(m) / self.m_angles

    @property
    def angles(self):
        return self.angle_of_row(np.arange(self.m_angles))

    @cached_property
    def magnitude(self):
        return np.sqrt(_kernels.abs2(self.s))

    @property
    def range_spectrum(self):
        return self.s[self.m_rs]


@dataclass(frozen=True)
class FoldingKernel:
    """Explicit ``M x N`` summation matrix of ``N/M`` stacked identities."""

    k: np.ndarray

    @classmethod
    def build(cls, m, n):
        check_grid_size(n, m, divisible=True)
        return cls(k=np.tile(np.eye(m, dtype=np.int8), (1, n // m)))


def check_grid_size(n, m, divisible=False):
    """Validate ``(N, M)``.

    Folding by ``k(p) mod M`` is exact for any ``N``; ``divisible`` additionally
    demands ``N mod M == 0`` (needed for the explicit stacked-identity kernel).
    """
    if m < 4 or m % 4:
        raise ValueError(f"number of angles must be a positive multiple of 4, got {m}")
    if divisible and n % m:
        raise ValueError(f"signal length {n} is not a multiple of the angle count {m}")


def eigen_coefficients(basis, s, symmetric=True):
    """``rho = V^T s``; ``symmetric`` uses the even/odd folding shortcut."""
    s = np.asarray(s)
    if s.shape[0] != basis.n:
        raise ValueError(f"signal length {s.shape[0]} does not match basis size {basis.n}")
    if symmetric:
        return project_symmetric(basis, s.astype(np.complex128))
    return basis.v.T @ s.astype(np.complex128)


_PLANS = {}


def _plan(basis, m):
    key = (id(basis), m)
    plan = _PLANS.get(key)
    if plan is None or plan[0] is not basis:
        plan = (basis, _kernels.FoldPlan(basis.eigen_index, m))
        _PLANS[key] = plan
    return plan[1]


def fold(basis, rho, m, n_cols=None, use_numba=None):
    """Folded sum ``sum_l Zbar[q + l M, n]`` for the first ``n_cols`` columns."""
    n_cols = basis.n if n_cols is None else n_cols
    return _kernels.fold_columns(basis.v, rho, _plan(basis, m), n_cols, use_numba=use_numba)


def rearrange_half_fft(z_folded):
    """Full ``M x N`` transform from FFTs of the first ``N/2 + 1`` columns.

    ``z_folded`` must have the parity structure of a folded product
    (column ``N - n`` equal to column ``n`` times ``(-1)^q``); only its first
    ``N/2 + 1`` columns are read.
    """
    z_folded = np.asarray(z_folded)
    m, n = z_folded.shape
    half = n // 2 + 1
    head = np.fft.fft(z_folded[:, :half], axis=0)
    return _assemble(head, m, n)


def _assemble(head, m, n):
    half = head.shape[1]
    out = np.empty((m, n), dtype=np.complex128)
    out[:, :half] = head
    cols = np.arange(half, n)
    out[:, cols] = np.roll(head[:, n - cols], -(m // 2), axis=0)
    return out


def emdfrft(basis, rho, m_angles, half=True, use_numba=None):
    """Multiangle transform of the signal with eigen-coefficients ``rho``."""
    n = basis.n
    check_grid_size(n, m_angles)
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (n,):
        raise ValueError(f"expected {n} eigen-coefficients, got shape {rho.shape}")
    if half:
        head = np.fft.fft(fold(basis, rho, m_angles, n // 2 + 1, use_numba), axis=0)
        s = _assemble(head, m_angles, n)
    else:
        s = np.fft.fft(fold(basis, rho, m_angles, n, use_numba), axis=0)
    return EmdfrftGrid(s=s, m_angles=m_angles)
