"""Least-of CFAR test on one fractional-domain row and the zeroing mask it yields."""
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class DetectorConfig:
    """``phi`` training cells and ``g`` guard cells per side, threshold in dB.

    ``phi=None`` resolves to ``N/2 - g - 1`` for the row length in use.
    """

    g: int = 20
    beta_db: float = 20.0
    phi: Optional[int] = None

    def resolve_phi(self, n):
        return n // 2 - self.g - 1 if self.phi is None else int(self.phi)

    def validate(self, n):
        phi = self.resolve_phi(n)
        if phi < 1:
            raise ValueError(f"training window must hold at least one cell, got {phi}")
        if self.g < 0:
            raise ValueError("guard cell count must be non-negative")
        if 2 * (phi + self.g) + 1 > n:
            raise ValueError(
                f"training and guard windows overlap: 2*({phi}+{self.g})+1 > {n}"
            )
        return phi


@dataclass(frozen=True)
class DetectionMask:
    d: np.ndarray
    detected: bool
    snr_db: float
    n_hat: int

    @property
    def zeroed(self):
        return np.flatnonzero(self.d == 0)


def _zeroing_mask(n, n_hat, g):
    d = np.ones(n)
    d[np.arange(n_hat - g, n_hat + g + 1) % n] = 0.0
    return d


def lo_cfar(row, n_hat, cfg):
    """Least-of CFAR decision for cell ``n_hat`` of ``row``.

    The noise estimate is the smaller of the mean power in the ``phi`` cells
    before and after the guard band, indices taken circularly.
    """
    row = np.asarray(row)
    n = row.shape[0]
    phi = cfg.validate(n)
    n_hat = int(n_hat) % n
    power = np.abs(row) ** 2
    offs = np.arange(cfg.g + 1, cfg.g + phi + 1)
    lead = power[(n_hat - offs) % n].mean()
    lag = power[(n_hat + offs) % n].mean()
    noise = min(lead, lag)
    cell = power[n_hat]
    if noise > 0:
        snr_db = 10.0 * np.log10(cell / noise) if cell > 0 else -np.inf
    else:
        snr_db = np.inf if cell > 0 else -np.inf
    detected = bool(snr_db >= cfg.beta_db)
    d = _zeroing_mask(n, n_hat, cfg.g) if detected else np.ones(n)
    return DetectionMask(d=d, detected=detected, snr_db=float(snr_db), n_hat=n_hat)


def forced_mask(n, n_hat, g, snr_db=np.nan):
    """Zeroing mask around ``n_hat`` without a threshold test."""
    n_hat = int(n_hat) % n
    return DetectionMask(d=_zeroing_mask(n, n_hat, g), detected=True, snr_db=snr_db, n_hat=n_hat)


def apply_mask(row, mask):
    row = np.asarray(row)
    d = mask.d if isinstance(mask, DetectionMask) else np.asarray(mask)
    if d.shape != row.shape:
        raise ValueError("mask and row lengths differ")
    return d * row
