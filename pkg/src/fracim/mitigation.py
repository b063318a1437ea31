"""Interference mitigation driver: search, detect, and update in the DFT eigenbasis.

One outer iteration builds the multiangle grid ``S`` from the current
eigen-coefficients ``rho``.  An inner loop then repeatedly picks the largest
admitted cell, tests it with the least-of CFAR and, on a detection, records
the zeroed cells and excludes every cell the detected chirp occupies.  All
detections of one outer iteration are removed together with::

    rho <- rho - sum_k Lambda_{-alpha_k} V^T gamma_k

where ``gamma_k`` holds only the ``2G + 1`` zeroed cells of row ``m_k``.  The
outer loop stops once an iteration makes no detection.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional
import logging
import warnings

import numpy as np
from scipy.ndimage import maximum_filter1d

from . import _kernels, fileio
from .detector import DetectionMask, DetectorConfig, forced_mask, lo_cfar
from .eigenbasis import fractional_eigenvalues
from .emdfrft import EmdfrftGrid, check_grid_size, eigen_coefficients, emdfrft

log = logging.getLogger(__name__)


class ConvergenceWarning(RuntimeWarning):
    """The outer loop hit ``max_outer_iters`` while still detecting chirps."""


@dataclass(frozen=True)
class MitigationConfig:
    m_angles: int = 256
    alpha_max: float = float(np.deg2rad(80.0))
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    max_outer_iters: int = 16
    oracle_mode: bool = False
    # support of a compressed chirp: cells within this level of the row peak
    support_threshold_db: float = -40.0
    # extra columns excluded on either side of that support; None -> 2 * g
    mask_dilation: Optional[int] = None
    # forced detections per predicted cell in oracle mode
    oracle_passes: int = 3

    def __post_init__(self):
        if not 0.0 < self.alpha_max < np.pi / 2:
            raise ValueError("alpha_max must lie strictly between 0 and pi/2")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be positive")

    @property
    def dilation(self):
        return 2 * self.detector.g if self.mask_dilation is None else int(self.mask_dilation)


@dataclass(frozen=True)
class ChirpDetection:
    m_hat: int
    n_hat: int
    alpha_hat: float
    snr_db: float
    d: DetectionMask
    gamma_idx: np.ndarray
    gamma_vals: np.ndarray


@dataclass
class SeparableBatch:
    detections: List[ChirpDetection] = field(default_factory=list)

    def __len__(self):
        return len(self.detections)

    def append(self, det):
        self.detections.append(det)


@dataclass
class MitigationResult:
    range_spectrum: np.ndarray
    rho: np.ndarray
    batches: List[SeparableBatch]
    grid_builds: int
    converged: bool
    energies: List[float]

    @property
    def n_detections(self):
        return sum(len(b) for b in self.batches)

    @property
    def update_iterations(self):
        return sum(1 for b in self.batches if len(b))


# -- search space -----------------------------------------------------------


def reflected_angle(alpha):
    """Map angles to ``[-pi/2, pi/2)``; ``alpha`` and ``alpha + pi`` coincide."""
    return np.mod(np.asarray(alpha, dtype=float) + np.pi / 2, np.pi) - np.pi / 2


def angle_row_mask(m_angles, alpha_max):
    """Rows whose angle lies within ``alpha_max`` of 0 or pi."""
    alpha = 2.0 * np.pi * np.arange(m_angles) / m_angles
    return np.abs(reflected_angle(alpha)) <= alpha_max + 1e-12


def initial_search_mask(m_angles, n, alpha_max):
    return np.repeat(angle_row_mask(m_angles, alpha_max)[:, None], n, axis=1)


def argmax_masked(grid, mask):
    """Indices of the largest admitted magnitude; ties go to the smallest ``(m, n)``."""
    mag = grid.magnitude if isinstance(grid, EmdfrftGrid) else np.abs(np.asarray(grid))
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != mag.shape:
        raise ValueError("mask and grid shapes differ")
    if not mask.any():
        raise ValueError("search mask admits no cell")
    flat = np.argmax(np.where(mask, mag, -1.0))
    m_hat, n_hat = np.unravel_index(flat, mag.shape)
    return int(m_hat), int(n_hat)


class SupportMasks:
    """Lookup of ``NotSupportOfChirp`` masks for every grid cell.

    The chirp compressed at ``(m_hat, n_hat)`` is the basis function
    ``W_{-alpha} delta_{n_hat}``; in row ``m`` it looks like
    ``W_{alpha_m - alpha_hat} delta_{n_hat}``, so its support only depends on
    ``m - m_hat`` (a row roll).  Reversal symmetry maps ``n_hat`` to
    ``N - n_hat``, so ``N/2 + 1`` templates cover the grid.
    """

    def __init__(self, basis, m_angles, threshold_db=-40.0, dilation=0):
        check_grid_size(basis.n, m_angles)
        self.basis = basis
        self.m = m_angles
        self.n = basis.n
        self.threshold_db = float(threshold_db)
        self.dilation = int(dilation)
        self._support = {}

    @property
    def template_count(self):
        return self.n // 2 + 1

    def support_template(self, n0):
        """Undilated support (``True`` = chirp present) for ``n_hat = n0 <= N/2``."""
        if not 0 <= n0 <= self.n // 2:
            raise IndexError(n0)
        packed = self._support.get(n0)
        if packed is None:
            grid = emdfrft(self.basis, self.basis.v[n0].astype(np.complex128), self.m)
            power = _kernels.abs2(grid.s)
            level = 10.0 ** (self.threshold_db / 10.0)
            sup = power >= level * power.max(axis=1, keepdims=True)
            packed = np.packbits(sup, axis=None)
            self._support[n0] = packed
        return np.unpackbits(packed, count=self.m * self.n).reshape(self.m, self.n).astype(bool)

    def _dilate(self, sup):
        if self.dilation <= 0:
            return sup
        return maximum_filter1d(sup.view(np.uint8), size=2 * self.dilation + 1, axis=1, mode="wrap").astype(bool)

    def support(self, m_hat, n_hat):
        n_hat = int(n_hat) % self.n
        if n_hat <= self.n // 2:
            sup = self.support_template(n_hat)
        else:
            sup = self.support_template(self.n - n_hat)[:, (-np.arange(self.n)) % self.n]
        return np.roll(self._dilate(sup), int(m_hat), axis=0)

    def not_support_of_chirp(self, m_hat, n_hat):
        return ~self.support(m_hat, n_hat)

    def precompute(self):
        for n0 in range(self.template_count):
            self.support_template(n0)

    def save(self, path):
        self.precompute()
        stack = np.stack([self.support_template(n0) for n0 in range(self.template_count)])
        fileio.write_cmsk(path, stack)

    def load(self, path):
        stack = fileio.read_cmsk(path)
        if stack.shape != (self.template_count, self.m, self.n):
            raise fileio.FormatError("mask table does not match this grid")
        for n0, sup in enumerate(stack):
            self._support[n0] = np.packbits(sup, axis=None)

    @classmethod
    def cached(cls, basis, m_angles, threshold_db=-40.0, dilation=0):
        """Masks backed by a CMSK file in the cache directory."""
        obj = cls(basis, m_angles, threshold_db, dilation)
        path = Path(fileio.cache_dir()) / f"masks_{basis.n}_{m_angles}_{abs(threshold_db):g}dB.cmsk"
        if path.exists():
            try:
                obj.load(path)
                return obj
            except (fileio.FormatError, OSError):
                pass
        try:
            obj.save(path)
        except OSError:
            pass
        return obj


_MASK_CACHE = {}


def support_masks_for(basis, cfg):
    key = (id(basis), cfg.m_angles, cfg.support_threshold_db, cfg.dilation)
    hit = _MASK_CACHE.get(key)
    if hit is None or hit.basis is not basis:
        hit = SupportMasks(basis, cfg.m_angles, cfg.support_threshold_db, cfg.dilation)
        _MASK_CACHE[key] = hit
    return hit


# -- updates ----------------------------------------------------------------


def projection_mults(nnz, n):
    """Multiplications of ``V^T gamma`` touching only ``nnz`` nonzero cells."""
    return int(nnz) * int(n)


def dense_projection_mults(n, g):
    """Multiplications of ``V^T (d * row)`` with ``2g + 1`` cells zeroed."""
    return (int(n) - 2 * int(g) - 1) * int(n)


def _gamma(d, s_row):
    d = d.d if isinstance(d, DetectionMask) else np.asarray(d)
    idx = np.flatnonzero(d == 0)
    return idx, np.asarray(s_row, dtype=np.complex128)[idx] * (1.0 - d[idx])


def update_rho(rho, d, s_row, basis, alpha_hat):
    """Remove the zeroed cells of row ``alpha_hat`` from ``rho``."""
    idx, vals = _gamma(d, s_row)
    if len(idx) == 0:
        return np.array(rho, dtype=np.complex128, copy=True)
    proj = _kernels.sparse_project(basis.v, idx, vals)
    return np.asarray(rho, dtype=np.complex128) - fractional_eigenvalues(basis, -alpha_hat).lam * proj


def simultaneous_update(rho, batch, basis):
    """Apply every update of a batch of separable detections at once."""
    out = np.array(rho, dtype=np.complex128, copy=True)
    for det in batch.detections if isinstance(batch, SeparableBatch) else batch:
        proj = _kernels.sparse_project(basis.v, det.gamma_idx, det.gamma_vals)
        out -= fractional_eigenvalues(basis, -det.alpha_hat).lam * proj
    return out


# -- chirp geometry ---------------------------------------------------------


def centered_index(n):
    """Sample positions ``0..N-1`` as signed offsets from the time origin."""
    x = np.arange(n)
    return np.where(x >= (n + 1) // 2, x - n, x).astype(float)


def chirp_at_angle(alpha, n_hat, n, radius=0.4, taper=True):
    """Unit-energy LFM chirp that the transform of angle ``alpha`` compresses at ``n_hat``.

    The chirp is the line ``x cos(alpha) + f sin(alpha) = u0`` of the
    time-frequency plane (``x`` in samples from the time origin, ``f`` in
    bins, ``u0`` the signed offset of ``n_hat``).  With ``radius`` set it is
    gated to the chord inside a disc of ``radius * n`` around the origin,
    where the discrete transform behaves like a rotation; ``taper`` shapes
    that gate with a Hann profile instead of a hard cut.
    """
    alpha = float(alpha)
    sin_a = np.sin(alpha)
    if abs(sin_a) < 1e-9:
        raise ValueError("angle is a multiple of pi: the chirp rate is unbounded")
    u0 = float(centered_index(n)[int(n_hat) % n])
    x = centered_index(n)
    cot = np.cos(alpha) / sin_a
    c = np.exp(1j * (-np.pi * cot * x**2 / n + 2.0 * np.pi * x * u0 / (n * sin_a)))
    if radius is not None:
        half_chord = np.sqrt(max((radius * n) ** 2 - u0**2, 0.0)) * abs(sin_a)
        t = (x - u0 * np.cos(alpha)) / half_chord if half_chord > 0 else np.full(n, np.inf)
        inside = np.abs(t) <= 1.0
        gate = np.where(inside, 0.5 + 0.5 * np.cos(np.pi * np.clip(t, -1, 1)), 0.0) if taper else inside * 1.0
        c = c * gate
    energy = np.linalg.norm(c)
    if energy == 0:
        raise ValueError("chirp support is empty for this offset and radius")
    return c / energy


@dataclass(frozen=True)
class ChirpLine:
    """Chirp trace ``f = f0 + slope * (x - x0)`` in grid samples and bins."""

    slope: float
    x0: float
    f0: float = 0.0

    @property
    def alpha(self):
        return float(np.arctan2(1.0, -self.slope))

    @property
    def offset(self):
        a = self.alpha
        return self.x0 * np.cos(a) + self.f0 * np.sin(a)

    def cell(self, n, m_angles):
        row = int(np.round(self.alpha * m_angles / (2.0 * np.pi))) % m_angles
        return row, int(np.round(self.offset)) % n


def oracle_detect(grid, cell, cfg):
    """Forced detection at the largest cell near a predicted ``(row, column)``.

    Searches ``+-2`` rows and ``+-2G`` columns around ``cell`` and zeroes
    ``2G + 1`` cells there without a threshold test.
    """
    m_pred, n_pred = cell
    m_angles, n = grid.s.shape
    alpha_pred = 2.0 * np.pi * m_pred / m_angles
    if abs(reflected_angle(alpha_pred)) > cfg.alpha_max + 1e-12:
        raise ValueError(f"predicted angle {np.rad2deg(alpha_pred):.1f} deg is outside the search range")
    g = cfg.detector.g
    rows = (m_pred + np.arange(-2, 3)) % m_angles
    cols = (n_pred + np.arange(-2 * g, 2 * g + 1)) % n
    window = grid.magnitude[np.ix_(rows, cols)]
    r, c = np.unravel_index(np.argmax(window), window.shape)
    m_hat, n_hat = int(rows[r]), int(cols[c])
    snr = lo_cfar(grid.s[m_hat], n_hat, _oracle_cfar_cfg(cfg, n)).snr_db
    d = forced_mask(n, n_hat, g, snr)
    idx, vals = _gamma(d, grid.s[m_hat])
    return ChirpDetection(m_hat, n_hat, float(grid.angle_of_row(m_hat)), snr, d, idx, vals)


def _oracle_cfar_cfg(cfg, n):
    det = cfg.detector
    return DetectorConfig(g=det.g, beta_db=det.beta_db, phi=det.resolve_phi(n))


# -- driver -----------------------------------------------------------------


def _detect_batch(grid, cfg, masks, angle_mask):
    batch = SeparableBatch()
    search = np.repeat(angle_mask[:, None], grid.n, axis=1)
    while search.any():
        m_hat, n_hat = argmax_masked(grid, search)
        row = grid.s[m_hat]
        dmask = lo_cfar(row, n_hat, cfg.detector)
        if not dmask.detected:
            break
        idx, vals = _gamma(dmask, row)
        batch.append(
            ChirpDetection(m_hat, n_hat, float(grid.angle_of_row(m_hat)), dmask.snr_db, dmask, idx, vals)
        )
        search &= masks.not_support_of_chirp(m_hat, n_hat)
    return batch


def imfrac(s, cfg, basis, oracle_cells=None, masks=None):
    """Mitigate chirp interference in ``s`` and return its range spectrum.

    ``s`` must already be windowed (and padded, if padding is used).  With
    ``cfg.oracle_mode`` the CFAR search is replaced by forced detections near
    ``oracle_cells``, ``cfg.oracle_passes`` per cell, each on a freshly built
    grid.
    """
    s = np.asarray(s)
    if s.shape != (basis.n,):
        raise ValueError(f"expected a length-{basis.n} signal, got shape {s.shape}")
    cfg.detector.validate(basis.n)
    rho = eigen_coefficients(basis, s)
    energies = [float(np.vdot(rho, rho).real)]
    batches = []
    builds = 0

    if cfg.oracle_mode:
        for _ in range(cfg.oracle_passes if oracle_cells else 0):
            for cell in oracle_cells:
                grid = emdfrft(basis, rho, cfg.m_angles)
                builds += 1
                det = oracle_detect(grid, cell, cfg)
                batch = SeparableBatch([det])
                rho = simultaneous_update(rho, batch, basis)
                energies.append(float(np.vdot(rho, rho).real))
                batches.append(batch)
        grid = emdfrft(basis, rho, cfg.m_angles)
        return MitigationResult(grid.range_spectrum.copy(), rho, batches, builds + 1, True, energies)

    if masks is None:
        masks = support_masks_for(basis, cfg)
    angle_mask = angle_row_mask(cfg.m_angles, cfg.alpha_max)
    converged = False
    grid = None
    for _ in range(cfg.max_outer_iters):
        grid = emdfrft(basis, rho, cfg.m_angles)
        builds += 1
        batch = _detect_batch(grid, cfg, masks, angle_mask)
        batches.append(batch)
        if not len(batch):
            converged = True
            break
        rho = simultaneous_update(rho, batch, basis)
        energies.append(float(np.vdot(rho, rho).real))

    if converged:
        spectrum = grid.range_spectrum.copy()
    else:
        warnings.warn(
            f"mitigation still detecting after {cfg.max_outer_iters} iterations",
            ConvergenceWarning,
            stacklevel=2,
        )
        lam = fractional_eigenvalues(basis, np.pi / 2).lam
        spectrum = basis.v @ (lam * rho)
    return MitigationResult(spectrum, rho, batches, builds, converged, energies)
