"""Real-receiver front end: digital I/Q, DC suppression, oversampling and padding.

Per ramp the chain is::

    real (2N) -> digital_iq -> dc_suppress -> center_band -> oversample_pad
              -> center_time -> fractional-domain processing

``center_band`` moves the retained sideband ``[0, fs/2)`` to ``[-fs/4, fs/4)``
so the interference V-shapes are contiguous in the time-frequency plane.
``center_time`` puts the middle of the padded ramp at sample 0, the rotation
centre of the fractional transform.
"""
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import signal


@dataclass(frozen=True)
class FrontendConfig:
    window: str = "hann"
    pad_enabled: bool = True
    oversample_factor: float = 1.25
    zero_pad: int = 128
    highpass_cutoff: float = 0.01
    center: bool = True

    @property
    def factor(self):
        return self.oversample_factor if self.pad_enabled else 1.0

    @property
    def pad(self):
        return self.zero_pad if self.pad_enabled else 0

    def resampled_length(self, n):
        frac = Fraction(self.factor).limit_denominator(64)
        if abs(float(frac) - self.factor) > 1e-12 or (n * frac).denominator != 1:
            raise ValueError(f"oversampling factor {self.factor} does not map {n} samples to an integer length")
        return int(n * frac)

    def output_length(self, n):
        return self.resampled_length(n) + 2 * self.pad


def digital_iq(s_real):
    """Keep the upper sideband of a real ramp and decimate by two.

    Bin ``b`` of the returned ``N``-sample signal equals bin ``b`` of the
    ``2N``-point spectrum of the input, so an in-band ``A cos`` becomes a
    complex exponential of amplitude ``A``.
    """
    s_real = np.asarray(s_real, dtype=float)
    if s_real.shape[0] % 2:
        raise ValueError("digital I/Q needs an even number of real samples")
    n = s_real.shape[0] // 2
    spec = np.fft.fft(s_real, axis=0)
    return np.fft.ifft(spec[:n], axis=0)


def highpass_response(n, cutoff=0.01):
    """Zero-phase response: 0 below ``cutoff``, 1 above ``2 * cutoff`` (cycles/sample)."""
    f = np.abs(np.fft.fftfreq(n))
    h = np.ones(n)
    h[f < cutoff] = 0.0
    ramp = (f >= cutoff) & (f < 2 * cutoff)
    h[ramp] = 0.5 - 0.5 * np.cos(np.pi * (f[ramp] - cutoff) / cutoff)
    return h


def dc_suppress(s, cutoff=0.01):
    s = np.asarray(s)
    h = highpass_response(s.shape[0], cutoff)
    if s.ndim == 2:
        h = h[:, None]
    return np.fft.ifft(np.fft.fft(s, axis=0) * h, axis=0)


def center_band(s):
    """Shift the spectrum by half the sample rate (``(-1)^n`` modulation)."""
    s = np.asarray(s)
    sign = 1.0 - 2.0 * (np.arange(s.shape[0]) % 2)
    return s * (sign[:, None] if s.ndim == 2 else sign)


def uncenter_spectrum(spec):
    """Undo ``center_band`` on a spectrum with an even number of bins."""
    return np.roll(spec, spec.shape[0] // 2, axis=0)


def make_window(name, n):
    return signal.get_window(name, n, fftbins=True)


def oversample_pad(s, cfg):
    """Band-limited resampling, windowing, then symmetric zero padding."""
    s = np.asarray(s)
    n_res = cfg.resampled_length(s.shape[0])
    y = signal.resample(s, n_res, axis=0) if n_res != s.shape[0] else np.array(s, dtype=complex)
    w = make_window(cfg.window, n_res)
    y = y * (w[:, None] if y.ndim == 2 else w)
    if cfg.pad:
        widths = [(cfg.pad, cfg.pad)] + [(0, 0)] * (y.ndim - 1)
        y = np.pad(y, widths)
    return y


def center_time(s):
    return np.fft.ifftshift(s, axes=0)


def uncenter_time(s):
    return np.fft.fftshift(s, axes=0)


def to_iq(s_real, cfg=FrontendConfig()):
    """Digital I/Q plus DC suppression, shared by every processing chain."""
    return dc_suppress(digital_iq(s_real), cfg.highpass_cutoff)


def prepare_ramp(s_real, cfg=FrontendConfig()):
    """Real ramp(s) to the fractional-domain input (windowed, padded, centred)."""
    iq = to_iq(s_real, cfg)
    if cfg.center:
        iq = center_band(iq)
    return center_time(oversample_pad(iq, cfg))


@dataclass(frozen=True)
class GridGeometry:
    """Maps real-receiver time/frequency to fractional-grid samples and bins."""

    n_real: int
    cfg: FrontendConfig = FrontendConfig()

    @property
    def n_iq(self):
        return self.n_real // 2

    @property
    def n_grid(self):
        return self.cfg.output_length(self.n_iq)

    @property
    def grid_step(self):
        """Grid sample interval in units of the real sample interval."""
        return 2.0 / self.cfg.factor

    def x_of(self, n_real_pos):
        """Signed grid time (origin at the grid centre) of real sample position."""
        i = self.cfg.pad + np.asarray(n_real_pos, dtype=float) / self.grid_step
        return i - self.n_grid // 2

    def bin_of(self, f_norm):
        """Grid frequency bin of a real frequency in cycles per real sample."""
        f_iq = 2.0 * np.asarray(f_norm, dtype=float)
        if self.cfg.center:
            f_iq = f_iq - 0.5
        return f_iq / self.cfg.factor * self.n_grid

    def slope_of(self, rate_norm):
        """Grid slope (bins per sample) of a real chirp rate in cycles/sample^2."""
        return rate_norm * self.grid_step**2 * self.n_grid

    def rate_for_angle(self, alpha):
        """Real chirp rate (cycles/sample^2) whose arms compress at ``+-alpha``."""
        return 1.0 / np.tan(alpha) / (self.grid_step**2 * self.n_grid)
