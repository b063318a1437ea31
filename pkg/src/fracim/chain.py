"""Per-frame processing chains from radar cube to range-Doppler map.

``process_reference``      I/Q, window, range FFT, Doppler FFT
``process_imfrac``         I/Q, oversample + pad, fractional-domain mitigation,
                           crop back to the reference range grid, Doppler FFT
``baseline_zeroing``       null interfered fast-time samples, then reference
``baseline_ramp_filter``   per-bin minimum magnitude over neighbouring ramps

All chains share the digital I/Q front end, so their range axes coincide:
bin ``b`` of every map is bin ``b`` of the ``n_fast``-point real spectrum.
"""
from dataclasses import asdict, dataclass, field, replace
import hashlib
import json
import logging
import warnings

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d, uniform_filter1d

from .eigenbasis import load_eigenbasis
from .frontend import (
    FrontendConfig,
    GridGeometry,
    make_window,
    prepare_ramp,
    to_iq,
    uncenter_spectrum,
    uncenter_time,
)
from .emdfrft import eigen_coefficients, emdfrft
from .mitigation import ChirpLine, ConvergenceWarning, MitigationConfig, angle_row_mask, imfrac, support_masks_for

log = logging.getLogger(__name__)


def config_hash(obj):
    """Short digest of a dataclass (or plain JSON-able value)."""
    data = asdict(obj) if hasattr(obj, "__dataclass_fields__") else obj
    blob = json.dumps(data, sort_keys=True, default=float).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ChainConfig:
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    mitigation: MitigationConfig = field(default_factory=MitigationConfig)
    range_window: str = "hann"
    doppler_window: str = "hann"
    lowpass: bool = False
    envelope_c: float = 5.0
    envelope_length: int = 8
    envelope_dilation: int = 8
    ramp_window: int = 3

    def digest(self):
        return config_hash(self)


@dataclass
class RdMap:
    data: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.data.shape


def _provenance(chain, cfg, **extra):
    prov = {"chain": chain, "config_hash": cfg.digest()}
    prov.update(extra)
    return prov


def doppler_fft(range_spectra, window="hann"):
    """Slow-time FFT per range bin, zero Doppler in the middle column."""
    n_ramps = range_spectra.shape[1]
    w = make_window(window, n_ramps) if window else np.ones(n_ramps)
    return np.fft.fftshift(np.fft.fft(range_spectra * w[None, :], axis=1), axes=1)


def range_spectra_reference(iq, window="hann"):
    w = make_window(window, iq.shape[0]) if window else np.ones(iq.shape[0])
    return np.fft.fft(iq * w[:, None], axis=0)


def _iq(cube, cfg):
    data = np.asarray(cube.data if hasattr(cube, "data") else cube)
    if np.iscomplexobj(data):
        return data
    return to_iq(data, cfg.frontend)


def process_reference(cube, cfg=ChainConfig()):
    """Standard FFT chain; a real cube goes through the digital I/Q front end first."""
    spectra = range_spectra_reference(_iq(cube, cfg), cfg.range_window)
    return RdMap(doppler_fft(spectra, cfg.doppler_window), _provenance("reference", cfg))


# -- fractional-domain chain ------------------------------------------------


def crop(spectrum, fe_cfg, n_base):
    """Map a padded-grid range spectrum back to the ``n_base``-bin reference grid.

    ``spectrum`` is the unitary DFT of the padded ramp, as returned by the
    mitigation.  It is brought back to time, the zero padding is dropped, and
    the retained band is read off the oversampled spectrum and rescaled, so
    the result is on the scale of an unnormalised FFT of the I/Q ramp.
    """
    spectrum = np.asarray(spectrum)
    expected = fe_cfg.output_length(n_base)
    if spectrum.shape[0] != expected:
        raise ValueError(f"spectrum length {spectrum.shape[0]} does not match padded length {expected}")
    x = np.fft.ifft(spectrum, axis=0, norm="ortho")
    if fe_cfg.center:
        x = uncenter_time(x)
    n_res = fe_cfg.resampled_length(n_base)
    x = x[fe_cfg.pad : fe_cfg.pad + n_res]
    full = np.fft.fft(x, axis=0)
    half = n_base // 2
    band = np.concatenate([full[:half], full[n_res - (n_base - half) :]], axis=0)
    band = band * (n_base / n_res)
    return uncenter_spectrum(band) if fe_cfg.center else band


def lowpass(spectrum):
    """Circular ``[1/4, 1/2, 1/4]`` smoothing along the range axis."""
    spectrum = np.asarray(spectrum)
    return 0.5 * spectrum + 0.25 * (np.roll(spectrum, 1, axis=0) + np.roll(spectrum, -1, axis=0))


def _admitted(cells, m, alpha_max):
    out = []
    for row, col in cells:
        a = np.mod(2.0 * np.pi * row / m + np.pi / 2, np.pi) - np.pi / 2
        if abs(a) <= alpha_max + 1e-12:
            out.append((row, col))
    return out


def _arms(cube, ramp):
    """Interference parameters on ``ramp`` split into (params, lo, hi, tau_n) arms."""
    fc = cube.config
    for intf in fc.interferers:
        for r, params in intf.per_ramp():
            if r != ramp:
                continue
            lo, hi = params.support_bounds(fc.t_s)
            lo, hi = max(lo, 0.0), min(hi, fc.n_fast - 1.0)
            if hi <= lo:
                continue
            tau_n = params.tau / fc.t_s
            if hi > tau_n:
                yield params, max(lo, tau_n), hi, +1
            if lo < tau_n:
                yield params, lo, min(hi, tau_n), -1


def predicted_cells(cube, ramp, cfg):
    """Grid cells of the interference arms from the chirp geometry alone."""
    fc = cube.config
    geo = GridGeometry(fc.n_fast, cfg.frontend)
    m = cfg.mitigation.m_angles
    f_apex = float(geo.bin_of(0.0))
    cells = []
    for params, _, _, side in _arms(cube, ramp):
        slope = abs(float(geo.slope_of(params.chirp_rate * fc.t_s**2)))
        x_apex = float(geo.x_of(params.tau / fc.t_s))
        cells.append(ChirpLine(side * slope, x_apex, f_apex).cell(geo.n_grid, m))
    return _admitted(cells, m, cfg.mitigation.alpha_max)


def oracle_cells(cube, ramp, cfg, basis=None):
    """Grid cells of the interference arms on one ramp.

    Each arm is synthesised noise-free from its true parameters, passed
    through the front end and located by the argmax of its own multiangle
    transform.  Away from the time-frequency origin the compressing angle
    drifts from the straight-line prediction, so this calibration is what
    the forced search windows are centred on.
    """
    fc = cube.config
    m = cfg.mitigation.m_angles
    if basis is None:
        n_grid = cfg.frontend.output_length(fc.n_fast // 2)
        basis = load_eigenbasis(n_grid)
    rows = angle_row_mask(m, cfg.mitigation.alpha_max)
    idx = np.arange(fc.n_fast)
    cells = []
    for params, lo, hi, _ in _arms(cube, ramp):
        arm = params.samples(fc.n_fast, fc.t_s)
        arm[(idx <= lo) | (idx >= hi)] = 0.0
        x = prepare_ramp(arm.real, cfg.frontend)
        if not np.any(x):
            continue
        mag = emdfrft(basis, eigen_coefficients(basis, x), m).magnitude
        mag[~rows] = 0.0
        row, col = np.unravel_index(np.argmax(mag), mag.shape)
        cells.append((int(row), int(col)))
    return cells


def mitigate_ramp(x, cfg, basis, cells=None, masks=None):
    """Fractional-domain mitigation of one prepared ramp; returns ``(spectrum, result)``."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        res = imfrac(x, cfg.mitigation, basis, oracle_cells=cells, masks=masks)
    return res, bool(caught)


def process_imfrac(cube, cfg=ChainConfig(), oracle=False):
    """Fractional-domain mitigation chain on a real-valued cube."""
    data = np.asarray(cube.data)
    if np.iscomplexobj(data):
        raise ValueError("the fractional chain expects a real-valued cube")
    n_fast, n_ramps = data.shape
    n_iq = n_fast // 2
    mcfg = replace(cfg.mitigation, oracle_mode=bool(oracle))
    ccfg = replace(cfg, mitigation=mcfg)
    prepared = prepare_ramp(data, cfg.frontend)
    n_grid = prepared.shape[0]
    basis = load_eigenbasis(n_grid)
    masks = None if oracle else support_masks_for(basis, mcfg)
    spectra = np.empty((n_iq, n_ramps), dtype=np.complex128)
    detections = []
    iterations = []
    nonconverged = []
    for r in range(n_ramps):
        cells = oracle_cells(cube, r, ccfg, basis) if oracle else None
        x = prepared[:, r]
        if not np.any(x):
            spectra[:, r] = 0.0
            detections.append(0)
            iterations.append(0)
            continue
        res, warned = mitigate_ramp(x, ccfg, basis, cells, masks)
        sp = crop(res.range_spectrum, cfg.frontend, n_iq)
        if cfg.lowpass and res.n_detections:
            sp = lowpass(sp)
        spectra[:, r] = sp
        detections.append(res.n_detections)
        iterations.append(res.update_iterations)
        if warned or not res.converged:
            nonconverged.append(r)
    if nonconverged:
        log.warning("mitigation did not converge on ramps %s", nonconverged)
    chain = "imfrac-oracle" if oracle else "imfrac"
    prov = _provenance(
        chain,
        ccfg,
        detections=detections,
        update_iterations=iterations,
        nonconverged_ramps=nonconverged,
        frontend_hash=config_hash(cfg.frontend),
        mitigation_hash=config_hash(mcfg),
    )
    return RdMap(doppler_fft(spectra, cfg.doppler_window), prov)


# -- baselines --------------------------------------------------------------


def oracle_support(cube, ramp):
    """Boolean mask of interfered real fast-time samples on ``ramp``."""
    fc = cube.config
    mask = np.zeros(fc.n_fast, dtype=bool)
    for intf in fc.interferers:
        for r, params in intf.per_ramp():
            if r == ramp:
                mask[params.support(fc.n_fast, fc.t_s)] = True
    return mask


def envelope_detect(iq, c=5.0, length=8, dilation=8):
    """Samples whose smoothed envelope exceeds ``median + c * MAD`` (per column)."""
    iq = np.asarray(iq)
    env = uniform_filter1d(np.abs(iq), size=length, axis=0, mode="nearest")
    med = np.median(env, axis=0, keepdims=True)
    mad = 1.4826 * np.median(np.abs(env - med), axis=0, keepdims=True)
    flag = env > med + c * mad
    if dilation > 0:
        flag = maximum_filter1d(flag.view(np.uint8), size=2 * dilation + 1, axis=0, mode="constant").astype(bool)
    return flag


def baseline_zeroing(cube, mode="envelope", cfg=ChainConfig()):
    iq = np.array(_iq(cube, cfg), copy=True)
    if mode == "oracle":
        step = cube.config.n_fast // iq.shape[0]
        flag = np.zeros(iq.shape, dtype=bool)
        for r in range(iq.shape[1]):
            idx = np.flatnonzero(oracle_support(cube, r)) // step
            flag[idx, r] = True
    elif mode == "envelope":
        flag = envelope_detect(iq, cfg.envelope_c, cfg.envelope_length, cfg.envelope_dilation)
    else:
        raise ValueError(f"unknown zeroing mode {mode!r}")
    iq[flag] = 0.0
    spectra = range_spectra_reference(iq, cfg.range_window)
    prov = _provenance(f"zeroing-{mode}", cfg, zeroed_samples=int(flag.sum()))
    return RdMap(doppler_fft(spectra, cfg.doppler_window), prov)


def baseline_ramp_filter(cube, cfg=ChainConfig()):
    iq = _iq(cube, cfg)
    if iq.shape[1] < cfg.ramp_window:
        raise ValueError(f"ramp filtering needs at least {cfg.ramp_window} ramps")
    spectra = range_spectra_reference(iq, cfg.range_window)
    mag = np.abs(spectra)
    low = minimum_filter1d(mag, size=cfg.ramp_window, axis=1, mode="nearest")
    phase = np.exp(1j * np.angle(spectra))
    filtered = low * phase
    return RdMap(doppler_fft(filtered, cfg.doppler_window), _provenance("rampfilter", cfg))


METHODS = ("imfrac", "imfrac-oracle", "zeroing", "zeroing-oracle", "rampfilter", "none")


def run_method(cube, method, cfg=ChainConfig()):
    if method == "none":
        return replace_chain(process_reference(cube, cfg), "none")
    if method == "imfrac":
        return process_imfrac(cube, cfg)
    if method == "imfrac-oracle":
        return process_imfrac(cube, cfg, oracle=True)
    if method == "zeroing":
        return baseline_zeroing(cube, "envelope", cfg)
    if method == "zeroing-oracle":
        return baseline_zeroing(cube, "oracle", cfg)
    if method == "rampfilter":
        return baseline_ramp_filter(cube, cfg)
    raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")


def replace_chain(rd, name):
    rd.provenance["chain"] = name
    return rd
