"""Synthetic FMCW frames: object echoes, LFM interference and white noise.

A frame is ``n_fast x n_ramps`` complex samples ``objects + interference +
noise``; a real-valued receiver sees its real part.  Objects are tones with a
per-ramp Doppler phase step.  Interference on a ramp is a chirp whose
instantaneous frequency ``k (n T_s - tau)`` stays inside the anti-aliasing
band ``B``; outside that window it is zero.
"""
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple
import hashlib
import json

import numpy as np

from .frontend import FrontendConfig, GridGeometry


@dataclass(frozen=True)
class ObjectParams:
    amplitude: float
    omega: float  # rad/s
    phi: float = 0.0
    doppler_step: float = 0.0  # rad per ramp

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ValueError("object amplitude must be positive")


@dataclass(frozen=True)
class InterferenceParams:
    amplitude: float
    chirp_rate: float  # Hz/s
    tau: float  # s, instant where the instantaneous frequency crosses 0
    phi0: float = 0.0
    bandwidth: float = 0.0  # Hz, anti-aliasing filter

    def support_bounds(self, t_s):
        """Open interval of sample positions where the chirp is in band."""
        if self.chirp_rate == 0:
            return -np.inf, np.inf
        half = self.bandwidth / abs(self.chirp_rate)
        return (self.tau - half) / t_s, (self.tau + half) / t_s

    def support(self, n, t_s):
        lo, hi = self.support_bounds(t_s)
        idx = np.arange(n)
        return idx[(idx > lo) & (idx < hi)]

    def samples(self, n, t_s):
        out = np.zeros(n, dtype=np.complex128)
        idx = self.support(n, t_s)
        if idx.size == 0:
            raise ValueError("interference support does not intersect the ramp")
        t = idx * t_s
        k = self.chirp_rate
        out[idx] = self.amplitude * np.exp(
            1j * (-2.0 * np.pi * k * self.tau * t + np.pi * k * t**2 + self.phi0)
        )
        return out


@dataclass(frozen=True)
class Interferer:
    """One interfering sensor: chirp parameters plus the ramps it hits."""

    amplitude: float
    chirp_rate: float
    bandwidth: float
    ramps: Tuple[int, ...] = ()
    taus: Tuple[float, ...] = ()
    phases: Tuple[float, ...] = ()

    def __post_init__(self):
        if not len(self.ramps) == len(self.taus) == len(self.phases):
            raise ValueError("ramps, taus and phases must have equal length")

    def at(self, i):
        return InterferenceParams(self.amplitude, self.chirp_rate, self.taus[i], self.phases[i], self.bandwidth)

    def per_ramp(self):
        for i, r in enumerate(self.ramps):
            yield r, self.at(i)


@dataclass(frozen=True)
class FrameConfig:
    n_fast: int = 1024
    n_ramps: int = 128
    t_s: float = 1e-7
    noise_power: float = 1.0
    objects: Tuple[ObjectParams, ...] = ()
    interferers: Tuple[Interferer, ...] = ()
    rng_seed: int = 0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["objects"] = tuple(ObjectParams(**o) for o in d.get("objects", ()))
        d["interferers"] = tuple(
            Interferer(
                amplitude=i["amplitude"],
                chirp_rate=i["chirp_rate"],
                bandwidth=i["bandwidth"],
                ramps=tuple(i["ramps"]),
                taus=tuple(i["taus"]),
                phases=tuple(i["phases"]),
            )
            for i in d.get("interferers", ())
        )
        return cls(**d)


@dataclass
class RadarCube:
    data: np.ndarray
    config: FrameConfig
    ground_truth: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def is_complex(self):
        return np.iscomplexobj(self.data)

    def real(self):
        """What a real-valued receiver samples."""
        gt = {k: v.real for k, v in self.ground_truth.items()}
        return RadarCube(self.data.real.copy(), self.config, gt)

    def clean(self):
        """Objects plus noise, i.e. the same frame without interference."""
        return self.ground_truth["objects"] + self.ground_truth["noise"]


def gen_objects(cfg):
    n = np.arange(cfg.n_fast)[:, None]
    r = np.arange(cfg.n_ramps)[None, :]
    out = np.zeros((cfg.n_fast, cfg.n_ramps), dtype=np.complex128)
    for o in cfg.objects:
        out += o.amplitude * np.exp(1j * (o.omega * n * cfg.t_s + o.phi + o.doppler_step * r))
    return out


def gen_interference(cfg):
    out = np.zeros((cfg.n_fast, cfg.n_ramps), dtype=np.complex128)
    for intf in cfg.interferers:
        for ramp, params in intf.per_ramp():
            out[:, ramp] += params.samples(cfg.n_fast, cfg.t_s)
    return out


def gen_noise(cfg):
    rng = np.random.default_rng(cfg.rng_seed)
    if cfg.noise_power == 0:
        return np.zeros((cfg.n_fast, cfg.n_ramps), dtype=np.complex128)
    scale = np.sqrt(cfg.noise_power / 2.0)
    shape = (cfg.n_fast, cfg.n_ramps)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def make_cube(cfg):
    obj = gen_objects(cfg)
    intf = gen_interference(cfg)
    noise = gen_noise(cfg)
    data = obj + intf + noise
    return RadarCube(data, cfg, {"objects": obj, "interference": intf, "noise": noise})


@dataclass(frozen=True)
class DatasetSpec:
    """Randomisation ranges for synthetic frames (all bounds inclusive)."""

    n_fast: int = 1024
    n_ramps: int = 128
    t_s: float = 1e-7
    noise_power: float = 1.0
    n_objects: Tuple[int, int] = (1, 5)
    object_snr_db: Tuple[float, float] = (10.0, 30.0)
    range_bins: Tuple[int, int] = (24, 488)
    n_interferers: Tuple[int, int] = (1, 3)
    inr_db: Tuple[float, float] = (20.0, 40.0)
    angle_deg: Tuple[float, float] = (20.0, 70.0)
    interfered_fraction: float = 0.3
    oversample_factor: float = 1.25
    zero_pad: int = 128

    def __post_init__(self):
        for name in ("n_objects", "object_snr_db", "range_bins", "n_interferers", "inr_db", "angle_deg"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: lower bound {lo} exceeds upper bound {hi}")
        if self.n_objects[0] < 0 or self.n_interferers[0] < 0:
            raise ValueError("counts must be non-negative")
        if not 0.0 <= self.interfered_fraction <= 1.0:
            raise ValueError("interfered_fraction must lie in [0, 1]")
        if not (0 < self.angle_deg[0] and self.angle_deg[1] < 90):
            raise ValueError("angles must lie strictly between 0 and 90 degrees")
        if self.range_bins[0] < 0 or self.range_bins[1] >= self.n_fast // 2:
            raise ValueError("range bins must lie inside the I/Q band")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**d)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def geometry(self):
        fe = FrontendConfig(oversample_factor=self.oversample_factor, zero_pad=self.zero_pad)
        return GridGeometry(self.n_fast, fe)


def _random_objects(spec, rng):
    n_obj = int(rng.integers(spec.n_objects[0], spec.n_objects[1] + 1))
    lo, hi = spec.range_bins
    bins = rng.choice(np.arange(lo, hi + 1), size=n_obj, replace=False)
    max_dop = spec.n_ramps // 2 - 2
    objs = []
    for b in bins:
        snr = rng.uniform(*spec.object_snr_db)
        amp = np.sqrt(spec.noise_power * 10.0 ** (snr / 10.0) / (spec.n_fast // 2))
        dop = int(rng.integers(-max_dop, max_dop + 1))
        objs.append(
            ObjectParams(
                amplitude=float(amp),
                omega=float(2.0 * np.pi * b / (spec.n_fast * spec.t_s)),
                phi=float(rng.uniform(0.0, 2.0 * np.pi)),
                doppler_step=float(2.0 * np.pi * dop / spec.n_ramps),
            )
        )
    return tuple(objs)


def _random_interferers(spec, rng):
    n_int = int(rng.integers(spec.n_interferers[0], spec.n_interferers[1] + 1))
    geo = spec.geometry()
    frame = spec.n_fast * spec.t_s
    n_hit = int(round(spec.interfered_fraction * spec.n_ramps))
    out = []
    for _ in range(n_int):
        if n_hit == 0:
            break
        inr = rng.uniform(*spec.inr_db)
        alpha = np.deg2rad(rng.uniform(*spec.angle_deg))
        rate = geo.rate_for_angle(alpha) * rng.choice([-1.0, 1.0])
        start = int(rng.integers(0, spec.n_ramps - n_hit + 1))
        ramps = tuple(range(start, start + n_hit))
        tau0 = rng.uniform(0.0, frame)
        drift = rng.uniform(-0.05, 0.05) * frame
        taus = tuple(float((tau0 + i * drift) % frame) for i in range(n_hit))
        phases = tuple(float(p) for p in rng.uniform(0.0, 2.0 * np.pi, n_hit))
        out.append(
            Interferer(
                amplitude=float(np.sqrt(spec.noise_power * 10.0 ** (inr / 10.0))),
                chirp_rate=float(rate / spec.t_s**2),
                bandwidth=0.5 / spec.t_s,
                ramps=ramps,
                taus=taus,
                phases=phases,
            )
        )
    return tuple(out)


def random_frame_config(spec, seed):
    rng = np.random.default_rng(seed)
    objects = _random_objects(spec, rng)
    interferers = _random_interferers(spec, rng)
    return FrameConfig(
        n_fast=spec.n_fast,
        n_ramps=spec.n_ramps,
        t_s=spec.t_s,
        noise_power=spec.noise_power,
        objects=objects,
        interferers=interferers,
        rng_seed=int(rng.integers(0, 2**63 - 1)),
    )


def frame_seeds(master_seed, count):
    ss = np.random.SeedSequence(master_seed)
    return [int(c.generate_state(1, dtype=np.uint64)[0] >> 1) for c in ss.spawn(count)]


def gen_dataset(spec, count, seed=0, real=True):
    """``count`` frames drawn from ``spec``; fully determined by ``seed``."""
    if count < 0:
        raise ValueError("count must be non-negative")
    cubes = []
    for s in frame_seeds(seed, count):
        cube = make_cube(random_frame_config(spec, s))
        cubes.append(cube.real() if real else cube)
    return cubes


def object_cells(cfg):
    """``(range_bin, doppler_bin)`` of each object; Doppler bins are signed."""
    cells = []
    for o in cfg.objects:
        rb = int(round(o.omega * cfg.n_fast * cfg.t_s / (2.0 * np.pi)))
        db = int(round(o.doppler_step * cfg.n_ramps / (2.0 * np.pi)))
        db = (db + cfg.n_ramps // 2) % cfg.n_ramps - cfg.n_ramps // 2
        cells.append((rb, db, complex(o.amplitude * np.exp(1j * o.phi))))
    return cells
