"""Experiment configuration: one YAML file with nested sections.

Schema (every key optional; defaults shown by ``fracim generate --help``
and in ``ExperimentConfig()``)::

    seed: 0
    count: 50
    output_dir: runs/default
    methods: [none, imfrac, zeroing, rampfilter]
    dataset:    {n_fast, n_ramps, t_s, noise_power, n_objects, object_snr_db,
                 range_bins, n_interferers, inr_db, angle_deg,
                 interfered_fraction}
    frontend:   {window, pad_enabled, oversample_factor, zero_pad,
                 highpass_cutoff, center}
    mitigation: {m_angles, alpha_max_deg, g, beta_db, phi, max_outer_iters,
                 support_threshold_db, mask_dilation, oracle_passes}
    chain:      {range_window, doppler_window, lowpass, envelope_c,
                 envelope_length, envelope_dilation, ramp_window}
    metrics:    {train, guard, pfa, match_radius, neighbourhood}

Unknown keys are rejected so typos fail loudly.
"""
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Tuple
import hashlib
import json

import numpy as np
import yaml

from .chain import METHODS, ChainConfig
from .detector import DetectorConfig
from .frontend import FrontendConfig
from .metrics import MetricConfig
from .mitigation import MitigationConfig
from .sigmodel import DatasetSpec


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


@dataclass(frozen=True)
class MitigationSection:
    m_angles: int = 256
    alpha_max_deg: float = 80.0
    g: int = 20
    beta_db: float = 20.0
    phi: int = None
    max_outer_iters: int = 16
    support_threshold_db: float = -40.0
    mask_dilation: int = None
    oracle_passes: int = 3

    def build(self):
        det = DetectorConfig(g=self.g, beta_db=self.beta_db, phi=self.phi)
        return MitigationConfig(
            m_angles=self.m_angles,
            alpha_max=float(np.deg2rad(self.alpha_max_deg)),
            detector=det,
            max_outer_iters=self.max_outer_iters,
            support_threshold_db=self.support_threshold_db,
            mask_dilation=self.mask_dilation,
            oracle_passes=self.oracle_passes,
        )


@dataclass(frozen=True)
class ChainSection:
    range_window: str = "hann"
    doppler_window: str = "hann"
    lowpass: bool = False
    envelope_c: float = 5.0
    envelope_length: int = 8
    envelope_dilation: int = 8
    ramp_window: int = 3


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    count: int = 50
    output_dir: str = "runs/default"
    methods: Tuple[str, ...] = ("none", "imfrac", "zeroing", "rampfilter")
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    mitigation: MitigationSection = field(default_factory=MitigationSection)
    chain: ChainSection = field(default_factory=ChainSection)
    metrics: MetricConfig = field(default_factory=MetricConfig)

    def chain_config(self):
        return ChainConfig(frontend=self.frontend, mitigation=self.mitigation.build(), **asdict(self.chain))

    def dataset_spec(self):
        """Dataset ranges with the frontend's oversampling geometry."""
        return replace(
            self.dataset,
            oversample_factor=self.frontend.oversample_factor,
            zero_pad=self.frontend.zero_pad,
        )

    def to_dict(self):
        return asdict(self)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def processing_digest(self):
        """Hash of everything that affects per-frame outputs (not count/paths)."""
        d = self.to_dict()
        for k in ("count", "output_dir", "methods"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]


_SECTIONS = {
    "dataset": DatasetSpec,
    "frontend": FrontendConfig,
    "mitigation": MitigationSection,
    "chain": ChainSection,
    "metrics": MetricConfig,
}


def _section(cls, raw, name):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    known = {f.name for f in fields(cls)}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown key(s) in '{name}': {', '.join(sorted(extra))}")
    vals = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
    try:
        return cls(**vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{name}' section: {exc}") from exc


def from_dict(raw):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a mapping")
    known = {f.name for f in fields(ExperimentConfig)}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(extra))}")
    kw = {name: _section(cls, raw.get(name), name) for name, cls in _SECTIONS.items()}
    for key in ("seed", "count"):
        if key in raw:
            if not isinstance(raw[key], int) or raw[key] < 0:
                raise ConfigError(f"'{key}' must be a non-negative integer")
            kw[key] = raw[key]
    if "output_dir" in raw:
        kw["output_dir"] = str(raw["output_dir"])
    if "methods" in raw:
        kw["methods"] = tuple(parse_methods(raw["methods"]))
    cfg = ExperimentConfig(**kw)
    validate(cfg)
    return cfg


def parse_methods(value):
    items = value.split(",") if isinstance(value, str) else list(value)
    items = [str(m).strip() for m in items if str(m).strip()]
    bad = [m for m in items if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown method(s) {', '.join(bad)}; expected one of {', '.join(METHODS)}")
    return items


def validate(cfg):
    try:
        mcfg = cfg.mitigation.build()
        n_iq = cfg.dataset.n_fast // 2
        n_grid = cfg.frontend.output_length(n_iq)
        mcfg.detector.validate(n_grid)
        from .emdfrft import check_grid_size

        check_grid_size(n_grid, mcfg.m_angles)
        if cfg.dataset.n_ramps < cfg.chain.ramp_window:
            raise ValueError("fewer ramps than the ramp-filter window")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load(path):
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    return from_dict(raw)


def dump(cfg, path):
    Path(path).write_text(yaml.safe_dump(json.loads(json.dumps(cfg.to_dict())), sort_keys=False))
