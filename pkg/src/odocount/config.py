"""Flat key=value configuration with environment-variable overrides.

Every front-end and training constant is a named, defaulted key. Overrides
come from a config file first, then from environment variables prefixed
``ODOCOUNT_`` (e.g. ``ODOCOUNT_FRAME_LEN=1024``).
"""

import dataclasses
import os
from dataclasses import dataclass

ENV_PREFIX = "ODOCOUNT_"


@dataclass
class PipelineConfig:
    # front end
    frame_len: int = 2048
    hop: int = 1024
    window: str = "hann"
    band_lo_hz: float = 500.0
    band_hi_hz: float = 20000.0
    median_window_seconds: float = 10.0
    median_clamp: bool = True
    gain_normalize: bool = False  # divide by the band's median magnitude (noise floor)
    pool_bins: int = 1
    detector_patch_before: int = 5
    detector_patch_after: int = 5
    hmm_patch_before: int = 0
    hmm_patch_after: int = 5
    # detectors
    n_trees: int = 20
    tree_max_depth: int = 0          # 0 = unlimited
    tree_min_samples_leaf: int = 1
    tree_max_features: float = 0.0   # 0 = all features per split
    negative_subsample: float = 0.0  # 0 = keep every negative frame
    sharpener_window: int = 11
    # duration prior
    duration_prior_components: int = 3
    duration_prior_widen: float = 0.25
    duration_gmm_max_iter: int = 500
    duration_gmm_tol: float = 1e-8
    # HMM
    hmm_gmm_components: int = 10
    obs_gmm_max_iter: int = 100
    obs_gmm_tol: float = 1e-6
    obs_gmm_var_floor: float = 1e-6
    hmm_pairing: str = "fifo"
    # evaluation
    onset_tolerance_seconds: float = 0.025
    duration_ratio_tolerance: float = 0.5
    count_window_seconds: float = 10.0
    threshold_grid_max: int = 200
    seed: int = 0

    def to_dict(self):
        return dataclasses.asdict(self)


def _convert(raw, target_type):
    if target_type is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    return raw.strip()


def parse_flat_file(path):
    """``key = value`` lines; '#' starts a comment; blank lines ignored."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, value = stripped.partition("=")
            out[key.strip()] = value.strip()
    return out


def _apply(instance, raw_map, source):
    names = {f.name for f in dataclasses.fields(instance)}
    for key, raw in raw_map.items():
        if key not in names:
            raise ValueError(f"{source}: unknown config key {key!r}")
        setattr(instance, key, _convert(raw, type(getattr(instance, key))))
    return instance


def load_config(path=None, env=None, **overrides):
    """PipelineConfig from defaults <- file <- ODOCOUNT_* env <- kwargs."""
    cfg = PipelineConfig()
    if path is not None:
        _apply(cfg, parse_flat_file(path), str(path))
    env = os.environ if env is None else env
    env_map = {}
    for field in dataclasses.fields(cfg):
        env_key = ENV_PREFIX + field.name.upper()
        if env_key in env:
            env_map[field.name] = env[env_key]
    _apply(cfg, env_map, "environment")
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise ValueError(f"unknown config key {key!r}")
        setattr(cfg, key, value)
    return cfg


def write_flat_file(path, mapping):
    with open(path, "w") as fh:
        for key in mapping:
            fh.write(f"{key} = {mapping[key]}\n")
