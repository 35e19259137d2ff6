"""
Settings loader: config/config.yaml, then COBPM_* environment variables, then command-line flags
"""
import os
import copy
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

from ..models.errors import ConfigError
from ..models.experiment_data import Settings, validate_settings

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parents[2] / "config" / "config.yaml"

# environment variable -> (section, key)
ENV_OVERRIDES = {
    "COBPM_DELTA": ("model", "delta"),
    "COBPM_SIGMA": ("model", "sigma"),
    "COBPM_P_UP": ("model", "p_up"),
    "COBPM_MAX_DEPTH": ("model", "max_depth"),
    "COBPM_SEQUENCE_PRIOR": ("model", "sequence_prior"),
    "COBPM_ITERS": ("sampler", "iters"),
    "COBPM_BURNIN": ("sampler", "burnin"),
    "COBPM_THIN": ("sampler", "thin"),
    "COBPM_PROPOSAL": ("sampler", "proposal"),
    "COBPM_CHAINS": ("sampler", "chains"),
    "COBPM_PHI": ("divergence", "phi"),
    "COBPM_LEVEL": ("divergence", "level"),
    "COBPM_MC_DRAWS": ("oracle", "mc_draws"),
    "COBPM_ORACLE_WORKERS": ("oracle", "workers"),
    "COBPM_BINS": ("baselines", "bins"),
    "COBPM_SEED": ("runtime", "seed"),
    "COBPM_THREADS": ("runtime", "threads"),
    "COBPM_OUT": ("runtime", "out"),
    "COBPM_LOG_LEVEL": ("logging", "level"),
    "COBPM_LOG_FILE": ("logging", "file"),
}


def read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Cannot parse {path}: {str(e)}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping of sections")
    return data


def _set(data: Dict[str, Any], section: str, key: str, value: Any):
    target = data.setdefault(section, {})
    if not isinstance(target, dict):
        raise ConfigError(f"Config section '{section}' must be a mapping")
    target[key] = value


def environment_overrides(environ: Optional[Dict[str, str]] = None) -> Dict[str, Dict[str, Any]]:
    """COBPM_* variables, each value parsed as a YAML scalar"""
    environ = os.environ if environ is None else environ
    overrides: Dict[str, Dict[str, Any]] = {}
    for name, (section, key) in ENV_OVERRIDES.items():
        if name in environ and environ[name] != "":
            overrides.setdefault(section, {})[key] = yaml.safe_load(environ[name])
    return overrides


def merge(base: Dict[str, Any], overrides: Dict[str, Dict[str, Any]]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for section, values in overrides.items():
        for key, value in values.items():
            if value is not None:
                _set(merged, section, key, value)
    return merged


def load_settings(config_path: Optional[str] = None,
                  flags: Optional[Dict[str, Dict[str, Any]]] = None,
                  env_file: Optional[str] = None,
                  environ: Optional[Dict[str, str]] = None) -> Settings:
    """Resolve settings; flags with value None are treated as unset"""
    if environ is None:
        load_dotenv(dotenv_path=env_file)

    path = Path(config_path) if config_path else DEFAULT_CONFIG_PATH
    if path.exists():
        data = read_yaml(path)
    elif config_path:
        raise ConfigError(f"Config file {config_path} does not exist")
    else:
        logger.warning(f"Default config {path} not found; using built-in defaults")
        data = {}

    data = merge(data, environment_overrides(environ))
    data = merge(data, flags or {})
    settings = validate_settings(data)
    logger.debug(f"Resolved settings from {path}: {settings.model_dump()}")
    return settings
