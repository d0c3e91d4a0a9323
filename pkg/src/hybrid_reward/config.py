"""Layered configuration: defaults < INI file < environment < command-line flags.

The file is INI (``configparser``) with the sections and keys of
:data:`DEFAULTS`. Environment variables named ``HYBRID_REWARD_<SECTION>_<KEY>``
override file values; ``HYBRID_REWARD_HOST`` and ``HYBRID_REWARD_PORT`` are
shortcuts for the service address.
"""

from __future__ import annotations

import configparser
import copy
import io
import os
from pathlib import Path
from typing import Any, Mapping, Optional

ENV_PREFIX = "HYBRID_REWARD_"

DEFAULTS: dict[str, dict[str, Any]] = {
    "weights": {"lambda_srar": 0.1, "lambda_rpcr": 0.7, "lambda_evol": 0.2},
    "rewards": {
        "matching": "one_to_one",
        "strict_format": True,
        "iou_high": 0.5,
        "iou_low": 0.3,
        "rec_partial_factor": 0.8,
        "soft_match_score": 0.5,
        "srar_gate": 0.99,
        "rpcr_gate": 0.80,
    },
    "grpo": {"epsilon_clip": 0.2, "beta_kl": 0.04, "kl_estimator": "k3", "epsilon_std": 1e-8},
    "embedder": {"n_features": 256, "seed": 0},
    "service": {"host": "127.0.0.1", "port": 8080, "log_level": "info"},
    "eval": {"acc_thresholds": "0.5,0.7", "strict": False},
    "simulate": {
        "templates": 8,
        "salient": 0.95,
        "others": 0.90,
        "group_size": 15,
        "steps": 300,
        "learning_rate": 0.1,
        "seed": 0,
        "seeds": 1,
        "stochastic_correctness": False,
        "clipped": False,
    },
}

_SHORTCUTS = {"HOST": ("service", "host"), "PORT": ("service", "port")}


class ConfigError(ValueError):
    pass


def _coerce(raw: Any, default: Any, where: str) -> Any:
    if not isinstance(raw, str):
        return raw
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {type(default).__name__}") from None
    return raw.strip()


class Config:
    """Resolved settings, addressed as ``cfg["section"]["key"]``."""

    def __init__(self, values: Optional[dict] = None):
        self.values = copy.deepcopy(DEFAULTS) if values is None else values

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def set(self, section: str, key: str, value: Any, where: str = "override") -> None:
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigError(f"{where}: unknown setting [{section}] {key}")
        self.values[section][key] = _coerce(value, DEFAULTS[section][key], where)

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        for section, items in self.values.items():
            parser[section] = {k: str(v).lower() if isinstance(v, bool) else str(v) for k, v in items.items()}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


def load_config(
    path: Optional[str | Path] = None,
    env: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[tuple[str, str], Any]] = None,
) -> Config:
    cfg = Config()
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from None
        for section in parser.sections():
            for key, value in parser[section].items():
                cfg.set(section, key, value, where=f"{path} [{section}] {key}")

    env = os.environ if env is None else env
    for name, value in sorted(env.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):]
        if rest in _SHORTCUTS:
            cfg.set(*_SHORTCUTS[rest], value, where=name)
            continue
        for section in DEFAULTS:
            prefix = section.upper() + "_"
            if rest.startswith(prefix) and rest[len(prefix):].lower() in DEFAULTS[section]:
                cfg.set(section, rest[len(prefix):].lower(), value, where=name)
                break

    for (section, key), value in (overrides or {}).items():
        if value is not None:
            cfg.set(section, key, value, where=f"--{key}")
    return cfg


def scorer_params(cfg: Config) -> dict[str, Any]:
    """Keyword arguments for :class:`~hybrid_reward.scorer.HybridRewardScorer`."""
    return {
        **cfg["weights"],
        **cfg["rewards"],
        "epsilon_std": cfg["grpo"]["epsilon_std"],
        "n_features": cfg["embedder"]["n_features"],
        "embed_seed": cfg["embedder"]["seed"],
    }
