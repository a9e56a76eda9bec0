"""
Configuration loader for YAML experiment files
"""

import copy
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from src.exceptions import ConfigError
from src.models import EquationParams, ExperimentConfig, NormSpec, ScenarioKind

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).parent.parent / "config" / "default_config.yaml"

# Sweep lists every scenario needs
REQUIRED_SWEEPS = {
    ScenarioKind.SOLVE: ["amplitude"],
    ScenarioKind.RESONANCE_SCAN: ["n_cap"],
    ScenarioKind.BLOCK_NORM: ["N", "L_med"],
    ScenarioKind.BILINEAR_SCAN: ["s", "N", "seeds"],
    ScenarioKind.TRILINEAR_SCAN: ["s", "N", "seeds"],
    ScenarioKind.LINEAR_SCAN: ["delta"],
    ScenarioKind.CONTRACTION: ["delta"],
    ScenarioKind.WELLPOSED_PROBE: ["s", "cutoff", "seeds"],
}

# Scenario knobs and their defaults
DEFAULT_OPTIONS = {
    ScenarioKind.SOLVE: {"T": 1.0, "dt": 0.01, "sample_every": 10, "initial": "gaussian", "width": 4.0,
                         "k_max": 16, "speed": 1.0, "blowup_factor": 1e6},
    ScenarioKind.RESONANCE_SCAN: {"samples_per_block": 256},
    ScenarioKind.BLOCK_NORM: {"pattern": "plus_plus", "cells_per_dyad": 4, "modulation_cells": None,
                              "restarts": 16, "max_iters": 200, "L_min": 1.0, "N_low": 1.0},
    ScenarioKind.BILINEAR_SCAN: {"estimate": "bilinear", "regime": "plus_minus", "b": 0.6, "eps": 0.05,
                                 "time_window": 2.0 * math.pi, "modulation": 1.0},
    ScenarioKind.TRILINEAR_SCAN: {"regime": "plus_minus", "b": 0.55, "time_window": 2.0 * math.pi,
                                  "modulation": 1.0},
    ScenarioKind.LINEAR_SCAN: {"data_count": 4, "k_max": 8, "n_time": 256, "pad": 4},
    ScenarioKind.CONTRACTION: {"amplitude": 1e-3, "k_max": 8, "probes": 4, "picard_iters": 30,
                               "tol": 1e-10, "n_time": 256},
    ScenarioKind.WELLPOSED_PROBE: {"kinds": None, "delta": 0.0625, "n_time": 256, "amplitude": 1e-2,
                                   "perturbation": 1e-3, "picard_iters": 30, "tol": 1e-10, "b": 0.6},
}

DEFAULT_GRID = {"n": 256, "box_length": 2.0 * math.pi * 32}


class ConfigLoader:
    """Loads, overrides and validates experiment configuration"""

    @staticmethod
    def load_config(config_path: Optional[str] = None) -> Dict[str, Any]:
        """
        Load configuration from YAML file

        Args:
            config_path: Path to config file (defaults to config/default_config.yaml)

        Returns:
            Configuration dictionary with environment overrides applied

        Raises:
            ConfigError: An explicitly given file is missing or is not valid YAML
        """
        if config_path is None:
            if DEFAULT_CONFIG_PATH.exists():
                config_path = str(DEFAULT_CONFIG_PATH)
            else:
                logger.warning("No config/default_config.yaml found, using built-in defaults")
                return ConfigLoader._apply_env_overrides(ConfigLoader._get_default_config())

        path = Path(config_path)
        if not path.exists():
            raise ConfigError("config", f"file not found: {config_path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                config = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError("config", f"invalid YAML in {config_path}: {e}") from e
        if not isinstance(config, dict):
            raise ConfigError("config", "top level must be a mapping")

        config = ConfigLoader._apply_env_overrides(config)
        logger.info(f"Loaded configuration from {config_path}")
        return config

    @staticmethod
    def _apply_env_overrides(config: Dict[str, Any]) -> Dict[str, Any]:
        """Apply environment variable overrides"""
        if os.getenv("KAWAHARA_OUTPUT_DIR"):
            config["output_dir"] = os.getenv("KAWAHARA_OUTPUT_DIR")

        if os.getenv("KAWAHARA_THREADS"):
            try:
                config["threads"] = int(os.getenv("KAWAHARA_THREADS"))
            except ValueError as e:
                raise ConfigError("threads", f"KAWAHARA_THREADS must be an integer: {e}") from e

        if os.getenv("KAWAHARA_SEED"):
            try:
                config["seed"] = int(os.getenv("KAWAHARA_SEED"))
            except ValueError as e:
                raise ConfigError("seed", f"KAWAHARA_SEED must be an integer: {e}") from e

        return config

    @staticmethod
    def _get_default_config() -> Dict[str, Any]:
        """Get minimal default configuration"""
        return {
            "seed": 0,
            "output_dir": "output",
            "threads": 1,
            "equation": {"alpha": 1.0, "beta": -1.0, "kind": "kawahara"},
            "grid": dict(DEFAULT_GRID),
            "norms": [{"s": 0.0, "b": 0.6}],
            "scenarios": {
                "solve": {"sweep": {"amplitude": [0.5]}},
                "resonance-scan": {"sweep": {"n_cap": [1024]}},
                "block-norm": {"sweep": {"N": [4, 8], "L_med": [1, 4, 16]}},
                "bilinear-scan": {"sweep": {"s": [0.0, -1.0, -2.5], "N": [4, 8, 16, 32], "seeds": [0, 1]}},
                "trilinear-scan": {"sweep": {"s": [0.0, -0.25], "N": [4, 8, 16], "seeds": [0]}},
                "linear-scan": {"sweep": {"delta": [0.125, 0.0625, 0.03125, 0.015625]}},
                "contraction": {"sweep": {"delta": [0.0625, 0.03125]}},
                "wellposed-probe": {"sweep": {"s": [-1.0, 0.0], "cutoff": [8, 16], "seeds": [0, 1]}},
            },
        }

    @staticmethod
    def select_scenario(config: Dict[str, Any], scenario: str) -> Dict[str, Any]:
        """
        Flatten a multi-scenario file into one experiment dictionary

        The scenario's own section (under scenarios:) overrides the shared
        top-level keys; a file without a scenarios: section is used as is.

        Args:
            config: Loaded configuration
            scenario: Scenario name as on the command line

        Returns:
            Dictionary accepted by parse_experiment_config
        """
        flat = {k: copy.deepcopy(v) for k, v in config.items() if k != "scenarios"}
        section = (config.get("scenarios") or {}).get(scenario) or {}
        if not isinstance(section, dict):
            raise ConfigError(f"scenarios.{scenario}", "must be a mapping")
        for key, value in section.items():
            if isinstance(value, dict) and isinstance(flat.get(key), dict):
                flat[key] = {**flat[key], **copy.deepcopy(value)}
            else:
                flat[key] = copy.deepcopy(value)
        flat["scenario"] = scenario
        return flat

    @staticmethod
    def parse_experiment_config(raw: Dict[str, Any]) -> ExperimentConfig:
        """
        Validate an experiment dictionary

        Args:
            raw: Flat experiment dictionary (see config/default_config.yaml)

        Returns:
            ExperimentConfig with documented defaults filled in

        Raises:
            ConfigError: Schema violation; the message starts with the dotted field path
        """
        if not isinstance(raw, dict):
            raise ConfigError("", "experiment configuration must be a mapping")

        try:
            scenario = ScenarioKind(raw.get("scenario"))
        except ValueError:
            choices = ", ".join(k.value for k in ScenarioKind)
            raise ConfigError("scenario", f"must be one of {choices}, got {raw.get('scenario')!r}") from None

        if "seed" not in raw or raw["seed"] is None:
            raise ConfigError("seed", "is required")
        seed = _integer(raw["seed"], "seed", minimum=0)
        threads = _integer(raw.get("threads", 1), "threads", minimum=1)
        output_dir = raw.get("output_dir", "output")
        if not isinstance(output_dir, str) or not output_dir:
            raise ConfigError("output_dir", "must be a nonempty string")

        params = _parse_equation(raw.get("equation"))
        grid = _parse_grid(raw.get("grid"))
        norms = _parse_norms(raw.get("norms", [{"s": 0.0, "b": 0.6}]))

        sweep_raw = raw.get("sweep") or {}
        if not isinstance(sweep_raw, dict):
            raise ConfigError("sweep", "must be a mapping of lists")
        sweep: Dict[str, List[Any]] = {}
        for key in REQUIRED_SWEEPS[scenario]:
            if key not in sweep_raw:
                raise ConfigError(f"sweep.{key}", "is required for scenario " + scenario.value)
        for key, values in sweep_raw.items():
            if not isinstance(values, list) or not values:
                raise ConfigError(f"sweep.{key}", "must be a nonempty list")
            sweep[key] = list(values)

        options_raw = raw.get("options") or {}
        if not isinstance(options_raw, dict):
            raise ConfigError("options", "must be a mapping")
        options = {**DEFAULT_OPTIONS[scenario], **options_raw}

        return ExperimentConfig(scenario, params, grid, norms, sweep, seed, output_dir, threads, options)


def _integer(value: Any, field: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(field, f"must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(field, f"must be >= {minimum}, got {value}")
    return value


def _number(value: Any, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(field, f"must be a finite number, got {value!r}")
    return float(value)


def _parse_equation(raw: Any) -> EquationParams:
    if not isinstance(raw, dict):
        raise ConfigError("equation", "must be a mapping with alpha, beta and kind")
    for key in ("alpha", "beta"):
        if key not in raw:
            raise ConfigError(f"equation.{key}", "is required")
    alpha = _number(raw["alpha"], "equation.alpha")
    beta = _number(raw["beta"], "equation.beta")
    if beta == 0:
        raise ConfigError("equation.beta", "must be nonzero")
    try:
        return EquationParams(alpha, beta, raw.get("kind", "kawahara"))
    except ValueError:
        raise ConfigError("equation.kind", f"unknown equation kind {raw.get('kind')!r}") from None


def _parse_grid(raw: Any) -> Dict[str, Any]:
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError("grid", "must be a mapping with n and box_length")
    grid = {**DEFAULT_GRID, **(raw or {})}
    n = _integer(grid["n"], "grid.n", minimum=8)
    if n & (n - 1):
        raise ConfigError("grid.n", f"must be a power of two, got {n}")
    if _number(grid["box_length"], "grid.box_length") <= 0:
        raise ConfigError("grid.box_length", "must be positive")
    return grid


def _parse_norms(raw: Any) -> List[NormSpec]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("norms", "must be a nonempty list of {s, b}")
    norms = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict) or "s" not in entry:
            raise ConfigError(f"norms.{i}", "must be a mapping with s and optional b")
        norms.append(NormSpec(_number(entry["s"], f"norms.{i}.s"), _number(entry.get("b", 0.0), f"norms.{i}.b")))
    return norms
