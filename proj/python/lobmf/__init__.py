"""Mean-field limit order book experiments (Python front end to the C++ core)."""

import json

from . import _lobmf
from ._lobmf import (
    DomainError,
    InvariantViolation,
    NonconvergenceError,
    ValidationError,
    actual_demand,
    linear_equilibrium,
    meanfield_limit,
    presets,
    solve_dsp,
    solve_linear_game,
    wasserstein,
)

__all__ = [
    "DomainError",
    "InvariantViolation",
    "NonconvergenceError",
    "ValidationError",
    "actual_demand",
    "default_config",
    "linear_equilibrium",
    "meanfield_limit",
    "parse_config",
    "presets",
    "run",
    "run_acceptance",
    "solve_dsp",
    "solve_linear_game",
    "wasserstein",
]


def default_config(kind):
    return json.loads(_lobmf.default_config(kind))


def parse_config(config):
    """Validate a config (dict or JSON text); returns the normalised dict."""
    text = config if isinstance(config, str) else json.dumps(config)
    return json.loads(_lobmf.parse_config(text))


def run(config):
    """Run one experiment. Returns (exit_code, summary dict)."""
    text = config if isinstance(config, str) else json.dumps(config)
    code, summary = _lobmf.run_experiment(text)
    return code, json.loads(summary)


def run_acceptance(only=(), threads=1):
    return _lobmf.run_acceptance(list(only), threads)
