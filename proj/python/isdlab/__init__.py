"""Score-distillation estimator lab.

The oracle helpers are thin wrappers over the C++ core. The command functions
run an experiment from a JSON config file, write its outputs, and return the
summary as a dict.
"""

import json as _json

from ._isdlab import (
    ConfigError,
    MixturePrior,
    NoiseSchedule,
    build_schedule,
    eps_predict,
    marginal_at,
    schedule_alpha_beta,
    score,
)
from . import _isdlab

__all__ = [
    "ConfigError",
    "MixturePrior",
    "NoiseSchedule",
    "ablate",
    "build_schedule",
    "eps_predict",
    "janus",
    "marginal_at",
    "run",
    "schedule_alpha_beta",
    "score",
    "variance",
]


def run(config, out=None, seeds=None, threads=None):
    return _json.loads(_isdlab._run(str(config), _opt(out), seeds, threads))


def variance(config, out=None, seeds=None, threads=None):
    return _json.loads(_isdlab._variance(str(config), _opt(out), seeds, threads))


def ablate(config, which, out=None, seeds=None, threads=None):
    return _json.loads(_isdlab._ablate(str(config), which, _opt(out), seeds, threads))


def janus(config, out=None, seeds=None, threads=None):
    return _json.loads(_isdlab._janus(str(config), _opt(out), seeds, threads))


def _opt(path):
    return None if path is None else str(path)
