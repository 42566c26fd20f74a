"""Python front end for the msfin C++ core."""

import json

from ._msfin import (
    Model,
    MsfinError,
    Record,
    average_precision,
    decay_weight,
    exponential_loss,
    focal_exponential_loss,
    load_checkpoint,
    mtta,
    read_dataset,
    window_sizes,
)
from . import _msfin

__all__ = [
    "Model",
    "MsfinError",
    "Record",
    "average_precision",
    "decay_weight",
    "evaluate",
    "exponential_loss",
    "focal_exponential_loss",
    "generate_dataset",
    "generate_scenario",
    "load_checkpoint",
    "make_model",
    "matched_filter",
    "mtta",
    "read_dataset",
    "train",
    "window_sizes",
    "write_dataset",
]


def make_model(config=None, seed=0):
    """Model from a config dict (missing keys take their defaults)."""
    return Model(json.dumps(config or {}), seed)


def generate_dataset(n_per_archetype, seed, **scenario):
    """Balanced synthetic pool; scenario keys as in the run config (T, N, d_in, fps, t_ao, noise_sigma)."""
    return _msfin.generate_dataset(n_per_archetype, seed, json.dumps(scenario))


def generate_scenario(id="", **spec):
    return _msfin.generate_scenario(json.dumps(spec), id)


def matched_filter(record, **spec):
    return _msfin.matched_filter(record, json.dumps(spec))


def write_dataset(records, path):
    return json.loads(_msfin.write_dataset(records, str(path)))


def evaluate(videos):
    """Full report for a list of {"probs", "label", "t_ao", "fps"} dicts."""
    return json.loads(_msfin.evaluate_json(videos))


def train(config):
    """Train from a run-config dict. Returns (model, {"log", "report", "best_epoch"})."""
    model, out = _msfin.train_json(json.dumps(config))
    return model, json.loads(out)
