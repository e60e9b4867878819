"""Single-channel EEG sleep stage classification."""

import json

from ._assr import (
    AssrError,
    classify,
    confusion,
    ensemble_vote,
    extract_tf,
    stage_names,
    tf_feature_names,
    train,
)
from . import _assr


def synth(out_dir, patients=13, epochs=240, seed=0):
    """Write a synthetic dataset; returns the parsed manifest."""
    return json.loads(_assr.synth(str(out_dir), patients, epochs, seed))


def default_config():
    return json.loads(_assr.default_config())


def evaluate(manifest, config=None, seed=0, ablation=False):
    """Train on the split and score the test patients; returns (text, report dict)."""
    text, doc = _assr.evaluate(str(manifest), None if config is None else str(config), seed, ablation)
    return text, json.loads(doc)


__all__ = [
    "AssrError",
    "classify",
    "confusion",
    "default_config",
    "ensemble_vote",
    "evaluate",
    "extract_tf",
    "stage_names",
    "synth",
    "tf_feature_names",
    "train",
]
