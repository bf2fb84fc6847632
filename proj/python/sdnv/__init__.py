"""Sliding door networks: training, rule mapping and global robustness verification."""

import json

from ._sdnv import (  # noqa: F401
    ContractViolation,
    Network,
    ParseError,
    TrainingDivergence,
    __version__,
    accuracy,
    assign_doors,
    extract_adversarial_examples,
    gen_synth2d,
    initialize,
    layer_pattern_count,
    load_model,
    model_from_json,
    pattern_number,
    sat_rate,
    train,
)
from . import _sdnv


def region_rules(net, k, pattern):
    """Explicit and implicit rules of the region (class k, pattern) as a dict."""
    return json.loads(_sdnv.region_rules(net, k, pattern))


def verify(net, X=None, y=None, **kwargs):
    """Runs global verification and returns the report as a dict."""
    return json.loads(_sdnv.verify(net, X, y, **kwargs))
