"""Digital crowd simulation: aggregation, belief network, diagnostics and sweeps."""

import json

from ._core import (
    ConfigError,
    DataError,
    DivergenceError,
    aggregate,
    confidence_interval,
    dawid_skene,
    empirical_w1,
    glad,
    hashed_features,
    majority_vote,
    metrics,
    normal_quantile_two_sided,
    resolution_rate,
    risk_decomposition,
    smoothing_w1_bound,
    spearman,
    tolerance_interval,
    zero_net_crowd_mean,
)
from . import _core

__version__ = "0.1.0"


def run_sweep(config):
    """Run a simulation sweep; `config` is a dict in the sweep config schema."""
    return json.loads(_core.run_sweep(json.dumps(config)))


def run_step(step, config, out_dir, seed=None):
    """Run one pipeline step (ingest, reference, train, simulate, aggregate, evaluate, report, sweep)."""
    return json.loads(_core.run_step(step, str(config), str(out_dir), seed))
