"""Federated identification of linearly-parameterized nonlinear systems."""

import json as _json

from ._fedsysid import (  # noqa: F401
    FedSysIdError,
    HeterogeneitySpec,
    SystemKind,
    SystemModel,
    TrajectoryBatch,
    aggregate,
    client_update,
    estimate_bmsb,
    estimation_error,
    gram_check,
    lse_client,
    lse_pooled_average,
    make_client_fleet,
    make_heterogeneity,
    make_pendulum_system,
    make_quadrotor_system,
    make_synthetic_system,
    noise_crossterm_check,
    run_federation,
    simulate_batch,
    sqrtm_scaling_csv,
)
from ._fedsysid import run_experiment_json as _run_experiment_json


def run_experiment(config, threads=1):
    """Run an experiment config (a dict with the CLI's JSON keys); returns row dicts."""
    return _run_experiment_json(_json.dumps(config), threads)


__all__ = [name for name in dir() if not name.startswith("_")]
