"""KKT-informed neural surrogate for projecting generator setpoints onto
their capability set."""

import json as _json

import numpy as _np

from ._kinn import (
    DEFAULT_VALIDATION_SEED,
    PARAM_COLUMNS,
    KinnError,
    Model,
    build_instance,
    loss_terms,
    metrics,
    nnls_solve,
    project,
    project_batch,
    upgrad,
    violated_invariant,
)
from ._kinn import train as _train

__all__ = [
    "DEFAULT_VALIDATION_SEED",
    "PARAM_COLUMNS",
    "KinnError",
    "Model",
    "as_params",
    "build_instance",
    "evaluate",
    "loss_terms",
    "metrics",
    "nnls_solve",
    "project",
    "project_batch",
    "train",
    "upgrad",
    "violated_invariant",
]

__version__ = "0.1.0"


def train(config=None, **overrides):
    """Train with a config dict (same keys as the CLI JSON config).

    Returns a dict with the final metrics, loss values and the trained Model.
    """
    cfg = dict(config or {})
    cfg.update(overrides)
    return _train(_json.dumps(cfg))


def evaluate(model, seed=DEFAULT_VALIDATION_SEED):
    """Validation report of `model` as a dict."""
    return _json.loads(model.evaluate(seed))


def as_params(a_p, a_q, p_bar, p_plus, q_bar, q_plus, p_max):
    """Parameter row in network input order."""
    return _np.array([a_p, a_q, p_bar, p_plus, q_bar, q_plus, p_max], dtype=float)
