"""Condenser water loop plant model, GBT surrogates and the mixed-integer PSO."""

import json as _json

from ._cwopt import (
    CwoptError,
    Candidate,
    Dataset,
    Hyperparams,
    LoopPrediction,
    OptimizeResult,
    PlantConfig,
    PlantState,
    SurrogateBundle,
    SwarmConfig,
    SweepSpec,
    TariffSchedule,
    clean,
    compute_bill,
    grid_oracle,
    grid_oracle_loop,
    optimize,
    optimize_loop,
    predict_loop,
    run_sweep,
    simulate_point,
    split,
    train_bundle,
)

__version__ = "0.1.0"


def advise(bundle, plant, q_load, t_wb, current=None, timestamp=None, config=None, tariff=None):
    """Recommendation as a dict, same shape as the HTTP /v1/advise response."""
    text = _cwopt_advise(bundle, plant, q_load, t_wb, current, timestamp, config or SwarmConfig(), tariff)
    return _json.loads(text)


def what_if(bundle, plant, q_load, t_wb, t_cws, n_fans):
    return _json.loads(_cwopt_what_if(bundle, plant, q_load, t_wb, t_cws, n_fans))


from ._cwopt import advise_json as _cwopt_advise  # noqa: E402
from ._cwopt import what_if_json as _cwopt_what_if  # noqa: E402
