from ._cfslab import (
    DiscreteSystem,
    causal_action,
    chain_spectrum,
    classify,
    constraints,
    lagrangian,
    load_system,
    minimize_action,
    random_system,
    run,
    save_system,
    second_variation,
)

__all__ = [
    "DiscreteSystem",
    "causal_action",
    "chain_spectrum",
    "classify",
    "constraints",
    "lagrangian",
    "load_system",
    "minimize_action",
    "random_system",
    "run",
    "save_system",
    "second_variation",
]
