"""Python bindings for the rlrelax C++ library."""

from ._core import (
    Configuration,
    InputError,
    NumericalError,
    Policy,
    PotentialModel,
    discounted_returns,
    init_policy,
    make_model,
    minimize,
    node_features,
    random_pack,
    read_config,
    run,
    wrap,
)

__all__ = [
    "Configuration",
    "InputError",
    "NumericalError",
    "Policy",
    "PotentialModel",
    "discounted_returns",
    "init_policy",
    "make_model",
    "minimize",
    "node_features",
    "random_pack",
    "read_config",
    "run",
    "wrap",
]
