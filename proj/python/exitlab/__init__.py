"""Exit times and exit points of slowly modulated small-noise diffusions.

States are numbered from 1, as on the command line.
"""

from ._core import (
    BudgetError,
    Error,
    InputError,
    Model,
    annulus_half_oracle,
    load_model,
    model_from_json,
    predict,
    quasipotential,
    sample_sigma,
    sigma_cdf,
    sigma_law,
    simulate,
    solve_m,
    solve_trap,
    study,
)

__all__ = [
    "BudgetError",
    "Error",
    "InputError",
    "Model",
    "annulus_half_oracle",
    "load_model",
    "model_from_json",
    "predict",
    "quasipotential",
    "sample_sigma",
    "sigma_cdf",
    "sigma_law",
    "simulate",
    "solve_m",
    "solve_trap",
    "study",
]
