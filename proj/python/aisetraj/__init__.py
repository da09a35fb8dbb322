"""Adaptive numerical differentiation and Frenet-Serret trajectory prediction."""

from ._core import (
    AiseError,
    AiseEstimator,
    __version__,
    abg_gains,
    aise_defaults,
    curve_parameters,
    differentiate,
    gamma0,
    gamma1,
    predict,
    run_experiment,
    truth,
)

__all__ = [
    "AiseError",
    "AiseEstimator",
    "abg_gains",
    "aise_defaults",
    "curve_parameters",
    "differentiate",
    "gamma0",
    "gamma1",
    "predict",
    "run_experiment",
    "truth",
]
