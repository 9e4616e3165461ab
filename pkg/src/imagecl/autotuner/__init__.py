"""Surrogate-assisted auto-tuning over a tuning space."""

from imagecl.autotuner.evaluate import ExternalCommand, Measurement, SimulatedCost
from imagecl.autotuner.search import TuneResult, read_history, tune
from imagecl.autotuner.surrogate import Encoding, Surrogate, predict_all, train_surrogate

__all__ = [
    "Encoding",
    "ExternalCommand",
    "Measurement",
    "SimulatedCost",
    "Surrogate",
    "TuneResult",
    "predict_all",
    "read_history",
    "train_surrogate",
    "tune",
]
