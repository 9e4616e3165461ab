"""Functional simulation and cost modelling of transformed kernels."""

from imagecl.execsim.buffers import load_buffer, load_pgm, random_inputs, save_buffer, save_pgm
from imagecl.execsim.cost import CostReport, estimate_cost
from imagecl.execsim.interp import TraceLog, interpret
from imagecl.execsim.measure import external_measure, parse_milliseconds
from imagecl.execsim.profiles import DeviceProfile, load_profile

__all__ = [
    "CostReport",
    "DeviceProfile",
    "TraceLog",
    "estimate_cost",
    "external_measure",
    "interpret",
    "load_buffer",
    "load_pgm",
    "load_profile",
    "parse_milliseconds",
    "random_inputs",
    "save_buffer",
    "save_pgm",
]
