"""Measurement records and the functions that produce them."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from imagecl.errors import ImageCLError, MeasureError
from imagecl.tuning import Configuration

OK = "ok"
FAILED = "failed"


@dataclass(frozen=True)
class Measurement:
    cfg: Configuration
    value: float | None
    status: str = OK
    reason: str | None = None
    phase: int = 1

    def __post_init__(self):
        if self.status not in (OK, FAILED):
            raise ValueError(f"unknown status {self.status!r}")
        if (self.value is not None) != (self.status == OK):
            raise ValueError("value must be present exactly when status is ok")

    @property
    def ok(self) -> bool:
        return self.status == OK

    @classmethod
    def failed(cls, cfg, reason: str, phase: int = 1) -> "Measurement":
        return cls(cfg, None, FAILED, reason, phase)

    def with_phase(self, phase: int) -> "Measurement":
        return Measurement(self.cfg, self.value, self.status, self.reason, phase)

    def to_json(self) -> dict:
        out = {"config": self.cfg.to_json(), "phase": self.phase, "status": self.status}
        if self.ok:
            out["value"] = self.value
        else:
            out["reason"] = self.reason
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj: dict) -> "Measurement":
        cfg = Configuration(obj["config"])
        if obj["status"] == OK:
            return cls(cfg, float(obj["value"]), OK, None, int(obj.get("phase", 1)))
        return cls(cfg, None, FAILED, obj.get("reason", ""), int(obj.get("phase", 1)))


class SimulatedCost:
    """Cost-model evaluation on fixed random inputs; safe to run in parallel."""

    concurrent_safe = True

    def __init__(self, ast, report, profile, width: int = 64, height: int = 64, seed: int = 0):
        from imagecl.execsim.buffers import random_inputs

        self.ast = ast
        self.report = report
        self.profile = profile
        self.grid = (width, height)
        self.inputs = random_inputs(ast, width, height, seed)

    def __call__(self, cfg) -> Measurement:
        from imagecl.execsim.cost import estimate_cost
        from imagecl.transform import apply_configuration

        try:
            tk = apply_configuration(
                self.ast, self.report, cfg, self.grid, self.profile.local_mem_bytes
            )
            value = estimate_cost(tk, self.inputs, self.profile).total_cost
        except ImageCLError as e:
            return Measurement.failed(cfg, f"{type(e).__name__}: {e.message}")
        if not math.isfinite(value) or value <= 0:
            return Measurement.failed(cfg, f"non-positive cost {value}")
        return Measurement(cfg, float(value))


class ExternalCommand:
    """Times emitted variants with a user command; sequential by default."""

    concurrent_safe = False

    def __init__(self, ast, report, command: str, grid=None, timeout: float = 60.0,
                 local_mem_limit: int | None = None):
        self.ast = ast
        self.report = report
        self.command = command
        self.grid = grid
        self.timeout = timeout
        self.local_mem_limit = local_mem_limit

    def __call__(self, cfg) -> Measurement:
        from imagecl.emit import emit_variant
        from imagecl.execsim.measure import external_measure
        from imagecl.transform import apply_configuration

        try:
            tk = apply_configuration(self.ast, self.report, cfg, self.grid, self.local_mem_limit)
            value = external_measure(emit_variant(tk), self.command, self.timeout)
        except MeasureError as e:
            return Measurement.failed(cfg, f"{e.kind}: {e.message}")
        except ImageCLError as e:
            return Measurement.failed(cfg, f"{type(e).__name__}: {e.message}")
        if not math.isfinite(value) or value <= 0:
            return Measurement.failed(cfg, f"non-positive time {value}")
        return Measurement(cfg, value)
