"""Synthetic device descriptions used by the cost model and the tuning space."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

WEIGHT_KINDS = (
    "globalCoalesced",
    "globalUncoalesced",
    "localAccess",
    "imageAccess",
    "constantAccess",
    "arithmeticOp",
    "loopOverhead",
    "barrier",
    "workItem",
)
BUILTIN = ("gpu-like", "cpu-like")


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    max_work_group_size: int
    local_mem_bytes: int
    const_threshold_bytes: int
    weights: dict = field(hash=False)
    # work-items that must be resident per compute unit before local-memory
    # pressure starts to hurt; 0 disables the occupancy model
    resident_target: int = 0
    # launches with fewer work-items than this leave the device partly idle
    min_work_items: int = 1

    def __post_init__(self):
        missing = [k for k in WEIGHT_KINDS if k not in self.weights]
        if missing:
            raise ValueError(f"profile {self.name!r} lacks weights {missing}")
        for k, v in self.weights.items():
            if k not in WEIGHT_KINDS:
                raise ValueError(f"profile {self.name!r}: unknown weight {k!r}")
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"profile {self.name!r}: weight {k} must be finite and >= 0")

    def occupancy_penalty(self, local_bytes: int, wg_size: int) -> float:
        if local_bytes <= 0 or self.resident_target <= 0:
            return 1.0
        groups_wanted = math.ceil(self.resident_target / wg_size)
        return max(1.0, groups_wanted * local_bytes / self.local_mem_bytes)

    def utilization_penalty(self, work_items: int) -> float:
        return max(1.0, self.min_work_items / max(1, work_items))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "maxWorkGroupSize": self.max_work_group_size,
            "localMemBytes": self.local_mem_bytes,
            "constThresholdBytes": self.const_threshold_bytes,
            "weights": dict(self.weights),
            "residentTarget": self.resident_target,
            "minWorkItems": self.min_work_items,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DeviceProfile":
        return cls(
            name=doc["name"],
            max_work_group_size=int(doc["maxWorkGroupSize"]),
            local_mem_bytes=int(doc["localMemBytes"]),
            const_threshold_bytes=int(doc.get("constThresholdBytes", 4096)),
            weights={k: float(v) for k, v in doc["weights"].items()},
            resident_target=int(doc.get("residentTarget", 0)),
            min_work_items=int(doc.get("minWorkItems", 1)),
        )


def load_profile(name_or_path: str | Path) -> DeviceProfile:
    """Load a built-in profile by name or a JSON profile file by path."""
    if str(name_or_path) in BUILTIN:
        text = resources.files("imagecl.execsim").joinpath(f"profiles/{name_or_path}.json").read_text()
    else:
        text = Path(name_or_path).read_text(encoding="utf-8")
    return DeviceProfile.from_json(json.loads(text))
