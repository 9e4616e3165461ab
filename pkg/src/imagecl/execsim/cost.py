"""Event-counting cost model over synthetic device profiles."""

from __future__ import annotations

from dataclasses import dataclass, replace

from imagecl.execsim.interp import EventCounts, Interpreter
from imagecl.execsim.profiles import WEIGHT_KINDS, DeviceProfile
from imagecl.transform import TransformedKernel


@dataclass(frozen=True)
class CostReport:
    total_cost: float
    event_counts: dict
    coalesced_fraction: float
    occupancy_penalty: float = 1.0
    utilization_penalty: float = 1.0
    local_bytes: int = 0
    work_group_size: int = 1

    def recompute(self, profile: DeviceProfile) -> float:
        """Total cost of the same event counts under another profile."""
        return self.reweigh(profile).total_cost

    def reweigh(self, profile: DeviceProfile) -> "CostReport":
        occ = profile.occupancy_penalty(self.local_bytes, self.work_group_size)
        util = profile.utilization_penalty(self.event_counts.get("workItem", 0))
        raw = sum(profile.weights[k] * self.event_counts.get(k, 0) for k in WEIGHT_KINDS)
        return replace(self, total_cost=occ * util * raw, occupancy_penalty=occ, utilization_penalty=util)

    def to_json(self) -> dict:
        return {
            "totalCost": self.total_cost,
            "eventCounts": dict(sorted(self.event_counts.items())),
            "coalescedFraction": self.coalesced_fraction,
            "occupancyPenalty": self.occupancy_penalty,
            "utilizationPenalty": self.utilization_penalty,
        }


def estimate_cost(tk: TransformedKernel, inputs: dict, profile: DeviceProfile) -> CostReport:
    """Interpret ``tk`` while counting events and weight them by ``profile``."""
    counts = EventCounts()
    it = Interpreter(tk, inputs, counts=counts)
    it.run()
    gx, gy = it.launch.global_size
    counts.add("workItem", gx * gy)
    c = counts.counts
    glob = c.get("globalCoalesced", 0) + c.get("globalUncoalesced", 0)
    frac = c.get("globalCoalesced", 0) / glob if glob else 1.0
    wg = tk.launch.local_size[0] * tk.launch.local_size[1]
    return CostReport(0.0, dict(c), frac, local_bytes=tk.local_bytes, work_group_size=wg).reweigh(profile)
