"""The explicit tuning space: parameters, cross-constraints and configurations."""

from __future__ import annotations

import json
import warnings
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from imagecl.analysis.report import AnalysisReport
from imagecl.analysis.stencil import StencilExtent
from imagecl.errors import EmptySpaceError

WG_DOMAIN = tuple(2**k for k in range(10))  # 1..512
COARSEN_DOMAIN = tuple(2**k for k in range(9))  # 1..256
BOOL_DOMAIN = (0, 1)
MEMORY_KINDS = ("imageMem", "constantMem", "localMem")
EXACT_COUNT_LIMIT = 2**24
CHUNK = 1 << 16
MAX_REJECTIONS = 10**6


@dataclass(frozen=True)
class TuningParameter:
    id: str
    kind: str
    domain: tuple[int, ...]
    target: str | None = None  # array name or loop id

    def __post_init__(self):
        if not self.domain:
            raise ValueError(f"parameter {self.id} has an empty domain")

    def to_json(self) -> dict:
        out = {"id": self.id, "kind": self.kind, "domain": list(self.domain)}
        if self.target is not None:
            out["target"] = self.target
        return out


class Configuration(Mapping):
    """Immutable assignment of integer values to parameter ids."""

    __slots__ = ("_d", "_hash")

    def __init__(self, values: Mapping | None = None, **kw):
        d = dict(values or {}, **kw)
        for k, v in d.items():
            if isinstance(v, (bool, np.bool_)):
                v = int(v)
            if not isinstance(v, (int, np.integer)):
                raise ValueError(f"configuration value for {k!r} must be an integer, got {v!r}")
            d[k] = int(v)
        self._d = d
        self._hash = None

    def __getitem__(self, key):
        return self._d[key]

    def __iter__(self):
        return iter(self._d)

    def __len__(self):
        return len(self._d)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._d.items()))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Mapping):
            return dict(self._d) == dict(other)
        return NotImplemented

    def __reduce__(self):
        # the cached hash is per-process, so only the values are pickled
        return (Configuration, (self._d,))

    def __repr__(self):
        inner = ", ".join(f"{k}={v}" for k, v in self._d.items())
        return f"Configuration({inner})"

    def replace(self, changes: Mapping) -> "Configuration":
        return Configuration({**self._d, **changes})

    def to_json(self) -> dict:
        return dict(self._d)

    def dumps(self) -> str:
        return json.dumps(self._d, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "Configuration":
        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise ValueError("configuration must be a JSON object")
        for k, v in doc.items():
            if isinstance(v, bool) or not isinstance(v, int):
                raise ValueError(f"configuration value for {k!r} must be an exact integer")
        return cls(doc)


# Constraints are evaluated over column dicts: id -> int64 array. A single
# configuration is a batch of one.


@dataclass(frozen=True)
class WorkGroupLimit:
    limit: int
    name: str = "work-group-size"

    def mask(self, cols):
        return cols["wgX"] * cols["wgY"] <= self.limit


@dataclass(frozen=True)
class ExclusiveMemory:
    array: str
    ids: tuple[str, ...]

    @property
    def name(self):
        return f"exclusive-memory-space({self.array})"

    def mask(self, cols):
        return sum(cols[i] for i in self.ids) <= 1


@dataclass(frozen=True)
class LocalMemoryLimit:
    limit: int
    # localMem param id -> (halo x, halo y, element bytes)
    tiles: tuple[tuple[str, int, int, int], ...]
    name: str = "local-memory-size"

    def tile_bytes(self, cols):
        total = 0
        for pid, hx, hy, es in self.tiles:
            tile = (cols["wgX"] * cols["cX"] + hx) * (cols["wgY"] * cols["cY"] + hy) * es
            total = total + cols[pid] * tile
        return total

    def mask(self, cols):
        return self.tile_bytes(cols) <= self.limit


@dataclass
class TuningSpace:
    kernel: str
    params: list[TuningParameter]
    constraints: list = field(default_factory=list)

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.params]

    def param(self, pid: str) -> TuningParameter:
        for p in self.params:
            if p.id == pid:
                return p
        raise KeyError(pid)

    def __contains__(self, pid) -> bool:
        return any(p.id == pid for p in self.params)

    @property
    def product_size(self) -> int:
        n = 1
        for p in self.params:
            n *= len(p.domain)
        return n

    def validate(self, cfg: Mapping) -> list[str]:
        return validate(self, cfg)

    def default(self) -> Configuration:
        """A reasonable starting configuration: 16x16 work-groups, nothing else enabled."""
        values = {p.id: p.domain[0] for p in self.params}
        for pid in ("wgX", "wgY"):
            if 16 in self.param(pid).domain:
                values[pid] = 16
        cfg = Configuration(values)
        if not validate(self, cfg):
            return cfg
        for cfg in enumerate_space(self, limit=1):
            return cfg
        raise EmptySpaceError(f"tuning space of {self.kernel!r} has no valid configuration")

    def to_json(self) -> dict:
        cons = []
        for c in self.constraints:
            d = {"name": c.name}
            if hasattr(c, "limit"):
                d["limit"] = c.limit
            cons.append(d)
        return {
            "kernel": self.kernel,
            "params": [p.to_json() for p in self.params],
            "constraints": cons,
            "productSize": self.product_size,
        }


def _forced_domain(p: TuningParameter, on: bool, trip: int | None) -> tuple[int, ...]:
    if p.kind == "unroll":
        return (trip,) if on else (1,)
    return (1,) if on else (0,)


def build_space(report: AnalysisReport, profile) -> TuningSpace:
    """Derive the parameter space for a kernel on a device profile."""
    params = [
        TuningParameter("wgX", "workGroupX", WG_DOMAIN),
        TuningParameter("wgY", "workGroupY", WG_DOMAIN),
        TuningParameter("cX", "coarsenX", COARSEN_DOMAIN),
        TuningParameter("cY", "coarsenY", COARSEN_DOMAIN),
        TuningParameter("interleaved", "interleaved", BOOL_DOMAIN),
    ]
    constraints: list = [WorkGroupLimit(profile.max_work_group_size)]
    eligible = {
        "imageMem": report.image_eligible,
        "constantMem": report.const_eligible,
        "localMem": report.local_eligible,
    }
    tiles = []
    for name in report.access:
        mem_ids = []
        for kind in MEMORY_KINDS:
            if eligible[kind].get(name):
                pid = f"{kind}.{name}"
                params.append(TuningParameter(pid, kind, BOOL_DOMAIN, name))
                mem_ids.append(pid)
                if kind == "localMem":
                    st = report.stencils[name]
                    assert isinstance(st, StencilExtent)
                    tiles.append((pid, st.width, st.height, report.elem_bytes.get(name, 4)))
        if len(mem_ids) > 1:
            constraints.append(ExclusiveMemory(name, tuple(mem_ids)))
    trips = {}
    for lp in report.loops:
        if lp.trip:
            divisors = tuple(d for d in range(1, lp.trip + 1) if lp.trip % d == 0)
            params.append(TuningParameter(f"unroll.{lp.id}", "unroll", divisors, lp.id))
            trips[f"unroll.{lp.id}"] = lp.trip
    if tiles:
        constraints.append(LocalMemoryLimit(profile.local_mem_bytes, tuple(tiles)))
    by_id = {p.id: i for i, p in enumerate(params)}
    for pid, on in report.forces.items():
        if pid not in by_id:
            warnings.warn(f"force pragma names inapplicable parameter {pid!r}; ignored")
            continue
        p = params[by_id[pid]]
        params[by_id[pid]] = TuningParameter(p.id, p.kind, _forced_domain(p, on, trips.get(pid)), p.target)
    return TuningSpace(report.kernel, params, constraints)


def restrict(space: TuningSpace, domains: Mapping[str, tuple]) -> TuningSpace:
    """Copy of ``space`` with some parameter domains narrowed."""
    params = []
    for p in space.params:
        if p.id in domains:
            dom = tuple(v for v in p.domain if v in set(domains[p.id]))
            params.append(TuningParameter(p.id, p.kind, dom, p.target))
        else:
            params.append(p)
    return TuningSpace(space.kernel, params, list(space.constraints))


def _mask(space: TuningSpace, cols) -> np.ndarray:
    n = len(next(iter(cols.values()))) if cols else 1
    ok = np.ones(n, dtype=bool)
    for c in space.constraints:
        ok &= c.mask(cols)
    return ok


def validate(space: TuningSpace, cfg: Mapping) -> list[str]:
    """All violated constraint names; empty when the configuration is valid."""
    violations = []
    ids = space.ids
    if any(pid not in cfg for pid in ids):
        return ["incomplete"]
    for k in cfg:
        if k not in ids:
            violations.append(f"unknown-parameter({k})")
    for p in space.params:
        if cfg[p.id] not in p.domain:
            violations.append(f"domain({p.id})")
    cols = {pid: np.array([cfg[pid]], dtype=np.int64) for pid in ids}
    for c in space.constraints:
        if not bool(c.mask(cols)[0]):
            violations.append(c.name)
    return violations


def _decode(space: TuningSpace, flat: np.ndarray) -> dict[str, np.ndarray]:
    shape = tuple(len(p.domain) for p in space.params)
    digits = np.unravel_index(flat, shape)
    return {p.id: np.asarray(p.domain, dtype=np.int64)[d] for p, d in zip(space.params, digits)}


def _rows(space: TuningSpace, cols, keep: np.ndarray):
    ids = space.ids
    table = np.stack([cols[i][keep] for i in ids], axis=1) if ids else np.zeros((int(keep.sum()), 0))
    for row in table.tolist():
        yield Configuration(dict(zip(ids, row)))


class Enumeration:
    """Lexicographic iterator over valid configurations plus a total count.

    ``total`` is exact when ``exact`` is true, else the unfiltered product.
    """

    def __init__(self, space: TuningSpace, limit: int | None = None):
        if limit is not None and limit < 1:
            raise ValueError("limit must be positive")
        self.space = space
        self.limit = limit
        self.exact = space.product_size <= EXACT_COUNT_LIMIT
        self._total = None

    @property
    def total(self) -> int:
        if self._total is None:
            if not self.exact:
                self._total = self.space.product_size
            else:
                n = 0
                for start in range(0, self.space.product_size, CHUNK):
                    stop = min(start + CHUNK, self.space.product_size)
                    n += int(_mask(self.space, _decode(self.space, np.arange(start, stop))).sum())
                self._total = n
        return self._total

    def __iter__(self):
        produced = 0
        size = self.space.product_size
        for start in range(0, size, CHUNK):
            cols = _decode(self.space, np.arange(start, min(start + CHUNK, size)))
            for cfg in _rows(self.space, cols, _mask(self.space, cols)):
                yield cfg
                produced += 1
                if self.limit is not None and produced >= self.limit:
                    return


def enumerate_space(space: TuningSpace, limit: int | None = None) -> Enumeration:
    return Enumeration(space, limit)


def iter_valid_tables(space: TuningSpace):
    """Valid configurations in lexicographic order, one int64 matrix per chunk."""
    size = space.product_size
    for start in range(0, size, CHUNK):
        cols = _decode(space, np.arange(start, min(start + CHUNK, size)))
        keep = _mask(space, cols)
        if space.ids:
            yield np.stack([cols[i][keep] for i in space.ids], axis=1)
        else:
            yield np.zeros((int(keep.sum()), 0), dtype=np.int64)


def valid_table(space: TuningSpace) -> np.ndarray:
    """All valid configurations as an int64 matrix, columns in ``space.ids`` order."""
    parts = list(iter_valid_tables(space))
    return np.concatenate(parts) if parts else np.zeros((0, len(space.ids)), dtype=np.int64)


def sample(space: TuningSpace, n: int, seed: int = 0) -> list[Configuration]:
    """``n`` valid configurations by seeded rejection sampling.

    Draws are distinct unless the valid space holds fewer than ``n``
    configurations, in which case each one appears at least once.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    ids = space.ids
    sizes = np.array([len(p.domain) for p in space.params], dtype=np.int64)
    enum = Enumeration(space)
    if enum.exact and enum.total < n:
        if enum.total == 0:
            raise EmptySpaceError(f"tuning space of {space.kernel!r} has no valid configuration")
        table = valid_table(space)
        order = rng.permutation(len(table))
        out = [Configuration(dict(zip(ids, table[i].tolist()))) for i in order]
        while len(out) < n:
            row = table[rng.integers(len(table))]
            out.append(Configuration(dict(zip(ids, row.tolist()))))
        return out
    out: list[Configuration] = []
    seen: set[Configuration] = set()
    rejections = 0
    while len(out) < n:
        digits = rng.integers(0, sizes, size=(4096, len(sizes))) if len(sizes) else np.zeros((4096, 0), int)
        cols = {p.id: np.asarray(p.domain, dtype=np.int64)[digits[:, k]] for k, p in enumerate(space.params)}
        ok = _mask(space, cols)
        if not ok.any():
            rejections += len(ok)
            if rejections >= MAX_REJECTIONS:
                raise EmptySpaceError(
                    f"{MAX_REJECTIONS} consecutive rejections while sampling {space.kernel!r}"
                )
            continue
        for i in range(len(ok)):
            if ok[i]:
                cfg = Configuration({pid: int(cols[pid][i]) for pid in ids})
                if cfg not in seen:
                    seen.add(cfg)
                    out.append(cfg)
                    rejections = 0
                    if len(out) == n:
                        break
                    continue
            rejections += 1
            if rejections >= MAX_REJECTIONS:
                raise EmptySpaceError(
                    f"{MAX_REJECTIONS} consecutive rejections while sampling {space.kernel!r}"
                )
    return out
