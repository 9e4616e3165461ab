"""Vectorized reference interpreter for transformed kernels.

All work-items of the ND-range execute in lock-step as numpy lanes. Control
flow is handled with lane masks; coarsening loops replicate lanes instead of
iterating, and coarsening guards compact the lane set to the work-items that
pass them. Since the dialect has at most one barrier, placed at the end of a
straight-line prologue that every work-item executes, running all groups
side by side is equivalent to running them one after another.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from imagecl.errors import DivergentBarrierError, InternalInvariantError, TrapError
from imagecl.frontend.consteval import loop_values
from imagecl.frontend.nodes import (
    Assign,
    Barrier,
    Binary,
    Block,
    Call,
    Cast,
    Cond,
    Decl,
    ExprStmt,
    FloatLit,
    For,
    If,
    ImageRead,
    ImageWrite,
    Index1,
    IntLit,
    KernelAst,
    LocalDecl,
    ThreadId,
    Unary,
    Var,
)
from imagecl.transform import TransformedKernel

DTYPES = {"float": np.float32, "int": np.int32, "uint": np.uint32, "uchar": np.uint8}
WARP = 16
LANE_BUDGET = 1 << 16

_CMP = {
    "<": np.less, "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal,
    "==": np.equal, "!=": np.not_equal,
}


def _kind(v) -> str:
    dt = np.asarray(v).dtype
    if dt == np.float32:
        return "float"
    if dt == np.uint32:
        return "uint"
    if dt == np.uint8:
        return "uchar"
    return "int"


def _common(a, b) -> str:
    ka, kb = _kind(a), _kind(b)
    if "float" in (ka, kb):
        return "float"
    if "uint" in (ka, kb):
        return "uint"
    return "int"


def convert(v, ty: str):
    """C conversion of a value to ``ty`` with 32-bit wrap-around."""
    dt = DTYPES[ty]
    arr = np.asarray(v)
    if arr.dtype == dt:
        return arr
    if arr.dtype == np.float32 and ty != "float":
        with np.errstate(invalid="ignore"):
            arr = np.trunc(arr).astype(np.int64)
    return arr.astype(np.int64).astype(dt) if ty != "float" else arr.astype(np.float32)


def _and(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a & b


@dataclass
class TraceLog:
    """Instrumentation gathered while tracing is on."""

    offsets: dict[str, set] = field(default_factory=dict)
    coverage: np.ndarray | None = None
    barrier_arrivals: dict[int, int] = field(default_factory=dict)

    def coverage_exact(self) -> bool:
        return self.coverage is not None and bool((self.coverage == 1).all())

    def to_json(self) -> dict:
        cov = None
        if self.coverage is not None:
            cov = {
                "shape": [int(d) for d in self.coverage.shape],
                "min": int(self.coverage.min()),
                "max": int(self.coverage.max()),
                "exact": self.coverage_exact(),
            }
        return {
            "offsets": {k: sorted([int(a), int(b)] for a, b in v) for k, v in sorted(self.offsets.items())},
            "coverage": cov,
            "barrierArrivals": {str(k): int(v) for k, v in sorted(self.barrier_arrivals.items())},
        }


@dataclass
class EventCounts:
    counts: dict[str, int] = field(default_factory=dict)

    def add(self, kind: str, n: int):
        if n:
            self.counts[kind] = self.counts.get(kind, 0) + int(n)


class _Lanes:
    """Per-lane attributes of a set of work-item instances."""

    __slots__ = ("n", "env", "attrs", "rep_span", "logical")

    def __init__(self, n, env, attrs, rep_span=1, logical=None):
        self.n = n
        self.env = env
        self.attrs = attrs
        self.rep_span = rep_span
        self.logical = logical

    def take(self, idx) -> "_Lanes":
        env = {k: v[idx] for k, v in self.env.items()}
        attrs = {k: v[idx] for k, v in self.attrs.items()}
        n = len(attrs["lpos"])
        return _Lanes(n, env, attrs, self.rep_span, self.logical)

    def expand(self, var: str, start_index: int, values, trip: int) -> "_Lanes":
        k = len(values)
        env = {name: np.tile(v, k) for name, v in self.env.items()}
        attrs = {name: np.tile(v, k) for name, v in self.attrs.items()}
        env[var] = np.repeat(np.asarray(values, dtype=np.int32), self.n)
        reps = np.repeat(np.arange(start_index, start_index + k, dtype=np.int64), self.n)
        attrs["rep"] = reps * self.rep_span + attrs["rep"]
        return _Lanes(self.n * k, env, attrs, self.rep_span * trip, self.logical)


class Interpreter:
    def __init__(self, tk: TransformedKernel, inputs: dict, trace=False, counts: EventCounts | None = None):
        self.tk = tk
        self.ast: KernelAst = tk.ast
        self.trace = TraceLog() if trace else None
        self.counts = counts
        self.params = {p.name: p for p in self.ast.params}
        self._setup(inputs)

    # -- setup --------------------------------------------------------------
    def _setup(self, inputs):
        launch = self.tk.launch
        grid_img = self.tk.launch.logical_grid
        shapes = {}
        for p in self.ast.params:
            if p.name not in inputs:
                raise ValueError(f"missing input for parameter {p.name!r}")
            if p.kind == "image":
                shapes[p.name] = np.asarray(inputs[p.name]).shape
        if grid_img is None:
            if not shapes:
                raise ValueError("cannot infer the grid size without image inputs")
            h, w = next(iter(shapes.values()))
            launch = launch.resolve(w, h)
        self.W, self.H = launch.logical_grid
        self.launch = launch
        self.mem = {}
        self.consts = {}
        for p in self.ast.params:
            v = inputs[p.name]
            if p.kind == "scalar":
                self.consts[p.name] = convert(np.asarray(v), p.type)[()]
                continue
            arr = np.asarray(v)
            if arr.dtype != DTYPES[p.type]:
                raise ValueError(f"{p.name}: expected {np.dtype(DTYPES[p.type])}, got {arr.dtype}")
            if p.kind == "image" and arr.shape != (self.H, self.W):
                raise ValueError(f"{p.name}: expected shape {(self.H, self.W)}, got {arr.shape}")
            self.mem[p.name] = arr.reshape(-1).copy()
        if launch.dims:
            self.consts[launch.dims[0]] = np.int32(self.W)
            self.consts[launch.dims[1]] = np.int32(self.H)
        if self.trace is not None:
            self.trace.coverage = np.zeros((self.H, self.W), dtype=np.int64)
            for p in self.ast.params:
                if p.kind == "image":
                    self.trace.offsets[p.name] = set()
        gx, gy = launch.global_size
        wx, wy = launch.local_size
        self.ngx, self.ngy = gx // wx, gy // wy
        self.group_size = wx * wy
        self.n_groups = self.ngx * self.ngy
        self.warps_per_group = -(-self.group_size // WARP)
        lane = np.arange(self.n_groups * self.group_size, dtype=np.int64)
        group, lpos = np.divmod(lane, self.group_size)
        grp_y, grp_x = np.divmod(group, self.ngx)
        lid_y, lid_x = np.divmod(lpos, wx)
        i32 = lambda a: a.astype(np.int32)  # noqa: E731
        self.sizes = {
            ("global_size", 0): np.int32(gx), ("global_size", 1): np.int32(gy),
            ("local_size", 0): np.int32(wx), ("local_size", 1): np.int32(wy),
        }
        attrs = {
            "group": group, "lpos": lpos, "rep": np.zeros_like(lane),
            ("group", 0): i32(grp_x), ("group", 1): i32(grp_y),
            ("local", 0): i32(lid_x), ("local", 1): i32(lid_y),
            ("global", 0): i32(grp_x * wx + lid_x), ("global", 1): i32(grp_y * wy + lid_y),
        }
        self.root = _Lanes(len(lane), {}, attrs)
        self.local_mem = {}
        self.types: dict[str, str] = {}

    # -- events -------------------------------------------------------------
    def _count(self, kind, mask, lanes: _Lanes):
        if self.counts is not None:
            self.counts.add(kind, lanes.n if mask is None else int(np.count_nonzero(mask)))

    def _global_access(self, addr, mask, lanes: _Lanes, space: str):
        if self.counts is None:
            return
        if space == "constant":
            self._count("constantAccess", mask, lanes)
            return
        a = np.broadcast_to(addr, (lanes.n,))
        key = (lanes.attrs["rep"] * self.n_groups + lanes.attrs["group"]) * self.warps_per_group
        key = key + lanes.attrs["lpos"] // WARP
        rel = a.astype(np.int64) - lanes.attrs["lpos"] % WARP
        if mask is not None:
            key, rel = key[mask], rel[mask]
        if len(key) == 0:
            return
        starts = np.concatenate(([0], np.flatnonzero(np.diff(key)) + 1))
        lo = np.minimum.reduceat(rel, starts)
        hi = np.maximum.reduceat(rel, starts)
        sizes = np.diff(np.append(starts, len(key)))
        coalesced = int(sizes[lo == hi].sum())
        self.counts.add("globalCoalesced", coalesced)
        self.counts.add("globalUncoalesced", len(key) - coalesced)

    def _trace_offset(self, image, x, y, mask, lanes: _Lanes):
        if self.trace is None or lanes.logical is None:
            return
        lx, ly = lanes.logical
        dx = np.broadcast_to(x, (lanes.n,)).astype(np.int64) - lanes.env[lx]
        dy = np.broadcast_to(y, (lanes.n,)).astype(np.int64) - lanes.env[ly]
        if mask is not None:
            dx, dy = dx[mask], dy[mask]
        if len(dx):
            pairs = np.unique(np.stack([dx, dy], axis=1), axis=0)
            self.trace.offsets[image].update(map(tuple, pairs.tolist()))

    def _trap(self, msg, bad, lanes: _Lanes):
        i = int(np.flatnonzero(bad)[0])
        wi = (int(lanes.attrs[("global", 0)][i]), int(lanes.attrs[("global", 1)][i]))
        raise TrapError(f"{msg} at work-item {wi}", work_item=wi)

    # -- expressions --------------------------------------------------------
    def ev(self, e, lanes: _Lanes, mask):
        if isinstance(e, IntLit):
            return np.uint32(e.value) if e.unsigned else np.int32(e.value)
        if isinstance(e, FloatLit):
            return np.float32(e.value)
        if isinstance(e, Var):
            if e.name in lanes.env:
                return lanes.env[e.name]
            if e.name in self.consts:
                return self.consts[e.name]
            raise InternalInvariantError(f"unbound variable {e.name}")
        if isinstance(e, ThreadId):
            if e.kind in ("global_size", "local_size"):
                return self.sizes[(e.kind, e.axis)]
            return lanes.attrs[(e.kind, e.axis)]
        if isinstance(e, Binary):
            return self.binary(e, lanes, mask)
        if isinstance(e, Unary):
            v = self.ev(e.operand, lanes, mask)
            self._count("arithmeticOp", mask, lanes)
            if e.op == "!":
                return (np.asarray(v) == 0).astype(np.int32)
            if _kind(v) == "uchar":
                v = convert(v, "int")
            return -v if e.op == "-" else v
        if isinstance(e, Cast):
            v = self.ev(e.operand, lanes, mask)
            self._count("arithmeticOp", mask, lanes)
            return convert(v, e.to)
        if isinstance(e, Cond):
            c = np.asarray(self.ev(e.cond, lanes, mask)) != 0
            self._count("arithmeticOp", mask, lanes)
            if isinstance(e.then, (Index1, ImageRead)):
                self._trace_origin(e.then, lanes, mask)
            c = np.broadcast_to(c, (lanes.n,))
            a = self.ev(e.then, lanes, _and(mask, c))
            b = self.ev(e.other, lanes, _and(mask, ~c))
            ty = _common(a, b)
            return np.where(c, convert(a, ty), convert(b, ty))
        if isinstance(e, Call):
            return self.call(e, lanes, mask)
        if isinstance(e, Index1):
            return self.load(e, lanes, mask)
        if isinstance(e, ImageRead):
            return self.image_read(e, lanes, mask)
        raise InternalInvariantError(f"cannot evaluate {type(e).__name__}")

    def _trace_origin(self, node, lanes, mask):
        if self.trace is None or lanes.logical is None:
            return
        if isinstance(node, Index1) and node.origin is not None:
            o = node.origin
            self._trace_offset(o.image, self.ev(o.x, lanes, mask), self.ev(o.y, lanes, mask), mask, lanes)
        elif isinstance(node, ImageRead):
            self._trace_offset(node.image, self.ev(node.x, lanes, mask), self.ev(node.y, lanes, mask), mask, lanes)

    def binary(self, e: Binary, lanes, mask):
        op = e.op
        if op in ("&&", "||"):
            a = np.broadcast_to(np.asarray(self.ev(e.lhs, lanes, mask)) != 0, (lanes.n,))
            self._count("arithmeticOp", mask, lanes)
            sub = _and(mask, a if op == "&&" else ~a)
            b = np.asarray(self.ev(e.rhs, lanes, sub)) != 0
            out = (a & b) if op == "&&" else (a | b)
            return out.astype(np.int32)
        a = self.ev(e.lhs, lanes, mask)
        b = self.ev(e.rhs, lanes, mask)
        self._count("arithmeticOp", mask, lanes)
        ty = _common(a, b)
        a, b = convert(a, ty), convert(b, ty)
        if op in _CMP:
            return _CMP[op](a, b).astype(np.int32)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if ty == "float":
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.divide(a, b) if op == "/" else np.fmod(a, b)
        bb = np.broadcast_to(b, (lanes.n,))
        zero = bb == 0
        if (zero if mask is None else zero & mask).any():
            self._trap("integer division by zero", zero if mask is None else zero & mask, lanes)
        safe = np.where(zero, 1, bb).astype(a.dtype if hasattr(a, "dtype") else bb.dtype)
        if ty == "uint":
            q = a // safe
        else:
            q = np.trunc(np.asarray(a, dtype=np.float64) / safe).astype(np.int64)
            q = (q + 2**31) % 2**32 - 2**31
            q = q.astype(np.int32)
        if op == "/":
            return q
        return (a - q * safe).astype(q.dtype)

    def call(self, e: Call, lanes, mask):
        args = [self.ev(a, lanes, mask) for a in e.args]
        self._count("arithmeticOp", mask, lanes)
        f = e.func
        if f in ("sqrt", "exp", "fabs"):
            x = convert(args[0], "float")
            with np.errstate(invalid="ignore", over="ignore"):
                return {"sqrt": np.sqrt, "exp": np.exp, "fabs": np.abs}[f](x).astype(np.float32)
        if f in ("fmin", "fmax"):
            a, b = convert(args[0], "float"), convert(args[1], "float")
            return (np.fmin if f == "fmin" else np.fmax)(a, b)
        if f in ("min", "max"):
            ty = _common(args[0], args[1])
            a, b = convert(args[0], ty), convert(args[1], ty)
            return (np.minimum if f == "min" else np.maximum)(a, b)
        if f == "clamp":
            ty = _common(_common(args[0], args[1]), args[2])
            x, lo, hi = (convert(a, ty) for a in args)
            return np.minimum(np.maximum(x, lo), hi)
        raise InternalInvariantError(f"unknown function {f}")

    def _addr(self, e: Index1, lanes, mask, size):
        idx = np.broadcast_to(np.asarray(self.ev(e.index, lanes, mask)), (lanes.n,)).astype(np.int64)
        bad = (idx < 0) | (idx >= size)
        if mask is not None:
            bad &= mask
        if bad.any():
            self._trap(f"out-of-bounds access to {e.array}[{int(idx[np.flatnonzero(bad)[0]])}]", bad, lanes)
        return np.where(mask, idx, 0) if mask is not None else idx

    def load(self, e: Index1, lanes, mask):
        self._trace_origin(e, lanes, mask)
        if e.array in self.local_mem:
            buf = self.local_mem[e.array]
            addr = self._addr(e, lanes, mask, buf.shape[1])
            self._count("localAccess", mask, lanes)
            return buf[lanes.attrs["group"], addr]
        buf = self.mem[e.array]
        addr = self._addr(e, lanes, mask, len(buf))
        self._global_access(addr, mask, lanes, self.params[e.array].space)
        return buf[addr]

    def image_read(self, e: ImageRead, lanes, mask):
        self._trace_origin(e, lanes, mask)
        x = np.broadcast_to(self.ev(e.x, lanes, mask), (lanes.n,)).astype(np.int64)
        y = np.broadcast_to(self.ev(e.y, lanes, mask), (lanes.n,)).astype(np.int64)
        self._count("imageAccess", mask, lanes)
        # clamp-to-edge sampler
        x = np.clip(x, 0, self.W - 1)
        y = np.clip(y, 0, self.H - 1)
        return self.mem[e.image][x + y * self.W]

    # -- statements ---------------------------------------------------------
    def assign_var(self, name, value, lanes, mask):
        v = np.broadcast_to(convert(value, self.types[name]), (lanes.n,))
        if mask is None or name not in lanes.env:
            lanes.env[name] = np.array(v)
        else:
            lanes.env[name] = np.where(mask, v, lanes.env[name])

    def store(self, target: Index1, value, lanes, mask):
        if target.array in self.local_mem:
            buf = self.local_mem[target.array]
            addr = self._addr(target, lanes, mask, buf.shape[1])
            self._count("localAccess", mask, lanes)
            g = lanes.attrs["group"]
            v = np.broadcast_to(convert(value, _kind(buf)), (lanes.n,))
            if mask is None:
                buf[g, addr] = v
            else:
                buf[g[mask], addr[mask]] = v[mask]
            return
        buf = self.mem[target.array]
        addr = self._addr(target, lanes, mask, len(buf))
        self._global_access(addr, mask, lanes, self.params[target.array].space)
        v = np.broadcast_to(convert(value, self.params[target.array].type), (lanes.n,))
        if mask is None:
            buf[addr] = v
        else:
            buf[addr[mask]] = v[mask]

    def block(self, b: Block, lanes, mask):
        for s in b.stmts:
            self.stmt(s, lanes, mask)

    def stmt(self, s, lanes: _Lanes, mask):
        if isinstance(s, Decl):
            self.types[s.name] = s.type
            if s.init is not None:
                self.assign_var(s.name, self.ev(s.init, lanes, mask), lanes, None)
            else:
                lanes.env[s.name] = np.zeros(lanes.n, dtype=DTYPES[s.type])
        elif isinstance(s, Assign):
            self.assign(s, lanes, mask)
        elif isinstance(s, Block):
            self.block(s, lanes, mask)
        elif isinstance(s, If):
            self.if_stmt(s, lanes, mask)
        elif isinstance(s, For):
            if s.role == "coarsen":
                self.coarsen_loop(s, lanes, mask)
            else:
                self.loop(s, lanes, mask)
        elif isinstance(s, ExprStmt):
            self.ev(s.expr, lanes, mask)
        elif isinstance(s, LocalDecl):
            self.local_mem[s.name] = np.zeros((self.n_groups, s.size), dtype=DTYPES[s.type])
        elif isinstance(s, Barrier):
            self.barrier(lanes, mask)
        elif isinstance(s, ImageWrite):
            x = np.broadcast_to(self.ev(s.x, lanes, mask), (lanes.n,)).astype(np.int64)
            y = np.broadcast_to(self.ev(s.y, lanes, mask), (lanes.n,)).astype(np.int64)
            v = np.broadcast_to(convert(self.ev(s.value, lanes, mask), self.params[s.image].type), (lanes.n,))
            self._count("imageAccess", mask, lanes)
            ok = (x >= 0) & (x < self.W) & (y >= 0) & (y < self.H)
            if mask is not None:
                ok &= mask
            self.mem[s.image][(x + y * self.W)[ok]] = v[ok]
        else:
            raise InternalInvariantError(f"cannot execute {type(s).__name__}")

    def assign(self, s: Assign, lanes, mask):
        if s.op == "=":
            value = self.ev(s.value, lanes, mask)
        else:
            value = self.ev(Binary(s.op[:-1], s.target, s.value), lanes, mask)
        if isinstance(s.target, Var):
            self.assign_var(s.target.name, value, lanes, mask)
        elif isinstance(s.target, Index1):
            self.store(s.target, value, lanes, mask)
        else:
            raise InternalInvariantError("unsupported assignment target")

    def if_stmt(self, s: If, lanes: _Lanes, mask):
        if s.logical is not None:
            self.guard(s, lanes, mask)
            return
        c = np.broadcast_to(np.asarray(self.ev(s.cond, lanes, mask)) != 0, (lanes.n,))
        m_then = _and(mask, c)
        if m_then.any():
            self.block(s.then, lanes, m_then)
        if s.other is not None:
            m_else = _and(mask, ~c)
            if m_else.any():
                self.block(s.other, lanes, m_else)

    def guard(self, s: If, lanes: _Lanes, mask):
        m = mask
        if s.cond is not None:
            c = np.broadcast_to(np.asarray(self.ev(s.cond, lanes, mask)) != 0, (lanes.n,))
            m = _and(mask, c)
        if m is not None:
            if not m.any():
                return
            inner = lanes.take(np.flatnonzero(m))
        else:
            inner = _Lanes(lanes.n, lanes.env, lanes.attrs, lanes.rep_span)
        inner.logical = (s.logical[0].name, s.logical[1].name)
        if self.trace is not None:
            xs = inner.env[inner.logical[0]]
            ys = inner.env[inner.logical[1]]
            np.add.at(self.trace.coverage, (ys, xs), 1)
        self.block(s.then, inner, None)

    def coarsen_loop(self, s: For, lanes: _Lanes, mask):
        values = loop_values(s)
        if values is None:
            raise InternalInvariantError("coarsening loop without constant bounds")
        if mask is not None:
            lanes = lanes.take(np.flatnonzero(mask))
        chunk = max(1, LANE_BUDGET // max(1, lanes.n))
        for start in range(0, len(values), chunk):
            vals = values[start:start + chunk]
            sub = lanes.expand(s.var, start, vals, len(values))
            self.types[s.var] = "int"
            if self.counts is not None:
                self.counts.add("loopOverhead", sub.n)
            self.block(s.body, sub, None)

    def _uncounted(self, e, lanes, mask):
        # loop control is charged as loopOverhead, not as arithmetic
        saved, self.counts = self.counts, None
        try:
            return self.ev(e, lanes, mask)
        finally:
            self.counts = saved

    def loop(self, s: For, lanes: _Lanes, mask):
        self.types[s.var] = "int"
        self.assign_var(s.var, self._uncounted(s.start, lanes, mask), lanes, None)
        cmp = _CMP[s.cmp]
        while True:
            c = np.broadcast_to(cmp(lanes.env[s.var], self._uncounted(s.bound, lanes, mask)), (lanes.n,))
            active = _and(mask, c)
            n = int(np.count_nonzero(active))
            if n == 0:
                break
            if self.counts is not None:
                self.counts.add("loopOverhead", n)
            sub = None if n == lanes.n else active
            self.block(s.body, lanes, sub)
            stepped = lanes.env[s.var] + np.int32(s.step)
            lanes.env[s.var] = stepped if sub is None else np.where(active, stepped, lanes.env[s.var])

    def barrier(self, lanes: _Lanes, mask):
        if lanes is not self.root:
            raise InternalInvariantError("barrier outside the kernel prologue")
        g = lanes.attrs["group"] if mask is None else lanes.attrs["group"][mask]
        arrived = np.bincount(g, minlength=self.n_groups)
        bad = (arrived != 0) & (arrived != self.group_size)
        if bad.any():
            grp = int(np.flatnonzero(bad)[0])
            raise DivergentBarrierError(
                f"only {arrived[grp]} of {self.group_size} work-items of group {grp} reached the barrier",
                work_item=grp,
            )
        if self.trace is not None:
            for grp, n in enumerate(arrived.tolist()):
                self.trace.barrier_arrivals[grp] = self.trace.barrier_arrivals.get(grp, 0) + n
        if self.counts is not None:
            self.counts.add("barrier", int(np.count_nonzero(arrived)))

    # -- driver -------------------------------------------------------------
    def run(self) -> dict:
        with np.errstate(over="ignore"):
            self.block(self.ast.body, self.root, None)
        out = {}
        for p in self.ast.params:
            if p.kind == "image":
                out[p.name] = self.mem[p.name].reshape(self.H, self.W)
            elif p.kind == "array":
                out[p.name] = self.mem[p.name]
        return out


def interpret(tk: TransformedKernel, inputs: dict, trace: bool = False):
    """Execute a transformed kernel; returns (outputs, trace-or-None)."""
    it = Interpreter(tk, inputs, trace=trace)
    out = it.run()
    return out, it.trace
