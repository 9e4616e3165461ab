"""Two-phase search: sample and measure, fit a surrogate, measure its favourites."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from imagecl.autotuner.evaluate import Measurement
from imagecl.autotuner.surrogate import MIN_SAMPLES, Encoding, best_unmeasured, train_surrogate
from imagecl.errors import NoValidMeasurementError
from imagecl.tuning import EXACT_COUNT_LIMIT, Configuration, TuningSpace, sample

log = logging.getLogger(__name__)


@dataclass
class TuneResult:
    best: Measurement
    history: list[Measurement]
    phase1_count: int
    phase2_count: int
    wall_clock: float
    surrogate_meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "best": self.best.to_json(),
            "phase1Count": self.phase1_count,
            "phase2Count": self.phase2_count,
            "wallClock": self.wall_clock,
            "surrogate": self.surrogate_meta,
        }


def read_history(path) -> list[Measurement]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    for n, line in enumerate(path.read_text().splitlines(), 1):
        if line.strip():
            try:
                out.append(Measurement.from_json(json.loads(line)))
            except (ValueError, KeyError, TypeError) as e:
                raise ValueError(f"{path}:{n}: malformed history record ({e})") from None
    return out


_WORKER_EVAL = None


def _init_worker(evaluate):
    global _WORKER_EVAL
    _WORKER_EVAL = evaluate


def _call_worker(cfg):
    return _WORKER_EVAL(cfg)


class _Runner:
    """Evaluates batches, reusing earlier records and appending new ones."""

    def __init__(self, evaluate, jobs: int, history_path, cache: dict):
        self.evaluate = evaluate
        self.cache = cache
        self.history_path = Path(history_path) if history_path is not None else None
        self.pool = None
        if jobs > 1 and getattr(evaluate, "concurrent_safe", False):
            self.pool = ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(evaluate,))
        elif jobs > 1:
            log.info("evaluate function is not concurrency-safe; running sequentially")

    def run(self, cfgs: list[Configuration], phase: int) -> list[Measurement]:
        todo = [c for c in cfgs if c not in self.cache]
        if self.pool is not None and len(todo) > 1:
            fresh = list(self.pool.map(_call_worker, todo, chunksize=max(1, len(todo) // 64)))
        else:
            fresh = [self.evaluate(c) for c in todo]
        new = []
        for cfg, m in zip(todo, fresh):
            if m.cfg != cfg:
                raise ValueError("evaluate returned a measurement for a different configuration")
            m = m.with_phase(phase)
            self.cache[cfg] = m
            new.append(m)
        if new and self.history_path is not None:
            with self.history_path.open("a") as fh:
                for m in new:
                    fh.write(m.dumps() + "\n")
        return [self.cache[c].with_phase(phase) for c in cfgs]

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _distinct(cfgs):
    seen = set()
    out = []
    for c in cfgs:
        if c not in seen:
            seen.add(c)
            out.append(c)
    return out


def tune(
    space: TuningSpace,
    evaluate,
    n1: int = 200,
    k: int = 50,
    seed: int = 0,
    jobs: int = 1,
    history_path=None,
    resume: bool = False,
    cap: int = EXACT_COUNT_LIMIT,
) -> TuneResult:
    """Search ``space`` for the configuration with the lowest measured value.

    ``evaluate`` maps a Configuration to a Measurement. When ``resume`` is
    set, configurations already present in ``history_path`` are not
    evaluated again.
    """
    if n1 < MIN_SAMPLES:
        raise ValueError(f"n1 must be at least {MIN_SAMPLES}")
    if k < 1:
        raise ValueError("k must be positive")
    if jobs < 1:
        raise ValueError("jobs must be positive")
    start = time.perf_counter()
    cache: dict[Configuration, Measurement] = {}
    if history_path is not None:
        if resume:
            for m in read_history(history_path):
                cache.setdefault(m.cfg, m)
            log.info("resuming with %d recorded measurements", len(cache))
        else:
            Path(history_path).write_text("")

    runner = _Runner(evaluate, jobs, history_path, cache)
    try:
        plan1 = _distinct(sample(space, n1, seed))
        phase1 = runner.run(plan1, 1)
        ok = [m for m in phase1 if m.ok]
        log.info("phase 1: %d measured, %d ok", len(phase1), len(ok))
        measured = set(plan1)
        meta = {}
        if len(ok) >= MIN_SAMPLES:
            model = train_surrogate(ok, Encoding.for_space(space), seed)
            meta = model.meta
            plan2 = best_unmeasured(model, space, k, measured, seed + 1, cap)
        else:
            # too little data for a model: spend the budget on fresh random picks
            log.warning("only %d ok measurements; phase 2 samples at random", len(ok))
            plan2 = [c for c in _distinct(sample(space, n1 + k, seed)) if c not in measured][:k]
        phase2 = runner.run(plan2, 2)
    finally:
        runner.close()

    history = phase1 + phase2
    good = [m for m in history if m.ok]
    if not good:
        raise NoValidMeasurementError(f"all {len(history)} evaluations failed")
    best = min(good, key=lambda m: (m.value, m.cfg.dumps()))
    return TuneResult(best, history, len(phase1), len(phase2), time.perf_counter() - start, meta)
