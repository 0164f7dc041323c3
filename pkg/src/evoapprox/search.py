"""Asynchronous multi-objective evolutionary search over program graphs.

Workers run independent select-mutate-evaluate loops and exchange programs
only through a broker that keeps the most recent P evaluation records and
serves random samples of them.  Nothing blocks on anything else: a worker
that dies simply stops contributing.  Single-worker runs are fully
deterministic given the seed, which is what the reproducibility tests pin.
"""

from __future__ import annotations

import json
import threading
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import cmaes as cmaes_mod
from .evaluation import (
    EvalConfig,
    EvaluatedProgram,
    evaluate_program,
    program_record,
    record_to_program,
)
from .graphs import ArithmeticMode, identity_graph
from .mutation import mutate
from .selection import Stage, default_stages, select_in_stages
from .targets import get_target, make_dataset


@dataclass(eq=False)
class SearchConfig:
    target: str = "exp2"
    mode: ArithmeticMode = ArithmeticMode.REAL64
    workers: int = 8
    sample_size: int = 20  # S; each worker receives 2S and selects S parents
    budget: int = 100_000
    objectives: str = "complexity"  # 'complexity' or 'speed'
    stages: tuple[Stage, ...] | None = None  # None = mode-appropriate default
    buffer_capacity: int = 512  # P, most recent records the broker keeps
    seed: int = 0
    train_size: int = 1000
    validation_size: int = 10_000
    cmaes: cmaes_mod.CmaesConfig = field(default_factory=cmaes_mod.CmaesConfig)
    normalize_crowding: bool = True
    mutation_probabilities: tuple[float, float, float, float] = (1 / 2, 1 / 4, 1 / 6, 1 / 12)

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.objectives not in ("complexity", "speed"):
            raise ValueError(f"objectives must be 'complexity' or 'speed', got {self.objectives!r}")
        if abs(sum(self.mutation_probabilities) - 1.0) > 1e-12:
            raise ValueError("mutation probabilities must sum to 1")
        if self.sample_size > self.workers / 2:
            warnings.warn(
                f"sample size S={self.sample_size} is not small relative to "
                f"W={self.workers} workers; the exchange pattern degenerates",
                stacklevel=2)
        if self.stages is None:
            self.stages = default_stages(self.sample_size,
                                         float_valued=self.mode is ArithmeticMode.FLOAT32)
        if sum(s.count for s in self.stages) != self.sample_size:
            raise ValueError("stage counts must sum to sample_size")


class Broker:
    """Keeps the last P program records; serves random samples of them.

    Also maintains the best-ever Pareto archive and the global evaluation
    counter.  All operations take the one lock, so they are linearizable;
    none of them block beyond that.
    """

    def __init__(self, capacity: int = 512, seed: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._buffer: list[dict] = []
        self._archive: list[dict] = []
        self._evaluations = 0
        self._rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB20CE2]))
        self._lock = threading.Lock()

    @staticmethod
    def _objectives(rec: dict) -> tuple[float, float]:
        if rec.get("speed") is not None:
            return (rec["precision"], rec["speed"])
        return (rec["precision"], -float(rec["complexity"]))

    @classmethod
    def _dominates(cls, a: dict, b: dict) -> bool:
        oa, ob = cls._objectives(a), cls._objectives(b)
        return oa[0] >= ob[0] and oa[1] >= ob[1] and (oa[0] > ob[0] or oa[1] > ob[1])

    def put(self, record: dict, count: bool = True) -> None:
        """Add a record; count=False for scaffolding (identity seeds) that
        should not consume evaluation budget."""
        with self._lock:
            self._buffer.append(record)
            if len(self._buffer) > self.capacity:
                del self._buffer[: len(self._buffer) - self.capacity]
            if count:
                self._evaluations += 1
            if np.isfinite(record["precision"]):
                # the archive is the best-ever front in objective space: one
                # record per non-dominated objective point, first arrival kept
                obj = self._objectives(record)
                duplicate = any(self._objectives(a) == obj for a in self._archive)
                if not duplicate and not any(self._dominates(a, record) for a in self._archive):
                    self._archive = [a for a in self._archive
                                     if not self._dominates(record, a)]
                    self._archive.append(record)

    def sample(self, n: int) -> list[dict]:
        """n records drawn uniformly with replacement from the buffer."""
        with self._lock:
            if not self._buffer:
                return []
            idx = self._rng.integers(0, len(self._buffer), size=n)
            return [self._buffer[i] for i in idx]

    @property
    def evaluations(self) -> int:
        with self._lock:
            return self._evaluations

    def archive_records(self) -> list[dict]:
        with self._lock:
            return sorted(self._archive, key=lambda r: (-r["precision"], r.get("uid", 0)))

    def population_records(self) -> list[dict]:
        with self._lock:
            return list(self._buffer)

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "capacity": self.capacity,
                "buffer": list(self._buffer),
                "archive": list(self._archive),
                "evaluations": self._evaluations,
            }

    def restore(self, state: dict) -> None:
        with self._lock:
            self.capacity = int(state["capacity"])
            self._buffer = list(state["buffer"])
            self._archive = list(state["archive"])
            self._evaluations = int(state["evaluations"])


@dataclass(eq=False)
class SearchResult:
    population: list[dict]
    archive: list[dict]
    evaluations: int


def _worker_loop(worker_index: int, config: SearchConfig, eval_config: EvalConfig,
                 broker: Broker, rng: np.random.Generator,
                 stop: Callable[[], bool]) -> None:
    from . import bench

    bench.register_pool_worker()
    try:
        _worker_loop_body(worker_index, config, eval_config, broker, rng, stop)
    finally:
        bench.unregister_pool_worker()


def _worker_loop_body(worker_index: int, config: SearchConfig, eval_config: EvalConfig,
                      broker: Broker, rng: np.random.Generator,
                      stop: Callable[[], bool]) -> None:
    s = config.sample_size
    first = True
    uid_counter = worker_index
    while not stop() and broker.evaluations < config.budget:
        if first:
            # generation zero: one evaluated identity program replicated 2S
            # times stands in for the sample; scaffolding, so it does not
            # consume budget
            seedling = evaluate_program(identity_graph(), eval_config, rng, uid=uid_counter)
            uid_counter += config.workers
            rec = program_record(seedling, len(eval_config.train), len(eval_config.validation))
            broker.put(rec, count=False)
            sample = [seedling] * (2 * s)
            first = False
        else:
            records = broker.sample(2 * s)
            if len(records) < 2 * s:  # buffer not seeded yet
                time.sleep(0.001)
                continue
            sample = [record_to_program(r) for r in records]
        parents = select_in_stages(sample, config.stages, normalize=config.normalize_crowding)
        for i in range(2 * s):  # cycle through the S parents twice
            if stop() or broker.evaluations >= config.budget:
                return
            child_graph = mutate(parents[i % s].graph, rng, config.mutation_probabilities)
            child = evaluate_program(child_graph, eval_config, rng, uid=uid_counter)
            uid_counter += config.workers
            broker.put(program_record(child, len(eval_config.train), len(eval_config.validation)))


def build_eval_config(config: SearchConfig) -> EvalConfig:
    target = get_target(config.target)
    train = make_dataset(target, config.train_size, config.mode, role="train")
    validation = make_dataset(target, config.validation_size, config.mode, role="validation")
    return EvalConfig(target=target.name, mode=config.mode, train=train,
                      validation=validation, cmaes=config.cmaes,
                      measure_speed=config.objectives == "speed")


def run_worker_pool(config: SearchConfig,
                    stop_condition: Callable[[Broker], bool] | None = None,
                    broker: Broker | None = None) -> SearchResult:
    """Run the full pool until the evaluation budget (or stop_condition).

    stop_condition, checked between evaluations, sees the broker and may end
    the run early (used to stop once some archive goal is met).  Passing a
    broker restored from a snapshot resumes a previous run; the archive only
    ever grows.
    """
    eval_config = build_eval_config(config)
    if broker is None:
        broker = Broker(capacity=config.buffer_capacity, seed=config.seed)
    seeds = np.random.SeedSequence(config.seed).spawn(config.workers)
    stop_flag = threading.Event()

    def stop() -> bool:
        if stop_flag.is_set():
            return True
        if stop_condition is not None and stop_condition(broker):
            stop_flag.set()
            return True
        return False

    if config.workers == 1:
        _worker_loop(0, config, eval_config, broker, np.random.default_rng(seeds[0]), stop)
    else:
        threads = []
        for w in range(config.workers):
            t = threading.Thread(
                target=_safe_worker,
                args=(w, config, eval_config, broker, np.random.default_rng(seeds[w]), stop),
                name=f"search-worker-{w}", daemon=True)
            t.start()
            threads.append(t)
        for t in threads:
            t.join()
    return SearchResult(population=broker.population_records(),
                        archive=broker.archive_records(),
                        evaluations=broker.evaluations)


def _safe_worker(worker_index, config, eval_config, broker, rng, stop) -> None:
    try:
        _worker_loop(worker_index, config, eval_config, broker, rng, stop)
    except Exception:  # a crashed worker drops its work; the pool continues
        import traceback

        traceback.print_exc()


def save_checkpoint(broker: Broker, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(broker.snapshot(), fh)


def load_checkpoint(path: str) -> Broker:
    with open(path) as fh:
        state = json.load(fh)
    broker = Broker(capacity=int(state["capacity"]))
    broker.restore(state)
    return broker
