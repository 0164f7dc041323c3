"""Throughput measurement for float32 programs.

Speed is measured the defensive way: the program is applied to a vector of
inputs through a deep stack f(g(f(g(...)))) where g clamps back into the
domain, every layer consumes the previous layer's output so nothing is dead
code, and the reported time is the minimum over many repeats.  Interruptions
(scheduler preemption, GC) only ever make a repeat slower, so the minimum is
the cleanest estimate of the machine's actual throughput.
"""

from __future__ import annotations

import json
import platform
import threading
import time
from dataclasses import dataclass

import numpy as np

from .graphs import (
    ADD,
    COEFF,
    DIV,
    INPUT,
    MUL,
    SUB,
    ArithmeticMode,
    ProgramGraph,
    bind_coefficients,
    collapse_constants,
    program_hash,
    prune,
)

_NP_OPS = {ADD: np.add, SUB: np.subtract, MUL: np.multiply, DIV: np.true_divide}


class BenchmarkIntegrityError(RuntimeError):
    """The measured computation produced non-finite values or was invalid."""


@dataclass(frozen=True)
class BenchConfig:
    vector_size: int = 10_000
    stack_depth: int = 100
    repeats: int = 1_000
    clip: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.vector_size < 1:
            raise ValueError("vector_size must be >= 1")
        if self.stack_depth < 1:
            raise ValueError("stack_depth must be >= 1")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        lo, hi = self.clip
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ValueError(f"clip interval must be finite and ordered, got {self.clip}")

    @classmethod
    def reduced(cls, clip: tuple[float, float] = (0.0, 1.0)) -> "BenchConfig":
        """Cheap settings for in-search speed scoring; full defaults are for reports."""
        return cls(vector_size=1_000, stack_depth=10, repeats=50, clip=clip)


# Workers register here so a timing run can refuse to share the process with
# concurrent evaluation threads.  A worker timing its own candidate does not
# count itself; only *other* live workers disqualify the measurement.
_pool_lock = threading.Lock()
_active_pool_threads: set[int] = set()


def register_pool_worker() -> None:
    with _pool_lock:
        _active_pool_threads.add(threading.get_ident())


def unregister_pool_worker() -> None:
    with _pool_lock:
        _active_pool_threads.discard(threading.get_ident())


def _compile_steps(graph: ProgramGraph, coeffs):
    """Flatten the graph into positional straight-line float32 steps."""
    g = graph
    if coeffs is not None and len(coeffs) > 0:
        g = bind_coefficients(g, coeffs)
    g = collapse_constants(prune(g), ArithmeticMode.FLOAT32)
    slot = {}
    steps = []
    n = 0
    consts = {}
    for vid in g.total_order:
        v = g.by_id[vid]
        slot[vid] = n
        if v.kind == INPUT:
            steps.append(("x", None, None, None))
        elif v.kind == COEFF:
            if v.value is None:
                raise ValueError("benchmarking needs fully bound coefficients")
            consts[n] = np.float32(v.value)
            steps.append(("c", None, None, None))
        else:
            steps.append(("op", _NP_OPS[v.kind], slot[v.args[0]], slot[v.args[1]]))
        n += 1
    return steps, consts, slot[g.output_id]


def _make_layer(steps, consts, out_slot, lo32, hi32):
    regs = [None] * len(steps)

    def layer(x):
        for i, (tag, op, a, b) in enumerate(steps):
            if tag == "x":
                regs[i] = x
            elif tag == "c":
                regs[i] = consts[i]
            else:
                regs[i] = op(regs[a], regs[b])
        # branch-free clamp back into the domain for the next layer
        return np.minimum(np.maximum(regs[out_slot], lo32), hi32)

    return layer


def _machine_metadata() -> dict:
    cpu = platform.processor() or platform.machine()
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.lower().startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return {
        "cpu": cpu,
        "python": platform.python_version(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }


def _timed_repeats(layer, config: BenchConfig) -> list[int]:
    rng = np.random.default_rng(0)
    lo, hi = config.clip
    x0 = rng.uniform(lo, hi, size=config.vector_size).astype(np.float32)
    times_ns = []
    with np.errstate(all="ignore"):
        for _ in range(config.repeats):
            x = x0
            t0 = time.perf_counter_ns()
            for _ in range(config.stack_depth):
                x = layer(x)
            times_ns.append(time.perf_counter_ns() - t0)
        if not np.all(np.isfinite(x)):
            raise BenchmarkIntegrityError(
                "non-finite values survived the clipped evaluation stack")
    return times_ns


def _prepare(graph: ProgramGraph, coeffs, config: BenchConfig):
    with _pool_lock:
        others = _active_pool_threads - {threading.get_ident()}
        if others:
            raise BenchmarkIntegrityError(
                f"{len(others)} other evaluation workers are active in-process; "
                "timing would measure contention, not the program")
    steps, consts, out_slot = _compile_steps(graph, coeffs)
    lo, hi = np.float32(config.clip[0]), np.float32(config.clip[1])
    return _make_layer(steps, consts, out_slot, lo, hi)


def measure_throughput(graph: ProgramGraph, coeffs, config: BenchConfig = BenchConfig()) -> float:
    """Program evaluations per second, from the fastest repeat."""
    layer = _prepare(graph, coeffs, config)
    times_ns = _timed_repeats(layer, config)
    return config.vector_size * config.stack_depth / (min(times_ns) * 1e-9)


def benchmark_report(graph: ProgramGraph, coeffs, config: BenchConfig = BenchConfig()) -> dict:
    """Full timing report with raw repeats and machine metadata."""
    layer = _prepare(graph, coeffs, config)
    times_ns = _timed_repeats(layer, config)
    best = min(times_ns)
    return {
        "program_hash": program_hash(graph, coeffs),
        "config": {"vector_size": config.vector_size, "stack_depth": config.stack_depth,
                   "repeats": config.repeats, "clip": list(config.clip)},
        "repeat_ns": times_ns,
        "min_ns": best,
        "speed": config.vector_size * config.stack_depth / (best * 1e-9),
        "machine": _machine_metadata(),
    }


def compare_interleaved(a, b, config: BenchConfig = BenchConfig(), ratios: int = 9) -> dict:
    """Alternate timings of two programs and report per-pair speed ratios.

    a and b are (graph, coeffs) pairs.  Each pair of consecutive timings
    yields one ratio speed(a)/speed(b); interleaving cancels slow drift in
    machine load.  Returns ratios, their median, and the spread.
    """
    if ratios < 1:
        raise ValueError("ratios must be >= 1")
    layer_a = _prepare(a[0], a[1], config)
    layer_b = _prepare(b[0], b[1], config)
    pairs = []
    for _ in range(ratios):
        ta = min(_timed_repeats(layer_a, config))
        tb = min(_timed_repeats(layer_b, config))
        pairs.append(tb / ta)   # >1 means a is faster
    pairs_arr = np.asarray(pairs)
    return {
        "ratios": pairs,
        "median": float(np.median(pairs_arr)),
        "min": float(pairs_arr.min()),
        "max": float(pairs_arr.max()),
    }


def write_report(path: str, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
