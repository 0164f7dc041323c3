"""Error metrics and the train-then-validate program evaluation pipeline.

Real-valued programs are scored by maximum relative error |g - f| / |g|;
float32 programs by maximum error in units in the last place (ULPs) of the
rounded label, |g - f| / ulp(g32).  The precision objective is the negated
maximum error, so bigger is better and a perfect program scores 0.

Labels are extended-precision (double-double); error numerators are formed
in double-double so that errors at the 1e-15 scale are not polluted by
label rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import dd
from .graphs import (
    ArithmeticMode,
    DegenerateConstantError,
    ProgramGraph,
    bind_coefficients,
    collapse_constants,
    count_operations,
    evaluate_many,
    prune,
    serialize,
)

_F32_MAX = float(np.finfo(np.float32).max)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labelled evaluation grid; labels are double-double ground truths."""

    target: str
    role: str  # 'train' | 'validation' | 'test'
    mode: ArithmeticMode
    xs: np.ndarray
    label_hi: np.ndarray
    label_lo: np.ndarray

    def __len__(self) -> int:
        return len(self.xs)

    @cached_property
    def labels_rounded(self) -> np.ndarray:
        """Labels rounded to the mode's type (float32 for float mode)."""
        if self.mode is ArithmeticMode.FLOAT32:
            return dd.dd_round_to_float32(self.label_hi, self.label_lo)
        return self.label_hi

    @cached_property
    def label_ulps(self) -> np.ndarray:
        """ulp of each rounded float32 label, as float64."""
        return ulp_array(self.labels_rounded).astype(np.float64)


def ulp(y) -> float:
    """Unit in the last place of a float32: nextafter(y, +inf) - y, exactly.

    At +max-finite the successor is infinite, so the last regular ULP of
    that binade (2^104) is returned instead.  NaN has no neighbors.
    """
    y32 = np.float32(y)
    if np.isnan(y32):
        raise ValueError("ulp of NaN is undefined")
    if y32 >= np.float32(_F32_MAX):
        return float(np.float32(2.0) ** 104)
    return float(np.nextafter(y32, np.float32(np.inf)) - y32)


def ulp_array(ys: np.ndarray) -> np.ndarray:
    ys = np.asarray(ys, dtype=np.float32)
    with np.errstate(over="ignore"):  # nextafter(maxfloat) -> inf, replaced below
        out = np.nextafter(ys, np.float32(np.inf)) - ys
    return np.where(ys >= np.float32(_F32_MAX), np.float32(2.0) ** 104, out)


def rel_errors_real(graph: ProgramGraph, coeffs: Sequence[float] | None, dataset: Dataset) -> np.ndarray:
    """Per-point |g - f| / |g| with f evaluated in binary64.

    Non-finite program outputs map to +inf error.  The numerator is formed
    in double-double against the extended label, then divided through in
    binary64 (the quotient's own rounding is far below metric resolution).
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    f = evaluate_many(graph, dataset.xs, coeffs, ArithmeticMode.REAL64)
    with np.errstate(all="ignore"):  # non-finite candidates are routine
        dh, dl = dd.dd_sub(f, np.zeros_like(f), dataset.label_hi, dataset.label_lo)
        errs = np.abs(dh + dl) / np.abs(dataset.label_hi)
    return np.where(np.isfinite(f), errs, np.inf)


def ulp_errors(graph: ProgramGraph, coeffs: Sequence[float] | None, dataset: Dataset) -> np.ndarray:
    """Per-point |g - f| / ulp(g32) with f evaluated in float32."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    f = evaluate_many(graph, dataset.xs, coeffs, ArithmeticMode.FLOAT32)
    f64 = f.astype(np.float64)
    with np.errstate(all="ignore"):
        dh, dl = dd.dd_sub(f64, np.zeros_like(f64), dataset.label_hi, dataset.label_lo)
        errs = np.abs(dh + dl) / dataset.label_ulps
    return np.where(np.isfinite(f), errs, np.inf)


def max_rel_error_real(graph: ProgramGraph, coeffs: Sequence[float] | None, dataset: Dataset) -> float:
    if dataset.mode is not ArithmeticMode.REAL64:
        raise ValueError("real-mode metric on a non-real dataset")
    return float(np.max(rel_errors_real(graph, coeffs, dataset)))


def max_ulp_error(graph: ProgramGraph, coeffs: Sequence[float] | None, dataset: Dataset) -> float:
    if dataset.mode is not ArithmeticMode.FLOAT32:
        raise ValueError("ULP metric on a non-float32 dataset")
    return float(np.max(ulp_errors(graph, coeffs, dataset)))


def max_error(graph: ProgramGraph, coeffs: Sequence[float] | None, dataset: Dataset) -> float:
    if dataset.mode is ArithmeticMode.FLOAT32:
        return max_ulp_error(graph, coeffs, dataset)
    return max_rel_error_real(graph, coeffs, dataset)


def _labelled_chunks(target, xs: np.ndarray, mode: ArithmeticMode, chunk_size: int):
    from .targets import oracle_dd

    for start in range(0, len(xs), chunk_size):
        part = xs[start:start + chunk_size]
        hi, lo = oracle_dd(target, part)
        yield Dataset(target=target.name, role="test", mode=mode,
                      xs=part, label_hi=hi, label_lo=lo)


def exhaustive_ulp_report(graph: ProgramGraph, coeffs: Sequence[float] | None,
                          target, chunk_size: int = 1 << 20) -> dict:
    """Max ULP error over every binary32 value in the domain, streamed."""
    from .targets import exhaustive_float32_count, iter_exhaustive_float32, oracle_dd

    worst, worst_x, n = -np.inf, None, 0
    for chunk in iter_exhaustive_float32(target, chunk_size):
        xs = chunk.astype(np.float64)
        hi, lo = oracle_dd(target, xs)
        ds = Dataset(target=target.name, role="test", mode=ArithmeticMode.FLOAT32,
                     xs=xs, label_hi=hi, label_lo=lo)
        errs = ulp_errors(graph, coeffs, ds)
        i = int(np.argmax(errs))
        if float(errs[i]) > worst:
            worst, worst_x = float(errs[i]), float(xs[i])
        n += len(xs)
    assert n == exhaustive_float32_count(target)
    return {"target": target.name, "mode": "float32", "metric": "ulp",
            "exhaustive": True, "points": n, "max_error": worst, "argmax_x": worst_x}


def precision_report(graph: ProgramGraph, coeffs: Sequence[float] | None, target,
                     mode: ArithmeticMode, grid_size: int = 10_000_000,
                     exhaustive: bool = False, chunk_size: int = 1 << 20) -> dict:
    """Measured (not proven) max error on a grid; the testing-side half of
    the brackets around the true error.
    """
    if exhaustive:
        if mode is not ArithmeticMode.FLOAT32:
            raise ValueError("exhaustive sweeps are defined for float32 mode only")
        return exhaustive_ulp_report(graph, coeffs, target, chunk_size)
    from .targets import _EXACT_ZEROS, _nudge_inward, grid

    xs = grid(target, grid_size, mode)
    if mode is not ArithmeticMode.FLOAT32 and target.name in _EXACT_ZEROS:
        z = _EXACT_ZEROS[target.name]
        other = target.domain[1] if z == target.domain[0] else target.domain[0]
        xs = np.where(xs == z, _nudge_inward(z, other, mode), xs)
    metric = "ulp" if mode is ArithmeticMode.FLOAT32 else "relative"
    worst, worst_x = -np.inf, None
    for ds in _labelled_chunks(target, xs, mode, chunk_size):
        errs = (ulp_errors if mode is ArithmeticMode.FLOAT32 else rel_errors_real)(
            graph, coeffs, ds)
        i = int(np.argmax(errs))
        if float(errs[i]) > worst:
            worst, worst_x = float(errs[i]), float(ds.xs[i])
    return {"target": target.name, "mode": mode.value, "metric": metric,
            "exhaustive": False, "points": len(xs), "max_error": worst,
            "argmax_x": worst_x}


def batch_errors(graph: ProgramGraph, coeff_matrix: np.ndarray, dataset: Dataset) -> np.ndarray:
    """Max error per coefficient vector, vectorized over a population.

    Returns shape (B,); rows with any non-finite program output score +inf.
    This is the training objective used by the coefficient optimizer.
    """
    from .graphs import evaluate_batch

    f = evaluate_batch(graph, dataset.xs, coeff_matrix, dataset.mode)
    f64 = f.astype(np.float64)
    with np.errstate(all="ignore"):
        dh, dl = dd.dd_sub(f64, np.zeros_like(f64), dataset.label_hi, dataset.label_lo)
        if dataset.mode is ArithmeticMode.FLOAT32:
            errs = np.abs(dh + dl) / dataset.label_ulps
        else:
            errs = np.abs(dh + dl) / np.abs(dataset.label_hi)
    errs = np.where(np.isfinite(f), errs, np.inf)
    out = np.max(errs, axis=1)
    return np.where(np.isnan(out), np.inf, out)


@dataclass(frozen=True, eq=False)
class EvaluatedProgram:
    """A genotype with trained coefficients and its objective values.

    graph keeps free coefficients unbound (the heritable genotype); coeffs
    holds their trained values in training-index order.  complexity is the
    operation count of the pruned, constant-collapsed bound program, so
    constant bloat in the genotype does not inflate it.  speed is present
    only for float-valued (speed-objective) experiments.
    """

    graph: ProgramGraph
    coeffs: tuple[float, ...]
    precision: float
    complexity: int
    speed: float | None = None
    uid: int = 0

    @property
    def objective_kind(self) -> str:
        return "speed" if self.speed is not None else "complexity"

    @property
    def objectives(self) -> tuple[float, float]:
        if self.speed is not None:
            return (self.precision, self.speed)
        return (self.precision, -float(self.complexity))

    def bound_graph(self) -> ProgramGraph:
        return bind_coefficients(self.graph, self.coeffs)


def reported_complexity(graph: ProgramGraph, coeffs: Sequence[float]) -> int:
    """Op count after binding, pruning and collapsing constant subgraphs."""
    bound = prune(bind_coefficients(graph, coeffs))
    try:
        bound = collapse_constants(bound)
    except DegenerateConstantError:
        pass  # non-finite constants: program scores -inf anyway; count pruned form
    return count_operations(bound)


@dataclass(eq=False)
class EvalConfig:
    """Everything evaluate_program needs: datasets, mode, and knobs."""

    target: str
    mode: ArithmeticMode
    train: Dataset
    validation: Dataset
    cmaes: "object" = None  # CmaesConfig; typed loosely to avoid an import cycle
    measure_speed: bool = False
    bench: "object" = None  # BenchConfig when measure_speed


def evaluate_program(graph: ProgramGraph, config: EvalConfig,
                     rng: np.random.Generator | None = None, uid: int = 0) -> EvaluatedProgram:
    """Train free coefficients on U, score precision on V (Method: two-phase).

    Training that never produces a finite objective yields precision -inf;
    the program is scored, not rejected, so selection can still discard it.
    """
    from . import cmaes as cmaes_mod

    rng = rng if rng is not None else np.random.default_rng(0)
    k = len(graph.free_coefficients)
    if k > 0:
        cfg = config.cmaes if config.cmaes is not None else cmaes_mod.CmaesConfig()
        coeffs, _ = cmaes_mod.train_coefficients(graph, config.train, cfg, rng)
    else:
        coeffs = ()
    err = max_error(graph, coeffs, config.validation)
    precision = -err if np.isfinite(err) else -np.inf
    complexity = reported_complexity(graph, coeffs)
    speed = None
    if config.measure_speed:
        from . import bench as bench_mod

        bcfg = config.bench if config.bench is not None else bench_mod.BenchConfig.reduced()
        speed = bench_mod.measure_throughput(graph, coeffs, bcfg)
    return EvaluatedProgram(graph=graph, coeffs=tuple(float(c) for c in coeffs),
                            precision=float(precision), complexity=complexity,
                            speed=speed, uid=uid)


def program_record(ep: EvaluatedProgram, train_size: int, validation_size: int,
                   seed: int | None = None) -> dict:
    """JSON-serializable evaluation report; also the broker wire format."""
    return {
        "program": serialize(ep.graph, style="hex"),
        "coeffs": [float(c).hex() for c in ep.coeffs],
        "precision": ep.precision,
        "complexity": ep.complexity,
        "speed": ep.speed,
        "dataset_sizes": {"train": train_size, "validation": validation_size},
        "seed": seed,
        "uid": ep.uid,
    }


def record_to_program(record: dict) -> EvaluatedProgram:
    from .graphs import parse

    return EvaluatedProgram(
        graph=parse(record["program"]),
        coeffs=tuple(float.fromhex(c) for c in record["coeffs"]),
        precision=float(record["precision"]),
        complexity=int(record["complexity"]),
        speed=record.get("speed"),
        uid=int(record.get("uid", 0)),
    )
