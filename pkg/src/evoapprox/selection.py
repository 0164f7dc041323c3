"""Pareto dominance, non-dominated sorting, and staged crowding selection.

Both objectives are maximized: precision (negated max error) paired with
either speed or negated complexity.  Selection walks Pareto fronts in
order, absorbing whole qualifying fronts and splitting the boundary front
by a max-min-distance crowding rule; stages let float-valued experiments
reserve slots for high-precision programs before filling unconstrained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .evaluation import EvaluatedProgram


class SelectionUnderflowError(ValueError):
    """Fewer candidate programs than selection slots."""


def dominates(p1: EvaluatedProgram, p2: EvaluatedProgram) -> bool:
    """True iff p1 is >= p2 on both objectives and > on at least one."""
    if p1.objective_kind != p2.objective_kind:
        raise ValueError(
            f"cannot compare {p1.objective_kind!r} objectives with {p2.objective_kind!r}")
    a, b = p1.objectives, p2.objectives
    return a[0] >= b[0] and a[1] >= b[1] and (a[0] > b[0] or a[1] > b[1])


def non_dominated_sort(sample: Sequence[EvaluatedProgram]) -> list[list[EvaluatedProgram]]:
    """Fast non-dominated sort: front 1 is the Pareto set, front 2 the
    Pareto set of the rest, and so on.  Fronts partition the sample.
    """
    if not sample:
        raise ValueError("cannot sort an empty sample")
    n = len(sample)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    domination_count = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(sample[i], sample[j]):
                dominated_by[i].append(j)
                domination_count[j] += 1
            elif dominates(sample[j], sample[i]):
                dominated_by[j].append(i)
                domination_count[i] += 1
    fronts: list[list[EvaluatedProgram]] = []
    current = [i for i in range(n) if domination_count[i] == 0]
    while current:
        fronts.append([sample[i] for i in current])
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                domination_count[j] -= 1
                if domination_count[j] == 0:
                    nxt.append(j)
        current = nxt
    return fronts


def _objective_scales(points: Sequence[EvaluatedProgram]) -> tuple[float, float]:
    # per-axis range over the points in play; degenerate axes scale by 1
    scales = []
    for axis in (0, 1):
        vals = [p.objectives[axis] for p in points if math.isfinite(p.objectives[axis])]
        span = (max(vals) - min(vals)) if len(vals) >= 2 else 0.0
        scales.append(span if span > 0.0 else 1.0)
    return scales[0], scales[1]


def _distance(a: EvaluatedProgram, b: EvaluatedProgram, scales: tuple[float, float]) -> float:
    acc = 0.0
    for axis in (0, 1):
        da, db = a.objectives[axis], b.objectives[axis]
        if da == db:
            continue  # also covers equal infinities, avoiding inf - inf
        acc += ((da - db) / scales[axis]) ** 2
    return math.sqrt(acc)


def least_crowded(front: Sequence[EvaluatedProgram], selected: Sequence[EvaluatedProgram],
                  normalize: bool = True) -> EvaluatedProgram:
    """The front member maximizing its min distance to already-selected ones.

    Distance is L2 over the two objectives, each axis divided by its range
    over front + selected (skipped when normalize is false, giving raw
    objective units).  An empty selected set falls back to the member with
    the largest first objective.  All ties break toward the lower uid.
    """
    if not front:
        raise ValueError("front must be nonempty")
    if not selected:
        return min(front, key=lambda p: (-p.objectives[0], p.uid))
    scales = _objective_scales(list(front) + list(selected)) if normalize else (1.0, 1.0)
    def crowding(p: EvaluatedProgram) -> float:
        return min(_distance(p, s, scales) for s in selected)
    return min(front, key=lambda p: (-crowding(p), p.uid))


@dataclass(frozen=True)
class Stage:
    """One selection stage: how many to pick and an optional requirement.

    requirement as a float means "precision strictly above this"; a callable
    is an arbitrary predicate; None admits everything.
    """

    count: int
    requirement: float | Callable[[EvaluatedProgram], bool] | None = None

    def admits(self, p: EvaluatedProgram) -> bool:
        if self.requirement is None:
            return True
        if callable(self.requirement):
            return bool(self.requirement(p))
        return p.precision > self.requirement


def default_stages(num_parents: int, float_valued: bool) -> tuple[Stage, ...]:
    """Float experiments reserve half the slots for precision > -1 ULP;
    real-valued experiments select unconstrained.
    """
    if float_valued:
        half = num_parents // 2
        return (Stage(half, -1.0), Stage(num_parents - half, None))
    return (Stage(num_parents, None),)


def select_in_stages(sample: Sequence[EvaluatedProgram], stages: Sequence[Stage],
                     normalize: bool = True) -> list[EvaluatedProgram]:
    """Pick sum(stage counts) parents from the sample, front by front.

    Fronts are computed once over the whole sample.  Each stage walks them
    in order considering only programs meeting its requirement: a front
    whose qualifying members all fit is absorbed whole, and the boundary
    front is split greedily by least_crowded against everything selected so
    far.  A stage that runs out of qualifying programs leaves its shortfall
    to later stages (so an unconstrained final stage always tops up to S).
    """
    total = sum(s.count for s in stages)
    if len(sample) < total:
        raise SelectionUnderflowError(
            f"need {total} parents but sample has only {len(sample)} programs")
    # sample slots are the unit of selection: a program drawn into the
    # sample twice (the broker samples with replacement) occupies two slots
    # and may legitimately parent twice
    slots = list(range(len(sample)))
    fronts = non_dominated_sort(sample)
    front_of = {}
    for fi, front in enumerate(fronts):
        ids = {id(p) for p in front}
        for i in slots:
            if id(sample[i]) in ids:
                front_of.setdefault(i, fi)
    # identical replicated objects land in one front; give every slot that
    # object's front index
    slot_fronts: list[list[int]] = [[] for _ in fronts]
    for i in slots:
        slot_fronts[front_of[i]].append(i)

    selected: list[EvaluatedProgram] = []
    chosen: set[int] = set()
    capacity = 0
    for stage in stages:
        capacity += stage.count  # carries any previous stage's shortfall
        for front_slots in slot_fronts:
            if capacity == 0:
                break
            pool = [i for i in front_slots if i not in chosen and stage.admits(sample[i])]
            if len(pool) <= capacity:
                for i in pool:
                    selected.append(sample[i])
                    chosen.add(i)
                capacity -= len(pool)
            else:
                while capacity > 0:
                    pick = least_crowded([sample[i] for i in pool], selected, normalize=normalize)
                    # map the chosen program back to the lowest matching slot
                    slot = next(i for i in pool if sample[i] is pick)
                    pool.remove(slot)
                    selected.append(sample[slot])
                    chosen.add(slot)
                    capacity -= 1
    if len(selected) != total:
        raise SelectionUnderflowError(
            f"stage requirements admitted only {len(selected)} of {total} parents")
    return selected
