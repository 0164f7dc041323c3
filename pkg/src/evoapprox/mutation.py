"""Structural mutations on program graphs.

Exactly one action per call, drawn as: no-op 1/2, edge reconnection 1/4,
vertex deletion 1/6, vertex insertion 1/12.  Insertion breaks an existing
edge u->v, placing a new vertex on it; the inserted kind is uniform over
{+, -, *, /, +coefficient, -coefficient}.  The virtual edge from the
output vertex to the result participates like any other edge, which is how
mutations can grow or change the output itself.  Anything inapplicable
(no deletable vertex, would exceed the 100-vertex cap, ...) degrades to a
no-op, so mutation never fails.
"""

from __future__ import annotations

import numpy as np

from .graphs import (
    ADD,
    COEFF,
    DIV,
    INPUT,
    MUL,
    SUB,
    ProgramGraph,
    Vertex,
    prune,
)

MAX_VERTICES = 100

NO_OP = "no_op"
RECONNECT = "reconnect"
DELETE = "delete"
INSERT = "insert"

_INSERT_KINDS = (ADD, SUB, MUL, DIV, "+coeff", "-coeff")


def _rand_order(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31))


def _rebuild(graph: ProgramGraph, vertices: list[Vertex], output_id: int) -> ProgramGraph:
    return prune(ProgramGraph(vertices=tuple(vertices), output_id=output_id))


def _replace_arg(v: Vertex, slot: int, new_src: int) -> Vertex:
    args = list(v.args)
    args[slot] = new_src
    return Vertex(vid=v.vid, kind=v.kind, args=tuple(args), value=v.value, order=v.order)


def _reconnect(graph: ProgramGraph, rng: np.random.Generator) -> ProgramGraph:
    edges = graph.edges()  # includes the virtual output edge (None, 0, output)
    consumer, slot, _src = edges[rng.integers(0, len(edges))]
    if consumer is None:
        # retarget the output to any vertex; nothing is downstream of it
        new_out = graph.vertices[rng.integers(0, len(graph.vertices))].vid
        return _rebuild(graph, list(graph.vertices), new_out)
    blocked = graph.descendants_of(consumer)  # includes consumer itself
    candidates = [v.vid for v in graph.vertices if v.vid not in blocked]
    if not candidates:
        return graph
    new_src = candidates[rng.integers(0, len(candidates))]
    vertices = [_replace_arg(v, slot, new_src) if v.vid == consumer else v
                for v in graph.vertices]
    return _rebuild(graph, vertices, graph.output_id)


def _delete(graph: ProgramGraph, rng: np.random.Generator) -> ProgramGraph:
    # only vertices with arguments can be deleted: each consumer edge (and
    # the output, if it pointed at the deleted vertex) falls back to one of
    # the deleted vertex's own arguments
    deletable = [v for v in graph.vertices if v.args]
    if not deletable:
        return graph
    victim = deletable[rng.integers(0, len(deletable))]
    vertices: list[Vertex] = []
    for v in graph.vertices:
        if v.vid == victim.vid:
            continue
        w = v
        for slot, a in enumerate(v.args):
            if a == victim.vid:
                w = _replace_arg(w, slot, victim.args[rng.integers(0, len(victim.args))])
        vertices.append(w)
    output_id = graph.output_id
    if output_id == victim.vid:
        output_id = victim.args[rng.integers(0, len(victim.args))]
    return _rebuild(graph, vertices, output_id)


def _insert(graph: ProgramGraph, rng: np.random.Generator) -> ProgramGraph:
    kind = _INSERT_KINDS[rng.integers(0, len(_INSERT_KINDS))]
    grows_by = 2 if kind in ("+coeff", "-coeff") else 1
    if len(graph.vertices) + grows_by > MAX_VERTICES:
        return graph
    edges = graph.edges()
    consumer, slot, src = edges[rng.integers(0, len(edges))]
    next_vid = max(v.vid for v in graph.vertices) + 1
    vertices = list(graph.vertices)

    if kind in ("+coeff", "-coeff"):
        coeff = Vertex(vid=next_vid, kind=COEFF, args=(), value=None, order=_rand_order(rng))
        op_kind = ADD if kind == "+coeff" else SUB
        new = Vertex(vid=next_vid + 1, kind=op_kind, args=(src, coeff.vid),
                     order=_rand_order(rng))
        vertices += [coeff, new]
    else:
        if consumer is None:
            candidates = [v.vid for v in graph.vertices]
        else:
            blocked = graph.descendants_of(consumer)
            candidates = [v.vid for v in graph.vertices if v.vid not in blocked]
        if not candidates:
            return graph
        other = candidates[rng.integers(0, len(candidates))]
        # coin for which slot the broken edge's source lands in; matters
        # for the non-commutative kinds
        args = (src, other) if rng.random() < 0.5 else (other, src)
        new = Vertex(vid=next_vid, kind=kind, args=args, order=_rand_order(rng))
        vertices.append(new)

    if consumer is None:
        output_id = new.vid
    else:
        output_id = graph.output_id
        vertices = [_replace_arg(v, slot, new.vid) if v.vid == consumer else v
                    for v in vertices]
    return _rebuild(graph, vertices, output_id)


DEFAULT_PROBABILITIES = (1 / 2, 1 / 4, 1 / 6, 1 / 12)  # no-op, reconnect, delete, insert


def mutate_tagged(graph: ProgramGraph, rng: np.random.Generator,
                  probabilities: tuple[float, float, float, float] = DEFAULT_PROBABILITIES,
                  ) -> tuple[ProgramGraph, str]:
    """Mutate and report which action was drawn (before applicability)."""
    p_noop, p_rec, p_del, _ = probabilities
    u = rng.random()
    if u < p_noop:
        return graph, NO_OP
    if u < p_noop + p_rec:
        return _reconnect(graph, rng), RECONNECT
    if u < p_noop + p_rec + p_del:
        return _delete(graph, rng), DELETE
    return _insert(graph, rng), INSERT


def mutate(graph: ProgramGraph, rng: np.random.Generator,
           probabilities: tuple[float, float, float, float] = DEFAULT_PROBABILITIES,
           ) -> ProgramGraph:
    """One mutation step; always returns a valid pruned DAG within the cap."""
    child, _ = mutate_tagged(graph, rng, probabilities)
    return child
