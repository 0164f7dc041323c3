"""Straight-line arithmetic programs represented as immutable expression DAGs.

A program is a directed acyclic graph with exactly one input vertex ``x``,
any number of coefficient vertices (each either bound to a numeric value or
free, i.e. awaiting training), and binary arithmetic vertices drawn from
{+, -, *, /}.  One vertex is designated the output ``f``.  Every vertex
carries an integer ordering parameter; instruction order is the topological
order of the DAG with ties broken by (ordering parameter, vertex id), so a
graph always lowers to the same instruction sequence.

Graphs are immutable.  Transformations (pruning, constant collapse, binding)
return new graphs.  The evolutionary search elsewhere enforces a 100-vertex
cap on genotypes; the type itself does not, since written-out polynomial
baselines may legitimately be larger.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

INPUT = "input"
COEFF = "coeff"
ADD = "add"
SUB = "sub"
MUL = "mul"
DIV = "div"

BINARY_KINDS = (ADD, SUB, MUL, DIV)

_NP_OPS = {ADD: np.add, SUB: np.subtract, MUL: np.multiply, DIV: np.true_divide}
_OP_SYMBOL = {ADD: "+", SUB: "-", MUL: "*", DIV: "/"}
_SYMBOL_OP = {v: k for k, v in _OP_SYMBOL.items()}


class ArithmeticMode(Enum):
    """Arithmetic used when executing a program.

    REAL64 is IEEE binary64 with round-to-nearest.  FLOAT32 rounds to IEEE
    binary32 after every operation, including the binding of coefficients.
    EXTENDED uses multiple-precision floats (>= 80 bits) and exists for
    oracle-side checks; it is scalar-only.
    """

    REAL64 = "real64"
    FLOAT32 = "float32"
    EXTENDED = "extended"


class GraphError(ValueError):
    """Structural problem with a program graph."""


class ParseError(GraphError):
    """Program text rejected; carries the 1-based offending line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DegenerateConstantError(GraphError):
    """A constant subgraph evaluated to a non-finite value."""


@dataclass(frozen=True)
class Vertex:
    vid: int
    kind: str
    args: tuple[int, ...] = ()
    value: float | None = None  # bound value for coefficients, else None
    order: int = 0

    def is_binary(self) -> bool:
        return self.kind in BINARY_KINDS


@dataclass(frozen=True)
class ProgramGraph:
    vertices: tuple[Vertex, ...]
    output_id: int

    def __post_init__(self) -> None:
        seen: set[int] = set()
        inputs = 0
        for v in self.vertices:
            if v.vid in seen:
                raise GraphError(f"duplicate vertex id {v.vid}")
            seen.add(v.vid)
            if v.kind == INPUT:
                inputs += 1
                arity = 0
            elif v.kind == COEFF:
                arity = 0
                if v.value is not None and not np.isfinite(v.value):
                    raise GraphError(f"vertex {v.vid}: non-finite coefficient {v.value!r}")
            elif v.kind in BINARY_KINDS:
                arity = 2
            else:
                raise GraphError(f"vertex {v.vid}: unknown kind {v.kind!r}")
            if len(v.args) != arity:
                raise GraphError(f"vertex {v.vid}: kind {v.kind} takes {arity} args, got {len(v.args)}")
        if inputs != 1:
            raise GraphError(f"graph must have exactly one input vertex, got {inputs}")
        for v in self.vertices:
            for a in v.args:
                if a not in seen:
                    raise GraphError(f"vertex {v.vid}: edge references missing vertex {a}")
        if self.output_id not in seen:
            raise GraphError(f"output vertex {self.output_id} does not exist")
        # total_order raises on cycles
        if len(self.total_order) != len(self.vertices):
            raise GraphError("graph contains a cycle")

    @cached_property
    def by_id(self) -> dict[int, Vertex]:
        return {v.vid: v for v in self.vertices}

    @cached_property
    def input_id(self) -> int:
        return next(v.vid for v in self.vertices if v.kind == INPUT)

    @cached_property
    def total_order(self) -> tuple[int, ...]:
        """Topological order, ties broken by (ordering parameter, vid)."""
        indeg = {v.vid: 0 for v in self.vertices}
        consumers: dict[int, list[int]] = {v.vid: [] for v in self.vertices}
        for v in self.vertices:
            for a in set(v.args):
                indeg[v.vid] += len([x for x in v.args if x == a])
                consumers[a].append(v.vid)
        byid = {v.vid: v for v in self.vertices}
        ready = [(byid[vid].order, vid) for vid, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        out: list[int] = []
        while ready:
            _, vid = heapq.heappop(ready)
            out.append(vid)
            for c in consumers[vid]:
                indeg[c] -= len([x for x in byid[c].args if x == vid])
                if indeg[c] == 0:
                    heapq.heappush(ready, (byid[c].order, c))
        return tuple(out)

    @cached_property
    def free_coefficients(self) -> tuple[int, ...]:
        """Vids of unbound coefficients, in total order (training index order)."""
        return tuple(vid for vid in self.total_order if self.by_id[vid].kind == COEFF and self.by_id[vid].value is None)

    def consumers_of(self, vid: int) -> list[int]:
        return [v.vid for v in self.vertices if vid in v.args]

    def descendants_of(self, vid: int) -> set[int]:
        """All vertices reachable from vid along dataflow edges, vid included."""
        out = {vid}
        changed = True
        while changed:
            changed = False
            for v in self.vertices:
                if v.vid not in out and any(a in out for a in v.args):
                    out.add(v.vid)
                    changed = True
        return out

    def edges(self) -> list[tuple[int | None, int, int]]:
        """All dataflow edges as (consumer vid, arg slot, source vid).

        The output designation is included as a virtual edge with consumer
        None; mutation treats it like any other edge.
        """
        out: list[tuple[int | None, int, int]] = []
        for vid in self.total_order:
            v = self.by_id[vid]
            for slot, a in enumerate(v.args):
                out.append((v.vid, slot, a))
        out.append((None, 0, self.output_id))
        return out


def identity_graph() -> ProgramGraph:
    """The seed program f(x) = x."""
    return ProgramGraph(vertices=(Vertex(vid=0, kind=INPUT),), output_id=0)


def constant_graph(value: float) -> ProgramGraph:
    return ProgramGraph(
        vertices=(Vertex(vid=0, kind=INPUT), Vertex(vid=1, kind=COEFF, value=float(value), order=1)),
        output_id=1,
    )


def count_operations(graph: ProgramGraph) -> int:
    """Number of arithmetic operations, i.e. binary vertices.

    Counts the graph as given; callers comparing program complexity should
    prune and collapse constants first so junk subgraphs do not inflate it.
    """
    return sum(1 for v in graph.vertices if v.is_binary())


def prune(graph: ProgramGraph) -> ProgramGraph:
    """Drop vertices with no path to the output.

    The input vertex is always retained, so a constant program still has
    its (disconnected) x vertex.
    """
    keep = {graph.output_id, graph.input_id}
    stack = [graph.output_id]
    while stack:
        v = graph.by_id[stack.pop()]
        for a in v.args:
            if a not in keep:
                keep.add(a)
                stack.append(a)
    kept = tuple(v for v in graph.vertices if v.vid in keep)
    if len(kept) == len(graph.vertices):
        return graph
    return ProgramGraph(vertices=kept, output_id=graph.output_id)


def bind_coefficients(graph: ProgramGraph, coeffs: Sequence[float]) -> ProgramGraph:
    """Return a copy with free coefficients bound to the given values."""
    free = graph.free_coefficients
    if len(coeffs) != len(free):
        raise GraphError(f"graph has {len(free)} free coefficients, got {len(coeffs)} values")
    values = dict(zip(free, coeffs))
    new = tuple(
        Vertex(v.vid, v.kind, v.args, float(values[v.vid]), v.order) if v.vid in values else v
        for v in graph.vertices
    )
    return ProgramGraph(vertices=new, output_id=graph.output_id)


def collapse_constants(graph: ProgramGraph, mode: ArithmeticMode = ArithmeticMode.REAL64) -> ProgramGraph:
    """Fold every maximal input-independent, fully bound subgraph to one coefficient.

    Values are computed in the given arithmetic mode.  Subgraphs containing
    free (untrained) coefficients have no defined value and are left alone.
    A constant subgraph that evaluates to a non-finite value raises
    DegenerateConstantError naming the vertex.
    """
    const_val: dict[int, float] = {}
    for vid in graph.total_order:
        v = graph.by_id[vid]
        if v.kind == COEFF and v.value is not None:
            const_val[vid] = _bind_scalar(v.value, mode)
        elif v.is_binary() and all(a in const_val for a in v.args):
            with np.errstate(all="ignore"):
                val = _NP_OPS[v.kind](const_val[v.args[0]], const_val[v.args[1]])
            if not np.isfinite(val):
                raise DegenerateConstantError(
                    f"constant subgraph at vertex {vid} evaluates to {float(val)!r}"
                )
            const_val[vid] = val
    if not const_val:
        return prune(graph)
    # roots: constant vertices visible from outside the constant region
    roots = {a for v in graph.vertices if v.vid not in const_val for a in v.args if a in const_val}
    if graph.output_id in const_val:
        roots.add(graph.output_id)
    new_vertices = []
    for v in graph.vertices:
        if v.vid in roots:
            new_vertices.append(Vertex(v.vid, COEFF, (), float(const_val[v.vid]), v.order))
        elif v.vid not in const_val or v.kind == COEFF:
            new_vertices.append(v)
        # interior constant binaries are dropped; prune would get them anyway
    g = ProgramGraph(vertices=tuple(new_vertices), output_id=graph.output_id)
    return prune(g)


def _bind_scalar(value: float, mode: ArithmeticMode):
    if mode is ArithmeticMode.FLOAT32:
        return np.float32(value)
    return np.float64(value)


def evaluate(graph: ProgramGraph, x: float, coeffs: Sequence[float] | None = None,
             mode: ArithmeticMode = ArithmeticMode.REAL64, ext_precision: int = 120):
    """Execute the program at scalar x.

    Arithmetic faults follow IEEE semantics: division by zero and overflow
    yield infinities or NaN, which propagate to the result instead of
    raising.  Callers detect them with isfinite.  EXTENDED mode returns a
    gmpy2.mpfr; the other modes return a Python float.
    """
    if mode is ArithmeticMode.EXTENDED:
        return _evaluate_extended(graph, x, coeffs, ext_precision)
    vals = _coeff_values(graph, coeffs)
    acc: dict[int, object] = {}
    with np.errstate(all="ignore"):
        for vid in graph.total_order:
            v = graph.by_id[vid]
            if v.kind == INPUT:
                acc[vid] = _bind_scalar(x, mode)
            elif v.kind == COEFF:
                acc[vid] = _bind_scalar(vals[vid], mode)
            else:
                acc[vid] = _NP_OPS[v.kind](acc[v.args[0]], acc[v.args[1]])
    return float(acc[graph.output_id])


def evaluate_many(graph: ProgramGraph, xs: np.ndarray, coeffs: Sequence[float] | None = None,
                  mode: ArithmeticMode = ArithmeticMode.REAL64) -> np.ndarray:
    """Vectorized execution over an array of inputs (REAL64 or FLOAT32)."""
    if mode is ArithmeticMode.EXTENDED:
        raise ValueError("extended mode is scalar-only; use evaluate() per point")
    dtype = np.float32 if mode is ArithmeticMode.FLOAT32 else np.float64
    vals = _coeff_values(graph, coeffs)
    xs = np.asarray(xs, dtype=dtype)
    acc: dict[int, np.ndarray] = {}
    with np.errstate(all="ignore"):
        for vid in graph.total_order:
            v = graph.by_id[vid]
            if v.kind == INPUT:
                acc[vid] = xs
            elif v.kind == COEFF:
                acc[vid] = dtype(vals[vid])
            else:
                acc[vid] = _NP_OPS[v.kind](acc[v.args[0]], acc[v.args[1]])
    return np.broadcast_to(np.asarray(acc[graph.output_id], dtype=dtype), xs.shape).copy()


def evaluate_batch(graph: ProgramGraph, xs: np.ndarray, coeff_matrix: np.ndarray,
                   mode: ArithmeticMode = ArithmeticMode.REAL64) -> np.ndarray:
    """Execute under B coefficient vectors at once; returns shape (B, len(xs)).

    coeff_matrix has shape (B, k) where k is the free coefficient count.
    Used by coefficient training to evaluate a whole population per sweep.
    """
    if mode is ArithmeticMode.EXTENDED:
        raise ValueError("extended mode is scalar-only")
    dtype = np.float32 if mode is ArithmeticMode.FLOAT32 else np.float64
    free = graph.free_coefficients
    coeff_matrix = np.asarray(coeff_matrix, dtype=dtype)
    if coeff_matrix.ndim != 2 or coeff_matrix.shape[1] != len(free):
        raise GraphError(f"coeff matrix must be (B, {len(free)}), got {coeff_matrix.shape}")
    b = coeff_matrix.shape[0]
    xs = np.asarray(xs, dtype=dtype).reshape(1, -1)
    n = xs.shape[1]
    col = {vid: i for i, vid in enumerate(free)}
    acc: dict[int, np.ndarray] = {}
    with np.errstate(all="ignore"):
        for vid in graph.total_order:
            v = graph.by_id[vid]
            if v.kind == INPUT:
                acc[vid] = xs
            elif v.kind == COEFF:
                if v.value is not None:
                    acc[vid] = dtype(v.value)
                else:
                    acc[vid] = coeff_matrix[:, col[vid]].reshape(-1, 1)
            else:
                acc[vid] = _NP_OPS[v.kind](acc[v.args[0]], acc[v.args[1]])
    return np.broadcast_to(np.asarray(acc[graph.output_id], dtype=dtype), (b, n)).copy()


def _coeff_values(graph: ProgramGraph, coeffs: Sequence[float] | None) -> dict[int, float]:
    free = graph.free_coefficients
    supplied = list(coeffs) if coeffs is not None else []
    if len(supplied) != len(free):
        raise GraphError(f"graph has {len(free)} free coefficients, got {len(supplied)} values")
    out = dict(zip(free, supplied))
    for v in graph.vertices:
        if v.kind == COEFF and v.value is not None:
            out[v.vid] = v.value
    return out


def _evaluate_extended(graph: ProgramGraph, x: float, coeffs: Sequence[float] | None, precision: int):
    import gmpy2

    ctx = gmpy2.context(precision=precision, trap_divzero=False, trap_invalid=False,
                        trap_overflow=False, trap_underflow=False)
    ops = {ADD: ctx.add, SUB: ctx.sub, MUL: ctx.mul, DIV: ctx.div}
    vals = _coeff_values(graph, coeffs)
    acc: dict[int, object] = {}
    for vid in graph.total_order:
        v = graph.by_id[vid]
        if v.kind == INPUT:
            acc[vid] = gmpy2.mpfr(x, precision)
        elif v.kind == COEFF:
            acc[vid] = gmpy2.mpfr(vals[vid], precision)
        else:
            acc[vid] = ops[v.kind](acc[v.args[0]], acc[v.args[1]])
    return acc[graph.output_id]


def serialize(graph: ProgramGraph, style: str = "hex") -> str:
    """Render the program as assignment lines plus a final return.

    Constants print as hex float literals by default (bit exact, required
    for float32-mode programs) or as 17-significant-digit decimals with
    style="decimal".  Free coefficients print as "?" so untrained genotypes
    round-trip; trained programs should be bound first.
    """
    if style not in ("hex", "decimal"):
        raise ValueError(f"unknown style {style!r}")
    names: dict[int, str] = {}
    lines: list[str] = []
    n_c = n_x = 0
    for vid in graph.total_order:
        v = graph.by_id[vid]
        if v.kind == INPUT:
            names[vid] = "x"
        elif v.kind == COEFF:
            n_c += 1
            names[vid] = f"c{n_c}"
            lines.append(f"{names[vid]} = {_literal(v.value, style)}")
        else:
            n_x += 1
            names[vid] = f"x{n_x}"
            a, b = v.args
            lines.append(f"{names[vid]} = {names[a]} {_OP_SYMBOL[v.kind]} {names[b]}")
    lines.append(f"return {names[graph.output_id]}")
    return "\n".join(lines) + "\n"


def _literal(value: float | None, style: str) -> str:
    if value is None:
        return "?"
    if style == "hex":
        return float(value).hex()
    return repr(float(value))


def parse(text: str) -> ProgramGraph:
    """Parse program text back into a graph.

    Accepts hex or decimal literals.  Names resolve to their most recent
    assignment, so a reused name shadows the earlier one (evolved listings
    do this).  The input variable x needs no assignment; assigning to it is
    an error.  Raises ParseError with the offending line number.
    """
    env: dict[str, int] = {}
    vertices: list[Vertex] = [Vertex(vid=0, kind=INPUT, order=-1)]
    env["x"] = 0
    next_id = 1
    output_id: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if output_id is not None:
            raise ParseError("statement after return", lineno)
        toks = line.split()
        if toks[0] == "return":
            if len(toks) != 2:
                raise ParseError("return takes exactly one name", lineno)
            if toks[1] not in env:
                raise ParseError(f"return of undefined name {toks[1]!r}", lineno)
            output_id = env[toks[1]]
            continue
        if len(toks) >= 2 and toks[1] == "=":
            lhs = toks[0]
            if lhs == "x":
                raise ParseError("cannot assign to the input variable x", lineno)
            if not lhs.isidentifier():
                raise ParseError(f"bad name {lhs!r}", lineno)
            rhs = toks[2:]
            if len(rhs) == 1:
                v = Vertex(vid=next_id, kind=COEFF, value=_parse_literal(rhs[0], lineno), order=lineno)
            elif len(rhs) == 3:
                a, op, b = rhs
                if op not in _SYMBOL_OP:
                    raise ParseError(f"unknown operator {op!r}", lineno)
                for name in (a, b):
                    if name not in env:
                        raise ParseError(f"undefined name {name!r}", lineno)
                v = Vertex(vid=next_id, kind=_SYMBOL_OP[op], args=(env[a], env[b]), order=lineno)
            else:
                raise ParseError("expected 'name = literal' or 'name = a op b'", lineno)
            vertices.append(v)
            env[lhs] = next_id
            next_id += 1
            continue
        raise ParseError("expected assignment or return", lineno)
    if output_id is None:
        raise ParseError("missing final return", len(text.splitlines()) + 1)
    try:
        return ProgramGraph(vertices=tuple(vertices), output_id=output_id)
    except GraphError as e:  # pragma: no cover - parser should prevent these
        raise ParseError(str(e), 0) from e


def _parse_literal(tok: str, lineno: int) -> float | None:
    if tok == "?":
        return None
    try:
        low = tok.lower()
        val = float.fromhex(tok) if ("0x" in low) else float(tok)
    except ValueError:
        raise ParseError(f"bad numeric literal {tok!r}", lineno) from None
    if not np.isfinite(val):
        raise ParseError(f"non-finite literal {tok!r}", lineno)
    return val


def program_hash(graph: ProgramGraph, coeffs: Sequence[float] | None = None) -> str:
    """Stable identity of a program: sha256 of its canonical hex serialization."""
    g = bind_coefficients(graph, coeffs) if coeffs is not None else graph
    return hashlib.sha256(serialize(g, style="hex").encode()).hexdigest()


def structurally_equal(a: ProgramGraph, b: ProgramGraph) -> bool:
    """Same instruction sequence under canonical naming (ids may differ)."""
    return serialize(a) == serialize(b)
