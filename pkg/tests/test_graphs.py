import numpy as np
import pytest
from hypothesis import given, strategies as st

from evoapprox.fixtures import FIXTURE_NAMES, fixture_text
from evoapprox.graphs import (
    ADD,
    COEFF,
    DIV,
    INPUT,
    MUL,
    SUB,
    ArithmeticMode,
    DegenerateConstantError,
    GraphError,
    ParseError,
    ProgramGraph,
    Vertex,
    bind_coefficients,
    collapse_constants,
    constant_graph,
    count_operations,
    evaluate,
    evaluate_batch,
    evaluate_many,
    identity_graph,
    parse,
    program_hash,
    prune,
    serialize,
    structurally_equal,
)


def test_identity_graph_is_trivial():
    g = identity_graph()
    assert count_operations(g) == 0
    assert evaluate(g, 0.73) == 0.73


def test_constant_graph_ignores_input():
    g = constant_graph(2.5)
    assert evaluate(g, 0.1) == 2.5
    assert evaluate(g, 100.0) == 2.5
    assert count_operations(g) == 0


def test_structural_validation():
    with pytest.raises(GraphError):  # zero input vertices
        ProgramGraph(vertices=(Vertex(0, COEFF, value=1.0),), output_id=0)
    with pytest.raises(GraphError):  # two input vertices
        ProgramGraph(vertices=(Vertex(0, INPUT), Vertex(1, INPUT)), output_id=0)
    with pytest.raises(GraphError):  # duplicate id
        ProgramGraph(vertices=(Vertex(0, INPUT), Vertex(0, COEFF, value=1.0)), output_id=0)
    with pytest.raises(GraphError):  # dangling edge
        ProgramGraph(vertices=(Vertex(0, INPUT), Vertex(1, ADD, (0, 7))), output_id=1)
    with pytest.raises(GraphError):  # missing output
        ProgramGraph(vertices=(Vertex(0, INPUT),), output_id=3)
    with pytest.raises(GraphError):  # cycle
        ProgramGraph(vertices=(Vertex(0, INPUT), Vertex(1, ADD, (1, 0))), output_id=1)
    with pytest.raises(GraphError):  # wrong arity
        ProgramGraph(vertices=(Vertex(0, INPUT), Vertex(1, ADD, (0,))), output_id=1)
    with pytest.raises(GraphError):  # non-finite bound coefficient
        ProgramGraph(vertices=(Vertex(0, INPUT), Vertex(1, COEFF, value=float("inf"))),
                     output_id=1)


def test_every_fixture_round_trips_bit_exactly():
    for name in FIXTURE_NAMES:
        g = parse(fixture_text(name))
        again = parse(serialize(g))
        assert structurally_equal(g, again)
        assert serialize(g) == serialize(again)
        assert program_hash(g) == program_hash(again)


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError, match="line 1"):
        parse("x1 = y + x\nreturn x1\n")  # undefined name
    with pytest.raises(ParseError):
        parse("x = 1.0\nreturn x\n")  # assigning the input
    with pytest.raises(ParseError):
        parse("x1 = x + x\n")  # missing return
    with pytest.raises(ParseError):
        parse("c1 = nan\nreturn c1\n")
    with pytest.raises(ParseError):
        parse("x1 = x + x\nreturn x1\nx2 = x + x\n")  # code after return
    with pytest.raises(ParseError):
        parse("x1 = x ^ x\nreturn x1\n")  # unknown operator
    with pytest.raises(ParseError):
        parse("return nothing\n")


def test_parse_name_shadowing():
    # reassigning a name rebinds later uses but leaves earlier consumers intact
    g = parse("a = x + x\nb = a + x\na = b + b\nreturn a\n")
    assert evaluate(g, 1.0) == 6.0


def test_free_coefficients_round_trip_as_question_marks():
    g = parse("c1 = ?\nx1 = c1 * x\nreturn x1\n")
    assert len(g.free_coefficients) == 1
    assert "?" in serialize(g)
    bound = bind_coefficients(g, [2.0])
    assert evaluate(bound, 3.0) == 6.0
    assert len(bound.free_coefficients) == 0


def test_bind_coefficients_checks_count():
    g = parse("c1 = ?\nc2 = ?\nx1 = c1 + c2\nreturn x1\n")
    with pytest.raises(GraphError):
        bind_coefficients(g, [1.0])
    with pytest.raises(GraphError):
        bind_coefficients(g, [1.0, 2.0, 3.0])


def test_prune_drops_unreachable_but_keeps_input():
    g = parse("c1 = 5.0\nx1 = x + c1\nx2 = x1 * x1\nreturn x1\n")
    p = prune(g)
    assert count_operations(p) == 1
    assert evaluate(p, 2.0) == evaluate(g, 2.0) == 7.0
    const = prune(constant_graph(1.5))
    assert any(v.kind == INPUT for v in const.vertices)


def test_collapse_constants_no_op_without_constant_subgraphs():
    g = parse("c1 = ?\nx1 = x + c1\nreturn x1\n")
    assert collapse_constants(g) is g


def test_collapse_constants_folds_and_counts():
    g = parse("c1 = 2.0\nc2 = 3.0\nx1 = c1 * c2\nx2 = x + x1\nreturn x2\n")
    folded = collapse_constants(g)
    assert count_operations(folded) == 1
    assert evaluate(folded, 1.0) == 7.0


def test_collapse_constants_respects_float32_rounding():
    # 0.1 + 0.2 rounds differently in binary32 and binary64
    g = parse("c1 = 0.1\nc2 = 0.2\nx1 = c1 + c2\nx2 = x * x1\nreturn x2\n")
    f64 = collapse_constants(g, ArithmeticMode.REAL64)
    f32 = collapse_constants(g, ArithmeticMode.FLOAT32)
    v64 = next(v.value for v in f64.vertices if v.kind == COEFF)
    v32 = next(v.value for v in f32.vertices if v.kind == COEFF)
    assert v64 == 0.1 + 0.2
    assert v32 == float(np.float32(0.1) + np.float32(0.2))
    assert v64 != v32


def test_collapse_constants_rejects_degenerate_fold():
    g = parse("c1 = 1.0\nc2 = 0.0\nx1 = c1 / c2\nx2 = x + x1\nreturn x2\n")
    with pytest.raises(DegenerateConstantError):
        collapse_constants(g)


def test_collapse_leaves_free_coefficient_subgraphs_alone():
    g = parse("c1 = ?\nc2 = 2.0\nx1 = c1 * c2\nx2 = x + x1\nreturn x2\n")
    out = collapse_constants(g)
    assert len(out.free_coefficients) == 1
    assert count_operations(out) == 2


def test_float32_mode_rounds_every_intermediate():
    g = parse("c1 = 0.1\nx1 = x + c1\nreturn x1\n")
    x = 0.3
    assert evaluate(g, x, mode=ArithmeticMode.FLOAT32) == float(
        np.float32(x) + np.float32(0.1))
    assert evaluate(g, x) == x + 0.1


def test_extended_mode_returns_high_precision():
    import gmpy2

    g = parse("x1 = x / x\nreturn x1\n")
    out = evaluate(g, 0.7, mode=ArithmeticMode.EXTENDED)
    assert isinstance(out, gmpy2.mpfr)
    assert out == 1


def test_division_faults_propagate_as_nonfinite():
    g = parse("x1 = x - x\nx2 = x / x1\nreturn x2\n")
    assert not np.isfinite(evaluate(g, 1.0))


def test_evaluate_many_matches_scalar():
    rng = np.random.default_rng(7)
    xs = rng.uniform(0.01, 1.0, size=64)
    for name in ("f2", "f5", "f10"):
        g = parse(fixture_text(name))
        vec = evaluate_many(g, xs)
        for i, x in enumerate(xs):
            assert vec[i] == evaluate(g, float(x))


def test_evaluate_batch_matches_per_row():
    g = parse("c1 = ?\nc2 = ?\nx1 = c1 * x\nx2 = x1 + c2\nreturn x2\n")
    rng = np.random.default_rng(3)
    xs = rng.uniform(0.0, 1.0, size=17)
    mat = rng.normal(size=(5, 2))
    out = evaluate_batch(g, xs, mat)
    assert out.shape == (5, 17)
    for b in range(5):
        row = evaluate_many(g, xs, coeffs=tuple(mat[b]))
        assert np.array_equal(out[b], row)
    with pytest.raises(GraphError):
        evaluate_batch(g, xs, np.zeros((5, 3)))


def test_program_hash_binds_coefficients():
    g = parse("c1 = ?\nx1 = c1 * x\nreturn x1\n")
    assert program_hash(g, [1.0]) != program_hash(g, [2.0])
    assert program_hash(g, [1.0]) == program_hash(bind_coefficients(g, [1.0]))
    assert program_hash(g) != program_hash(g, [1.0])


def test_serialize_styles():
    g = constant_graph(0.1)
    assert "0x" in serialize(g, style="hex")
    assert "0.1" in serialize(g, style="decimal")
    assert structurally_equal(parse(serialize(g, style="decimal")), g)
    with pytest.raises(ValueError):
        serialize(g, style="plain")


def test_total_order_is_deterministic():
    # same structure entered in a different vertex order lowers identically
    a = ProgramGraph(vertices=(Vertex(0, INPUT), Vertex(5, COEFF, value=1.5, order=2),
                               Vertex(3, ADD, (0, 5), order=3)), output_id=3)
    b = ProgramGraph(vertices=(Vertex(3, ADD, (0, 5), order=3), Vertex(0, INPUT),
                               Vertex(5, COEFF, value=1.5, order=2)), output_id=3)
    assert serialize(a) == serialize(b)


@given(st.lists(st.sampled_from([ADD, SUB, MUL, DIV]), min_size=0, max_size=20),
       st.floats(min_value=-4, max_value=4, allow_nan=False))
def test_chain_programs_round_trip_and_evaluate(ops, x):
    # build x op c op c ... as a straight chain; parse(serialize) is identity
    vertices = [Vertex(0, INPUT)]
    prev = 0
    nid = 1
    for i, op in enumerate(ops):
        vertices.append(Vertex(nid, COEFF, value=float(i % 3) + 0.5, order=nid))
        vertices.append(Vertex(nid + 1, op, (prev, nid), order=nid + 1))
        prev = nid + 1
        nid += 2
    g = ProgramGraph(vertices=tuple(vertices), output_id=prev)
    assert count_operations(g) == len(ops)
    again = parse(serialize(g))
    assert structurally_equal(g, again)
    got, want = evaluate(again, x), evaluate(g, x)
    assert got == want or (np.isnan(got) and np.isnan(want))
