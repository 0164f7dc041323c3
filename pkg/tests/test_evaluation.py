import numpy as np
import pytest

from evoapprox.cmaes import CmaesConfig
from evoapprox.evaluation import (
    Dataset,
    EvalConfig,
    batch_errors,
    evaluate_program,
    max_error,
    max_rel_error_real,
    max_ulp_error,
    precision_report,
    program_record,
    record_to_program,
    rel_errors_real,
    reported_complexity,
    ulp,
    ulp_array,
    ulp_errors,
)
from evoapprox.fixtures import fixture_text
from evoapprox.graphs import (
    ArithmeticMode,
    constant_graph,
    count_operations,
    evaluate_many,
    identity_graph,
    parse,
)
from evoapprox.targets import get_target, make_dataset


def _dataset_from_program(graph, xs, mode=ArithmeticMode.REAL64):
    """Labels taken from the program itself, so its error is exactly zero."""
    ys = evaluate_many(graph, xs, mode=ArithmeticMode.REAL64).astype(np.float64)
    return Dataset(target="synthetic", role="test", mode=mode,
                   xs=np.asarray(xs, dtype=np.float64), label_hi=ys,
                   label_lo=np.zeros_like(ys))


def test_ulp_conventions():
    assert ulp(np.float32(1.0)) == 2.0 ** -23
    assert ulp(np.float32(2.0)) == 2.0 ** -22
    # just below a binade boundary the step is the smaller one
    assert ulp(np.nextafter(np.float32(2.0), np.float32(1.0))) == 2.0 ** -23
    assert ulp(np.float32(0.0)) == 2.0 ** -149
    assert ulp(np.finfo(np.float32).max) == 2.0 ** 104
    with pytest.raises(ValueError):
        ulp(float("nan"))
    arr = ulp_array(np.array([1.0, 2.0, np.finfo(np.float32).max], dtype=np.float32))
    assert list(arr) == [np.float32(2.0 ** -23), np.float32(2.0 ** -22),
                         np.float32(2.0 ** 104)]


def test_program_equal_to_labels_scores_zero():
    g = parse(fixture_text("f4"))
    xs = np.linspace(0.01, 1.0, 100)
    ds = _dataset_from_program(g, xs)
    assert max_rel_error_real(g, None, ds) == 0.0


def test_identity_error_against_exp2_matches_formula():
    target = get_target("exp2")
    ds = make_dataset(target, 1000)
    errs = rel_errors_real(identity_graph(), None, ds)
    want = np.abs(ds.xs / 2.0 ** ds.xs - 1.0)
    assert np.allclose(errs, want, rtol=1e-12)
    # near the open 0 endpoint the relative error approaches 1
    assert 0.99 < float(np.max(errs)) < 1.0


def test_nonfinite_outputs_score_infinite_error():
    g = parse("x1 = x - x\nx2 = x / x1\nreturn x2\n")
    ds = make_dataset(get_target("exp2"), 50)
    errs = rel_errors_real(g, None, ds)
    assert np.all(np.isinf(errs))
    assert max_error(g, None, ds) == np.inf


def test_ulp_errors_in_float32():
    target = get_target("log2")
    ds = make_dataset(target, 256, ArithmeticMode.FLOAT32)
    # the correctly rounded label program: a one-coefficient constant cannot
    # be that, so instead check a program that returns the rounded label is
    # impossible here; use self-labelled data instead
    g = parse(fixture_text("f3"))
    xs = np.linspace(1.0, 1.9, 64)
    f32 = evaluate_many(g, xs, mode=ArithmeticMode.FLOAT32).astype(np.float64)
    ds_exact = Dataset(target="synthetic", role="test", mode=ArithmeticMode.FLOAT32,
                       xs=xs, label_hi=f32, label_lo=np.zeros_like(f32))
    assert max_ulp_error(g, None, ds_exact) == 0.0
    # shifting every label by one float32 step makes the error exactly 1 ULP
    shifted = np.nextafter(f32.astype(np.float32), np.float32(np.inf)).astype(np.float64)
    ds_off = Dataset(target="synthetic", role="test", mode=ArithmeticMode.FLOAT32,
                     xs=xs, label_hi=shifted, label_lo=np.zeros_like(f32))
    errs = ulp_errors(g, None, ds_off)
    assert np.allclose(errs, 1.0)


def test_mode_metric_guards():
    ds64 = make_dataset(get_target("exp2"), 10)
    ds32 = make_dataset(get_target("exp2"), 10, ArithmeticMode.FLOAT32)
    g = identity_graph()
    with pytest.raises(ValueError):
        max_rel_error_real(g, None, ds32)
    with pytest.raises(ValueError):
        max_ulp_error(g, None, ds64)
    with pytest.raises(ValueError):
        rel_errors_real(g, None, Dataset(target="x", role="test",
                                         mode=ArithmeticMode.REAL64,
                                         xs=np.array([]), label_hi=np.array([]),
                                         label_lo=np.array([])))


def test_batch_errors_match_per_row():
    g = parse("c1 = ?\nc2 = ?\nx1 = c1 * x\nx2 = x1 + c2\nreturn x2\n")
    ds = make_dataset(get_target("exp2"), 40)
    rng = np.random.default_rng(2)
    mat = rng.normal(size=(6, 2))
    batched = batch_errors(g, mat, ds)
    for b in range(6):
        row = float(np.max(rel_errors_real(g, tuple(mat[b]), ds)))
        assert batched[b] == row


def test_reported_complexity_ignores_junk():
    bloated = parse(fixture_text("f10_bloated"))
    clean = parse(fixture_text("f10"))
    assert count_operations(bloated) > 10
    assert reported_complexity(bloated, ()) == 10
    assert reported_complexity(clean, ()) == 10


def test_precision_report_real_mode():
    g = parse(fixture_text("f6"))
    report = precision_report(g, None, get_target("exp2"), ArithmeticMode.REAL64,
                              grid_size=5000)
    assert report["metric"] == "relative"
    assert report["points"] == 5000
    assert not report["exhaustive"]
    ds = make_dataset(get_target("exp2"), 5000)
    assert report["max_error"] == max_rel_error_real(g, None, ds)
    assert 0 < report["argmax_x"] <= 1


def test_precision_report_rejects_exhaustive_real():
    with pytest.raises(ValueError):
        precision_report(identity_graph(), None, get_target("exp2"),
                         ArithmeticMode.REAL64, exhaustive=True)


def test_precision_report_chunking_is_invisible():
    g = parse(fixture_text("f5"))
    a = precision_report(g, None, get_target("exp2"), ArithmeticMode.REAL64,
                         grid_size=3000, chunk_size=271)
    b = precision_report(g, None, get_target("exp2"), ArithmeticMode.REAL64,
                         grid_size=3000)
    assert a == b


def test_evaluate_program_trains_and_scores():
    target = get_target("exp2")
    cfg = EvalConfig(target="exp2", mode=ArithmeticMode.REAL64,
                     train=make_dataset(target, 64, role="train"),
                     validation=make_dataset(target, 128, role="validation"),
                     cmaes=CmaesConfig(population=16, max_generations=60,
                                       early_stop_min_generations=20))
    g = parse("c1 = ?\nreturn c1\n")
    ep = evaluate_program(g, cfg, np.random.default_rng(0))
    assert ep.complexity == 0
    assert -0.35 < ep.precision <= -0.32  # constant fit levels off near -1/3
    assert ep.speed is None
    assert ep.objective_kind == "complexity"

    const = evaluate_program(constant_graph(1.4), cfg)
    assert const.coeffs == ()
    assert np.isfinite(const.precision)


def test_precision_nonpositive_in_real_mode():
    target = get_target("exp2")
    cfg = EvalConfig(target="exp2", mode=ArithmeticMode.REAL64,
                     train=make_dataset(target, 32, role="train"),
                     validation=make_dataset(target, 64, role="validation"),
                     cmaes=CmaesConfig(population=8, max_generations=20,
                                       early_stop_min_generations=10))
    for text in ("return x\n", "x1 = x * x\nreturn x1\n"):
        ep = evaluate_program(parse(text), cfg)
        assert ep.precision <= 0


def test_program_record_round_trip():
    target = get_target("exp2")
    cfg = EvalConfig(target="exp2", mode=ArithmeticMode.REAL64,
                     train=make_dataset(target, 32, role="train"),
                     validation=make_dataset(target, 64, role="validation"),
                     cmaes=CmaesConfig(population=8, max_generations=30,
                                       early_stop_min_generations=10))
    g = parse("c1 = ?\nx1 = x + c1\nreturn x1\n")
    ep = evaluate_program(g, cfg, np.random.default_rng(5), uid=42)
    rec = program_record(ep, len(cfg.train), len(cfg.validation), seed=7)
    assert rec["uid"] == 42 and rec["seed"] == 7
    assert rec["dataset_sizes"] == {"train": 32, "validation": 64}
    back = record_to_program(rec)
    assert back.precision == ep.precision
    assert back.complexity == ep.complexity
    assert back.coeffs == ep.coeffs
    from evoapprox.graphs import structurally_equal

    assert structurally_equal(back.graph, ep.graph)
