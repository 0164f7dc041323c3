import json
import warnings

import numpy as np
import pytest

from evoapprox.cmaes import CmaesConfig
from evoapprox.graphs import count_operations, parse
from evoapprox.search import (
    Broker,
    SearchConfig,
    load_checkpoint,
    run_worker_pool,
    save_checkpoint,
)


def rec(precision, complexity, uid=0, speed=None):
    return {"program": "return x\n", "coeffs": [], "precision": precision,
            "complexity": complexity, "speed": speed, "uid": uid,
            "dataset_sizes": {"train": 1, "validation": 1}, "seed": 0}


def tiny_config(**overrides):
    base = dict(target="exp2", workers=1, sample_size=2, budget=12,
                buffer_capacity=32, train_size=32, validation_size=64,
                cmaes=CmaesConfig(population=8, max_generations=10,
                                  early_stop_min_generations=5))
    base.update(overrides)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # S vs W degeneracy warning is expected
        return SearchConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        tiny_config(workers=0)
    with pytest.raises(ValueError):
        tiny_config(budget=0)
    with pytest.raises(ValueError):
        tiny_config(objectives="elegance")
    with pytest.raises(ValueError):
        tiny_config(mutation_probabilities=(0.5, 0.5, 0.5, 0.5))
    with pytest.warns(UserWarning):
        SearchConfig(workers=2, sample_size=2)


def test_broker_counts_only_budgeted_puts():
    b = Broker(capacity=8)
    b.put(rec(-1.0, 1), count=False)
    assert b.evaluations == 0
    b.put(rec(-0.5, 2))
    b.put(rec(-0.4, 3))
    assert b.evaluations == 2


def test_broker_buffer_keeps_last_p():
    b = Broker(capacity=3)
    for i in range(7):
        b.put(rec(-1.0 - i, 1, uid=i))
    pop = b.population_records()
    assert len(pop) == 3
    assert [r["uid"] for r in pop] == [4, 5, 6]


def test_broker_archive_is_best_ever_front():
    b = Broker(capacity=16)
    b.put(rec(-1.0, 3, uid=1))
    b.put(rec(-0.5, 3, uid=2))   # dominates uid=1 (same cost, better precision)
    b.put(rec(-2.0, 1, uid=3))   # cheaper, worse: non-dominated
    b.put(rec(-0.5, 3, uid=4))   # duplicate objective point: first arrival kept
    b.put(rec(-3.0, 2, uid=5))   # dominated by uid=3
    archive = b.archive_records()
    assert [r["uid"] for r in archive] == [2, 3]


def test_broker_archive_ignores_nonfinite_precision():
    b = Broker(capacity=4)
    b.put(rec(float("-inf"), 1))
    assert b.archive_records() == []


def test_broker_sampling_with_replacement():
    b = Broker(capacity=4, seed=1)
    assert b.sample(3) == []  # empty buffer
    b.put(rec(-1.0, 1, uid=0))
    out = b.sample(5)
    assert len(out) == 5
    assert all(r["uid"] == 0 for r in out)


def test_one_generation_at_budget_2s():
    # with a single worker and budget 2S, the run is exactly generation one:
    # an identity seed (not budgeted) plus 2S mutated children
    s = 3
    cfg = tiny_config(sample_size=s, budget=2 * s)
    result = run_worker_pool(cfg)
    assert result.evaluations == 2 * s
    pop = result.population
    assert len(pop) == 2 * s + 1
    assert pop[0]["program"] == "return x\n"
    for child in pop[1:]:
        g = parse(child["program"])
        assert count_operations(g) <= 1  # one mutation away from identity


def test_single_worker_run_is_deterministic():
    cfg = tiny_config(budget=20, seed=5)
    a = run_worker_pool(cfg)
    b = run_worker_pool(tiny_config(budget=20, seed=5))
    assert a.evaluations == b.evaluations
    assert a.population == b.population  # bit-identical records
    assert a.archive == b.archive
    c = run_worker_pool(tiny_config(budget=20, seed=6))
    assert a.population != c.population


def test_stop_condition_ends_run_early():
    cfg = tiny_config(budget=10_000)
    result = run_worker_pool(cfg, stop_condition=lambda br: br.evaluations >= 5)
    assert 5 <= result.evaluations <= 8


def test_archive_precision_never_worsens_per_cost():
    cfg = tiny_config(budget=40, seed=2)
    result = run_worker_pool(cfg)
    best = {}
    for r in result.archive:
        c = r["complexity"]
        assert c not in best  # one record per objective point
        best[c] = r["precision"]
    for r in result.population:
        c = r["complexity"]
        if c in best and np.isfinite(r["precision"]):
            assert best[c] >= r["precision"]


def test_checkpoint_round_trip(tmp_path):
    b = Broker(capacity=8, seed=3)
    for i in range(5):
        b.put(rec(-1.0 - i, i + 1, uid=i))
    path = tmp_path / "ck.json"
    save_checkpoint(b, str(path))
    again = load_checkpoint(str(path))
    assert again.capacity == b.capacity
    assert again.evaluations == b.evaluations
    assert again.population_records() == b.population_records()
    assert again.archive_records() == b.archive_records()
    json.loads(path.read_text())  # stored as plain JSON


def test_resumed_run_extends_archive_monotonically(tmp_path):
    cfg = tiny_config(budget=15, seed=7)
    first = run_worker_pool(cfg)
    broker = Broker(capacity=cfg.buffer_capacity, seed=cfg.seed)
    broker.restore({"capacity": cfg.buffer_capacity, "buffer": first.population,
                    "archive": first.archive, "evaluations": first.evaluations})
    before = {r["complexity"]: r["precision"] for r in first.archive}
    resumed = run_worker_pool(tiny_config(budget=40, seed=7), broker=broker)
    assert resumed.evaluations >= 40
    after = {r["complexity"]: r["precision"] for r in resumed.archive}
    for cost, precision in before.items():
        covering = [p for c, p in after.items() if c <= cost]
        assert covering and max(covering) >= precision


def test_broker_snapshot_restore():
    b = Broker(capacity=4)
    b.put(rec(-1.0, 1))
    state = b.snapshot()
    b2 = Broker(capacity=99)
    b2.restore(state)
    assert b2.capacity == 4
    assert b2.population_records() == b.population_records()
    assert b2.evaluations == 1
