"""Experiment configuration: one serializable, hashable description of a run.

A stored config plus a seed pins everything a single-worker run touches, so
rerunning it reproduces the artifacts bit for bit.  Canonical serialization
(sorted keys, compact separators) makes the config hash stable across
machines; the pretty form written to disk stays human-editable.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, field_validator, model_validator

from . import __version__
from .bench import BenchConfig
from .cmaes import CmaesConfig
from .graphs import ArithmeticMode
from .search import SearchConfig
from .targets import get_target


class CmaesSettings(BaseModel):
    population: int = 128
    max_generations: int = 10_000
    sigma0: float = 0.3
    early_stop_min_generations: int = 100

    def build(self) -> CmaesConfig:
        return CmaesConfig(population=self.population,
                           max_generations=self.max_generations,
                           sigma0=self.sigma0,
                           early_stop_min_generations=self.early_stop_min_generations)


class BenchSettings(BaseModel):
    vector_size: int = 10_000
    stack_depth: int = 100
    repeats: int = 1_000
    clip: tuple[float, float] = (0.0, 1.0)

    def build(self) -> BenchConfig:
        return BenchConfig(vector_size=self.vector_size, stack_depth=self.stack_depth,
                           repeats=self.repeats, clip=self.clip)


class SearchSettings(BaseModel):
    workers: int = 8
    sample_size: int = 20
    budget: int = 100_000
    buffer_capacity: int = 512
    normalize_crowding: bool = True
    mutation_probabilities: tuple[float, float, float, float] = (1 / 2, 1 / 4, 1 / 6, 1 / 12)


class ExperimentConfig(BaseModel):
    """Everything a run needs; field groups mirror the module configs."""

    target: str = "exp2"
    mode: Literal["real64", "float32"] = "real64"
    objectives: Literal["complexity", "speed"] = "complexity"
    search: SearchSettings = SearchSettings()
    cmaes: CmaesSettings = CmaesSettings()
    bench: BenchSettings = BenchSettings()
    train_size: int = 1000
    validation_size: int = 10_000
    test_size: int = 10_000
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "runs"

    @field_validator("target")
    @classmethod
    def _known_target(cls, v: str) -> str:
        get_target(v)  # raises on unknown names
        return v

    @field_validator("seeds")
    @classmethod
    def _some_seed(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if not v:
            raise ValueError("at least one seed is required")
        return v

    @model_validator(mode="after")
    def _finite_floats(self):
        for x in (self.cmaes.sigma0, *self.bench.clip, *self.search.mutation_probabilities):
            if not math.isfinite(x):
                raise ValueError("config floats must be finite")
        return self

    def arithmetic_mode(self) -> ArithmeticMode:
        return ArithmeticMode(self.mode)

    def search_config(self, seed: int) -> SearchConfig:
        s = self.search
        return SearchConfig(target=self.target, mode=self.arithmetic_mode(),
                            workers=s.workers, sample_size=s.sample_size,
                            budget=s.budget, objectives=self.objectives,
                            buffer_capacity=s.buffer_capacity, seed=seed,
                            train_size=self.train_size,
                            validation_size=self.validation_size,
                            cmaes=self.cmaes.build(),
                            normalize_crowding=s.normalize_crowding,
                            mutation_probabilities=s.mutation_probabilities)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(), sort_keys=True, separators=(",", ":"),
                          allow_nan=False)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    def stamp(self) -> dict:
        """Provenance block embedded in every artifact this config produces."""
        return {"config_hash": self.config_hash(), "code_version": __version__}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.model_dump(), indent=2,
                                         allow_nan=False) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.model_validate(json.loads(Path(path).read_text()))
