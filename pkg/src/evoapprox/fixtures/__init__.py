"""Reference evolved programs used by tests and the regression suite."""

from __future__ import annotations

import importlib.resources

FIXTURE_NAMES = ("f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9", "f10")


def fixture_text(name: str) -> str:
    return (importlib.resources.files(__package__) / f"{name}.txt").read_text()
