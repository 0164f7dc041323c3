"""Shared fixtures: parsed reference programs and their certified bounds."""

from __future__ import annotations

import pytest

from evoapprox.fixtures import FIXTURE_NAMES, fixture_text
from evoapprox.graphs import parse

# Relative-error bounds each bundled evolved program is certified to meet on
# [2^-60, 1] against exp2.  fN has exactly N arithmetic operations.
FIXTURE_BOUNDS = {
    "f2": 4.15e-2,
    "f3": 1.23e-3,
    "f4": 3.072e-4,
    "f5": 6.372e-6,
    "f6": 4.016e-7,
    "f7": 8.417e-10,
    "f8": 1.360e-11,
    "f9": 2.15e-13,
    "f10": 5.40e-15,
}

CERT_LO = 2.0 ** -60
CERT_HI = 1.0


@pytest.fixture(scope="session")
def fixture_graphs():
    return {name: parse(fixture_text(name)) for name in FIXTURE_NAMES}
