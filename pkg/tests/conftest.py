from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from qalloc.frontend import parse_graph

SAMPLES = Path(__file__).resolve().parent.parent / "samples"

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def sample(name: str) -> Path:
    return SAMPLES / name


@pytest.fixture
def qx2():
    return parse_graph(sample("qx2.graph").read_text())


@pytest.fixture
def path3():
    return parse_graph(sample("path3.graph").read_text())
