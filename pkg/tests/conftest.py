import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from finsler_lab.norms import PNorm, PolytopeV

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

import oracles  # noqa: E402

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def library_norm(name):
    """The package's norm object for an oracle norm name."""
    if name in oracles.POLYGONS:
        if name == "l1":
            return PNorm(1.0)
        if name == "linf":
            return PNorm(math.inf)
        return PolytopeV(oracles.polygon(name))
    if name == "euclidean":
        return PNorm(2.0)
    if name == "l3":
        return PNorm(3.0)
    if name == "aniso":
        return PNorm(2.0, A=oracles.ANISO_A)
    raise KeyError(name)


@pytest.fixture(scope="session")
def frozen():
    with open(HERE / "data" / "oracle_values.json") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def norms():
    names = ["l1", "linf", "hexagon", "triangle", "euclidean", "l3", "aniso"]
    return {n: library_norm(n) for n in names}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria (one line each)")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
        terminalreporter.write_line(line)
