import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from shiftaudit.graph import build_graph  # noqa: E402
from shiftaudit.synthetic import scenario_graph  # noqa: E402


@pytest.fixture
def fig1a():
    return scenario_graph("AC-a")


@pytest.fixture
def derm_graph_hidden_m():
    nodes = [("S", "env"), ("A", "attr"), ("M", "aux", False), ("X_s", "aux"), ("Y", "out"), ("X", "cov")]
    edges = [("S", v) for v in ("A", "M", "X_s", "Y", "X")]
    edges += [("A", "M"), ("A", "Y"), ("A", "X"), ("M", "Y"), ("Y", "X"), ("Y", "X_s")]
    return build_graph(nodes, edges)
