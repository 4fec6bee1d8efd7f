from __future__ import annotations

import numpy as np
import pytest

from bxsim.model import CostParams, Node, Scenario


def two_file(ratios_a, ratios_b, g: float = 1.0) -> Scenario:
    nodes = [Node(CostParams(w=r * g, g=g), needs=0) for r in ratios_a]
    nodes += [Node(CostParams(w=r * g, g=g), needs=1) for r in ratios_b]
    return Scenario(files=2, nodes=tuple(nodes))


def symmetric(files: int, group_size: int, w: float = 1.0, g: float = 1.0) -> Scenario:
    nodes = [
        Node(CostParams(w=w, g=g), needs=f) for f in range(files) for _ in range(group_size)
    ]
    return Scenario(files=files, nodes=tuple(nodes))


def random_two_file(rng: np.random.Generator, max_group: int = 20) -> Scenario:
    i = int(rng.integers(2, max_group + 1))
    j = int(rng.integers(2, max_group + 1))
    return two_file(rng.uniform(1.0, 2.0, size=i), rng.uniform(1.0, 2.0, size=j))


def random_coded(rng: np.random.Generator, files: int, group_size: int = 10) -> Scenario:
    nodes = [
        Node(CostParams(w=float(rng.uniform(1.0, 2.0)), g=1.0), needs=f)
        for f in range(files)
        for _ in range(group_size)
    ]
    return Scenario(files=files, nodes=tuple(nodes))


@pytest.fixture
def sym_10_10() -> Scenario:
    return symmetric(2, 10)


@pytest.fixture
def sym_2_2() -> Scenario:
    return symmetric(2, 2)
