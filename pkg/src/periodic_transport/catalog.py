"""Small library of periodic graphs used in examples and tests."""
from __future__ import annotations

import itertools

from .graph import PeriodicGraph


def lattice(d: int) -> PeriodicGraph:
    """Nearest-neighbour Z^d: one fiber, edges to +e_i."""
    edges = []
    for i in range(d):
        e = [0] * d
        e[i] = 1
        edges.append(("o", tuple(e), "o"))
    return PeriodicGraph(d, ["o"], edges)


def ladder() -> PeriodicGraph:
    """Two parallel copies of Z joined by rungs (kernel dimension 1)."""
    return PeriodicGraph(1, ["a", "b"], [("a", (1,), "a"), ("b", (1,), "b"), ("a", (0,), "b")])


def triple_ladder() -> PeriodicGraph:
    """Three parallel copies of Z with rungs a-b and b-c (kernel dimension 2)."""
    return PeriodicGraph(
        1, ["a", "b", "c"],
        [("a", (1,), "a"), ("b", (1,), "b"), ("c", (1,), "c"), ("a", (0,), "b"), ("b", (0,), "c")],
    )


def zigzag() -> PeriodicGraph:
    """Z with two fibers per cell and an extra long edge (kernel dimension 1)."""
    return PeriodicGraph(1, ["a", "b"], [("a", (0,), "b"), ("b", (1,), "a"), ("a", (1,), "a")])


def honeycomb() -> PeriodicGraph:
    """Hexagonal lattice: A at z joined to B at z, z - e1, z - e2."""
    return PeriodicGraph(2, ["A", "B"], [("A", (0, 0), "B"), ("A", (-1, 0), "B"), ("A", (0, -1), "B")])


def diagonal_lattice(d: int = 2) -> PeriodicGraph:
    """Z^d with all edges of sup-norm length one (R0 = 1, kernel > 0)."""
    edges = []
    for dz in itertools.product((-1, 0, 1), repeat=d):
        if dz > (0,) * d:
            edges.append(("o", dz, "o"))
    return PeriodicGraph(d, ["o"], edges)


def long_range_chain() -> PeriodicGraph:
    """Z with edges of length 1 and 2 (R0 = 2)."""
    return PeriodicGraph(1, ["o"], [("o", (1,), "o"), ("o", (2,), "o")])


CATALOG = {
    "lattice1": lambda: lattice(1),
    "lattice2": lambda: lattice(2),
    "lattice3": lambda: lattice(3),
    "ladder": ladder,
    "triple_ladder": triple_ladder,
    "zigzag": zigzag,
    "honeycomb": honeycomb,
    "diagonal2": lambda: diagonal_lattice(2),
    "long_range": long_range_chain,
}
