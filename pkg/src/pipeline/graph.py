"""MaxCut instances: edge-list parsing, cut evaluation and the exact brute-force oracle.

Bitstring convention (shared by every module): character i of a bitstring is the
value of qubit i, and the computational basis index is sum_i z_i * 2**i.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple

import networkx as nx
import numpy as np

from src.utils.config import MAX_QUBITS
from src.utils.preprocess import content_lines

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


class GraphFormatError(ValueError):
    """Edge-list text that cannot be turned into a valid graph."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class GraphSizeError(ValueError):
    pass


@dataclass(frozen=True)
class GraphInstance:
    n: int
    edges: Tuple[Edge, ...] = ()

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"Vertex count must be a positive integer, got {self.n!r}")
        normalized = []
        seen = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"Self-loop at vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"Edge ({i}, {j}) out of range for n={self.n}")
            edge = (min(i, j), max(i, j))
            if edge in seen:
                raise ValueError(f"Duplicate edge {edge}")
            seen.add(edge)
            normalized.append(edge)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "edges", tuple(normalized))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def dimension(self) -> int:
        return 2 ** self.n

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    def describe(self) -> str:
        return f"n={self.n}, |E|={self.num_edges}"


@dataclass(frozen=True)
class CutOracleResult:
    c_star: int
    degeneracy: int
    optimal_set: List[str] = field(default_factory=list)

    def optimal_indices(self) -> np.ndarray:
        return np.array([bitstring_to_index(z) for z in self.optimal_set], dtype=np.int64)


def check_size(n: int, max_qubits: int = MAX_QUBITS) -> None:
    if n > max_qubits:
        raise GraphSizeError(f"n={n} exceeds the configured maximum of {max_qubits} vertices")


def parse_edge_list(text: str) -> GraphInstance:
    """Parse the 'n <count>' header followed by one 'i j' pair per line."""
    n = None
    edges = []
    seen = {}
    for lineno, line in content_lines(text):
        tokens = line.split(" ")
        if n is None:
            if len(tokens) != 2 or tokens[0] != "n":
                raise GraphFormatError(f"expected header 'n <count>', got {line!r}", lineno)
            try:
                n = int(tokens[1])
            except ValueError:
                raise GraphFormatError(f"vertex count is not an integer: {tokens[1]!r}", lineno)
            if n < 1:
                raise GraphFormatError(f"vertex count must be positive, got {n}", lineno)
            continue
        if tokens[0] == "n":
            raise GraphFormatError("duplicate header", lineno)
        if len(tokens) != 2:
            raise GraphFormatError(f"expected 'i j', got {line!r}", lineno)
        try:
            i, j = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise GraphFormatError(f"vertex indices must be integers, got {line!r}", lineno)
        if not (0 <= i < n and 0 <= j < n):
            raise GraphFormatError(f"vertex index out of range [0, {n}) in {line!r}", lineno)
        if i == j:
            raise GraphFormatError(f"self-loop at vertex {i}", lineno)
        edge = (min(i, j), max(i, j))
        if edge in seen:
            raise GraphFormatError(f"duplicate edge {edge} (first seen at line {seen[edge]})", lineno)
        seen[edge] = lineno
        edges.append(edge)
    if n is None:
        raise GraphFormatError("missing header 'n <count>'", 1)
    return GraphInstance(n=n, edges=tuple(edges))


def read_edge_list(path: Path) -> GraphInstance:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Graph file not found at {path}")
    return parse_edge_list(path.read_text(encoding="ascii"))


def format_edge_list(g: GraphInstance) -> str:
    lines = [f"n {g.n}"] + [f"{i} {j}" for i, j in g.edges]
    return "\n".join(lines) + "\n"


def bitstring_to_index(z: str) -> int:
    return sum(1 << i for i, bit in enumerate(z) if bit == "1")


def index_to_bitstring(index: int, n: int) -> str:
    return "".join("1" if (index >> i) & 1 else "0" for i in range(n))


def complement(z: str) -> str:
    return z.translate(str.maketrans("01", "10"))


def cut_value(g: GraphInstance, z: str) -> int:
    """Number of edges whose endpoints carry different bits."""
    if len(z) != g.n:
        raise ValueError(f"Bitstring {z!r} has {len(z)} bits, expected {g.n}")
    if set(z) - {"0", "1"}:
        raise ValueError(f"Bitstring {z!r} contains characters other than 0/1")
    return sum(1 for i, j in g.edges if z[i] != z[j])


def cut_table(g: GraphInstance) -> np.ndarray:
    """Cut value of every basis index, by bitmask enumeration."""
    masks = np.arange(g.dimension, dtype=np.int64)
    table = np.zeros(g.dimension, dtype=np.int64)
    for i, j in g.edges:
        table += ((masks >> i) ^ (masks >> j)) & 1
    return table


def brute_force_optimum(g: GraphInstance, max_qubits: int = MAX_QUBITS) -> CutOracleResult:
    """Exhaustive MaxCut over all 2^n bitstrings."""
    check_size(g.n, max_qubits)
    table = cut_table(g)
    c_star = int(table.max())
    winners = np.flatnonzero(table == c_star)
    optimal_set = sorted(index_to_bitstring(int(b), g.n) for b in winners)
    logger.debug("Oracle for %s: C*=%d, degeneracy=%d", g.describe(), c_star, len(optimal_set))
    return CutOracleResult(c_star=c_star, degeneracy=len(optimal_set), optimal_set=optimal_set)


def is_bipartite(g: GraphInstance) -> bool:
    return nx.is_bipartite(g.to_networkx())
