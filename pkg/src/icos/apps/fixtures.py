"""Graphs, moment data and covariance fixtures."""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph stored as a 0/1 hollow symmetric adjacency matrix."""

    adjacency: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(A, A.T) or np.any(np.diag(A) != 0) or not np.all(np.isin(A, (0.0, 1.0))):
            raise ValueError("adjacency must be symmetric, binary and hollow")
        object.__setattr__(self, "adjacency", A)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        A = np.zeros((n, n))
        for i, j in edges:
            if i == j:
                raise ValueError(f"self loop at node {i}")
            A[i, j] = A[j, i] = 1.0
        return cls(A)

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.n) for j in range(i + 1, self.n) if self.adjacency[i, j]]

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int)

    def complement(self) -> "Graph":
        C = 1.0 - self.adjacency
        np.fill_diagonal(C, 0.0)
        return Graph(C)

    def permuted(self, perm) -> "Graph":
        perm = np.asarray(perm)
        return Graph(self.adjacency[np.ix_(perm, perm)])

    def independence_number(self) -> int:
        """Exhaustive search; fine up to a few dozen nodes when sparse, 12 trivially."""
        n = self.n
        nbr = [int(sum(1 << j for j in range(n) if self.adjacency[i, j])) for i in range(n)]
        best = 0

        def grow(cand: int, size: int):
            nonlocal best
            if cand == 0:
                best = max(best, size)
                return
            if size + bin(cand).count("1") <= best:
                return
            i = cand.bit_length() - 1
            grow(cand & ~(1 << i) & ~nbr[i], size + 1)
            grow(cand & ~(1 << i), size)

        grow((1 << n) - 1, 0)
        return best

    # text format: first line n, then one 1-indexed edge per line
    def to_text(self) -> str:
        lines = [str(self.n)] + [f"{i + 1} {j + 1}" for i, j in self.edges()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Graph":
        rows = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        rows = [r for r in rows if r]
        if not rows:
            raise ValueError("empty graph file")
        n = int(rows[0])
        edges = []
        for k, r in enumerate(rows[1:], start=2):
            parts = r.split()
            if len(parts) != 2:
                raise ValueError(f"line {k}: expected two node ids")
            i, j = int(parts[0]) - 1, int(parts[1]) - 1
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"line {k}: node id out of range 1..{n}")
            edges.append((i, j))
        return cls.from_edges(n, edges)


def icosahedron() -> Graph:
    """Pole, upper 5-ring, lower 5-ring (antiprism), pole: 12 nodes, 30 edges."""
    top, bottom = 0, 11
    up = [1 + k for k in range(5)]
    lo = [6 + k for k in range(5)]
    edges = []
    for k in range(5):
        edges.append((top, up[k]))
        edges.append((bottom, lo[k]))
        edges.append((up[k], up[(k + 1) % 5]))
        edges.append((lo[k], lo[(k + 1) % 5]))
        edges.append((up[k], lo[k]))
        edges.append((up[k], lo[(k + 1) % 5]))
    g = Graph.from_edges(12, edges)
    assert len(g.edges()) == 30 and np.all(g.degrees() == 5)
    return g


def icosahedron_complement() -> Graph:
    g = icosahedron().complement()
    assert np.all(g.degrees() == 6)
    return g


@dataclass
class MomentData:
    mu: np.ndarray
    sigma: np.ndarray
    strike: float | None = None

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float).ravel()
        self.sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        m = self.mu.shape[0]
        if self.sigma.shape != (m, m):
            raise ValueError(f"sigma must be {m}x{m}, got {self.sigma.shape}")
        if not np.allclose(self.sigma, self.sigma.T):
            raise ValueError("sigma must be symmetric")

    @property
    def m(self) -> int:
        return self.mu.shape[0]

    @classmethod
    def from_json(cls, text: str) -> "MomentData":
        doc = json.loads(text)
        return cls(doc["mu"], doc["sigma"], doc.get("strike"))

    def to_json(self) -> str:
        doc = {"mu": self.mu.tolist(), "sigma": self.sigma.tolist()}
        if self.strike is not None:
            doc["strike"] = self.strike
        return json.dumps(doc)


def boyle3() -> MomentData:
    """Three assets with equal means 44.21 and exchangeable covariance."""
    s = np.full((3, 3), 164.88)
    np.fill_diagonal(s, 184.04)
    return MomentData(np.full(3, 44.21), s)


def example61_covariance() -> np.ndarray:
    """Covariance of ten observed variables built from three latent factors.

    ``V1 ~ N(0, 290)``, ``V2 ~ N(0, 300)``, ``V3 = -0.3 V1 + 0.925 V2 + e``
    with unit-variance ``e``; observations 1-4 load on V1, 5-8 on V2, 9-10
    on V3, each with independent unit noise.
    """
    v1, v2 = 290.0, 300.0
    v3 = 0.3 ** 2 * v1 + 0.925 ** 2 * v2 + 1.0
    cov = np.array([[v1, 0.0, -0.3 * v1],
                    [0.0, v2, 0.925 * v2],
                    [-0.3 * v1, 0.925 * v2, v3]])
    group = np.array([0] * 4 + [1] * 4 + [2] * 2)
    S = cov[np.ix_(group, group)] + np.eye(10)
    return S
