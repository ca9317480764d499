"""Finite base graph with transition probabilities and its spectral data.

Functions on the vertex set are plain sequences aligned with
``QuotientGraph.vertices``.  The inner product is <f, g> = sum f(x) conj(g(x)).
"""
from __future__ import annotations

import cmath
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import SpectralError, ValidationError
from .polyalg import as_fraction, solve_rational


@dataclass(frozen=True)
class Edge:
    id: str
    origin: str
    terminus: str
    inverse: str
    p: Fraction


class QuotientGraph:
    """Directed multigraph whose edges come in inverse pairs."""

    def __init__(self, vertices: Sequence[str], edges: Sequence[Edge]):
        self.vertices = tuple(str(v) for v in vertices)
        self.edges = tuple(Edge(str(e.id), str(e.origin), str(e.terminus), str(e.inverse), as_fraction(e.p))
                           for e in edges)
        self.index = {v: i for i, v in enumerate(self.vertices)}
        self.edge_by_id = {e.id: e for e in self.edges}
        self.out_edges: dict[str, tuple[Edge, ...]] = {
            v: tuple(e for e in self.edges if e.origin == v) for v in self.vertices}

    def __len__(self) -> int:
        return len(self.vertices)

    def inverse_of(self, e: Edge) -> Edge:
        return self.edge_by_id[e.inverse]

    def apply(self, f: Sequence) -> list:
        """(L f)(x) = sum over edges e leaving x of p(e) f(t(e))."""
        out = []
        for v in self.vertices:
            acc = 0
            for e in self.out_edges[v]:
                if e.p:
                    acc = acc + e.p * f[self.index[e.terminus]]
            out.append(acc)
        return out

    def apply_left(self, mu: Sequence) -> list:
        """(mu L)(y) = sum over edges e into y of mu(o(e)) p(e)."""
        out = [0] * len(self.vertices)
        for e in self.edges:
            if e.p:
                out[self.index[e.terminus]] = out[self.index[e.terminus]] + mu[self.index[e.origin]] * e.p
        return out

    def matrix(self) -> np.ndarray:
        mat = np.zeros((len(self.vertices), len(self.vertices)))
        for e in self.edges:
            mat[self.index[e.origin], self.index[e.terminus]] += float(e.p)
        return mat


def validate(g: QuotientGraph) -> list[str]:
    """Return diagnostics; an empty list means the graph is valid."""
    problems: list[str] = []
    if not g.vertices:
        return ["graph has no vertices"]
    if len(set(g.vertices)) != len(g.vertices):
        problems.append("duplicate vertex ids")
    if len(g.edge_by_id) != len(g.edges):
        problems.append("duplicate edge ids")
    for e in g.edges:
        for end in (e.origin, e.terminus):
            if end not in g.index:
                problems.append(f"edge {e.id}: unknown vertex {end!r}")
        if e.p < 0 or e.p > 1:
            problems.append(f"edge {e.id}: probability {e.p} outside [0, 1]")
        inv = g.edge_by_id.get(e.inverse)
        if inv is None:
            problems.append(f"edge {e.id}: inverse edge {e.inverse!r} does not exist")
            continue
        if inv.inverse != e.id:
            problems.append(f"edge {e.id}: inverse pairing is not an involution ({e.inverse} -> {inv.inverse})")
        if inv.origin != e.terminus or inv.terminus != e.origin:
            problems.append(f"edge {e.id}: inverse {inv.id} does not reverse its endpoints")
        if e.p + inv.p <= 0:
            problems.append(f"edge {e.id}: p(e) + p(inverse) must be positive")
    if problems:
        return problems
    for v in g.vertices:
        total = sum((e.p for e in g.out_edges[v]), Fraction(0))
        if total != 1:
            problems.append(f"vertex {v}: outgoing probabilities sum to {total}, expected 1")
    if not problems and not _strongly_connected(g):
        problems.append("chain is not irreducible: the positive-probability edges are not strongly connected")
    return problems


def check(g: QuotientGraph) -> QuotientGraph:
    problems = validate(g)
    if problems:
        raise ValidationError(problems)
    return g


def _reach(g: QuotientGraph, start: str, forward: bool) -> set[str]:
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for e in g.edges:
            if e.p <= 0:
                continue
            a, b = (e.origin, e.terminus) if forward else (e.terminus, e.origin)
            if a == v and b not in seen:
                seen.add(b)
                queue.append(b)
    return seen


def _strongly_connected(g: QuotientGraph) -> bool:
    start = g.vertices[0]
    everything = set(g.vertices)
    return _reach(g, start, True) == everything and _reach(g, start, False) == everything


def invariant_measure(g: QuotientGraph) -> list[Fraction]:
    """Exact stationary distribution m with m L = m and sum m = 1."""
    n = len(g.vertices)
    # rows: stationarity at vertices 1..n-1, then normalization
    rows = []
    for y in range(1, n):
        row = [Fraction(0)] * n
        row[y] -= 1
        for e in g.edges:
            if e.p and g.index[e.terminus] == y:
                row[g.index[e.origin]] += e.p
        rows.append(row)
    rows.append([Fraction(1)] * n)
    rhs = [Fraction(0)] * (n - 1) + [Fraction(1)]
    m = solve_rational(rows, rhs)
    if g.apply_left(m) != m:
        raise SpectralError("stationarity residual is non-zero")
    return m


def period_and_classes(g: QuotientGraph) -> tuple[int, list[int]]:
    """Period K0 and the cyclic class of each vertex; the first vertex in sorted order has class 0."""
    root = min(g.vertices)
    level = {root: 0}
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for e in g.out_edges[v]:
            if e.p and e.terminus not in level:
                level[e.terminus] = level[v] + 1
                queue.append(e.terminus)
    period = 0
    for e in g.edges:
        if e.p:
            period = math.gcd(period, abs(level[e.origin] + 1 - level[e.terminus]))
    period = period or 1
    return period, [level[v] % period for v in g.vertices]


@dataclass(frozen=True)
class SpectralData:
    m: tuple[Fraction, ...]
    period: int
    classes: tuple[int, ...]
    alphas: tuple[complex, ...]
    phis: tuple[np.ndarray, ...]
    psis: tuple[np.ndarray, ...]
    residual_radius: float
    spectral_radius: float

    @property
    def K0(self) -> int:
        return self.period


def _inner(f: np.ndarray, h: np.ndarray) -> complex:
    return complex(np.sum(f * np.conj(h)))


def peripheral_eigens(g: QuotientGraph, m: Sequence[Fraction], period: int, classes: Sequence[int],
                      tol: float = 1e-12) -> SpectralData:
    """Class-phase eigenpairs phi_j = |V|^{-1/2} a_j^c, psi_j = |V|^{1/2} m a_j^c, verified numerically."""
    n = len(g.vertices)
    mvec = np.array([float(x) for x in m])
    cls = np.array(classes)
    mat = g.matrix()
    alphas, phis, psis = [], [], []
    for j in range(period):
        alpha = cmath.exp(2j * cmath.pi * j / period)
        phase = np.exp(2j * np.pi * j * cls / period)
        phi = phase / math.sqrt(n)
        psi = math.sqrt(n) * mvec * phase
        if np.max(np.abs(mat @ phi - alpha * phi)) > tol:
            raise SpectralError(f"L phi_{j} != alpha_{j} phi_{j}")
        # adjoint relation <L f, psi> = alpha <f, psi> for all f
        if np.max(np.abs(np.conj(psi) @ mat - alpha * np.conj(psi))) > tol:
            raise SpectralError(f"psi_{j} is not a left eigenfunction")
        alphas.append(alpha)
        phis.append(phi)
        psis.append(psi)
    for i in range(period):
        for j in range(period):
            if abs(_inner(phis[i], psis[j]) - (1.0 if i == j else 0.0)) > tol:
                raise SpectralError(f"biorthogonality fails for ({i}, {j})")
    projector = np.eye(n, dtype=complex) - sum(np.outer(phi, np.conj(psi)) for phi, psi in zip(phis, psis))
    restricted = mat @ projector
    eig = np.linalg.eigvals(restricted)
    spectral_radius = float(np.max(np.abs(eig))) if n else 0.0
    radius = _gelfand_bound(restricted, spectral_radius)
    if not radius < 1:
        raise SpectralError(f"residual operator norm bound {radius} is not below 1")
    return SpectralData(tuple(m), period, tuple(int(c) for c in classes), tuple(alphas), tuple(phis),
                        tuple(psis), radius, spectral_radius)


def _gelfand_bound(mat: np.ndarray, spectral_radius: float, steps: int = 200, floor: float = 1e-13) -> float:
    """max over n <= steps of ||M^n||^{1/n}, ignoring powers already below ``floor``.

    Each term bounds the spectral radius from above, and by construction
    ||M^n f|| <= radius^n ||f|| for every n up to ``steps`` above the floor.
    """
    radius = spectral_radius
    power = np.eye(mat.shape[0], dtype=complex)
    for k in range(1, steps + 1):
        power = mat @ power
        norm = np.linalg.norm(power, 2)
        if norm < floor:
            break
        radius = max(radius, norm ** (1.0 / k))
    return float(radius)


def spectral_data(g: QuotientGraph) -> SpectralData:
    m = invariant_measure(g)
    period, classes = period_and_classes(g)
    return peripheral_eigens(g, m, period, classes)


@dataclass(frozen=True)
class Decomposition:
    mean: complex
    peripheral: tuple[complex, ...]   # <f, psi_j> for j = 1 .. K0-1
    residual: np.ndarray


def project_and_decompose(f: Sequence, s: SpectralData) -> Decomposition:
    """f = <f,m> + sum_{j>=1} <f,psi_j> phi_j + residual."""
    vec = np.array([complex(v) for v in f])
    mean = complex(np.sum(vec * np.array([float(x) for x in s.m])))
    coeffs = tuple(_inner(vec, s.psis[j]) for j in range(1, s.period))
    residual = vec - mean - sum((c * s.phis[j] for j, c in enumerate(coeffs, start=1)), np.zeros_like(vec))
    return Decomposition(mean, coeffs, residual)
