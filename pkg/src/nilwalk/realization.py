"""Equivariant realizations: vertex positions plus edge holonomies.

The deck action is never stored explicitly.  Each quotient edge carries the
group element gamma(e) that its canonical lift jumps by, and the increment of
the embedded walk along that lift is

    hop(e) = Phi(o(e))^{-1} * gamma(e) * Phi(t(e)).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import IncompatibleRealizationError, ValidationError
from .nilgroup import StratifiedAlgebra
from .polyalg import as_fraction, solve_rational
from .quotient_graph import Edge, QuotientGraph


@dataclass(frozen=True)
class Realization:
    positions: Mapping[str, tuple[Fraction, ...]]
    holonomies: Mapping[str, tuple[Fraction, ...]]
    _hops: dict = field(default_factory=dict, compare=False, repr=False)

    def position(self, v: str) -> tuple[Fraction, ...]:
        return self.positions[v]


def make_realization(alg: StratifiedAlgebra, g: QuotientGraph, holonomies: Mapping[str, Sequence],
                     positions: Mapping[str, Sequence] | None = None) -> Realization:
    """Build and validate a realization; missing positions default to the identity."""
    hol = {eid: tuple(as_fraction(c) for c in vec) for eid, vec in holonomies.items()}
    pos = {v: tuple(as_fraction(c) for c in (positions or {}).get(v, alg.identity())) for v in g.vertices}
    problems = []
    for e in g.edges:
        if e.id not in hol:
            problems.append(f"edge {e.id}: missing holonomy")
        elif len(hol[e.id]) != alg.dim:
            problems.append(f"edge {e.id}: holonomy has length {len(hol[e.id])}, expected {alg.dim}")
    for v, p in pos.items():
        if len(p) != alg.dim:
            problems.append(f"vertex {v}: position has length {len(p)}, expected {alg.dim}")
    if not problems:
        for e in g.edges:
            if hol[e.inverse] != alg.inverse(hol[e.id]):
                problems.append(f"edge {e.id}: holonomy of inverse edge {e.inverse} is not the group inverse")
    if problems:
        raise ValidationError(problems)
    return Realization(pos, hol)


def hop(alg: StratifiedAlgebra, r: Realization, e: Edge) -> tuple[Fraction, ...]:
    cached = r._hops.get((alg.key, e.id))
    if cached is None:
        cached = alg.product(alg.inverse(r.positions[e.origin]), r.holonomies[e.id], r.positions[e.terminus])
        r._hops[(alg.key, e.id)] = cached
    return cached


def edge_weights(g: QuotientGraph, m: Sequence[Fraction]) -> dict[str, Fraction]:
    """m~(e) = p(e) m(o(e))."""
    return {e.id: e.p * m[g.index[e.origin]] for e in g.edges}


def asymptotic_direction(alg: StratifiedAlgebra, g: QuotientGraph, m: Sequence[Fraction],
                         r: Realization) -> tuple[Fraction, ...]:
    """Layer-1 drift sum_e m~(e) hop(e)^{(1)}."""
    first = alg.layer_indices(1)
    weights = edge_weights(g, m)
    out = [Fraction(0)] * len(first)
    for e in g.edges:
        h = hop(alg, r, e)
        for slot, k in enumerate(first):
            out[slot] += weights[e.id] * h[k]
    return tuple(out)


def is_centered(direction: Sequence) -> bool:
    return all(as_fraction(c) == 0 for c in direction)


def is_symmetric(g: QuotientGraph, m: Sequence[Fraction]) -> bool:
    w = edge_weights(g, m)
    return all(w[e.id] == w[e.inverse] for e in g.edges)


def harmonic_residual(alg: StratifiedAlgebra, g: QuotientGraph, m: Sequence[Fraction],
                      r: Realization) -> dict[str, tuple[Fraction, ...]]:
    """Per vertex: sum_e p(e) hop(e)^{(1)} minus the asymptotic direction."""
    rho = asymptotic_direction(alg, g, m, r)
    first = alg.layer_indices(1)
    out = {}
    for v in g.vertices:
        acc = [Fraction(0)] * len(first)
        for e in g.out_edges[v]:
            h = hop(alg, r, e)
            for slot, k in enumerate(first):
                acc[slot] += e.p * h[k]
        out[v] = tuple(a - b for a, b in zip(acc, rho))
    return out


def solve_modified_harmonic(alg: StratifiedAlgebra, g: QuotientGraph, m: Sequence[Fraction],
                            holonomies: Mapping[str, Sequence], anchor: str | None = None,
                            higher: Mapping[str, Sequence] | None = None) -> Realization:
    """Positions whose mean layer-1 increment equals the asymptotic direction everywhere.

    The anchor is pinned at layer-1 zero.  Higher-layer coordinates come from
    ``higher`` (full-length vectors whose layer-1 part is ignored) or are zero.
    """
    base = make_realization(alg, g, holonomies)
    anchor = anchor if anchor is not None else g.vertices[0]
    first = alg.layer_indices(1)
    rho = asymptotic_direction(alg, g, m, base)
    unknowns = [v for v in g.vertices if v != anchor]
    col = {v: i for i, v in enumerate(unknowns)}
    layer1 = {v: [Fraction(0)] * len(first) for v in g.vertices}
    if unknowns:
        # sum_e p(e) (Phi(t) - Phi(x)) = rho - sum_e p(e) gamma(e)^{(1)} for x != anchor
        mat, rhs = [], []
        for v in unknowns:
            row = [Fraction(0)] * len(unknowns)
            target = list(rho)
            for e in g.out_edges[v]:
                if not e.p:
                    continue
                if e.terminus != anchor:
                    row[col[e.terminus]] += e.p
                row[col[v]] -= e.p
                gamma = base.holonomies[e.id]
                for slot, k in enumerate(first):
                    target[slot] -= e.p * gamma[k]
            mat.append(row)
            rhs.append(target)
        solution = solve_rational(mat, rhs)
        for v, values in zip(unknowns, solution):
            layer1[v] = list(values)
    positions = {}
    for v in g.vertices:
        full = [Fraction(0)] * alg.dim
        if higher and v in higher:
            full = [as_fraction(c) for c in higher[v]]
        for slot, k in enumerate(first):
            full[k] = layer1[v][slot]
        positions[v] = tuple(full)
    result = make_realization(alg, g, base.holonomies, positions)
    residual = harmonic_residual(alg, g, m, result)
    if any(is_centered(vec) is False for vec in residual.values()):
        raise ArithmeticError("modified harmonic residual is non-zero")
    return result


def corrector_norm(alg: StratifiedAlgebra, a: Realization, b: Realization):
    """max over vertices of |Phi_a(x)^{-1} * Phi_b(x)| in the homogeneous norm."""
    if dict(a.holonomies) != dict(b.holonomies):
        raise IncompatibleRealizationError("realizations carry different holonomies")
    if set(a.positions) != set(b.positions):
        raise IncompatibleRealizationError("realizations are defined on different vertex sets")
    norms = [alg.hom_norm(alg.group_mul(alg.inverse(a.positions[v]), b.positions[v])) for v in sorted(a.positions)]
    return max(norms, key=float)
