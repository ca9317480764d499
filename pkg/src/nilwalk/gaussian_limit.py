"""Gaussian semigroup on a stratified group, handled through its moments.

The generator is  1/2 sum_ij A_ij a_i a_j + sum_i b_i a_i  (A over layer 1, b
over layer 2).  The measure nu = nu_1 is never represented by a density;
polynomial test functions only need its moment table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .errors import AssumptionError, DimensionError, DomainError
from .nilgroup import StratifiedAlgebra
from .polyalg import MultiIndex, Polynomial, as_fraction, determinant, indices_up_to
from .realization import Realization
from .walk_moments import WalkSample, block_rng


@dataclass(frozen=True)
class GaussianSpec:
    A: tuple[tuple[Fraction, ...], ...]
    b: tuple[Fraction, ...]

    @classmethod
    def make(cls, A: Sequence[Sequence], b: Sequence = ()) -> "GaussianSpec":
        mat = tuple(tuple(as_fraction(v) for v in row) for row in A)
        n = len(mat)
        if any(len(row) != n for row in mat):
            raise DimensionError("covariance must be square")
        if any(mat[i][j] != mat[j][i] for i in range(n) for j in range(n)):
            raise AssumptionError("covariance is not symmetric")
        for size in range(1, n + 1):
            for rows in combinations(range(n), size):
                if determinant([[mat[i][j] for j in rows] for i in rows]) < 0:
                    raise AssumptionError("covariance is not positive semidefinite")
        return cls(mat, tuple(as_fraction(v) for v in b))

    def check_algebra(self, alg: StratifiedAlgebra) -> None:
        d1 = len(alg.layer_indices(1))
        d2 = len(alg.layer_indices(2)) if alg.step >= 2 else 0
        if len(self.A) != d1 or len(self.b) != d2:
            raise DimensionError(f"Gaussian parameters have A {len(self.A)}x{len(self.A)} and b of length {len(self.b)}; "
                                 f"algebra needs {d1} and {d2}")


def _degree(alg: StratifiedAlgebra, index: Sequence[int]) -> int:
    return sum(w * e for w, e in zip(alg.weights, index))


def _base_case(spec: GaussianSpec, alg: StratifiedAlgebra, index: MultiIndex) -> Fraction:
    """Moments of weighted degree 2: A_ij for [i]+[j] in layer 1, b_i for [i] in layer 2."""
    first = alg.layer_indices(1)
    second = alg.layer_indices(2) if alg.step >= 2 else []
    support = [k for k, e in enumerate(index) for _ in range(e)]
    if len(support) == 2:
        i, j = support
        return spec.A[first.index(i)][first.index(j)]
    (k,) = support
    return spec.b[second.index(k)]


def gaussian_moments(spec: GaussianSpec, alg: StratifiedAlgebra, dmax: int) -> dict[MultiIndex, Fraction]:
    """m^I for d(I) <= dmax by the doubling recursion (nu = nu_{1/2} * nu_{1/2})."""
    spec.check_algebra(alg)
    table: dict[MultiIndex, Fraction] = {}
    for index in indices_up_to(alg.weights, dmax):
        d = _degree(alg, index)
        if d == 0:
            table[index] = Fraction(1)
        elif d % 2:
            table[index] = Fraction(0)
        elif d == 2:
            table[index] = _base_case(spec, alg, index)
        else:
            denom = 2 ** (d // 2) - 2
            if denom == 0:
                raise ArithmeticError("recursion reached weighted degree 2")
            acc = Fraction(0)
            for (J, K), c in alg.cbh_coefficients(index).items():
                if any(J) and any(K):
                    acc += c * table[J] * table[K]
            table[index] = acc / denom
    return table


def gaussian_moments_closed(spec: GaussianSpec, alg: StratifiedAlgebra, index: Sequence[int]) -> Fraction:
    """Even moment as (1/k!) sum over k-fold CBH coefficients of products of degree-2 moments."""
    index = tuple(index)
    d = _degree(alg, index)
    if d % 2:
        return Fraction(0)
    k = d // 2
    if k == 0:
        return Fraction(1)
    acc = Fraction(0)
    for parts, c in alg.multi_cbh_coefficients(index, k).items():
        if all(_degree(alg, J) == 2 for J in parts):
            term = c
            for J in parts:
                term *= _base_case(spec, alg, J)
            acc += term
    return acc / math.factorial(k)


def semigroup_moment(table: Mapping[MultiIndex, Fraction], alg: StratifiedAlgebra, t, index: Sequence[int]):
    """m^I for nu_t, which is t^{d(I)/2} m^I."""
    if not float(t) > 0:
        raise DomainError("time must be positive")
    index = tuple(index)
    d = _degree(alg, index)
    if d % 2:
        return Fraction(0)
    base = table[index]
    if isinstance(t, float):
        return float(base) * t ** (d // 2)
    return base * as_fraction(t) ** (d // 2)


def time_scaled(table: Mapping[MultiIndex, Fraction], alg: StratifiedAlgebra, t) -> dict[MultiIndex, Fraction]:
    if t == 0:
        return {I: Fraction(1 if not any(I) else 0) for I in table}
    return {I: semigroup_moment(table, alg, t, I) for I in table}


def product_moment(alg: StratifiedAlgebra, left: Mapping[MultiIndex, Fraction], right: Mapping[MultiIndex, Fraction],
                   index: Sequence[int]) -> Fraction:
    """Moment of the convolution of two independent laws given their moment tables."""
    return sum((c * left[J] * right[K] for (J, K), c in alg.cbh_coefficients(tuple(index)).items()), Fraction(0))


def heat_apply(f: Polynomial, spec: GaussianSpec, alg: StratifiedAlgebra, t, g: Sequence,
               table: Mapping[MultiIndex, Fraction] | None = None):
    """e^{tA} f(g) = sum_I S^I f(g) m^I_{nu_t}: a finite exact sum for polynomial f."""
    dmax = max(f.degree({"x": alg.weights}), 0)
    table = table or gaussian_moments(spec, alg, dmax)
    if t == 0:
        return f.evaluate({"x": g})
    total = 0
    for index, coeff in alg.taylor_expansion(f, "right").items():
        moment = semigroup_moment(table, alg, t, index)
        if moment:
            total = coeff.evaluate({"g": g}) * moment + total
    return total


def generator_apply(f: Polynomial, spec: GaussianSpec, alg: StratifiedAlgebra) -> Polynomial:
    """(1/2 sum A_ij a_i a_j + sum b_i a_i) f as a polynomial."""
    spec.check_algebra(alg)
    first = alg.layer_indices(1)
    second = alg.layer_indices(2) if alg.step >= 2 else []
    out = Polynomial.zero(f.blocks)
    singles = {i: alg.field(f, i) for i in first}
    for a, i in enumerate(first):
        for c, j in enumerate(first):
            if spec.A[a][c]:
                out = out + alg.field(singles[j], i).scale(spec.A[a][c] / 2)
    for a, i in enumerate(second):
        if spec.b[a]:
            out = out + alg.field(f, i).scale(spec.b[a])
    return out


def approx_operator(f: Polynomial, alg: StratifiedAlgebra, r: Realization, eps, x: str):
    """f(tau_eps(Phi(x))); exact for rational or surd eps."""
    return f.evaluate({"x": alg.dilate(eps, r.positions[x])})


def mc_heat(spec: GaussianSpec, alg: StratifiedAlgebra, t: float, count: int, seed: int, steps: int = 64,
            block_size: int = 1 << 16) -> WalkSample:
    """Product of ``steps`` small Gaussian increments approximating nu_t."""
    if count < 1 or steps < 1:
        raise DomainError("count and steps must be positive")
    spec.check_algebra(alg)
    first = alg.layer_indices(1)
    second = alg.layer_indices(2) if alg.step >= 2 else []
    cov = np.array([[float(v) for v in row] for row in spec.A])
    vals, vecs = np.linalg.eigh(cov)
    root = vecs * np.sqrt(np.clip(vals, 0, None))
    dt = float(t) / steps
    drift = np.zeros(alg.dim)
    for a, i in enumerate(second):
        drift[i] = float(spec.b[a]) * dt
    parts = []
    for block in range((count + block_size - 1) // block_size):
        size = min(block_size, count - block * block_size)
        rng = block_rng(seed, block)
        pos = np.zeros((size, alg.dim))
        for _ in range(steps):
            inc = np.tile(drift, (size, 1))
            inc[:, first] = math.sqrt(dt) * rng.standard_normal((size, len(first))) @ root.T
            pos = alg.group_mul_array(pos, inc)
        parts.append(pos)
    return WalkSample(seed, steps, "", np.zeros(count, dtype=int), np.concatenate(parts))
