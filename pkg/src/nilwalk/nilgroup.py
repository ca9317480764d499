"""Stratified nilpotent Lie groups of step at most three.

Points are written in exponential coordinates of the first kind, so the group
law is the closed BCH polynomial

    x * y = x + y + 1/2 [x, y] + 1/12 [x, [x, y]] + 1/12 [y, [y, x]]

which is exact once all brackets of length four vanish.
"""
from __future__ import annotations

import math
from fractions import Fraction
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .errors import AlgebraError, DimensionError, DomainError, UnsupportedStepError
from .polyalg import (MultiIndex, Polynomial, as_fraction, indices_up_to, layer_weights,
                      rank_rational, unit_index)

HALF = Fraction(1, 2)
TWELFTH = Fraction(1, 12)

_CBH_CACHE: dict = {}
_LAW_CACHE: dict = {}


class StratifiedAlgebra:
    """Graded nilpotent Lie algebra given by structure constants.

    ``structure_constants`` holds entries ``(i, j, k, c)`` with 0-based indices
    meaning [a_i, a_j] contains c * a_k.  Missing antisymmetric partners are
    filled in; contradicting ones are rejected.
    """

    def __init__(self, layer_dims: Sequence[int], structure_constants: Iterable = (), name: str = ""):
        dims = tuple(int(d) for d in layer_dims)
        if not dims or any(d < 1 for d in dims):
            raise AlgebraError(f"layer dimensions must be positive, got {dims}")
        if len(dims) > 3:
            raise UnsupportedStepError(f"unsupported step {len(dims)}: only step <= 3 is implemented")
        self.name = name
        self.layer_dims = dims
        self.weights = layer_weights(dims)
        self.dim = len(self.weights)
        self.step = len(dims)

        table: dict[tuple[int, int], dict[int, Fraction]] = {}
        given: dict[tuple[int, int, int], Fraction] = {}
        for entry in structure_constants:
            i, j, k, c = entry
            i, j, k, c = int(i), int(j), int(k), as_fraction(c)
            for idx in (i, j, k):
                if not 0 <= idx < self.dim:
                    raise AlgebraError(f"structure constant index {idx} out of range 0..{self.dim - 1}")
            if (i, j, k) in given and given[(i, j, k)] != c:
                raise AlgebraError(f"conflicting entries for [a{i + 1}, a{j + 1}] component a{k + 1}")
            given[(i, j, k)] = c
        for (i, j, k), c in given.items():
            if c == 0:
                continue
            if i == j:
                raise AlgebraError(f"antisymmetry violated: [a{i + 1}, a{i + 1}] has component a{k + 1}")
            if (j, i, k) in given and given[(j, i, k)] != -c:
                raise AlgebraError(f"antisymmetry violated for [a{i + 1}, a{j + 1}] component a{k + 1}")
            table.setdefault((i, j), {})[k] = c
            table.setdefault((j, i), {})[k] = -c
        self._table = {key: dict(sorted(v.items())) for key, v in sorted(table.items())}
        self._validate()
        self.key = (dims, tuple((i, j, k, c) for (i, j), row in self._table.items()
                                for k, c in row.items() if i < j))
        self._sparse_float = tuple((i, j, k, float(c)) for (i, j), row in self._table.items()
                                   for k, c in row.items())

    # ------------------------------------------------------------ validation
    def _validate(self) -> None:
        w = self.weights
        for (i, j), row in self._table.items():
            for k in row:
                if w[k] != w[i] + w[j]:
                    raise AlgebraError(
                        f"grading violated: [a{i + 1}, a{j + 1}] has component a{k + 1} in layer {w[k]}")
        basis = [unit_index(i, self.dim) for i in range(self.dim)]
        for i, j, k in product(range(self.dim), repeat=3):
            if i < j < k:
                a, b, c = basis[i], basis[j], basis[k]
                jac = [x + y + z for x, y, z in zip(self.bracket(a, self.bracket(b, c)),
                                                     self.bracket(b, self.bracket(c, a)),
                                                     self.bracket(c, self.bracket(a, b)))]
                if any(jac):
                    raise AlgebraError(f"Jacobi identity fails on (a{i + 1}, a{j + 1}, a{k + 1})")
        first = self.layer_indices(1)
        for layer in range(2, self.step + 1):
            rows = [self.bracket(basis[i], basis[j]) for i in first for j in self.layer_indices(layer - 1)]
            target = self.layer_indices(layer)
            projected = [[row[k] for k in target] for row in rows]
            if rank_rational(projected) < len(target):
                raise AlgebraError(f"layer 1 does not generate layer {layer}")

    # ------------------------------------------------------------ structure
    def layer_indices(self, layer: int) -> list[int]:
        return [k for k, w in enumerate(self.weights) if w == layer]

    def structure_constants(self) -> list[tuple[int, int, int, Fraction]]:
        return [(i, j, k, c) for (i, j), row in self._table.items() for k, c in row.items()]

    def identity(self) -> tuple:
        return (Fraction(0),) * self.dim

    def _check(self, v: Sequence) -> None:
        if len(v) != self.dim:
            raise DimensionError(f"vector of length {len(v)} for an algebra of dimension {self.dim}")

    def bracket(self, a: Sequence, b: Sequence) -> list:
        """Lie bracket; works for any coefficient ring (rationals, floats, polynomials)."""
        self._check(a)
        self._check(b)
        out: list = [0] * self.dim
        for (i, j), row in self._table.items():
            ai, bj = a[i], b[j]
            if _is_zero(ai) or _is_zero(bj):
                continue
            prod_ij = ai * bj
            for k, c in row.items():
                out[k] = out[k] + c * prod_ij
        return out

    def group_mul(self, x: Sequence, y: Sequence) -> tuple:
        self._check(x)
        self._check(y)
        xy = self.bracket(x, y)
        out = [xi + yi + HALF * b for xi, yi, b in zip(x, y, xy)]
        if self.step >= 3:
            t1 = self.bracket(x, xy)
            t2 = self.bracket(y, [-v for v in xy])
            out = [o + TWELFTH * (u + v) for o, u, v in zip(out, t1, t2)]
        return tuple(out)

    def inverse(self, x: Sequence) -> tuple:
        self._check(x)
        return tuple(-v for v in x)

    def product(self, *elements: Sequence) -> tuple:
        out = self.identity()
        for e in elements:
            out = self.group_mul(out, e)
        return out

    def dilate(self, eps, x: Sequence) -> tuple:
        """tau_eps: multiply layer-k coordinates by eps**k."""
        if not float(eps) > 0:
            raise DomainError(f"dilation factor must be positive, got {eps}")
        self._check(x)
        powers = {w: eps ** w for w in set(self.weights)}
        return tuple(powers[w] * v for w, v in zip(self.weights, x))

    def hom_norm(self, x: Sequence):
        """sum_i |x_i|^{1/weight_i}; exact when every root is rational."""
        self._check(x)
        parts = [_root(abs(v), w) for v, w in zip(x, self.weights)]
        if all(isinstance(p, Fraction) for p in parts):
            return sum(parts, Fraction(0))
        return float(sum(float(p) for p in parts))

    # ------------------------------------------------------------ float path
    def group_mul_array(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Vectorized float group law on arrays of shape (..., D)."""
        xy = self._bracket_array(x, y)
        out = x + y + 0.5 * xy
        if self.step >= 3:
            out = out + (self._bracket_array(x, xy) - self._bracket_array(y, xy)) / 12.0
        return out

    def _bracket_array(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        out = np.zeros(np.broadcast_shapes(x.shape, y.shape))
        for i, j, k, c in self._sparse_float:
            out[..., k] += c * x[..., i] * y[..., j]
        return out

    # ------------------------------------------------------------ polynomial laws
    def law_polynomials(self, left: str = "x", right: str = "y") -> tuple[Polynomial, ...]:
        """Coordinates of left * right as polynomials over the two blocks."""
        return self.product_polynomials([left, right])

    def product_polynomials(self, names: Sequence[str]) -> tuple[Polynomial, ...]:
        """Coordinates of the product of symbolic points named ``names`` (in order)."""
        names = tuple(names)
        key = (self.key, names)
        if key not in _LAW_CACHE:
            blocks = tuple((n, self.dim) for n in names)
            zero = Polynomial.zero(blocks)
            out = [zero] * self.dim
            for n in names:
                point = [Polynomial.variable(blocks, n, k) for k in range(self.dim)]
                out = [zero + v for v in self.group_mul(out, point)]
            _LAW_CACHE[key] = tuple(out)
        return _LAW_CACHE[key]

    def compose_with_product(self, f: Polynomial, names: Sequence[str], block: str = "x") -> Polynomial:
        """f(p_1 * p_2 * ... ) as a polynomial over the blocks ``names``."""
        coords = self.product_polynomials(names)
        return f.substitute_block(block, list(coords), coords[0].blocks)

    def cbh_coefficients(self, index: Sequence[int]) -> dict[tuple[MultiIndex, MultiIndex], Fraction]:
        """{(J, K): C} with (x*y)^I = sum C x^J y^K, trivial terms included."""
        index = tuple(index)
        self._check(index)
        key = (self.key, index)
        if key not in _CBH_CACHE:
            blocks = (("x", self.dim),)
            mono = Polynomial.monomial(blocks, {"x": index})
            expanded = self.compose_with_product(mono, ["x", "y"])
            table = {}
            for exps, c in expanded.terms():
                table[(exps[:self.dim], exps[self.dim:])] = c
            _CBH_CACHE[key] = table
        return dict(_CBH_CACHE[key])

    def multi_cbh_coefficients(self, index: Sequence[int], factors: int) -> dict[tuple[MultiIndex, ...], Fraction]:
        """Coefficients of (x_1 * ... * x_k)^I in the monomials of the k factors."""
        index = tuple(index)
        names = [f"p{i}" for i in range(factors)]
        mono = Polynomial.monomial((("x", self.dim),), {"x": index})
        expanded = self.compose_with_product(mono, names)
        out = {}
        for exps, c in expanded.terms():
            out[tuple(exps[i * self.dim:(i + 1) * self.dim] for i in range(factors))] = c
        return out

    # ------------------------------------------------------------ Taylor coefficients
    def taylor_expansion(self, f: Polynomial, side: str = "right", base: str = "g") -> dict[MultiIndex, Polynomial]:
        """{I: coefficient of y^I} in f(g*y) (right) or f(y*g) (left), symbolic in g."""
        if side not in ("right", "left"):
            raise ValueError("side must be 'right' or 'left'")
        order = [base, "y"] if side == "right" else ["y", base]
        composed = self.compose_with_product(f, order)
        return composed.split("y")

    def taylor_coeff(self, f: Polynomial, index: Sequence[int], g: Sequence | None = None,
                     side: str = "right"):
        """Coefficient of y^I in f(g*y) (right, the hat operator) or f(y*g) (left).

        With ``g=None`` the result is a polynomial in the block ``g``; otherwise it
        is evaluated at ``g`` (any ring with + and *).
        """
        index = tuple(index)
        self._check(index)
        coeff = self.taylor_expansion(f, side).get(index, Polynomial.zero((("g", self.dim),)))
        if g is None:
            return coeff
        self._check(g)
        return coeff.evaluate({"g": g})

    def field(self, f: Polynomial, k: int) -> Polynomial:
        """Left-invariant derivative a_k f, i.e. d/ds f(x * s a_k) at s = 0."""
        coeff = self.taylor_expansion(f, "right").get(unit_index(k, self.dim))
        if coeff is None:
            return Polynomial.zero((("x", self.dim),))
        return _rename_block(coeff, "g", "x")


def _rename_block(p: Polynomial, old: str, new: str) -> Polynomial:
    blocks = tuple((new if n == old else n, s) for n, s in p.blocks)
    return Polynomial(blocks, dict(p.terms()))


def _is_zero(v) -> bool:
    if isinstance(v, Polynomial):
        return v.is_zero()
    try:
        return v == 0
    except (TypeError, ValueError):
        return False


def _root(q, k: int):
    """k-th root of a non-negative number, exact for perfect powers of rationals."""
    if k == 1:
        return q if isinstance(q, Fraction) else (Fraction(q) if isinstance(q, int) else q)
    if isinstance(q, (Fraction, int)):
        q = Fraction(q)
        num, den = _int_root(q.numerator, k), _int_root(q.denominator, k)
        if num is not None and den is not None:
            return Fraction(num, den)
    return float(q) ** (1.0 / k)


def _int_root(n: int, k: int) -> int | None:
    if k == 2:
        r = math.isqrt(n)
    else:
        r = round(n ** (1.0 / k)) if n < 2 ** 1000 else int(round(math.exp(math.log(n) / k)))
        while r ** k > n:
            r -= 1
        while (r + 1) ** k <= n:
            r += 1
    return r if r ** k == n else None


# ---------------------------------------------------------------- bundled algebras

def abelian(dim: int) -> StratifiedAlgebra:
    return StratifiedAlgebra([dim], [], name=f"abelian R^{dim}")


def heisenberg(m: int = 1) -> StratifiedAlgebra:
    """Heisenberg algebra of dimension 2m+1 with [a_i, a_{i+m}] = a_{2m+1}."""
    consts = [(i, i + m, 2 * m, 1) for i in range(m)]
    return StratifiedAlgebra([2 * m, 1], consts, name=f"heisenberg H^{2 * m + 1}")


def engel() -> StratifiedAlgebra:
    """Step-3 Engel algebra: [a1, a2] = a3, [a1, a3] = a4."""
    return StratifiedAlgebra([2, 1, 1], [(0, 1, 2, 1), (0, 2, 3, 1)], name="engel")


def to_polarized(x: Sequence, m: int = 1) -> tuple:
    """Heisenberg first-kind coordinates -> coordinates with product x_c + y_c + sum x_k y_{k+m}."""
    center = x[2 * m] + sum(HALF * x[k] * x[k + m] for k in range(m))
    return tuple(x[:2 * m]) + (center,)


def from_polarized(p: Sequence, m: int = 1) -> tuple:
    center = p[2 * m] - sum(HALF * p[k] * p[k + m] for k in range(m))
    return tuple(p[:2 * m]) + (center,)


def indices_for(alg: StratifiedAlgebra, dmax: int) -> list[MultiIndex]:
    return indices_up_to(alg.weights, dmax)


def weighted_degree_of(alg: StratifiedAlgebra, index: Sequence[int]) -> int:
    return sum(w * e for w, e in zip(alg.weights, index))
