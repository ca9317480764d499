"""Exact sparse multivariate polynomials over the rationals.

Variables live in named blocks (``x``, ``y``, ``x1`` ...), each block holding
``size`` coordinates.  A monomial is stored as one flat exponent tuple that
concatenates the blocks in declaration order.
"""
from __future__ import annotations

import math
import re
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .errors import CompositionError, DimensionError, SingularSeriesError, SingularSystemError

MultiIndex = tuple[int, ...]
Blocks = tuple[tuple[str, int], ...]


def as_fraction(value) -> Fraction:
    """Convert ints, Fractions and "p/q" strings; floats are refused."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot use {type(value).__name__} {value!r} as an exact rational")


def fraction_str(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------- multi-indices

def layer_weights(layer_dims: Sequence[int]) -> tuple[int, ...]:
    """Layer index of every coordinate, e.g. (2, 1) -> (1, 1, 2)."""
    out: list[int] = []
    for layer, dim in enumerate(layer_dims, start=1):
        out.extend([layer] * dim)
    return tuple(out)


def weighted_degree(index: Sequence[int], layer_dims: Sequence[int]) -> int:
    weights = layer_weights(layer_dims)
    if len(index) != len(weights):
        raise DimensionError(f"multi-index of length {len(index)} for an algebra of dimension {len(weights)}")
    return sum(w * i for w, i in zip(weights, index))


def total_degree(index: Sequence[int]) -> int:
    return sum(index)


def unit_index(j: int, dim: int) -> MultiIndex:
    """The multi-index [j] with a single 1 at position j (0-based)."""
    if not 0 <= j < dim:
        raise DimensionError(f"coordinate {j} out of range for dimension {dim}")
    return tuple(1 if k == j else 0 for k in range(dim))


def index_add(a: Sequence[int], b: Sequence[int]) -> MultiIndex:
    if len(a) != len(b):
        raise DimensionError("multi-index length mismatch")
    return tuple(x + y for x, y in zip(a, b))


def indices_up_to(weights: Sequence[int], dmax: int) -> list[MultiIndex]:
    """All multi-indices with weighted degree <= dmax, ordered by (degree, index)."""
    found: list[MultiIndex] = []

    def rec(pos: int, budget: int, prefix: list[int]) -> None:
        if pos == len(weights):
            found.append(tuple(prefix))
            return
        w = weights[pos]
        for e in range(budget // w + 1):
            prefix.append(e)
            rec(pos + 1, budget - e * w, prefix)
            prefix.pop()

    rec(0, dmax, [])
    return sorted(found, key=lambda idx: (sum(w * e for w, e in zip(weights, idx)), idx))


def index_str(index: Sequence[int]) -> str:
    return "(" + ",".join(str(e) for e in index) + ")"


# ----------------------------------------------------------------- polynomials

def _normalize_blocks(blocks) -> Blocks:
    out = tuple((str(name), int(size)) for name, size in blocks)
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise CompositionError(f"duplicate block names in {names}")
    if any(size < 0 for _, size in out):
        raise DimensionError("negative block size")
    return out


def _mul_terms(a: Mapping[MultiIndex, Fraction], b: Mapping[MultiIndex, Fraction]) -> dict:
    acc: dict[MultiIndex, Fraction] = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            key = tuple(x + y for x, y in zip(ea, eb))
            acc[key] = acc.get(key, 0) + ca * cb
    return acc


class Polynomial:
    """Immutable exact polynomial; zero coefficients are never stored."""

    __slots__ = ("_blocks", "_terms", "_offsets", "_nvars")

    def __init__(self, blocks, terms: Mapping | Iterable = ()):
        self._blocks = _normalize_blocks(blocks)
        self._set_layout()
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[MultiIndex, Fraction] = {}
        for exps, coeff in items:
            exps = tuple(int(e) for e in exps)
            if len(exps) != self._nvars or any(e < 0 for e in exps):
                raise DimensionError(f"exponent tuple {exps} does not fit blocks {self._blocks}")
            acc[exps] = acc.get(exps, 0) + as_fraction(coeff)
        self._terms = {k: acc[k] for k in sorted(acc) if acc[k] != 0}

    def _set_layout(self) -> None:
        offsets = {}
        pos = 0
        for name, size in self._blocks:
            offsets[name] = (pos, size)
            pos += size
        self._offsets = offsets
        self._nvars = pos

    @classmethod
    def _raw(cls, blocks: Blocks, acc: Mapping[MultiIndex, Fraction]) -> "Polynomial":
        obj = cls.__new__(cls)
        obj._blocks = blocks
        obj._set_layout()
        obj._terms = {k: Fraction(acc[k]) for k in sorted(acc) if acc[k] != 0}
        return obj

    # constructors
    @classmethod
    def zero(cls, blocks) -> "Polynomial":
        return cls(blocks)

    @classmethod
    def constant(cls, blocks, value) -> "Polynomial":
        blocks = _normalize_blocks(blocks)
        nvars = sum(s for _, s in blocks)
        return cls(blocks, {(0,) * nvars: as_fraction(value)})

    @classmethod
    def variable(cls, blocks, block: str, idx: int) -> "Polynomial":
        return cls.monomial(blocks, {block: unit_index(idx, dict(_normalize_blocks(blocks))[block])})

    @classmethod
    def monomial(cls, blocks, exponents: Mapping[str, Sequence[int]], coeff=1) -> "Polynomial":
        blocks = _normalize_blocks(blocks)
        sizes = dict(blocks)
        unknown = set(exponents) - set(sizes)
        if unknown:
            raise CompositionError(f"unknown blocks {sorted(unknown)}")
        flat: list[int] = []
        for name, size in blocks:
            part = tuple(exponents.get(name, (0,) * size))
            if len(part) != size:
                raise DimensionError(f"block {name} has size {size}, got exponent {part}")
            flat.extend(part)
        return cls(blocks, {tuple(flat): coeff})

    # basic accessors
    @property
    def blocks(self) -> Blocks:
        return self._blocks

    @property
    def nvars(self) -> int:
        return self._nvars

    def terms(self) -> Iterator[tuple[MultiIndex, Fraction]]:
        return iter(self._terms.items())

    def block_exponent(self, exps: MultiIndex, block: str) -> MultiIndex:
        start, size = self._offsets[block]
        return exps[start:start + size]

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self._terms)

    def constant_term(self) -> Fraction:
        return self._terms.get((0,) * self._nvars, Fraction(0))

    def degree(self, weights: Mapping[str, Sequence[int]] | None = None) -> int:
        """Largest (optionally weighted) degree of a stored monomial; -1 for zero."""
        flat = self._flat_weights(weights)
        return max((sum(w * e for w, e in zip(flat, exps)) for exps in self._terms), default=-1)

    def _flat_weights(self, weights) -> list[int]:
        flat: list[int] = []
        for name, size in self._blocks:
            flat.extend(weights[name] if weights and name in weights else [1] * size)
        return flat

    # arithmetic
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other._blocks != self._blocks:
                raise CompositionError(f"variable blocks differ: {self._blocks} vs {other._blocks}")
            return other
        return Polynomial.constant(self._blocks, as_fraction(other))

    def __add__(self, other) -> "Polynomial":
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        acc = dict(self._terms)
        for k, c in other._terms.items():
            acc[k] = acc.get(k, 0) + c
        return Polynomial._raw(self._blocks, acc)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial._raw(self._blocks, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other) -> "Polynomial":
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Polynomial":
        return (-self) + other

    def scale(self, factor) -> "Polynomial":
        factor = as_fraction(factor)
        return Polynomial._raw(self._blocks, {k: c * factor for k, c in self._terms.items()})

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            try:
                return self.scale(other)
            except TypeError:
                return NotImplemented
        other = self._coerce(other)
        return Polynomial._raw(self._blocks, _mul_terms(self._terms, other._terms))

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> "Polynomial":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("only non-negative integer powers")
        result = Polynomial.constant(self._blocks, 1)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            exponent >>= 1
            if exponent:
                base = base * base
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self._blocks == other._blocks and self._terms == other._terms
        try:
            value = as_fraction(other)
        except TypeError:
            return NotImplemented
        return self.is_constant() and self.constant_term() == value

    def __hash__(self) -> int:
        return hash((self._blocks, tuple(self._terms.items())))

    # structural operations
    def embed(self, target_blocks) -> "Polynomial":
        """Re-express over a larger block set containing all current blocks."""
        target = _normalize_blocks(target_blocks)
        sizes = dict(target)
        for name, size in self._blocks:
            if sizes.get(name) != size:
                raise CompositionError(f"block {name}[{size}] missing from target {target}")
        acc = {}
        for exps, c in self._terms.items():
            flat: list[int] = []
            for name, size in target:
                if name in self._offsets:
                    start, _ = self._offsets[name]
                    flat.extend(exps[start:start + size])
                else:
                    flat.extend([0] * size)
            acc[tuple(flat)] = c
        return Polynomial._raw(target, acc)

    def split(self, block: str) -> dict[MultiIndex, "Polynomial"]:
        """Group by the exponent of ``block``: {I: coefficient polynomial in the other blocks}."""
        if block not in self._offsets:
            raise CompositionError(f"no block named {block!r}")
        start, size = self._offsets[block]
        rest = tuple(b for b in self._blocks if b[0] != block)
        groups: dict[MultiIndex, dict] = {}
        for exps, c in self._terms.items():
            key = exps[start:start + size]
            groups.setdefault(key, {})[exps[:start] + exps[start + size:]] = c
        return {k: Polynomial._raw(rest, groups[k]) for k in sorted(groups)}

    def coeff(self, block: str, index: Sequence[int]) -> "Polynomial":
        """Coefficient of block^index, a polynomial in the remaining blocks."""
        if block not in self._offsets:
            raise CompositionError(f"no block named {block!r}")
        start, size = self._offsets[block]
        index = tuple(index)
        if len(index) != size:
            raise DimensionError(f"block {block} has size {size}, got index {index}")
        rest = tuple(b for b in self._blocks if b[0] != block)
        acc = {exps[:start] + exps[start + size:]: c
               for exps, c in self._terms.items() if exps[start:start + size] == index}
        return Polynomial._raw(rest, acc)

    def truncate(self, weights: Mapping[str, Sequence[int]], max_degree: int) -> "Polynomial":
        """Drop monomials whose weighted degree exceeds ``max_degree``."""
        flat = self._flat_weights(weights)
        acc = {e: c for e, c in self._terms.items() if sum(w * x for w, x in zip(flat, e)) <= max_degree}
        return Polynomial._raw(self._blocks, acc)

    def map_coefficients(self, fn: Callable[[MultiIndex, Fraction], Fraction]) -> "Polynomial":
        return Polynomial._raw(self._blocks, {e: fn(e, c) for e, c in self._terms.items()})

    def compose(self, substitution: Mapping[tuple[str, int], object], target_blocks=None) -> "Polynomial":
        """Substitute a polynomial (or rational) for every variable that occurs.

        Keys are ``(block, idx)``; all polynomial images must share one block set,
        which becomes the block set of the result.
        """
        images = {}
        for key, img in substitution.items():
            if isinstance(img, Polynomial):
                if target_blocks is None:
                    target_blocks = img.blocks
                images[key] = img
        target = _normalize_blocks(target_blocks or ())
        for key, img in substitution.items():
            if isinstance(img, Polynomial):
                if img.blocks != target:
                    raise CompositionError(f"substitution image for {key} lives on {img.blocks}, expected {target}")
            else:
                images[key] = Polynomial.constant(target, as_fraction(img))
        names = [(name, i) for name, size in self._blocks for i in range(size)]
        powers: dict[tuple[int, int], dict] = {}

        def power(pos: int, e: int) -> dict:
            key = (pos, e)
            if key not in powers:
                if e == 1:
                    powers[key] = images[names[pos]]._terms
                else:
                    powers[key] = _mul_terms(power(pos, e - 1), power(pos, 1))
            return powers[key]

        one = (0,) * sum(s for _, s in target)
        acc: dict[MultiIndex, Fraction] = {}
        for exps, c in self._terms.items():
            prod = {one: c}
            for pos, e in enumerate(exps):
                if e:
                    if names[pos] not in images:
                        raise CompositionError(f"no substitution for variable {names[pos][0]}{names[pos][1] + 1}")
                    prod = _mul_terms(prod, power(pos, e))
            for k, v in prod.items():
                acc[k] = acc.get(k, 0) + v
        return Polynomial._raw(target, acc)

    def substitute_block(self, block: str, images: Sequence, target_blocks=None) -> "Polynomial":
        """Replace one block by images; the other blocks are carried over as variables."""
        if block not in self._offsets:
            raise CompositionError(f"no block named {block!r}")
        _, size = self._offsets[block]
        if len(images) != size:
            raise DimensionError(f"block {block} needs {size} images, got {len(images)}")
        poly_imgs = [im for im in images if isinstance(im, Polynomial)]
        if target_blocks is None:
            rest = tuple(b for b in self._blocks if b[0] != block)
            extra = poly_imgs[0].blocks if poly_imgs else ()
            merged = list(rest)
            for b in extra:
                if b not in merged:
                    merged.append(b)
            target_blocks = tuple(merged)
        target = _normalize_blocks(target_blocks)
        sub = {}
        for name, sz in self._blocks:
            for i in range(sz):
                if name == block:
                    img = images[i]
                    sub[(name, i)] = img.embed(target) if isinstance(img, Polynomial) else img
                else:
                    sub[(name, i)] = Polynomial.variable(target, name, i)
        return self.compose(sub, target)

    def evaluate(self, values: Mapping[str, Sequence]):
        """Evaluate at numbers of any ring type supporting + and *."""
        flat: list = []
        for name, size in self._blocks:
            if size == 0:
                continue
            if name not in values:
                raise CompositionError(f"no values for block {name!r}")
            vals = list(values[name])
            if len(vals) != size:
                raise DimensionError(f"block {name} needs {size} values")
            flat.extend(vals)
        cache: dict[tuple[int, int], object] = {}

        def power(pos: int, e: int):
            if (pos, e) not in cache:
                cache[(pos, e)] = flat[pos] if e == 1 else power(pos, e - 1) * flat[pos]
            return cache[(pos, e)]

        total = 0
        for exps, c in self._terms.items():
            term = c
            for pos, e in enumerate(exps):
                if e:
                    term = term * power(pos, e)
            total = term + total
        return total

    def partial(self, values: Mapping[str, Sequence]) -> "Polynomial":
        """Evaluate some blocks at exact rationals, keeping the rest symbolic."""
        result = self
        for name, vals in values.items():
            result = result.substitute_block(name, [as_fraction(v) for v in vals],
                                             tuple(b for b in result.blocks if b[0] != name))
        return result

    def __repr__(self) -> str:
        return f"Polynomial({self.to_string()!r})"

    def to_string(self) -> str:
        if not self._terms:
            return "0"
        names = []
        for name, size in self._blocks:
            names.extend(f"{name}{i + 1}" for i in range(size))
        parts = []
        for exps, c in self._terms.items():
            factors = [n if e == 1 else f"{n}^{e}" for n, e in zip(names, exps) if e]
            if not factors:
                parts.append(fraction_str(c))
            elif c == 1:
                parts.append("*".join(factors))
            elif c == -1:
                parts.append("-" + "*".join(factors))
            else:
                parts.append(fraction_str(c) + "*" + "*".join(factors))
        return " + ".join(parts).replace("+ -", "- ")


_TERM_RE = re.compile(r"[+-]?[^+-]+")
_VAR_RE = re.compile(r"^([A-Za-z_]+)(\d*)(?:\^(\d+))?$")


def parse_polynomial(text: str, size: int, block: str = "x") -> Polynomial:
    """Parse strings such as ``"x^3"`` or ``"2*x1^2*x3 - 1/2*x2"``.

    When ``size == 1`` the bare name ``x`` means ``x1``.
    """
    blocks = ((block, size),)
    compact = text.replace(" ", "")
    if not compact:
        raise ValueError("empty polynomial")
    result = Polynomial.zero(blocks)
    for raw in _TERM_RE.findall(compact):
        sign = -1 if raw.startswith("-") else 1
        body = raw.lstrip("+-")
        coeff = Fraction(sign)
        exps = [0] * size
        for factor in body.split("*"):
            m = _VAR_RE.match(factor)
            if m:
                name, idx, power = m.groups()
                if name != block:
                    raise ValueError(f"unknown variable {factor!r}; expected {block}1..{block}{size}")
                k = int(idx) if idx else (1 if size == 1 else 0)
                if not 1 <= k <= size:
                    raise ValueError(f"variable {factor!r} out of range 1..{size}")
                exps[k - 1] += int(power) if power else 1
            else:
                coeff *= Fraction(factor)
        result = result + Polynomial(blocks, {tuple(exps): coeff})
    return result


# ---------------------------------------------------------------- power series
# A truncated series is a list of Polynomial coefficients c_0, c_1, ...; missing
# trailing coefficients are read as zero.

def _series_get(series: Sequence[Polynomial], k: int, blocks) -> Polynomial:
    return series[k] if k < len(series) else Polynomial.zero(blocks)


def series_mul(a: Sequence[Polynomial], b: Sequence[Polynomial], order: int) -> list[Polynomial]:
    blocks = (a[0] if a else b[0]).blocks
    out = []
    for k in range(order + 1):
        acc = Polynomial.zero(blocks)
        for j in range(k + 1):
            if j < len(a) and k - j < len(b) and not a[j].is_zero() and not b[k - j].is_zero():
                acc = acc + a[j] * b[k - j]
        out.append(acc)
    return out


def series_inverse(a: Sequence[Polynomial], order: int) -> list[Polynomial]:
    if not a or not a[0].is_constant() or a[0].is_zero():
        raise SingularSeriesError("leading coefficient is not an invertible constant")
    blocks = a[0].blocks
    inv0 = 1 / a[0].constant_term()
    out = [Polynomial.constant(blocks, inv0)]
    for k in range(1, order + 1):
        acc = Polynomial.zero(blocks)
        for j in range(1, k + 1):
            aj = _series_get(a, j, blocks)
            if not aj.is_zero():
                acc = acc + aj * out[k - j]
        out.append(acc.scale(-inv0))
    return out


def series_div_invert(numerator: Sequence[Polynomial], denominator: Sequence[Polynomial],
                      order: int) -> list[Polynomial]:
    """Quotient numerator/denominator through x^order.

    The leading power x^v of the denominator is factored out; the numerator must
    vanish to the same order, and the remaining lowest denominator coefficient
    must be a non-zero constant.
    """
    if not denominator:
        raise SingularSeriesError("empty denominator")
    blocks = denominator[0].blocks
    v = 0
    while v < len(denominator) and denominator[v].is_zero():
        v += 1
    if v == len(denominator):
        raise SingularSeriesError("denominator is the zero series")
    if any(not _series_get(numerator, k, blocks).is_zero() for k in range(v)):
        raise SingularSeriesError(f"numerator does not vanish to order {v}")
    num = [_series_get(numerator, k + v, blocks) for k in range(order + 1)]
    den = [_series_get(denominator, k + v, blocks) for k in range(order + 1)]
    return series_mul(num, series_inverse(den, order), order)


# ----------------------------------------------------------- exact linear algebra

def solve_rational(matrix: Sequence[Sequence], rhs: Sequence) -> list:
    """Solve A X = B exactly by Gauss-Jordan elimination.

    ``rhs`` is a vector or a list of rows (several right-hand sides).
    """
    n = len(matrix)
    if any(len(row) != n for row in matrix):
        raise DimensionError("matrix must be square")
    vector = bool(rhs) and not isinstance(rhs[0], (list, tuple))
    cols = [[as_fraction(v)] for v in rhs] if vector else [[as_fraction(v) for v in row] for row in rhs]
    if len(cols) != n:
        raise DimensionError("right-hand side has the wrong number of rows")
    aug = [[as_fraction(v) for v in matrix[i]] + cols[i] for i in range(n)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise SingularSystemError("singular linear system")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [v - factor * w for v, w in zip(aug[r], aug[col])]
    sol = [row[n:] for row in aug]
    return [s[0] for s in sol] if vector else sol


def rank_rational(rows: Sequence[Sequence]) -> int:
    work = [[as_fraction(v) for v in row] for row in rows]
    rank = 0
    ncols = len(work[0]) if work else 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(work)) if work[r][col] != 0), None)
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        for r in range(rank + 1, len(work)):
            if work[r][col] != 0:
                f = work[r][col] / work[rank][col]
                work[r] = [a - f * b for a, b in zip(work[r], work[rank])]
        rank += 1
    return rank


def determinant(matrix: Sequence[Sequence]) -> Fraction:
    work = [[as_fraction(v) for v in row] for row in matrix]
    n = len(work)
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if work[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            work[col], work[pivot] = work[pivot], work[col]
            det = -det
        det *= work[col][col]
        for r in range(col + 1, n):
            if work[r][col] != 0:
                f = work[r][col] / work[col][col]
                work[r] = [a - f * b for a, b in zip(work[r], work[col])]
    return det


# ------------------------------------------------------------ quadratic surds

def _rational_sqrt(q: Fraction) -> Fraction | None:
    num, den = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if num * num == q.numerator and den * den == q.denominator:
        return Fraction(num, den)
    return None


class QuadraticSurd:
    """Exact number a + b*sqrt(r) with rational a, b and a fixed rational r > 0.

    Used for values such as n^{-1/2} where r = 1/n.  Mixing two surds with
    different radicands is an error.
    """

    __slots__ = ("a", "b", "r")

    def __init__(self, a=0, b=0, r=1):
        self.a = as_fraction(a)
        self.b = as_fraction(b)
        self.r = as_fraction(r)
        if self.r <= 0:
            raise ValueError("radicand must be positive")
        root = _rational_sqrt(self.r)
        if root is not None and self.b:
            self.a, self.b = self.a + self.b * root, Fraction(0)

    @classmethod
    def inv_sqrt(cls, n) -> "QuadraticSurd":
        return cls(0, 1, Fraction(1) / as_fraction(n))

    def _lift(self, other) -> "QuadraticSurd":
        if isinstance(other, QuadraticSurd):
            if other.r != self.r and other.b != 0 and self.b != 0:
                raise ValueError("surds with different radicands")
            return other
        return QuadraticSurd(as_fraction(other), 0, self.r)

    def _radicand(self, other: "QuadraticSurd") -> Fraction:
        return self.r if self.b != 0 or other.b == 0 else other.r

    def __add__(self, other):
        try:
            o = self._lift(other)
        except TypeError:
            return NotImplemented
        return QuadraticSurd(self.a + o.a, self.b + o.b, self._radicand(o))

    __radd__ = __add__

    def __neg__(self):
        return QuadraticSurd(-self.a, -self.b, self.r)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        try:
            o = self._lift(other)
        except TypeError:
            return NotImplemented
        r = self._radicand(o)
        return QuadraticSurd(self.a * o.a + self.b * o.b * r, self.a * o.b + self.b * o.a, r)

    __rmul__ = __mul__

    def __truediv__(self, other):
        q = as_fraction(other)
        return QuadraticSurd(self.a / q, self.b / q, self.r)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        out = QuadraticSurd(1, 0, self.r)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        try:
            o = self._lift(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.a == o.a and self.b == o.b

    def __hash__(self):
        return hash((self.a, self.b, self.r if self.b else 0))

    def __float__(self):
        return float(self.a) + float(self.b) * float(self.r) ** 0.5

    def is_rational(self) -> bool:
        return self.b == 0

    def to_mpf(self):
        import mpmath

        return mpmath.mpf(self.a.numerator) / self.a.denominator + (
            mpmath.mpf(self.b.numerator) / self.b.denominator
        ) * mpmath.sqrt(mpmath.mpf(self.r.numerator) / self.r.denominator)

    def __repr__(self):
        return f"QuadraticSurd({fraction_str(self.a)}, {fraction_str(self.b)}, sqrt {fraction_str(self.r)})"
