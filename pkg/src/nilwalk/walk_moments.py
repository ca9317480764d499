"""Exact moments of the embedded walk and the ergodic functionals behind them.

The dynamic program tracks, for every base vertex y and multi-index I,

    R_n(y, I) = E^x[(Phi(x)^{-1} * xi_n)^I ; w_n = y]

and pushes it one step along every edge with the CBH expansion
(a * h)^I = sum C^I_{JK} a^J h^K.  Arithmetic is done on integers scaled by a
common denominator, so no gcd is ever taken inside the loop.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import AssumptionError, ConfigError, DomainError, SpectralError
from .nilgroup import StratifiedAlgebra
from .polyalg import MultiIndex, QuadraticSurd, indices_up_to, unit_index
from .quotient_graph import QuotientGraph, SpectralData, project_and_decompose
from .realization import Realization, asymptotic_direction, hop, is_centered

MAX_DMAX = 16


def monomial_value(point: Sequence, index: Sequence[int]):
    out = Fraction(1)
    for v, e in zip(point, index):
        if e:
            out *= v ** e
    return out


def edge_moment_fn(alg: StratifiedAlgebra, g: QuotientGraph, r: Realization, index: Sequence[int]) -> list[Fraction]:
    """F^I(x) = sum_{e leaving x} p(e) hop(e)^I."""
    return [sum((e.p * monomial_value(hop(alg, r, e), index) for e in g.out_edges[v]), Fraction(0))
            for v in g.vertices]


def averaged_moment(alg: StratifiedAlgebra, g: QuotientGraph, m: Sequence[Fraction], r: Realization,
                    index: Sequence[int]) -> Fraction:
    """m^I = sum_x m(x) F^I(x)."""
    return sum((mx * fx for mx, fx in zip(m, edge_moment_fn(alg, g, r, index))), Fraction(0))


def limit_coefficients(alg: StratifiedAlgebra, g: QuotientGraph, m: Sequence[Fraction],
                       r: Realization) -> tuple[list[list[Fraction]], list[Fraction]]:
    """Covariance A over layer 1 and drift b over layer 2 of the limiting generator."""
    if not is_centered(asymptotic_direction(alg, g, m, r)):
        raise AssumptionError("the walk is not centered: the asymptotic direction is non-zero")
    first = alg.layer_indices(1)
    second = alg.layer_indices(2) if alg.step >= 2 else []
    D = alg.dim
    cov = [[averaged_moment(alg, g, m, r, tuple(a + b for a, b in zip(unit_index(i, D), unit_index(j, D))))
            for j in first] for i in first]
    drift = [averaged_moment(alg, g, m, r, unit_index(i, D)) for i in second]
    return cov, drift


# ------------------------------------------------------------------ moment DP

@dataclass(frozen=True)
class MomentTable:
    n: int
    dmax: int
    start: str
    vertices: tuple[str, ...]
    indices: tuple[MultiIndex, ...]
    weights: tuple[int, ...]
    values: dict  # (vertex, I) -> Fraction

    def get(self, vertex: str, index: Sequence[int]) -> Fraction:
        return self.values.get((vertex, tuple(index)), Fraction(0))

    def unscaled(self, index: Sequence[int]) -> Fraction:
        index = tuple(index)
        if index not in self._positions:
            raise ConfigError(f"multi-index {index} exceeds the table's degree cap {self.dmax}")
        return sum((self.values[(y, index)] for y in self.vertices), Fraction(0))

    def scaled(self, index: Sequence[int], scale_n: int | None = None):
        """n^{-d(I)/2} times the unscaled moment; exact as a quadratic surd."""
        d = sum(w * e for w, e in zip(self.weights, index))
        base = self.unscaled(index)
        n = self.n if scale_n is None else scale_n
        if n == 0:
            return base if d == 0 else Fraction(0)
        value = QuadraticSurd.inv_sqrt(n) ** d * base
        return value.a if value.is_rational() else value

    def mass(self, vertex: str) -> Fraction:
        return self.get(vertex, (0,) * len(self.weights))

    @property
    def _positions(self) -> set:
        return set(self.indices)


class MomentEngine:
    """Precomputed integer transfer matrices for one (algebra, graph, realization, dmax)."""

    def __init__(self, alg: StratifiedAlgebra, g: QuotientGraph, r: Realization, dmax: int):
        if dmax < 0:
            raise ConfigError("dmax must be non-negative")
        if dmax > MAX_DMAX:
            raise ConfigError(f"dmax {dmax} exceeds the CBH table cap {MAX_DMAX}")
        self.alg, self.g, self.r, self.dmax = alg, g, r, dmax
        self.indices = tuple(indices_up_to(alg.weights, dmax))
        pos = {I: k for k, I in enumerate(self.indices)}
        cbh = {I: alg.cbh_coefficients(I) for I in self.indices}
        # exact rational transfer per (origin, terminus)
        blocks: dict[tuple[int, int], list[dict[int, Fraction]]] = {}
        for e in g.edges:
            if not e.p:
                continue
            h = hop(alg, r, e)
            key = (g.index[e.origin], g.index[e.terminus])
            rows = blocks.setdefault(key, [dict() for _ in self.indices])
            for row, I in zip(rows, self.indices):
                for (J, K), c in cbh[I].items():
                    val = e.p * c * monomial_value(h, K)
                    if val:
                        row[pos[J]] = row.get(pos[J], 0) + val
        den = 1
        for rows in blocks.values():
            for row in rows:
                for v in row.values():
                    den = den * v.denominator // math.gcd(den, v.denominator)
        self.denominator = den
        self.transfer = {
            key: [tuple((j, int(v * den)) for j, v in sorted(row.items()) if v) for row in rows]
            for key, rows in sorted(blocks.items())}

    def run(self, start: str, steps: Iterable[int]) -> dict[int, MomentTable]:
        """Tables for every requested step count, from a single forward pass."""
        wanted = sorted(set(int(n) for n in steps))
        if any(n < 0 for n in wanted):
            raise DomainError("step counts must be non-negative")
        g = self.g
        nv, ni = len(g.vertices), len(self.indices)
        state = [[0] * ni for _ in range(nv)]
        state[g.index[start]][0] = 1
        out: dict[int, MomentTable] = {}
        scale = 1
        current = 0
        for target in wanted:
            while current < target:
                new = [[0] * ni for _ in range(nv)]
                for (o, t), rows in self.transfer.items():
                    src = state[o]
                    if not any(src):
                        continue
                    dst = new[t]
                    for i, row in enumerate(rows):
                        acc = 0
                        for j, c in row:
                            s = src[j]
                            if s:
                                acc += c * s
                        if acc:
                            dst[i] += acc
                state = new
                scale *= self.denominator
                current += 1
            values = {}
            for y, vec in zip(g.vertices, state):
                for I, v in zip(self.indices, vec):
                    values[(y, I)] = Fraction(v, scale)
            out[target] = MomentTable(target, self.dmax, start, g.vertices, self.indices, self.alg.weights, values)
        return out


def moment_dp(alg: StratifiedAlgebra, g: QuotientGraph, r: Realization, x: str, n: int, dmax: int) -> MomentTable:
    return MomentEngine(alg, g, r, dmax).run(x, [n])[n]


# ---------------------------------------------------------- ergodic functionals

def iterate_sum(g: QuotientGraph, f: Sequence, n: int) -> list:
    """sum_{k<n} L^k f, exact for rational f."""
    total = [0] * len(g.vertices)
    cur = list(f)
    for _ in range(n):
        total = [a + b for a, b in zip(total, cur)]
        cur = g.apply(cur)
    return total


def verify_low_moments(alg: StratifiedAlgebra, g: QuotientGraph, m: Sequence[Fraction], r: Realization,
                       x: str, n: int, index: Sequence[int], table: MomentTable | None = None) -> Fraction:
    """Unscaled DP moment minus n m^I + A[F^I]_n(x); zero when the low-order identities hold."""
    index = tuple(index)
    d = sum(w * e for w, e in zip(alg.weights, index))
    if d not in (1, 2, 3):
        raise DomainError("identity only covers weighted degree 1, 2 or 3")
    if table is None:
        table = moment_dp(alg, g, r, x, n, d)
    F = edge_moment_fn(alg, g, r, index)
    mean = sum((a * b for a, b in zip(F, m)), Fraction(0))
    closed = n * mean + ergodic_A(g, None, F, n)[g.index[x]]
    return table.unscaled(index) - closed


def ergodic_A(g: QuotientGraph, s: SpectralData | None, f: Sequence, n: int, tol: float = 1e-10) -> list:
    """A[f]_n = sum_{k<n} L^k f - n <f, m>, exact.

    With spectral data the value is recomputed from the peripheral geometric
    sums plus the residual iterates and the two must agree.
    """
    if n < 0:
        raise DomainError("n must be non-negative")
    f = list(f)
    direct_sum = iterate_sum(g, f, n)
    if s is None:
        from .quotient_graph import invariant_measure

        m = invariant_measure(g)
    else:
        m = s.m
    mean = sum((a * b for a, b in zip(f, m)), Fraction(0) if all(isinstance(v, (int, Fraction)) for v in f) else 0)
    direct = [v - n * mean for v in direct_sum]
    if s is not None:
        spectral = ergodic_A_spectral(g, s, f, n)
        scale = max(1.0, float(np.max(np.abs(spectral))))
        if np.max(np.abs(np.array([complex(v) for v in direct]) - spectral)) > tol * scale:
            raise SpectralError("direct and decomposed ergodic sums disagree")
    return direct


def ergodic_A_spectral(g: QuotientGraph, s: SpectralData, f: Sequence, n: int) -> np.ndarray:
    dec = project_and_decompose(f, s)
    out = np.zeros(len(g.vertices), dtype=complex)
    for j, c in enumerate(dec.peripheral, start=1):
        alpha = s.alphas[j]
        out += c * s.phis[j] * (1 - alpha ** n) / (1 - alpha)
    mat = g.matrix()
    cur = dec.residual.copy()
    for _ in range(n):
        out += cur
        cur = mat @ cur
    return out


def brute_double_sum(g: QuotientGraph, f: Sequence, h: Sequence, n: int) -> list:
    """sum_{k<n} sum_{l<=k} L^l f * L^{k+1} h, exact."""
    total = [0] * len(g.vertices)
    partial = [0] * len(g.vertices)
    lf = list(f)
    lh = g.apply(list(h))
    for _ in range(n):
        partial = [a + b for a, b in zip(partial, lf)]
        total = [t + a * b for t, a, b in zip(total, partial, lh)]
        lf = g.apply(lf)
        lh = g.apply(lh)
    return total


@dataclass(frozen=True)
class TwoFoldResult:
    A1: np.ndarray
    A2: np.ndarray
    residual: float


def ergodic_A2(g: QuotientGraph, s: SpectralData, f: Sequence, h: Sequence, n: int,
               tol: float = 1e-10) -> TwoFoldResult:
    """Closed forms with (1/n^2) sum_{k<n} sum_{l<=k} L^l f L^{k+1} h = ab/2 + A1/n + A2/n^2."""
    if n < 1:
        raise DomainError("n must be positive")
    mat = g.matrix().astype(complex)
    df, dh = project_and_decompose(f, s), project_and_decompose(h, s)
    a, b = df.mean, dh.mean
    K = s.period
    alphas, phis = s.alphas, s.phis
    nv = len(g.vertices)
    zero = np.zeros(nv, dtype=complex)

    # residual iterates F_l = L^l f_res, G_k = L^k h_res for l, k = 0..n+1
    F, G = [df.residual.copy()], [dh.residual.copy()]
    for _ in range(n + 1):
        F.append(mat @ F[-1])
        G.append(mat @ G[-1])
    # R = sum_{l>=0} F_l solves (I - L) R = f_res on the residual space
    projector = np.eye(nv, dtype=complex) - sum(np.outer(p, np.conj(q)) for p, q in zip(s.phis, s.psis))
    restricted = mat @ projector
    R = np.linalg.solve(np.eye(nv) - restricted, df.residual)

    fj = {j: df.peripheral[j - 1] for j in range(1, K)}
    hj = {j: dh.peripheral[j - 1] for j in range(1, K)}

    A1 = 0.5 * a * b + b * R + zero
    A2 = zero.copy()
    for j in range(1, K):
        al = alphas[j]
        geo = al * (1 - al ** n) / (1 - al)
        A1 = A1 - a * hj[j] * al ** (n + 1) * phis[j] / (1 - al) + b * fj[j] * phis[j] / (1 - al)
        A2 = A2 + a * hj[j] * phis[j] * geo / (1 - al) - b * fj[j] * phis[j] * geo / (1 - al)
    for i in range(1, K):
        for j in range(1, K):
            coef = fj[i] * hj[j] * phis[i] * phis[j] / (1 - alphas[i])
            geo_j = alphas[j] * (1 - alphas[j] ** n) / (1 - alphas[j])
            if (i + j) % K == 0:
                A1 = A1 - coef
                A2 = A2 + coef * geo_j
            else:
                ab_ = alphas[i] * alphas[j]
                A2 = A2 + coef * (geo_j - ab_ * (1 - ab_ ** n) / (1 - ab_))
    # residual-operator sums
    partial_P = zero.copy()
    partial_F = zero.copy()
    weighted_F = zero.copy()
    for k in range(n):
        partial_F = partial_F + F[k]
        Pk = sum((fj[j] * alphas[j] ** k * phis[j] for j in range(1, K)), zero)
        partial_P = partial_P + Pk
        Qk1 = sum((hj[j] * alphas[j] ** (k + 1) * phis[j] for j in range(1, K)), zero)
        A2 = A2 + G[k + 1] * partial_P + Qk1 * partial_F + partial_F * G[k + 1]
        A2 = A2 + a * (k + 1) * G[k + 1]
        weighted_F = weighted_F + k * F[k]
    tail = np.linalg.matrix_power(restricted, n) @ R
    A2 = A2 - b * (n * tail + weighted_F)

    brute = np.array([complex(v) for v in brute_double_sum(g, f, h, n)]) / n ** 2
    predicted = 0.5 * a * b + A1 / n + A2 / n ** 2
    residual = float(np.max(np.abs(brute - predicted)))
    if residual > tol:
        raise SpectralError(f"two-fold ergodic identity residual {residual:.3e} exceeds {tol}")
    return TwoFoldResult(A1, A2, residual)


def q_iterated(g: QuotientGraph, fs: Sequence[Sequence], n: int) -> list:
    """Nested sum over l_1 <= ... <= l_N <= n-N of prod_k L^{l_k + k - 1} f_k."""
    N = len(fs)
    if N < 1:
        raise DomainError("need at least one function")
    if n < N:
        raise DomainError(f"n = {n} must be at least N = {N}")
    length = n - N + 1
    # iterates[k][l] = L^{l + k} f_k for l = 0..length-1
    cumulative = None
    for k, f in enumerate(fs):
        cur = list(f)
        for _ in range(k):
            cur = g.apply(cur)
        terms = []
        for _ in range(length):
            terms.append(cur)
            cur = g.apply(cur)
        if cumulative is None:
            values = terms
        else:
            values = [[c * t for c, t in zip(cum, term)] for cum, term in zip(cumulative, terms)]
        running = [0] * len(g.vertices)
        cumulative = []
        for v in values:
            running = [a + b for a, b in zip(running, v)]
            cumulative.append(running)
    return cumulative[-1]


# -------------------------------------------------------------------- Monte Carlo

@dataclass(frozen=True)
class WalkSample:
    seed: int
    n: int
    start: str
    vertices: np.ndarray     # vertex index per path
    positions: np.ndarray    # (count, D) group displacement Phi(x)^{-1} * xi_n

    def values(self, index: Sequence[int]) -> np.ndarray:
        out = np.ones(len(self.positions))
        for k, e in enumerate(index):
            if e:
                out = out * self.positions[:, k] ** e
        return out

    def moment_ci(self, index: Sequence[int], z: float = 2.5758293035489) -> tuple[float, float, float]:
        """(mean, lower, upper) of a normal-approximation confidence interval."""
        vals = self.values(index)
        mean = float(np.mean(vals))
        half = z * float(np.std(vals, ddof=1)) / math.sqrt(len(vals)) if len(vals) > 1 else math.inf
        return mean, mean - half, mean + half


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based stream for one block of paths, independent of scheduling."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def mc_sample(alg: StratifiedAlgebra, g: QuotientGraph, r: Realization, x: str, n: int, count: int,
              seed: int, block_size: int = 1 << 16, threads: int = 1) -> WalkSample:
    if count < 1:
        raise DomainError("count must be at least 1")
    tables = []
    for v in g.vertices:
        edges = [e for e in g.out_edges[v] if e.p]
        cum = np.cumsum([float(e.p) for e in edges])
        cum[-1] = np.inf
        tables.append((cum,
                       np.array([[float(c) for c in hop(alg, r, e)] for e in edges]),
                       np.array([g.index[e.terminus] for e in edges])))
    nblocks = (count + block_size - 1) // block_size

    def run_block(b: int) -> tuple[np.ndarray, np.ndarray]:
        size = min(block_size, count - b * block_size)
        rng = block_rng(seed, b)
        uniforms = rng.random((n, size))
        vert = np.full(size, g.index[x])
        pos = np.zeros((size, alg.dim))
        for step in range(n):
            u = uniforms[step]
            hops = np.empty_like(pos)
            nxt = np.empty_like(vert)
            for v, (cum, hv, tv) in enumerate(tables):
                sel = np.nonzero(vert == v)[0]
                if sel.size == 0:
                    continue
                choice = np.searchsorted(cum, u[sel], side="right")
                hops[sel] = hv[choice]
                nxt[sel] = tv[choice]
            pos = alg.group_mul_array(pos, hops)
            vert = nxt
        return vert, pos

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_block, range(nblocks)))
    else:
        parts = [run_block(b) for b in range(nblocks)]
    return WalkSample(seed, n, x, np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))
