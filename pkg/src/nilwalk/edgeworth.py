"""Exact discrepancy sequences, coefficient fits and the Euler-Maclaurin machinery.

For a polynomial test function both sides of the CLT comparison are finite
sums of moments.  With the scale n^{-1/2} every value lies in Q(sqrt n), so
each D_n is stored exactly as a + b n^{-1/2}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import mpmath

from .errors import AssumptionError, ConfigError, DomainError
from .gaussian_limit import GaussianSpec, gaussian_moments, generator_apply
from .models import Model
from .nilgroup import StratifiedAlgebra
from .polyalg import (MultiIndex, Polynomial, QuadraticSurd, as_fraction, fraction_str, indices_up_to,
                      series_div_invert, series_mul)
from .realization import Realization, corrector_norm, hop
from .walk_moments import MomentEngine, averaged_moment, limit_coefficients

PRECISION_DIGITS = 60


def _surd(value, n: int) -> QuadraticSurd:
    if isinstance(value, QuadraticSurd):
        return value
    return QuadraticSurd(as_fraction(value), 0, Fraction(1, n))


def surd_json(value: QuadraticSurd) -> dict:
    return {"rational": fraction_str(value.a), "inv_sqrt_n": fraction_str(value.b), "approx": float(value)}


def weighted_degree_of_poly(alg: StratifiedAlgebra, f: Polynomial) -> int:
    return max(f.degree({"x": alg.weights}), 0)


class Harness:
    """Cached pieces for one (model, f, realization) pair."""

    def __init__(self, model: Model, f: Polynomial, realization: Realization | None = None,
                 dmax: int | None = None):
        self.model = model
        self.alg = model.algebra
        self.f = f
        self.realization = realization or model.realization
        need = weighted_degree_of_poly(self.alg, f)
        self.dmax = need if dmax is None else dmax
        if self.dmax < need:
            raise ConfigError(f"dmax {self.dmax} is below the weighted degree {need} of f")
        cov, drift = limit_coefficients(self.alg, model.graph, model.m, model.harmonic)
        self.spec = GaussianSpec.make(cov, drift)
        self.gauss = gaussian_moments(self.spec, self.alg, self.dmax)
        self.taylor = self.alg.taylor_expansion(f, "right")
        self._engine: MomentEngine | None = None

    @property
    def engine(self) -> MomentEngine:
        if self._engine is None:
            self._engine = MomentEngine(self.alg, self.model.graph, self.realization, self.dmax)
        return self._engine

    def base_point(self, x: str, n: int) -> tuple:
        return self.alg.dilate(QuadraticSurd.inv_sqrt(n), self.realization.positions[x])

    def lhs(self, x: str, t, n_list: Sequence[int]) -> dict[int, QuadraticSurd]:
        """L^{[nt]} P_{n^{-1/2}} f(x) for every n, from one DP pass."""
        t = as_fraction(t)
        steps = {n: math.floor(n * t) for n in n_list}
        tables = self.engine.run(x, steps.values())
        out = {}
        for n in n_list:
            table = tables[steps[n]]
            g = self.base_point(x, n)
            total = _surd(0, n)
            for index, coeff in self.taylor.items():
                moment = table.scaled(index, scale_n=n)
                if moment:
                    total = total + _surd(coeff.evaluate({"g": g}), n) * moment
            out[n] = total
        return out

    def rhs(self, x: str, t, n: int) -> QuadraticSurd:
        """P_{n^{-1/2}} e^{tA} f(x)."""
        t = as_fraction(t)
        if t <= 0:
            raise DomainError("time must be positive")
        g = self.base_point(x, n)
        total = _surd(0, n)
        for index, coeff in self.taylor.items():
            d = sum(w * e for w, e in zip(self.alg.weights, index))
            if d % 2:
                continue
            moment = self.gauss[index] * t ** (d // 2)
            if moment:
                total = total + _surd(coeff.evaluate({"g": g}), n) * moment
        return total


def lhs_exact(model: Model, f: Polynomial, x: str, t, n: int) -> QuadraticSurd:
    return Harness(model, f).lhs(x, t, [n])[n]


def rhs_exact(model: Model, f: Polynomial, x: str, t, n: int) -> QuadraticSurd:
    return Harness(model, f).rhs(x, t, n)


# --------------------------------------------------------------------- fitting

@dataclass
class Fit:
    xi: list
    residual_bound: float
    scaled_residuals: list
    richardson: list
    bounded: bool


@dataclass
class DiscrepancyReport:
    model: str
    f: str
    x: str
    t: Fraction
    rows: list  # (n, lhs, rhs, D) with exact QuadraticSurd values
    fit: Fit | None
    slope: float | None
    exact_agreement: bool
    extra: dict = field(default_factory=dict)

    def D(self, n: int) -> QuadraticSurd:
        return next(row[3] for row in self.rows if row[0] == n)

    def to_json(self) -> dict:
        out = {
            "model": self.model, "f": self.f, "x": self.x, "t": fraction_str(self.t),
            "rows": [{"n": n, "lhs": surd_json(lv), "rhs": surd_json(rv), "D": surd_json(dv)}
                     for n, lv, rv, dv in self.rows],
            "fit": None if self.fit is None else {
                "xi": [float(v) for v in self.fit.xi],
                "xi_richardson": [float(v) for v in self.fit.richardson],
                "residual_bound": self.fit.residual_bound,
                "bounded": self.fit.bounded,
            },
            "slope": self.slope,
            "exact_agreement": self.exact_agreement,
        }
        out.update(self.extra)
        return out


def fit_coefficients(ns: Sequence[int], values: Sequence, order: int) -> Fit:
    """Least squares of D_n on {n^{-j/2}: j = 1..order-1}, plus a Richardson cross-check."""
    with mpmath.workdps(PRECISION_DIGITS):
        vals = [v.to_mpf() if isinstance(v, QuadraticSurd) else mpmath.mpf(v) for v in values]
        basis = list(range(1, order))
        if len(ns) < len(basis):
            raise ConfigError("not enough n values for the requested order")
        mat = mpmath.matrix([[mpmath.mpf(n) ** (-mpmath.mpf(j) / 2) for j in basis] for n in ns])
        rhs = mpmath.matrix(vals)
        xi, _ = mpmath.qr_solve(mat, rhs)
        xi = [xi[k] for k in range(len(basis))]
        scaled = []
        for n, v in zip(ns, vals):
            approx = sum(c * mpmath.mpf(n) ** (-mpmath.mpf(j) / 2) for c, j in zip(xi, basis))
            scaled.append(abs(v - approx) * mpmath.mpf(n) ** (mpmath.mpf(order) / 2))
        rich = richardson(ns, vals, order)
        cut = max(1, (2 * len(scaled)) // 3)
        head, tail = scaled[:cut], scaled[cut:]
        bounded = not tail or max(tail) <= 2 * max(head) + mpmath.mpf(10) ** (-30)
        return Fit(xi, float(max(scaled)), [float(s) for s in scaled], rich, bool(bounded))


def richardson(ns: Sequence[int], vals: Sequence, order: int) -> list:
    """Peel xi_1, xi_2, ... by extrapolating sqrt(n)^j residuals on a doubling sequence."""
    pairs = sorted(zip(ns, vals))
    doubling = all(b[0] == 2 * a[0] for a, b in zip(pairs, pairs[1:]))
    if not doubling or len(pairs) < 2:
        return []
    ns = [mpmath.mpf(n) for n, _ in pairs]
    current = [v for _, v in pairs]
    found = []
    for j in range(1, order):
        seq = [v * n ** (mpmath.mpf(j) / 2) for v, n in zip(current, ns)]
        # seq_n = xi_j + c_1 n^{-1/2} + c_2 n^{-1} + ...: eliminate successive powers
        col = seq
        for p in range(1, len(seq)):
            factor = mpmath.mpf(2) ** (mpmath.mpf(p) / 2)
            col = [(factor * b - a) / (factor - 1) for a, b in zip(col, col[1:])]
            if len(col) == 1:
                break
        estimate = col[-1]
        found.append(estimate)
        current = [v - estimate * n ** (-mpmath.mpf(j) / 2) for v, n in zip(current, ns)]
    return found


def loglog_slope(ns: Sequence[int], values: Sequence) -> float | None:
    pts = [(math.log(n), math.log(abs(float(v)))) for n, v in zip(ns, values) if float(v) != 0]
    if len(pts) < 2:
        return None
    mx = sum(p[0] for p in pts) / len(pts)
    my = sum(p[1] for p in pts) / len(pts)
    sxx = sum((p[0] - mx) ** 2 for p in pts)
    return sum((p[0] - mx) * (p[1] - my) for p in pts) / sxx


def discrepancy(model: Model, f: Polynomial, x: str, t, n_list: Sequence[int], order: int = 3,
                realization: Realization | None = None, harness: Harness | None = None) -> DiscrepancyReport:
    """D_n = L^{[nt]} P f(x) - P e^{tA} f(x) for each n, with fits."""
    if not model.centered:
        raise AssumptionError("discrepancy needs a centered walk")
    t = as_fraction(t)
    harness = harness or Harness(model, f, realization)
    ns = sorted(set(int(n) for n in n_list))
    lhs = harness.lhs(x, t, ns)
    rows = []
    for n in ns:
        r = harness.rhs(x, t, n)
        rows.append((n, lhs[n], r, lhs[n] - r))
    Ds = [row[3] for row in rows]
    exact = all(d == 0 for d in Ds)
    fit = None if exact else fit_coefficients(ns, Ds, order)
    slope = None if exact else loglog_slope(ns, Ds)
    return DiscrepancyReport(model.name, f.to_string(), x, t, rows, fit, slope, exact)


# ------------------------------------------------------------ Euler-Maclaurin

def _h(k: int, nodes: Sequence[Polynomial], blocks) -> Polynomial:
    """Complete homogeneous symmetric polynomial h_k of the given nodes."""
    if k < 0:
        return Polynomial.zero(blocks)
    if not nodes:
        return Polynomial.constant(blocks, 1 if k == 0 else 0)
    # h_k(a, rest) = sum_p a^p h_{k-p}(rest)
    out = Polynomial.zero(blocks)
    head, rest = nodes[0], nodes[1:]
    for p in range(k + 1):
        out = out + head ** p * _h(k - p, rest, blocks)
    return out


@lru_cache(maxsize=None)
def em_polynomials(ell: int, i: int, jmax: int) -> tuple[Polynomial, ...]:
    """B_j^{(ell, i)} for j = 0..jmax as polynomials in t_1..t_ell (block "t").

    B_j is j! times the x^j coefficient of the divided difference, over the
    nodes t_i..t_ell in the variable s, of e^{xs} / prod_a phi(x; t_a, s) with
    phi(x; a, s) = (e^{xa} - e^{xs}) / (x (a - s)).
    """
    if ell < 2 or not 2 <= i <= ell:
        raise DomainError("need ell >= 2 and 2 <= i <= ell")
    blocks = (("t", ell), ("s", 1))
    t = [Polynomial.variable(blocks, "t", a) for a in range(ell)]
    s = Polynomial.variable(blocks, "s", 0)
    order = jmax
    exp_s = [s ** k * Fraction(1, math.factorial(k)) for k in range(order + 1)]
    denominator = [Polynomial.constant(blocks, 1)]
    for a in range(ell):
        phi = [_h(k, [t[a], s], blocks) * Fraction(1, math.factorial(k + 1)) for k in range(order + 1)]
        denominator = series_mul(denominator, phi, order)
    series = series_div_invert(exp_s, denominator, order)
    r = ell - i
    tblocks = (("t", ell),)
    node_vars = [Polynomial.variable(tblocks, "t", a) for a in range(i - 1, ell)]
    out = []
    for j, coeff in enumerate(series):
        total = Polynomial.zero(tblocks)
        for m_exp, part in coeff.split("s").items():
            m = m_exp[0]
            if m >= r:
                total = total + part * _h(m - r, node_vars, tblocks)
        out.append(total * math.factorial(j))
    return tuple(out)


def simplex_integral(poly: Polynomial, dim: int) -> Fraction:
    """Integral over {t in R^dim_{>=0}, sum t = 1} w.r.t. dt_1..dt_{dim-1}, for a polynomial in block t.

    Variables beyond ``dim`` must not occur.
    """
    total = Fraction(0)
    for exps, c in poly.terms():
        if any(exps[dim:]):
            raise DomainError("polynomial depends on coordinates outside the simplex")
        a = exps[:dim]
        total += c * Fraction(math.prod(math.factorial(v) for v in a), math.factorial(sum(a) + dim - 1))
    return total


def apply_operator(op: Polynomial, F: Polynomial) -> Polynomial:
    """Replace t^b in ``op`` by the derivative d^b and apply it to F (same block layout)."""
    acc = {}
    for bexp, bc in op.terms():
        for fexp, fc in F.terms():
            if all(f >= b for f, b in zip(fexp, bexp)):
                factor = math.prod(math.factorial(f) // math.factorial(f - b) for f, b in zip(fexp, bexp))
                key = tuple(f - b for f, b in zip(fexp, bexp))
                acc[key] = acc.get(key, 0) + bc * fc * factor
    return Polynomial(F.blocks, acc)


def restrict_to_face(F: Polynomial, dim: int) -> Polynomial:
    """Set t_{dim+1}, ..., t_ell to zero."""
    return Polynomial(F.blocks, {e: c for e, c in F.terms() if not any(e[dim:])})


def em_rhs(F: Polynomial, ell: int, s: int, n: int) -> Fraction:
    """sum_{i=2}^{ell} sum_{k<s} 1/(k! n^k) int_{Delta(i)} B_k^{(ell,i)}(d) F(t, 0..0) dt."""
    total = Fraction(0)
    for i in range(2, ell + 1):
        table = em_polynomials(ell, i, max(s - 1, 0))
        for k in range(s):
            if table[k].is_zero():
                continue
            value = simplex_integral(restrict_to_face(apply_operator(table[k], F), i), i)
            total += value / (math.factorial(k) * Fraction(n) ** k)
    return total


def _composition_power_sum(a: tuple[int, ...], m: int) -> int:
    """sum over (i_1..i_l) >= 0 with sum m of prod i_k^{a_k}, by brute force."""
    ell = len(a)
    if ell == 1:
        return m ** a[0]
    return sum(i ** a[0] * _composition_power_sum(a[1:], m - i) for i in range(m + 1))


@lru_cache(maxsize=None)
def _composition_polynomial(a: tuple[int, ...]) -> tuple[Fraction, ...]:
    """Values at 0..deg of the polynomial m -> composition power sum (degree sum a + l - 1)."""
    deg = sum(a) + len(a) - 1
    return tuple(Fraction(_composition_power_sum(a, m)) for m in range(deg + 1))


def _lagrange_eval(values: Sequence[Fraction], x: int) -> Fraction:
    n = len(values)
    if 0 <= x < n:
        return values[x]
    total = Fraction(0)
    for k, yk in enumerate(values):
        num, den = 1, 1
        for j in range(n):
            if j != k:
                num *= x - j
                den *= k - j
        total += yk * Fraction(num, den)
    return total


def em_lhs(F: Polynomial, ell: int, n: int, brute: bool = False) -> Fraction:
    """(1/n^{ell-1}) sum over compositions of n-ell+1 into ell parts of F(i/n), exactly."""
    m = n - ell + 1
    if m < 0:
        raise DomainError("n is too small for this simplex")
    total = Fraction(0)
    for exps, c in F.terms():
        a = exps[:ell]
        if brute:
            s = _composition_power_sum(a, m)
        else:
            s = _lagrange_eval(_composition_polynomial(a), m)
        total += c * Fraction(s, n ** sum(a))
    return total / Fraction(n) ** (ell - 1)


@dataclass
class EMReport:
    ell: int
    s: int
    F: str
    ns: list
    errors: list
    scaled: list
    ratios: list
    final_ratio: float | None
    passed: bool


def em_sum_check(F: Polynomial, ell: int, s: int, n_list: Sequence[int], tolerance: float = 0.2) -> EMReport:
    ns = sorted(n_list)
    errors = [abs(em_lhs(F, ell, n) - em_rhs(F, ell, s, n)) for n in ns]
    scaled = [float(e * Fraction(n) ** s) for e, n in zip(errors, ns)]
    ratios = [float(b / a) if a else None for a, b in zip(errors, errors[1:])]
    final = ratios[-1] if ratios else None
    target = 2.0 ** (-s)
    passed = final is not None and abs(final - target) <= tolerance * target
    return EMReport(ell, s, F.to_string(), ns, [float(e) for e in errors], scaled, ratios, final, passed)


# ------------------------------------------------------------ coefficient formula

def _degree(alg: StratifiedAlgebra, index) -> int:
    return sum(w * e for w, e in zip(alg.weights, index))


def _time_profiles(alg: StratifiedAlgebra, f: Polynomial, pieces: int, gauss: Mapping[MultiIndex, Fraction],
                   max_y_degree: int) -> dict[tuple[MultiIndex, ...], Polynomial]:
    """For f(x_1 * y_1 * ... * y_i * x_{i+1}): y-exponent tuple -> E over nu_{t_k} of the x-blocks.

    The result is a polynomial in block t of size i+1.
    """
    names = []
    for k in range(pieces):
        names.append(f"x{k}")
        names.append(f"y{k}")
    names.append(f"x{pieces}")
    composed = alg.compose_with_product(f, names)
    D = alg.dim
    out: dict[tuple, dict] = {}
    for exps, c in composed.terms():
        blocks = [exps[k * D:(k + 1) * D] for k in range(len(names))]
        ys = tuple(blocks[1::2])
        if any(not any(y) for y in ys):
            continue
        if sum(_degree(alg, y) for y in ys) > max_y_degree:
            continue
        coeff = c
        texp = []
        for xb in blocks[0::2]:
            d = _degree(alg, xb)
            if d % 2:
                coeff = 0
                break
            coeff *= gauss[xb]
            texp.append(d // 2)
        if coeff:
            bucket = out.setdefault(ys, {})
            key = tuple(texp)
            bucket[key] = bucket.get(key, 0) + coeff
    tblocks = (("t", pieces + 1),)
    return {ys: Polynomial(tblocks, terms) for ys, terms in out.items()}


def xi_formula(j: int, f: Polynomial, model: Model, x: str | None = None) -> Fraction:
    """Coefficient of n^{-j/2} assembled from walk/Gaussian moment differences and EM polynomials.

    Valid at a vertex whose harmonic position is the identity, with t = 1.  For
    j >= 2 only single-vertex models are covered: otherwise the ergodic
    corrections of the base chain also enter at that order.
    """
    alg = model.algebra
    x = x or model.x
    if any(model.harmonic.positions[x]):
        raise AssumptionError("the coefficient formula is evaluated at a vertex placed at the identity")
    if j < 1:
        raise DomainError("j must be at least 1")
    if j >= 2 and len(model.graph) > 1:
        raise AssumptionError("for j >= 2 the formula covers single-vertex models only")
    if not model.centered:
        raise AssumptionError("the walk is not centered")
    deg_f = weighted_degree_of_poly(alg, f)
    cov, drift = limit_coefficients(alg, model.graph, model.m, model.harmonic)
    spec = GaussianSpec.make(cov, drift)
    gauss = gaussian_moments(spec, alg, max(deg_f, 2))
    delta = {}
    for index in indices_up_to(alg.weights, deg_f):
        if _degree(alg, index) >= 3:
            diff = averaged_moment(alg, model.graph, model.m, model.harmonic, index) - gauss[index]
            if diff:
                delta[index] = diff
    total = Fraction(0)
    for i in range(1, j + 1):
        if 3 * i > deg_f:
            break
        profiles = None
        for q in range(0, (j - i) // 2 + 1):
            target = j + 2 * i - 2 * q
            if target > deg_f:
                continue
            if profiles is None:
                profiles = _time_profiles(alg, f, i, gauss, deg_f)
            for ys, F in profiles.items():
                if sum(_degree(alg, y) for y in ys) != target or any(y not in delta for y in ys):
                    continue
                weight = math.prod(delta[y] for y in ys)
                for face in range(2, i + 2):
                    if q < i + 1 - face:
                        continue
                    B = em_polynomials(i + 1, face, q)[q]
                    if B.is_zero():
                        continue
                    value = simplex_integral(restrict_to_face(apply_operator(B, F), face), face)
                    total += weight * value / math.factorial(q)
    return total


# ------------------------------------------------------------ Trotter-type bound

def sup_majorant(p: Polynomial, alg: StratifiedAlgebra, radius: Fraction) -> Fraction:
    """sum |c| R^{d(J)}: an upper bound for sup |p| on {|x_k| <= R^{weight_k}}."""
    radius = as_fraction(radius)
    return sum((abs(c) * radius ** _degree(alg, e) for e, c in p.terms()), Fraction(0))


def weight_words(alg: StratifiedAlgebra, weight: int) -> list[tuple[int, ...]]:
    out = []

    def rec(prefix, remaining):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for k in range(alg.dim):
            w = alg.weights[k]
            if w <= remaining:
                rec(prefix + [k], remaining - w)

    rec([], weight)
    return out


def derivative_norm(f: Polynomial, alg: StratifiedAlgebra, weight: int, radius: Fraction) -> Fraction:
    """max over words of total weight ``weight`` in left-invariant fields of the sup majorant."""
    best = Fraction(0)
    for word in weight_words(alg, weight):
        g = f
        for k in reversed(word):
            g = alg.field(g, k)
            if g.is_zero():
                break
        best = max(best, sup_majorant(g, alg, radius))
    return best


@dataclass
class TrotterBound:
    bound: float
    phi: float
    psi: float
    psi_shifted: float
    components: dict


def trotter_bound(model: Model, f: Polynomial, x: str, t, n: int, C=8, b=2, lam=1, radius=1) -> TrotterBound:
    """Right side of the Voronovskaja-type rate with M = 1, omega = 0, k(n) = [nt]."""
    alg = model.algebra
    C, b, lam, radius, t = (as_fraction(v) for v in (C, b, lam, radius, t))
    cov, drift = limit_coefficients(alg, model.graph, model.m, model.harmonic)
    spec = GaussianSpec.make(cov, drift)
    hop_max = max(float(alg.hom_norm(hop(alg, model.harmonic, e))) for e in model.graph.edges if e.p)
    enlarged = radius + Fraction(b) ** 3 * Fraction(math.ceil(hop_max * 1000), 1000)
    gen_f = generator_apply(f, spec, alg)
    shifted = f * lam - gen_f
    d3_f = float(derivative_norm(f, alg, 3, enlarged))
    d3_shift = float(derivative_norm(shifted, alg, 3, enlarged))
    gen_norm = float(sup_majorant(gen_f, alg, radius))
    k = math.floor(n * t)
    rate = float(C) / math.sqrt(n) * hop_max ** 3
    phi = gen_norm + rate * d3_f
    psi = rate * d3_f
    psi_shift = rate * d3_shift
    bound = (math.sqrt(k) / n) * phi + abs(k / n - float(t)) * phi + 2 / float(lam) * psi \
        + float(t) / float(lam) * psi_shift
    return TrotterBound(bound, phi, psi, psi_shift, {
        "generator_sup": gen_norm, "d3_sup": d3_f, "d3_shifted_sup": d3_shift, "max_hop": hop_max,
        "box_radius": float(radius), "enlarged_radius": float(enlarged), "k": k})


# ------------------------------------------------------------ non-harmonic realizations

def be_nonharmonic(model: Model, f: Polynomial, t, n_list: Sequence[int], vertices: Sequence[str] | None = None,
                   order: int = 3) -> dict:
    """Sup over vertices of |D_n| for the model's own (possibly non-harmonic) realization."""
    vertices = list(vertices or model.graph.vertices)
    harness = Harness(model, f, model.realization)
    reports = {v: discrepancy(model, f, v, t, n_list, order, harness=harness) for v in vertices}
    ns = sorted(set(int(n) for n in n_list))
    sup = []
    for n in ns:
        sup.append(max(abs(float(reports[v].D(n))) for v in vertices))
    slope = loglog_slope(ns, sup)
    return {
        "model": model.name, "f": f.to_string(), "t": fraction_str(as_fraction(t)),
        "harmonic": model.is_harmonic,
        "corrector_norm": _json_number(corrector_norm(model.algebra, model.realization, model.harmonic)),
        "rows": [{"n": n, "sup_abs_D": v} for n, v in zip(ns, sup)],
        "slope": slope,
        "exact_agreement": all(v == 0 for v in sup),
        "per_vertex": {v: r.to_json() for v, r in reports.items()},
    }


def _json_number(value):
    return fraction_str(value) if isinstance(value, Fraction) else float(value)
