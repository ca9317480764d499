from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from oracles import convolution_moments
from nilwalk.edgeworth import (Harness, apply_operator, be_nonharmonic, discrepancy, em_lhs, em_polynomials,
                               em_rhs, em_sum_check, lhs_exact, loglog_slope, rhs_exact, simplex_integral,
                               trotter_bound, xi_formula)
from nilwalk.errors import AssumptionError, ConfigError, DomainError
from nilwalk.models import load_model
from nilwalk.polyalg import Polynomial, QuadraticSurd, parse_polynomial


def f_of(model, text):
    return model.parse_function(text)


def test_lhs_on_symmetric_walk():
    model = load_model("symmetric_z")
    for n in (1, 2, 5, 16):
        assert lhs_exact(model, f_of(model, "x^2"), "v", 1, n) == 1
        assert lhs_exact(model, f_of(model, "x^4"), "v", 1, n) == 3 - Fraction(2, n)


def test_lhs_on_skewed_walk_matches_convolution():
    model = load_model("skewed_z")
    f = f_of(model, "x^3 - 2*x^2 + x")
    for n in (1, 3, 10):
        mom = convolution_moments({2: Fraction(1, 3), -1: Fraction(2, 3)}, n, 3)
        s = QuadraticSurd.inv_sqrt(n)
        expected = s ** 3 * mom[3] - 2 * s ** 2 * mom[2] + s * mom[1]
        assert lhs_exact(model, f, "v", 1, n) == expected
    assert lhs_exact(model, f_of(model, "x^3"), "v", 1, 25) == Fraction(2, 5)


def test_rhs_examples():
    skewed = load_model("skewed_z")
    assert rhs_exact(skewed, f_of(skewed, "x^2"), "v", 1, 7) == 2
    assert rhs_exact(skewed, f_of(skewed, "x^3"), "v", 1, 7) == 0
    heis = load_model("heisenberg_bouquet")
    assert rhs_exact(heis, f_of(heis, "x3"), "v", 1, 9) == Fraction(1, 6)


def test_insufficient_dmax_is_a_configuration_error():
    model = load_model("skewed_z")
    with pytest.raises(ConfigError):
        Harness(model, f_of(model, "x^4"), dmax=3)


def test_discrepancy_examples():
    sym = load_model("symmetric_z")
    report = discrepancy(sym, f_of(sym, "x^2"), "v", 1, [16, 32, 64])
    assert report.exact_agreement and report.slope is None
    report = discrepancy(sym, f_of(sym, "x^4"), "v", 1, [16, 32, 64, 128])
    assert all(report.D(n) == Fraction(-2, n) for n in (16, 32, 64, 128))
    assert abs(float(report.fit.xi[1]) + 2) < 1e-12


def test_discrepancy_at_general_time():
    model = load_model("skewed_z")
    report = discrepancy(model, f_of(model, "x^3"), "v", Fraction(1, 2), [16, 32, 64])
    # [nt] = n/2 steps: third moment 2 (n/2) n^{-3/2}
    assert report.D(16) == QuadraticSurd.inv_sqrt(16) * 1


def test_discrepancy_off_the_identity():
    model = load_model("hexagonal")
    report = discrepancy(model, f_of(model, "x1^2*x2 + x2^3"), "b", 1, [8, 16, 32, 64])
    assert report.rows[0][1] == report.rows[0][3] + report.rows[0][2]


def test_em_polynomials_basic_shape():
    table = em_polynomials(2, 2, 3)
    assert table[0] == 1
    t = Polynomial.variable((("t", 2),), "t", 0)
    assert table[1] == -(t + Polynomial.variable((("t", 2),), "t", 1)) * Fraction(1, 2)
    assert em_polynomials(3, 2, 2)[0].is_zero()
    with pytest.raises(DomainError):
        em_polynomials(2, 1, 2)


@pytest.mark.parametrize("ell,i", [(2, 2), (3, 2), (3, 3), (4, 2), (4, 3), (4, 4)])
def test_em_polynomials_are_homogeneous(ell, i):
    for j, poly in enumerate(em_polynomials(ell, i, 4)):
        for exps, _ in poly.terms():
            assert sum(exps) == j - (ell - i)


def test_dirichlet_integral():
    poly = parse_polynomial("t1^2*t2", 2, "t")
    assert simplex_integral(poly, 2) == Fraction(2 * 1, 24)
    assert simplex_integral(Polynomial.constant((("t", 3),), 1), 3) == Fraction(1, 2)


def test_lattice_sums_interpolate_exactly():
    F = parse_polynomial("t1^3*t2 + 2*t3^2 - t1", 3, "t")
    for n in (3, 4, 9):
        assert em_lhs(F, 3, n) == em_lhs(F, 3, n, brute=True)


@given(st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 2)),
                       st.fractions(-3, 3, max_denominator=5), max_size=4), st.integers(2, 12))
def test_lattice_sum_interpolation_property(terms, n):
    F = Polynomial((("t", 3),), terms)
    assert em_lhs(F, 3, n) == em_lhs(F, 3, n, brute=True)


def test_constant_function_has_no_remainder():
    one = Polynomial.constant((("t", 2),), 1)
    for n in (4, 17):
        assert em_lhs(one, 2, n) == 1 == em_rhs(one, 2, 2, n)


@pytest.mark.parametrize("ell,s,F", [(2, 2, "t1^2*t2^3 + t1"), (2, 3, "t1^5*t2"), (3, 2, "t1*t2^2"),
                                     (3, 3, "t2^5"), (4, 2, "t4^4")])
def test_em_convergence_order(ell, s, F):
    report = em_sum_check(parse_polynomial(F, ell, "t"), ell, s, [2 ** k for k in range(5, 11)])
    assert report.passed, report.ratios


def test_apply_operator_is_differentiation():
    F = parse_polynomial("t1^3*t2^2", 2, "t")
    op = parse_polynomial("t1*t2", 2, "t")
    assert apply_operator(op, F) == parse_polynomial("6*t1^2*t2", 2, "t")


@pytest.mark.parametrize("name,f", [("skewed_z", "x^3"), ("skewed_z", "x^5 - x^4"), ("symmetric_z", "x^6"),
                                    ("heisenberg_bouquet", "x1^2*x2^2*x3"), ("engel_bouquet", "x4*x1 + x3^2")])
def test_coefficient_formula_matches_exact_fit(name, f):
    model = load_model(name)
    fp = f_of(model, f)
    ns = [2 ** k for k in range(4, 13)]
    report = discrepancy(model, fp, model.x, 1, ns, order=6)
    for j in range(1, 6):
        fitted = float(report.fit.xi[j - 1])
        assert abs(float(xi_formula(j, fp, model)) - fitted) <= max(1e-8, 1e-6 * abs(fitted))


def test_coefficient_formula_preconditions():
    hexagonal = load_model("hexagonal")
    f = f_of(hexagonal, "x1^3")
    assert xi_formula(1, f, hexagonal) == 0
    with pytest.raises(AssumptionError):
        xi_formula(2, f, hexagonal)


def test_trotter_bound_decreases_and_dominates():
    model = load_model("skewed_z")
    f = f_of(model, "x^3")
    bounds = [trotter_bound(model, f, "v", 1, n).bound for n in (16, 64, 256, 1024)]
    assert bounds == sorted(bounds, reverse=True)
    assert all(b >= 2 / n ** 0.5 for b, n in zip(bounds, (16, 64, 256, 1024)))


def test_nonharmonic_sweep_reports_corrector():
    model = load_model("hexagonal_flat")
    report = be_nonharmonic(model, f_of(model, "x1^2"), 1, [17, 33, 65, 129])
    assert report["corrector_norm"] == "1/2"
    assert report["slope"] < -0.45
    # with the harmonic realization the sweep reduces to the plain discrepancy
    harmonic = load_model("hexagonal")
    plain = discrepancy(harmonic, f_of(harmonic, "x1^2"), "a", 1, [17, 33])
    again = be_nonharmonic(harmonic, f_of(harmonic, "x1^2"), 1, [17, 33], vertices=["a"])
    assert again["per_vertex"]["a"]["rows"] == plain.to_json()["rows"]


def test_slope_of_power_law():
    assert loglog_slope([10, 100, 1000], [1.0, 0.1, 0.01]) == pytest.approx(-1.0)
    assert loglog_slope([10, 100], [0, 0]) is None
