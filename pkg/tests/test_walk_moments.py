from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import rationals
from oracles import convolution_moments, monomial, path_expectation
from nilwalk.errors import AssumptionError, ConfigError
from nilwalk.models import load_model
from nilwalk.polyalg import QuadraticSurd, indices_up_to
from nilwalk.walk_moments import (MomentEngine, brute_double_sum, edge_moment_fn, ergodic_A, ergodic_A2, limit_coefficients,
                                  mc_sample, moment_dp, q_iterated, verify_low_moments)


@pytest.mark.parametrize("name,n,dmax", [("hexagonal", 4, 4), ("triangle_ring", 5, 3), ("heisenberg_bouquet", 3, 4),
                                         ("engel_bouquet", 3, 4), ("cycle3", 5, 4), ("hexagonal_flat", 3, 3)])
def test_dp_matches_path_enumeration(name, n, dmax):
    model = load_model(name)
    x = model.graph.vertices[-1]
    table = moment_dp(model.algebra, model.graph, model.realization, x, n, dmax)
    for index in indices_up_to(model.algebra.weights, dmax):
        assert table.unscaled(index) == path_expectation(model, x, n, lambda p: monomial(p, index))


def test_dp_matches_convolution_on_skewed_walk():
    model = load_model("skewed_z")
    tables = MomentEngine(model.algebra, model.graph, model.realization, 6).run("v", [1, 7, 30])
    for n, table in tables.items():
        expected = convolution_moments({2: Fraction(1, 3), -1: Fraction(2, 3)}, n, 6)
        assert [table.unscaled((d,)) for d in range(7)] == expected


def test_mass_is_conserved_per_vertex_class():
    model = load_model("bipartite")
    table = moment_dp(model.algebra, model.graph, model.realization, "a", 5, 2)
    assert table.mass("a") == 0 and table.mass("b") == 1


def test_scaled_moment_is_a_surd():
    model = load_model("skewed_z")
    table = moment_dp(model.algebra, model.graph, model.realization, "v", 9, 3)
    assert table.scaled((3,)) == Fraction(2 * 9, 27)
    value = table.scaled((3,), scale_n=8)
    assert isinstance(value, QuadraticSurd)
    assert float(value) == pytest.approx(18 / 8 ** 1.5)


def test_degree_cap_is_enforced():
    model = load_model("hexagonal")
    table = moment_dp(model.algebra, model.graph, model.realization, "a", 2, 2)
    with pytest.raises(ConfigError):
        table.unscaled((3, 0))
    with pytest.raises(ConfigError):
        MomentEngine(model.algebra, model.graph, model.realization, 40)


@pytest.mark.parametrize("name", ["hexagonal", "triangular", "heisenberg_bouquet", "cycle3", "bipartite"])
def test_low_moment_identities(name):
    model = load_model(name)
    engine = MomentEngine(model.algebra, model.graph, model.harmonic, 3)
    for x in model.graph.vertices:
        tables = engine.run(x, range(0, 12))
        for n, table in tables.items():
            for index in engine.indices:
                if any(index):
                    assert verify_low_moments(model.algebra, model.graph, model.m, model.harmonic, x, n, index,
                                              table) == 0


def test_degree_three_identity_needs_constant_second_moments():
    # on triangle_ring the per-vertex second moment F^(2) varies, so S_k and F^(2)(w_k) are
    # correlated and the third-moment identity picks up an extra term
    model = load_model("triangle_ring")
    F2 = edge_moment_fn(model.algebra, model.graph, model.harmonic, (2,))
    assert len(set(F2)) > 1
    engine = MomentEngine(model.algebra, model.graph, model.harmonic, 3)
    tables = engine.run("b", range(8))
    residual3 = [verify_low_moments(model.algebra, model.graph, model.m, model.harmonic, "b", n, (3,), t)
                 for n, t in tables.items()]
    assert any(residual3)
    for d in (1, 2):
        assert all(verify_low_moments(model.algebra, model.graph, model.m, model.harmonic, "b", n, (d,), t) == 0
                   for n, t in tables.items())
    # the missing term is 3 sum_k E[S_k F^(2)(w_k)]
    for n, table in tables.items():
        extra = sum(3 * sum(tables[k].get(y, (1,)) * F2[model.graph.index[y]] for y in model.graph.vertices)
                    for k in range(n))
        assert residual3[n] == extra


def test_limit_coefficients_of_bundled_models():
    model = load_model("hexagonal")
    cov, drift = limit_coefficients(model.algebra, model.graph, model.m, model.harmonic)
    assert cov == [[Fraction(2, 9), Fraction(-1, 9)], [Fraction(-1, 9), Fraction(2, 9)]]
    model = load_model("heisenberg_bouquet")
    cov, drift = limit_coefficients(model.algebra, model.graph, model.m, model.harmonic)
    assert drift == [Fraction(1, 6)]


def test_uncentered_walk_has_no_limit_generator():
    from nilwalk.models import model_from_dict, resolve_model_path
    import json

    data = json.loads(resolve_model_path("skewed_z").read_text())
    for edge in data["graph"]["edges"]:
        edge["p"] = "1/2" if edge["id"] in ("up", "down") else "0"
    model = model_from_dict(data)
    assert not model.centered
    with pytest.raises(AssumptionError):
        limit_coefficients(model.algebra, model.graph, model.m, model.harmonic)


@given(st.lists(rationals(), min_size=3, max_size=3), st.integers(0, 40))
def test_ergodic_sum_spectral_cross_check(f, n):
    model = load_model("cycle3")
    direct = ergodic_A(model.graph, model.spectral, f, n)
    assert len(direct) == 3


@given(st.lists(rationals(), min_size=2, max_size=2), st.lists(rationals(), min_size=2, max_size=2),
       st.integers(1, 40))
def test_two_fold_identity_bipartite(f, h, n):
    model = load_model("bipartite")
    result = ergodic_A2(model.graph, model.spectral, f, h, n)
    assert result.residual < 1e-10


def test_iterated_sum_matches_double_sum():
    g = load_model("triangle_ring").graph
    f, h = [Fraction(1), Fraction(-2), Fraction(1, 3)], [Fraction(0), Fraction(5, 7), Fraction(-1)]
    for n in range(2, 12):
        # double sum over l <= k <= n-1 of L^l f L^{k+1} h equals Q with (f, h) and n+1
        assert q_iterated(g, [f, h], n + 1) == brute_double_sum(g, f, h, n)


def test_monte_carlo_is_thread_independent():
    model = load_model("hexagonal")
    a = mc_sample(model.algebra, model.graph, model.realization, "a", 10, 5000, seed=7, block_size=1000, threads=1)
    b = mc_sample(model.algebra, model.graph, model.realization, "a", 10, 5000, seed=7, block_size=1000, threads=3)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.vertices, b.vertices)


def test_monte_carlo_moments_cover_exact_values():
    model = load_model("triangle_ring")
    sample = mc_sample(model.algebra, model.graph, model.realization, "a", 12, 40000, seed=3)
    table = moment_dp(model.algebra, model.graph, model.realization, "a", 12, 2)
    mean, lo, hi = sample.moment_ci((2,))
    assert lo <= float(table.unscaled((2,))) <= hi
