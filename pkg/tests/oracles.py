"""Independent reference computations used by the tests: brute-force path sums and convolutions."""
from __future__ import annotations

from fractions import Fraction

from nilwalk.realization import hop


def convolution_moments(steps: dict[int, Fraction], n: int, dmax: int) -> list[Fraction]:
    """E[S_n^d] for d <= dmax where S_n sums n i.i.d. integer steps."""
    dist = {0: Fraction(1)}
    for _ in range(n):
        nxt: dict[int, Fraction] = {}
        for x, p in dist.items():
            for s, q in steps.items():
                nxt[x + s] = nxt.get(x + s, 0) + p * q
        dist = nxt
    return [sum((p * Fraction(x) ** d for x, p in dist.items()), Fraction(0)) for d in range(dmax + 1)]


def path_expectation(model, x: str, n: int, fn, realization=None) -> Fraction:
    """Sum over all length-n paths from x of prob * fn(displacement) using exact group products."""
    alg, g = model.algebra, model.graph
    r = realization or model.realization
    total = Fraction(0)

    def walk(v, prob, pos, left):
        nonlocal total
        if left == 0:
            total += prob * fn(pos)
            return
        for e in g.out_edges[v]:
            if e.p:
                walk(e.terminus, prob * e.p, alg.group_mul(pos, hop(alg, r, e)), left - 1)

    walk(x, Fraction(1), alg.identity(), n)
    return total


def monomial(point, index) -> Fraction:
    out = Fraction(1)
    for v, e in zip(point, index):
        out *= Fraction(v) ** e
    return out


def double_factorial_odd(k: int) -> int:
    out = 1
    for j in range(1, 2 * k, 2):
        out *= j
    return out
