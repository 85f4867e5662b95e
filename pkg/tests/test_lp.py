import itertools
from fractions import Fraction as F

import numpy as np
import pytest

from semistab.gitnorm import polytope_membership
from semistab.lp import feasible_point, solve_eq_lp
from semistab.polycore import SupportSet


def test_simple_feasible():
    # x1 + x2 = 1, x1 - x2 = 0 -> (1/2, 1/2)
    res = feasible_point([[1, 1], [1, -1]], [1, 0])
    assert res.status == "optimal"
    assert res.x == [F(1, 2), F(1, 2)]


def test_optimization():
    # max x1 + 2 x2 s.t. x1 + x2 + s = 4, x2 + t = 3
    res = solve_eq_lp([[1, 1, 1, 0], [0, 1, 0, 1]], [4, 3],
                      [1, 2, 0, 0], maximize=True)
    assert res.status == "optimal"
    assert res.objective == 7
    assert res.x[0] == 1 and res.x[1] == 3


def test_infeasible_farkas():
    # x1 + x2 = -1 with x >= 0 is infeasible
    res = feasible_point([[1, 1]], [-1])
    assert res.status == "infeasible"
    y = res.farkas
    assert y[0] * 1 <= 0 and y[0] * (-1) > 0


def test_farkas_certificate_general():
    rng = np.random.default_rng(3)
    seen_infeasible = 0
    for _ in range(40):
        m, n = 3, 4
        A = [[F(int(rng.integers(-4, 5))) for _ in range(n)] for _ in range(m)]
        b = [F(int(rng.integers(-4, 5))) for _ in range(m)]
        res = feasible_point(A, b)
        if res.status == "optimal":
            for i in range(m):
                assert sum(A[i][j] * res.x[j] for j in range(n)) == b[i]
            assert all(x >= 0 for x in res.x)
        else:
            seen_infeasible += 1
            y = res.farkas
            yb = sum(y[i] * b[i] for i in range(m))
            assert yb > 0
            for j in range(n):
                assert sum(y[i] * A[i][j] for i in range(m)) <= 0
    assert seen_infeasible > 0


def test_unbounded():
    res = solve_eq_lp([[1, -1]], [0], [-1, 0], maximize=False)
    assert res.status == "unbounded"


def _grid_feasible(points, target, denom=24):
    """Brute-force oracle: is target a convex combination of the points with
    weights k/denom?  Exhaustive over compositions with pruning."""
    n = len(points)
    dim = len(target)
    tgt = [denom * t for t in target]

    def rec(idx, remaining, acc):
        if idx == n - 1:
            final = [a + remaining * p for a, p in zip(acc, points[n - 1])]
            return all(f == t for f, t in zip(final, tgt))
        # prune: remaining mass can't fix a coordinate overshoot for
        # nonnegative point coordinates
        for k in range(remaining + 1):
            nxt = [a + k * p for a, p in zip(acc, points[idx])]
            if rec(idx + 1, remaining - k, nxt):
                return True
        return False

    return rec(0, denom, [F(0)] * dim)


def test_membership_agrees_with_grid_enumeration():
    """LP feasibility versus a rational-grid search on small instances."""
    rng = np.random.default_rng(7)
    checked_member = checked_non = 0
    for trial in range(12):
        p = int(rng.integers(1, 4))
        q = int(rng.integers(1, 4))
        d = int(rng.integers(1, 4))
        nE = int(rng.integers(2, 6))
        triples = []
        for _ in range(nE):
            i = int(rng.integers(0, p))
            j = int(rng.integers(0, q))
            alpha = tuple(int(v) for v in rng.integers(0, 3, size=d))
            if (i, j, alpha) not in triples:
                triples.append((i, j, alpha))
        E = SupportSet(p, q, d, triples)
        sigma = F(int(rng.integers(0, 3)), int(rng.integers(1, 4)))
        res = polytope_membership(E, sigma)
        target = [F(1, p)] * p + [F(1, q)] * q + [sigma] * d
        if res.member:
            # exact reconstruction check
            pts = E.weight_points()
            comb = [sum(t * pt[c] for t, pt in zip(res.theta, pts))
                    for c in range(p + q + d)]
            assert comb == target
            assert sum(res.theta) == 1
            checked_member += 1
        else:
            assert not _grid_feasible(E.weight_points(), target)
            checked_non += 1
    assert checked_non > 0


def test_grid_agrees_when_lp_vertex_is_coarse():
    """When the LP finds a member with denominator dividing 24, the grid
    oracle must agree."""
    rng = np.random.default_rng(19)
    agreements = 0
    for trial in range(20):
        p, q, d = 2, 2, 2
        nE = int(rng.integers(2, 7))
        triples = []
        for _ in range(nE):
            i = int(rng.integers(0, p))
            j = int(rng.integers(0, q))
            alpha = tuple(int(v) for v in rng.integers(0, 3, size=d))
            if (i, j, alpha) not in triples:
                triples.append((i, j, alpha))
        E = SupportSet(p, q, d, triples)
        sigma = F(1, 2)
        res = polytope_membership(E, sigma)
        if res.member and all(t.denominator <= 24 and 24 % t.denominator == 0
                              for t in res.theta):
            target = [F(1, p)] * p + [F(1, q)] * q + [sigma] * d
            assert _grid_feasible(E.weight_points(), target)
            agreements += 1
    assert agreements > 0
