import itertools
import math
from fractions import Fraction as F

import numpy as np
import pytest

from semistab import fixtures as fx
from semistab.blockdecomp import Tile, eliminate
from semistab.gitnorm import find_destabilizer
from semistab.polycore import Poly, PolyMatrix, support_set
from semistab.sublevel import (
    OmegaBasis,
    TilePlanWeight,
    estimate_integral,
    matrix_evaluator,
    probe_nondegeneracy,
    sample_omega,
    wedge_norm,
    wedge_norm_batch,
)
from semistab.tileplan import solve_plan, tile_point


# -- wedge norms -------------------------------------------------------------------


def test_wedge_norm_line():
    for t in (-2.0, 0.0, 3.5):
        rows = np.array([[1.0, t]])
        assert wedge_norm(rows, np.eye(2)) == pytest.approx(math.hypot(1, t))


def test_wedge_norm_single_pairing():
    om = fx.anisotropic_omega(5.0)
    assert wedge_norm(np.array([[1.0, 0.0]]), om) == pytest.approx(5.0)


def test_wedge_norm_square_case():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(3, 3))
    om, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    got = wedge_norm(A, om)
    assert got == pytest.approx(abs(np.linalg.det(A @ om)), rel=1e-12)


def _minor_sum_oracle(G):
    """Explicit sum over increasing column tuples of squared maximal minors."""
    p, q = G.shape
    total = 0.0
    for cols in itertools.combinations(range(q), p):
        total += np.linalg.det(G[:, cols]) ** 2
    return total


def test_wedge_norm_matches_minor_enumeration():
    rng = np.random.default_rng(4)
    for _ in range(50):
        p = int(rng.integers(1, 5))
        q = int(rng.integers(p, 8))
        G = rng.normal(size=(p, q))
        assert wedge_norm(G, np.eye(q)) ** 2 == pytest.approx(
            _minor_sum_oracle(G), rel=1e-10)


def test_minor_sum_identity_against_singular_values():
    # ordered-tuple sum of squared minors = (p!/p^p) (p (prod sigma^2)^(1/p))^p
    rng = np.random.default_rng(9)
    for _ in range(1000):
        p = int(rng.integers(1, 5))
        q = int(rng.integers(p, 8))
        M = rng.normal(size=(p, q))
        sv = np.linalg.svd(M, compute_uv=False)
        lhs = math.factorial(p) * _minor_sum_oracle(M)  # ordered tuples
        prod_sq = float(np.prod(sv ** 2))
        rhs = (math.factorial(p) / p ** p) * (p * prod_sq ** (1.0 / p)) ** p
        assert abs(lhs - rhs) <= 1e-8 * max(rhs, 1e-12)


def test_wedge_norm_right_orthogonal_invariance():
    rng = np.random.default_rng(14)
    for _ in range(50):
        G = rng.normal(size=(3, 6))
        O, r = np.linalg.qr(rng.normal(size=(6, 6)))
        base = wedge_norm(G, np.eye(6))
        rot = wedge_norm(G, O)
        assert abs(rot - base) <= 1e-9 * base


# -- omega sampling -----------------------------------------------------------------


def test_sample_omega_orthogonal_at_zero_scale():
    om = sample_omega(3, 0.0, 5)
    U = om.columns
    assert np.allclose(U @ U.T, np.eye(5), atol=1e-10)
    assert abs(abs(np.linalg.det(U)) - 1) < 1e-10


def test_sample_omega_deterministic():
    a = sample_omega(11, 4.0, 4)
    b = sample_omega(11, 4.0, 4)
    assert np.array_equal(a.columns, b.columns)
    c = sample_omega(12, 4.0, 4)
    assert not np.array_equal(a.columns, c.columns)


def test_sample_omega_achieves_large_condition_numbers():
    # at scale 8 on R^9 at least half the draws are e^8-ill-conditioned
    hits = 0
    n = 200
    for k in range(n):
        om = sample_omega(k, 8.0, 9)
        sv = np.linalg.svd(om.columns, compute_uv=False)
        if sv[0] / sv[-1] >= math.exp(8.0):
            hits += 1
    assert hits >= n // 2


# -- the estimator -----------------------------------------------------------------------


def test_estimator_deterministic():
    line = fx.line_family()
    om = fx.anisotropic_omega(1.0)
    a = estimate_integral(line, 1.0, 2, [(-100, 100)], om, seed=5, n_samples=20000)
    b = estimate_integral(line, 1.0, 2, [(-100, 100)], om, seed=5, n_samples=20000)
    assert a.value == b.value and a.std_error == b.std_error
    c = estimate_integral(line, 1.0, 2, [(-100, 100)], om, seed=6, n_samples=20000)
    assert a.value != c.value


def test_estimator_closed_form_isotropic():
    # int dt / (1 + t^2) = 2 atan(L) ~= pi
    line = fx.line_family()
    om = fx.anisotropic_omega(1.0)
    est = estimate_integral(line, 1.0, 2, [(-1000, 1000)], om, seed=1,
                            n_samples=100_000)
    assert est.value == pytest.approx(math.pi, rel=0.05)
    assert est.flagged == 0


def test_estimator_anisotropic_within_ten_percent_of_pi():
    line = fx.line_family()
    for c in (0.1, 1.0, 10.0):
        om = fx.anisotropic_omega(c)
        est = estimate_integral(line, 1.0, 2, [(-1000, 1000)], om, seed=123,
                                n_samples=100_000, stratified=True,
                                budget_factor=64)
        assert abs(est.value - math.pi) <= 0.10 * math.pi


def test_estimator_domain_monotonicity():
    line = fx.line_family()
    om = fx.anisotropic_omega(1.0)
    prev = None
    for L in (10.0, 100.0, 1000.0):
        est = estimate_integral(line, 1.0, 2, [(-L, L)], om, seed=2,
                                n_samples=50_000)
        if prev is not None:
            assert est.value >= prev.value - 3 * (est.std_error + prev.std_error)
        prev = est


def test_estimator_flags_singular_samples():
    # zero rows with positive weight: the norm vanishes everywhere
    M = PolyMatrix([[Poly.zero(1), Poly.zero(1)]])
    om = fx.anisotropic_omega(1.0)
    est = estimate_integral(M, 1.0, 2, [(0, 1)], om, seed=0, n_samples=1000)
    assert est.flagged == 1000
    assert est.value == 0.0


def test_estimator_rejects_bad_tau():
    with pytest.raises(ValueError):
        estimate_integral(fx.line_family(), 1.0, 0, [(0, 1)],
                          fx.anisotropic_omega(1.0))


# -- tile-plan weights ----------------------------------------------------------------


def _plan61():
    M = fx.example61_matrix()
    _, _, _, dec = eliminate(M)
    pts = [tile_point(dec, t, F(i, 2))
           for i, t in enumerate(fx.example61_tiles())]
    return M, dec, solve_plan(pts, 4, 9, sigma=F(13, 36))


def test_tile_plan_weight_collapses_to_constant():
    M, dec, plan = _plan61()
    w = TilePlanWeight(M, dec, plan, mode="auto", restarts=4)
    # product of the four tile values: 2, 2, 2, 4 sqrt(3) with exponents
    # theta_i / sigma
    expected = 2 ** (38 / 13) * 3 ** (1 / 13)
    assert w.constant == pytest.approx(expected, rel=1e-4)
    vals = w(np.array([[0.0, 0.0], [3.0, -4.0]]))
    assert np.allclose(vals, w.constant)


# -- hypothesis probing ---------------------------------------------------------------


def test_probe_identity_ratio_at_least_one():
    M, dec, plan = _plan61()
    w = TilePlanWeight(M, dec, plan, mode="auto", restarts=4)
    rep = probe_nondegeneracy(M, dec, [F(1, 3), F(-2, 7)], F(13, 36),
                              w.constant, M_samples=1, seed=0)
    ident = rep.samples[0]
    assert ident["sample"] == "identity"
    assert ident["ratio"] >= 1.0


def test_probe_zero_weight_is_trivially_satisfied():
    M, dec, _ = _plan61()
    rep = probe_nondegeneracy(M, dec, [F(0), F(0)], F(13, 36), 0.0,
                              M_samples=1)
    assert rep.min_ratio == math.inf


def test_probe_destabilizer_flow_drives_ratio_to_zero():
    M, dec = fx.example63_decomposition()
    sub = fx.example63_degree1_subtile()
    dest = find_destabilizer(support_set(sub), 0, sigma_uniform=True)
    tile = Tile((0, 3), (4, 7))
    rep = probe_nondegeneracy(M, dec, [F(0)] * 3, F(1, 3), 1.0,
                              M_samples=1, destabilizer=dest, flow_steps=40,
                              tile=tile, degree_override=1)
    # identity: ten unit coefficients of order one, so RHS = sqrt(10)
    assert rep.samples[0]["rhs"] == pytest.approx(math.sqrt(10), rel=1e-12)
    flows = [s for s in rep.samples if s["sample"].startswith("destabilizer")]
    ratios = [s["ratio"] for s in flows]
    assert all(r2 < r1 for r1, r2 in zip(ratios, ratios[1:]))
    # every pairing is <= -1/6, so step k decays at least like exp(-k/6)
    base = rep.samples[0]["ratio"]
    for k, r in enumerate(ratios, start=1):
        assert r <= base * math.exp(-k / 6) * (1 + 1e-9)
    assert ratios[-1] < 2e-3 * base
