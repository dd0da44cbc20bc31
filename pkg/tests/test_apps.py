import itertools
import math

import numpy as np
import pytest

from icos.acceptance import FOUR_MASSES, FOUR_POINTS
from icos.apps import (Graph, MomentData, boyle3, convex_regress, example61_covariance,
                       expected_payoff, icosahedron, icosahedron_complement, lifted_form,
                       min_form_on_sphere, options_bound, sparse_pca, stable_set_bound)
from icos.conic import AffineExpr
from icos.matcones import is_psd
from icos.poly import evaluate, hessian, parse, random_form
from icos.rng import SplitMix64


def sphere_min_samples(p, count, seed):
    U = np.random.default_rng(seed).normal(size=(count, p.nvars))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    return float(evaluate(p, U).min())


def random_graph(rng, n, density=0.4):
    A = np.triu((rng.random((n, n)) < density).astype(float), 1)
    return Graph(A + A.T)


def alpha_bruteforce(g):
    """Independence number by scanning all vertex subsets (separate from Graph.independence_number)."""
    best = 0
    for mask in range(1 << g.n):
        nodes = [i for i in range(g.n) if mask >> i & 1]
        if len(nodes) > best and all(not g.adjacency[i, j] for i, j in itertools.combinations(nodes, 2)):
            best = len(nodes)
    return best


# sphere ---------------------------------------------------------------------

def test_sphere_examples():
    assert min_form_on_sphere(parse("x1^4 + 2*x1^2*x2^2 + x2^4"), "dsos", 0) == pytest.approx(1.0, abs=1e-7)
    g = min_form_on_sphere(parse("x1^4 + x2^4"), "dsos", 0)
    assert g == pytest.approx(0.5, abs=1e-7)
    assert g == pytest.approx(sphere_min_samples(parse("x1^4 + x2^4"), 200000, 0), abs=1e-4)


def test_sphere_n10_ordering():
    p = random_form(10, 4, SplitMix64(10))
    gd = min_form_on_sphere(p, "dsos", 0)
    gs = min_form_on_sphere(p, "sdsos", 0)
    assert gd <= gs + 1e-6
    assert gs <= sphere_min_samples(p, 20000, 1) + 1e-6


@pytest.mark.parametrize("seed", range(6))
def test_sphere_bound_ordering(seed):
    n = 3 + seed % 3
    p = random_form(n, 4, SplitMix64(500 + seed))
    ub = sphere_min_samples(p, 20000, seed)
    vals = {(c, r): min_form_on_sphere(p, c, r) for c in ("dsos", "sdsos") for r in (0, 1)}
    for r in (0, 1):
        assert vals["dsos", r] <= vals["sdsos", r] + 1e-6
    for c in ("dsos", "sdsos"):
        assert vals[c, 0] <= vals[c, 1] + 1e-6
    assert max(vals.values()) <= ub + 1e-6
    polya = min_form_on_sphere(p, "polya", 1)
    assert polya <= vals["dsos", 1] + 1e-6


def test_sphere_rejects_non_forms():
    with pytest.raises(ValueError):
        min_form_on_sphere(parse("x1^2 + x2"), "dsos")
    with pytest.raises(ValueError):
        min_form_on_sphere(parse("x1^4"), "sos")


# fixtures ---------------------------------------------------------------------------

def test_icosahedron_fixture():
    g = icosahedron()
    c = icosahedron_complement()
    assert g.n == c.n == 12
    assert len(g.edges()) == 30 and set(g.degrees()) == {5}
    assert set(c.degrees()) == {6}
    assert np.array_equal(c.complement().adjacency, g.adjacency)
    assert alpha_bruteforce(c) == 3 == c.independence_number()
    # icosahedron: every vertex's neighbourhood is a 5-cycle
    for v in range(12):
        nb = np.flatnonzero(g.adjacency[v])
        sub = g.adjacency[np.ix_(nb, nb)]
        assert set(sub.sum(1)) == {2}


def test_graph_text_roundtrip_and_errors(data_dir):
    c = Graph.from_text((data_dir / "icosahedron_complement.graph").read_text())
    assert np.array_equal(c.adjacency, icosahedron_complement().adjacency)
    assert np.array_equal(Graph.from_text(c.to_text()).adjacency, c.adjacency)
    with pytest.raises(ValueError):
        Graph.from_text("3\n1 4\n")
    with pytest.raises(ValueError):
        Graph.from_text("3\n1 1\n")
    with pytest.raises(ValueError):
        Graph(np.array([[0, 1], [0, 0]]))


def test_covariance_fixture():
    S = example61_covariance()
    assert S[0, 0] == 291 and S[0, 1] == 290
    assert S[8, 8] == pytest.approx(284.7875, abs=1e-12)
    assert S[8, 9] == pytest.approx(283.7875, abs=1e-12)
    assert S[0, 8] == pytest.approx(-87.0) and S[4, 8] == pytest.approx(277.5) and S[0, 4] == 0
    assert is_psd(S)


# stable set ---------------------------------------------------------------------------

def test_lifted_form_structure():
    g = Graph.from_edges(3, [(0, 1)])
    f = lifted_form(g, AffineExpr(None, 2.0)).to_polynomial()
    # (x.^2)'(2(A+I) - J)(x.^2)
    M = 2 * (g.adjacency + np.eye(3)) - np.ones((3, 3))
    x = np.array([0.3, -0.7, 1.1])
    y = x**2
    assert evaluate(f, x) == pytest.approx(y @ M @ y)


def test_complete_graph():
    K3 = Graph(np.ones((3, 3)) - np.eye(3))
    assert stable_set_bound(K3, "rdsos", 0) == pytest.approx(1.0, abs=1e-6)


def test_icosahedron_complement_levels():
    g = icosahedron_complement()
    assert stable_set_bound(g, "rdsos", 0) == pytest.approx(6.0, abs=1e-4)
    assert stable_set_bound(g, "rsdsos", 0) == pytest.approx(6.0, abs=1e-4)
    assert stable_set_bound(g, "rdsos", 1) == pytest.approx(13 / 3, abs=1e-4)
    assert stable_set_bound(g, "rsdsos", 1) == pytest.approx(13 / 3, abs=1e-4)
    assert stable_set_bound(g, "polya", 0) == math.inf
    assert stable_set_bound(g, "polya", 1) == math.inf
    assert stable_set_bound(g, "polya", 2) == pytest.approx(6.0, abs=1e-4)


def test_relabeling_does_not_change_bounds():
    g = icosahedron_complement()
    h = g.permuted(SplitMix64(3).permutation(12))
    assert not np.array_equal(g.adjacency, h.adjacency)
    for m in ("rdsos", "rsdsos"):
        assert stable_set_bound(h, m, 1) == pytest.approx(stable_set_bound(g, m, 1), abs=1e-5)


@pytest.mark.parametrize("seed", range(10))
def test_stable_set_dominance_and_validity(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 5 + seed % 4)
    a = alpha_bruteforce(g)
    for r in (0, 1):
        vals = [stable_set_bound(g, m, r) for m in ("polya", "rdsos", "rsdsos")]
        assert vals[0] >= vals[1] - 1e-6 and vals[1] >= vals[2] - 1e-6
        assert all(v >= a - 1e-6 for v in vals if math.isfinite(v))


# options ---------------------------------------------------------------------------------

def _moment_matching_points(data):
    """2m equally weighted points mu +/- sqrt(m) L e_i reproduce mu and sigma exactly."""
    L = np.linalg.cholesky(data.sigma)
    m = data.m
    pts = [data.mu + s * math.sqrt(m) * L[:, i] for i in range(m) for s in (1, -1)]
    return np.array(pts), np.full(2 * m, 1.0 / (2 * m))


def test_moment_matching_points_are_valid():
    pts, w = _moment_matching_points(boyle3())
    assert np.all(pts >= 0)
    np.testing.assert_allclose(w @ pts, boyle3().mu)
    centered = pts - boyle3().mu
    np.testing.assert_allclose((centered * w[:, None]).T @ centered, boyle3().sigma, atol=1e-9)


@pytest.mark.parametrize("K,ref", [(30, 21.51), (45, 9.85), (50, 7.30)])
def test_options_bounds(K, ref):
    data = boyle3()
    sddp = options_bound(data, K, "sddp")
    ddp = options_bound(data, K, "ddp")
    assert sddp == pytest.approx(ref, abs=0.01)
    assert ddp == pytest.approx(132.63, abs=0.01)
    assert sddp <= ddp + 1e-6
    pts, w = _moment_matching_points(data)
    low = expected_payoff(pts, w, K)
    assert sddp >= low - 1e-6


def test_four_point_distribution():
    assert expected_payoff(FOUR_POINTS, FOUR_MASSES, 30.0) == pytest.approx(21.51, abs=1e-2)
    assert options_bound(boyle3(), 30.0, "sddp") >= expected_payoff(FOUR_POINTS, FOUR_MASSES, 30.0) - 1e-2


def test_options_degenerate_single_asset():
    data = MomentData([5.0], [[0.0]])
    for method in ("ddp", "sddp"):
        assert options_bound(data, 5.0, method) >= -1e-6


def test_options_input_validation():
    with pytest.raises(ValueError):
        options_bound(boyle3(), None)
    with pytest.raises(ValueError):
        options_bound(boyle3(), 30, "sdp")
    with pytest.raises(ValueError):
        MomentData([1.0, 2.0], [[1.0]])


def test_moment_json(data_dir):
    d = MomentData.from_json((data_dir / "boyle3.json").read_text())
    assert d.strike == 30
    np.testing.assert_array_equal(d.sigma, boyle3().sigma)
    back = MomentData.from_json(d.to_json())
    np.testing.assert_array_equal(back.mu, d.mu)


# sparse PCA -------------------------------------------------------------------------------

@pytest.mark.parametrize("method", ["dd_dual", "sdd_dual"])
def test_spca_diagonal(method):
    res = sparse_pca(np.diag([3.0, 1.0]), 1, method)
    c = res.components[0]
    np.testing.assert_allclose(c.loading, [1.0, 0.0], atol=1e-9)
    assert c.objective == pytest.approx(3.0, abs=1e-6)


@pytest.mark.parametrize("method", ["dd_dual", "sdd_dual"])
def test_spca_example_covariance(method):
    res = sparse_pca(example61_covariance(), 4, method, ncomp=2)
    pc1, pc2 = res.components
    np.testing.assert_allclose(np.abs(pc1.loading), [0] * 4 + [0.5] * 4 + [0] * 2, atol=1e-3)
    np.testing.assert_allclose(np.abs(pc2.loading), [0.5] * 4 + [0] * 6, atol=1e-3)
    assert 100 * pc1.explained_variance == pytest.approx(40.9, abs=0.1)
    assert 100 * pc2.explained_variance == pytest.approx(39.5, abs=0.1)


def test_spca_ordering_and_invariants():
    rng = np.random.default_rng(3)
    for _ in range(5):
        V = rng.normal(size=(6, 6))
        A = V @ V.T
        dd = sparse_pca(A, 2.5, "dd_dual", ncomp=3)
        sdd = sparse_pca(A, 2.5, "sdd_dual", ncomp=3)
        assert dd.components[0].objective >= sdd.components[0].objective - 1e-6
        assert sdd.components[0].objective >= -1e-9
        for res in (dd, sdd):
            objs = [c.objective for c in res.components]
            assert all(b <= a + 1e-6 for a, b in zip(objs, objs[1:]))
            for c in res.components:
                assert abs(np.linalg.norm(c.loading) - 1) <= 1e-9


def test_spca_validation():
    with pytest.raises(ValueError):
        sparse_pca(np.eye(2), 0.5)
    with pytest.raises(ValueError):
        sparse_pca(np.eye(2), 1, "sdp")


# convex regression ---------------------------------------------------------------------------

@pytest.mark.parametrize("cone", ["dsos", "sdsos"])
def test_regress_parabola(cone):
    x = np.linspace(-2, 2, 21)
    f = convex_regress(x, x**2, 2, cone)
    assert np.abs(np.array([f([v]) for v in x]) - x**2).sum() <= 1e-6


def test_regress_concave_target_is_flattened():
    x = np.linspace(-1, 1, 15)
    f = convex_regress(x, -x**2, 2, "dsos")
    assert hessian(f)[0, 0].coeff((0,)) >= -1e-8


def test_regress_exp_quartic_is_convex():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(50, 2))
    y = np.exp(np.linalg.norm(X, axis=1))
    f = convex_regress(X, y, 4, "sdsos")
    h = 1e-3
    for _ in range(100):
        p, d = rng.uniform(-1, 1, 2), rng.normal(size=2)
        d /= np.linalg.norm(d)
        second = (f(p + h * d) - 2 * f(p) + f(p - h * d)) / h**2
        assert second >= -1e-5
    fit = np.array([f(row) for row in X])
    assert np.abs(fit - y).mean() < 0.1


def test_regress_validation():
    with pytest.raises(ValueError):
        convex_regress([0.0, 1.0], [0.0, 1.0], 3)
    with pytest.raises(ValueError):
        convex_regress([0.0, 1.0], [0.0], 2)
    with pytest.raises(ValueError) as info:
        convex_regress(np.zeros((3, 8)), np.zeros(3), 6, basis_cap=10)
    assert "cap 10" in str(info.value)


@pytest.mark.slow
def test_large_quartic_loads_and_mid_size_compiles():
    from icos.conic import ProblemBuilder
    from icos.gram import with_cone

    big = random_form(70, 4, SplitMix64(0))
    assert len(big.terms) == math.comb(73, 4)
    # the n=70 dsos LP does not fit in a few GB; compile n=40 and check its size
    n = 40
    B = ProblemBuilder()
    with_cone(B, random_form(n, 4, SplitMix64(0)), "dsos")
    P = B.build()
    b = math.comb(n + 1, 2)
    assert P.A.shape[0] == math.comb(n + 3, 4) + b + b * (b - 1)
    assert P.A.shape[1] == b * (b + 1) // 2 + b * (b - 1) // 2 + b + b * (b - 1)
