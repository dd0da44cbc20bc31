import json
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from icos.acceptance import farkas_ok, lp_vertex_oracle
from icos.conic import ConicFormatError, ConicProblem, ProblemBuilder, Status, solve
from icos.gram import with_cone
from icos.poly import motzkin


def _lp(c, G, h, **kw):
    B = ProblemBuilder()
    x = B.free(len(c))
    for row, hi in zip(G, h):
        B.add_nonneg(hi - sum(float(g) * xi for g, xi in zip(row, x)))
    B.set_objective(sum(float(ci) * xi for ci, xi in zip(c, x)))
    P = B.build()
    return P, solve(P, feas_tol=1e-9, gap_tol=1e-9, **kw)


def _random_lp(rng, n=2, m=None):
    m = int(rng.integers(1, 5)) if m is None else m
    G = np.vstack([rng.normal(size=(m, n)), np.eye(n), -np.eye(n)])
    x0 = rng.uniform(-1, 1, n)
    h = np.concatenate([G[:m] @ x0 + rng.random(m), np.full(2 * n, 2.0)])
    return rng.normal(size=n), G, h


def _check_optimal(P, sol, tol=1e-7):
    assert sol.status == Status.OPTIMAL
    assert np.abs(P.A @ sol.x - P.b).max(initial=0) <= tol * (1 + np.abs(P.b).max(initial=0))
    assert P.cone_violation(sol.x) <= tol
    assert P.cone_violation(sol.s, dual=True) <= 10 * tol
    assert abs(sol.x @ sol.s) <= 10 * tol * (1 + abs(P.c @ sol.x))


# builder examples -----------------------------------------------------------

def test_free_variable_unbounded():
    B = ProblemBuilder()
    (x,) = B.free(1)
    B.set_objective(x)
    sol = solve(B.build())
    assert sol.status == Status.DUAL_INFEASIBLE
    assert sol.certificate[0] < 0


def test_nonneg_minimum_is_zero():
    B = ProblemBuilder()
    (x,) = B.nonneg(1)
    B.set_objective(x)
    sol = solve(B.build())
    assert sol.status == Status.OPTIMAL and abs(sol.primal_obj) < 1e-7


def test_simplex_lp():
    B = ProblemBuilder()
    x1, x2 = B.nonneg(2)
    B.add_eq(x1 + x2, 1.0)
    B.set_objective(x1 + x2)
    P = B.build()
    sol = solve(P)
    _check_optimal(P, sol)
    assert abs(sol.primal_obj - 1.0) < 1e-7


def test_sphere_kernel_lp_max():
    B = ProblemBuilder()
    (g,) = B.free(1)
    B.add_nonneg(1.0 - 2 * g)
    B.set_objective(g, "max")
    P = B.build()
    sol = solve(P)
    assert sol.status == Status.OPTIMAL
    assert abs(P.objective(sol.x) - 0.5) < 1e-7


def test_soc_and_rsoc_examples():
    B = ProblemBuilder()
    (t,) = B.free(1)
    B.add_cone("soc", [t, 3.0, 4.0])
    B.set_objective(t)
    P = B.build()
    sol = solve(P, feas_tol=1e-10, gap_tol=1e-10)
    _check_optimal(P, sol)
    assert abs(sol.primal_obj - 5.0) < 1e-8

    B = ProblemBuilder()
    (u,) = B.free(1)
    B.add_cone("rsoc", [u, 1.0, 2.0])
    B.set_objective(u)
    P = B.build()
    sol = solve(P, feas_tol=1e-10, gap_tol=1e-10)
    _check_optimal(P, sol)
    assert abs(sol.primal_obj - 2.0) < 1e-8


def test_rsoc_with_several_tail_entries():
    # min u + v  s.t.  2uv >= 1 + 4 + 9  ->  u = v = sqrt(7)
    B = ProblemBuilder()
    u, v = B.free(2)
    B.add_cone("rsoc", [u, v, 1.0, 2.0, 3.0])
    B.set_objective(u + v)
    sol = solve(B.build(), feas_tol=1e-10, gap_tol=1e-10)
    assert abs(sol.primal_obj - 2 * math.sqrt(7)) < 1e-7


def test_builder_rejects_bad_input():
    B = ProblemBuilder()
    with pytest.raises(ValueError):
        B.add_vars("soc", 1)
    with pytest.raises(ValueError):
        B.add_vars("psd", 3)
    with pytest.raises(KeyError):
        B.add_eq_row({5: 1.0}, 0.0)
    (x,) = B.free(1)
    B.set_objective(x)
    with pytest.raises(ValueError):
        B.set_objective(x)


def test_builder_is_deterministic():
    def build():
        B = ProblemBuilder()
        with_cone(B, motzkin(), "sdsos", 1)
        return B.build().to_json()
    assert build() == build()


# brute-force oracles ------------------------------------------------------------

@pytest.mark.parametrize("seed", range(40))
def test_random_2d_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    c, G, h = _random_lp(rng, 2, int(rng.integers(1, 5)))
    _, sol = _lp(c, G, h)
    assert abs(sol.primal_obj - lp_vertex_oracle(c, G, h)) <= 1e-6


@pytest.mark.parametrize("seed", range(20))
def test_random_lp_matches_scipy(seed):
    rng = np.random.default_rng(100 + seed)
    c, G, h = _random_lp(rng, 5, 8)
    P, sol = _lp(c, G, h)
    ref = linprog(c, A_ub=G, b_ub=h, bounds=[(None, None)] * 5, method="highs")
    assert abs(sol.primal_obj - ref.fun) <= 1e-6 * (1 + abs(ref.fun))
    _check_optimal(P, sol)


def test_socp_matches_closed_form_projection():
    # min t  s.t.  |x - a| <= t, x on the hyperplane 1'x = 1: distance from a to the plane
    rng = np.random.default_rng(3)
    for _ in range(10):
        a = rng.normal(size=4)
        B = ProblemBuilder()
        t, *x = B.free(5)
        B.add_cone("soc", [t] + [xi - float(ai) for xi, ai in zip(x, a)])
        B.add_eq(sum(x[1:], x[0]), 1.0)
        B.set_objective(t)
        sol = solve(B.build(), feas_tol=1e-9, gap_tol=1e-9)
        assert abs(sol.primal_obj - abs(a.sum() - 1) / 2.0) < 1e-7


@pytest.mark.parametrize("seed", range(20))
def test_objective_scaling_preserves_status(seed):
    rng = np.random.default_rng(seed)
    c, G, h = _random_lp(rng, 3, 3)
    lam = float(rng.uniform(0.1, 50))
    _, s1 = _lp(c, G, h)
    _, s2 = _lp(lam * c, G, h)
    assert s1.status == s2.status == Status.OPTIMAL
    assert abs(s2.primal_obj - lam * s1.primal_obj) <= 1e-6 * (1 + abs(lam * s1.primal_obj))


def test_dense_and_sparse_paths_agree():
    rng = np.random.default_rng(0)
    B = ProblemBuilder()
    x = B.free(3)
    for k in range(6):
        row = rng.normal(size=3)
        B.add_cone("soc", [3.0] + [float(row[i]) * x[i] - 0.1 * k for i in range(3)])
    B.set_objective(x[0] - 2 * x[1] + 0.5 * x[2])
    Q = B.build()
    d = solve(Q, dense=True, feas_tol=1e-10, gap_tol=1e-10)
    s = solve(Q, dense=False, feas_tol=1e-10, gap_tol=1e-10)
    assert d.status == s.status == Status.OPTIMAL
    assert abs(d.primal_obj - s.primal_obj) <= 1e-8 * (1 + abs(d.primal_obj))
    P = _motzkin_lp()
    assert solve(P, dense=True).status == solve(P, dense=False).status == Status.OPTIMAL


# infeasibility --------------------------------------------------------------------

def test_farkas_certificates():
    B = ProblemBuilder()
    x = B.nonneg(2)
    B.add_eq(x[0] + 2 * x[1], -1.0)
    B.add_eq(x[0] - x[1], 0.5)
    P = B.build()
    sol = solve(P)
    assert sol.status == Status.PRIMAL_INFEASIBLE
    assert farkas_ok(P, sol)

    B = ProblemBuilder()
    t, u, v = B.free(3)
    B.add_cone("soc", [t, u, v])
    B.add_eq(t + 0.0 * u, 1.0)
    B.add_eq(u - v, 3.0)
    P = B.build()
    sol = solve(P)
    assert sol.status == Status.PRIMAL_INFEASIBLE and farkas_ok(P, sol)


def test_presolve_detects_inconsistent_empty_row():
    B = ProblemBuilder()
    (x,) = B.nonneg(1)
    B.add_eq_row({}, 1.0)
    B.set_objective(x)
    P = B.build()
    sol = solve(P)
    assert sol.status == Status.PRIMAL_INFEASIBLE and farkas_ok(P, sol)


def test_presolve_singleton_fix_and_duals():
    B = ProblemBuilder()
    x, y = B.nonneg(2)
    B.add_eq(2 * x, 3.0)
    B.add_eq(x + y, 4.0)
    B.set_objective(x + 3 * y)
    P = B.build()
    sol = solve(P)
    _check_optimal(P, sol)
    assert abs(sol.x[0] - 1.5) < 1e-9 and abs(sol.x[1] - 2.5) < 1e-7
    assert abs(sol.primal_obj - sol.dual_obj) < 1e-6


# cone violation ----------------------------------------------------------------

def test_cone_violation_matches_definitions():
    P = ConicProblem(np.zeros(9), sp.csr_matrix((0, 9)), np.zeros(0),
                     [("free", 1), ("nonneg", 2), ("soc", 3), ("rsoc", 3)])
    v = np.array([5.0, 1.0, -0.25, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    assert P.cone_violation(v) == pytest.approx(0.25)
    assert P.cone_violation(v, dual=True) == pytest.approx(5.0)
    # rsoc: 2*0.5*0.5 < 1, violation positive; scaled point on the boundary is zero
    w = np.array([0.0, 1.0, 1.0, 5.0, 3.0, 4.0, 0.5, 0.5, 1.0])
    assert P.cone_violation(w) > 0
    w[6:] = [1.0, 0.5, 1.0]
    assert P.cone_violation(w) == pytest.approx(0.0, abs=1e-12)


# JSON format ---------------------------------------------------------------------

def _motzkin_lp():
    B = ProblemBuilder()
    with_cone(B, motzkin(), "dsos", 2)
    return B.build()


def test_motzkin_lp_roundtrip_is_identical():
    P = _motzkin_lp()
    text = P.to_json()
    Q = ConicProblem.from_json(text)
    assert Q.to_json() == text
    assert (P.A != Q.A).nnz == 0
    np.testing.assert_array_equal(P.b, Q.b)
    assert P.cones == Q.cones


def test_overlapping_triplets_are_summed():
    doc = {"schema": "icos-conic/1", "cones": [{"type": "nonneg", "dim": 2}],
           "A": {"rows": 1, "cols": 2, "triplets": [[0, 0, 1.0], [0, 0, 2.0], [0, 1, 1.0]]},
           "b": [3.0], "c": [1.0, 1.0]}
    P = ConicProblem.from_json(json.dumps(doc))
    assert P.A[0, 0] == 3.0
    sol = solve(P)
    assert abs(sol.primal_obj - 1.0) < 1e-7


@pytest.mark.parametrize("mutate,path", [
    (lambda d: d["cones"].__setitem__(0, {"type": "nonneg", "dim": 0}), "$.cones[0].dim"),
    (lambda d: d["cones"].__setitem__(0, {"type": "psd", "dim": 2}), "$.cones[0].type"),
    (lambda d: d.pop("b"), "$.b"),
    (lambda d: d["A"]["triplets"].append([3, 0, 1.0]), "$.A.triplets[1]"),
    (lambda d: d.__setitem__("c", [1.0]), "$.c"),
    (lambda d: d.__setitem__("schema", "other/9"), "$.schema"),
])
def test_format_errors_name_the_path(mutate, path):
    doc = {"schema": "icos-conic/1", "cones": [{"type": "nonneg", "dim": 2}],
           "A": {"rows": 1, "cols": 2, "triplets": [[0, 0, 1.0]]}, "b": [1.0], "c": [1.0, 0.0]}
    mutate(doc)
    with pytest.raises(ConicFormatError) as info:
        ConicProblem.from_json(json.dumps(doc))
    assert path in str(info.value)


def test_invalid_json_text():
    with pytest.raises(ConicFormatError):
        ConicProblem.from_json("{not json")


@st.composite
def problems(draw):
    kinds = draw(st.lists(st.sampled_from([("free", 1), ("nonneg", 2), ("soc", 3), ("rsoc", 3)]),
                          min_size=1, max_size=4))
    n = sum(d for _, d in kinds)
    m = draw(st.integers(0, 4))
    fl = st.floats(-100, 100, allow_nan=False, allow_infinity=False)
    A = np.array(draw(st.lists(fl, min_size=m * n, max_size=m * n))).reshape(m, n)
    b = np.array(draw(st.lists(fl, min_size=m, max_size=m)))
    c = np.array(draw(st.lists(fl, min_size=n, max_size=n)))
    sense = draw(st.sampled_from(["min", "max"]))
    return ConicProblem(c, sp.csr_matrix(A), b, kinds, {}, sense, draw(fl))


@given(problems())
def test_json_roundtrip_property(P):
    Q = ConicProblem.from_json(P.to_json())
    assert Q.to_json() == P.to_json()
    assert Q.sense == P.sense and Q.offset == P.offset
