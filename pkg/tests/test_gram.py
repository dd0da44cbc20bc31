import json

import numpy as np
import pytest

from icos.acceptance import quadratic_family
from icos.conic import ProblemBuilder, Status, solve
from icos.gram import (AffinePoly, Certificate, GramBasis, GramError, basis_for, gram_basis,
                       gram_match, is_member, polya_certificate_search, polya_coeff_nonneg,
                       positivity_certificate_form, sdsos_separating_functional, with_cone)
from icos.matcones import is_dd, is_sdd, sym_vars
from icos.poly import Polynomial, evaluate, monomial_basis, motzkin, parse, sphere_multiply

EX32 = parse("x1^4*x2^2 + x2^4*x3^2 + x3^4*x1^2 - 3*x1^2*x2^2*x3^2")


def _feasible(builder):
    sol = solve(builder.build(), feas_tol=1e-9, gap_tol=1e-9)
    assert sol.status in (Status.OPTIMAL, Status.PRIMAL_INFEASIBLE), sol.status
    return sol.status == Status.OPTIMAL


def _verify(p, res, cone, r):
    """Recompute the certificate residual by hand, without Certificate helpers."""
    cert = res.certificate
    z, Q = cert.basis, cert.Q
    acc = {}
    for i in range(len(z)):
        for j in range(len(z)):
            m = tuple(a + b for a, b in zip(z[i], z[j]))
            acc[m] = acc.get(m, 0.0) + Q[i, j]
    target = dict(sphere_multiply(p, r).terms)
    keys = set(acc) | set(target)
    resid = max(abs(acc.get(k, 0.0) - target.get(k, 0.0)) for k in keys)
    assert resid <= 1e-6
    assert np.allclose(Q, Q.T)
    pred = is_dd if cone == "dsos" else is_sdd
    assert pred(Q, 1e-8)


# bases ---------------------------------------------------------------------------

def test_gram_basis_examples():
    assert gram_basis(2, 4).monomials == [(2, 0), (1, 1), (0, 2)]
    assert len(gram_basis(3, 6)) == 10
    b = gram_basis(3, 4, even=True, reduce=True)
    groups = sorted(sorted(b.monomials[i] for i in blk) for blk in b.blocks)
    assert [(2, 0, 0), (0, 2, 0), (0, 0, 2)] in [sorted(g, reverse=True) for g in groups]
    singles = [g for g in groups if len(g) == 1]
    assert sorted(s[0] for s in singles) == sorted([(1, 1, 0), (1, 0, 1), (0, 1, 1)])


def test_gram_basis_inhomogeneous_and_odd():
    assert gram_basis(2, 2, homogeneous=False).monomials == monomial_basis(2, 0, 1)
    with pytest.raises(ValueError):
        gram_basis(2, 3)


def test_basis_for_detects_shape():
    b = basis_for(AffinePoly.lift(motzkin()))
    assert len(b) == 10 and len(b.blocks) > 1
    with pytest.raises(GramError):
        basis_for(AffinePoly.lift(parse("x1^3 + x2^3")))


# coefficient matching -------------------------------------------------------------------

def test_gram_match_single_row():
    B = ProblemBuilder()
    Q = sym_vars(B, 1)
    rows = gram_match(B, AffinePoly.lift(parse("x1^4")), GramBasis([(2,)], [[0]]), [Q])
    assert rows == 1
    P = B.build()
    assert P.A.toarray().tolist() == [[1.0]] and P.b.tolist() == [1.0]


def test_gram_match_multiplicities():
    B = ProblemBuilder()
    Q = sym_vars(B, 3)  # ids: 0:Q11 1:Q12 2:Q13 3:Q22 4:Q23 5:Q33
    basis = GramBasis([(2, 0), (1, 1), (0, 2)], [[0, 1, 2]])
    rows = gram_match(B, AffinePoly.lift(parse("2*x1^2*x2^2")), basis, [Q])
    assert rows == 5
    P = B.build()
    A = P.A.toarray()
    # rows in grlex order: x1^4, x1^3x2, x1^2x2^2, x1x2^3, x2^4
    assert A[2].tolist() == [0, 0, 2, 1, 0, 0] and P.b[2] == 2.0
    assert A[0].tolist() == [1, 0, 0, 0, 0, 0] and P.b[0] == 0.0
    assert A[1].tolist() == [0, 2, 0, 0, 0, 0]
    assert A[3].tolist() == [0, 0, 0, 0, 2, 0]
    assert A[4].tolist() == [0, 0, 0, 0, 0, 1]


def test_gram_match_unreachable_monomial():
    B = ProblemBuilder()
    Q = sym_vars(B, 3)
    basis = GramBasis([(2, 0), (1, 1), (0, 2)], [[0, 1, 2]])
    with pytest.raises(GramError) as info:
        gram_match(B, AffinePoly.lift(parse("x1^3", 2)), basis, [Q])
    assert info.value.monomial == (3, 0)


# with_cone ----------------------------------------------------------------------------

def test_with_cone_examples():
    B = ProblemBuilder()
    with_cone(B, parse("x1^4 + 2*x1^2*x2^2 + x2^4"), "dsos", 0)
    assert _feasible(B)
    B = ProblemBuilder()
    with_cone(B, parse("x1*x2"), "dsos", 0)
    assert not _feasible(B)
    with pytest.raises(ValueError):
        with_cone(ProblemBuilder(), parse("x1^2"), "sos", 0)


def test_with_cone_affine_coefficients():
    # largest g with x1^4 + x2^4 - g (x1^2 + x2^2)^2 dsos is 1/2
    B = ProblemBuilder()
    (g,) = B.free(1)
    p = AffinePoly.lift(parse("x1^4 + x2^4")) - AffinePoly.scaled(sphere_multiply(Polynomial.constant(2, 1.0), 2), g)
    with_cone(B, p, "dsos", 0)
    B.set_objective(g, "max")
    P = B.build()
    sol = solve(P)
    assert abs(P.objective(sol.x) - 0.5) < 1e-7


# is_member ------------------------------------------------------------------------------

def test_motzkin_levels():
    M = motzkin()
    assert is_member(M, "dsos", 0).member is False
    assert is_member(M, "sdsos", 1).member is False
    res = is_member(M, "dsos", 2)
    assert res.member is True
    _verify(M, res, "dsos", 2)


def test_example_with_cyclic_terms():
    assert is_member(EX32, "dsos", 0).member is False
    res = is_member(EX32, "dsos", 1)
    assert res.member is True
    _verify(EX32, res, "dsos", 1)


@pytest.mark.parametrize("r", range(4))
def test_quadratic_family_never_sdsos(r):
    assert is_member(quadratic_family(0.5), "sdsos", r).member is False


def test_membership_unpacks_and_rejects_odd():
    ok, cert = is_member(parse("x1^2 + x2^2"), "dsos")
    assert ok and cert.residual <= 1e-12
    res = is_member(parse("x1^3"), "dsos")
    assert res.member is False and res.certificate is None


def test_certificate_json_roundtrip():
    res = is_member(EX32, "sdsos", 1)
    text = res.certificate.to_json()
    back = Certificate.from_json(text)
    assert back.basis == res.certificate.basis
    np.testing.assert_array_equal(back.Q, res.certificate.Q)
    assert back.residual_against(EX32) <= 1e-6 and back.cone_ok()
    assert json.loads(text)["cone"] == "sdsos"


def _random_members(count, seed, n=3):
    """Forms z'Qz with Q diagonally dominant (hence dsos at r = 0)."""
    rng = np.random.default_rng(seed)
    z = monomial_basis(n, 2, 2)
    out = []
    for _ in range(count):
        k = len(z)
        Q = rng.normal(size=(k, k)) * (rng.random((k, k)) < 0.4)
        Q = (Q + Q.T) / 2
        np.fill_diagonal(Q, np.abs(Q).sum(1) - np.abs(np.diag(Q)) + rng.uniform(0, 0.5, k))
        terms = {}
        for i in range(k):
            for j in range(k):
                m = tuple(a + b for a, b in zip(z[i], z[j]))
                terms[m] = terms.get(m, 0.0) + Q[i, j]
        out.append(Polynomial(n, terms))
    return out


def test_hierarchy_and_cone_ordering_on_random_members():
    for p in _random_members(20, 5):
        for cone in ("dsos", "sdsos"):
            res0 = is_member(p, cone, 0)
            res1 = is_member(p, cone, 1)
            assert res0.member is True and res1.member is True
            _verify(p, res0, cone, 0)
            _verify(p, res1, cone, 1)


def test_cone_ordering_on_mixed_forms():
    # dsos at some level implies sdsos at the same level
    rng = np.random.default_rng(8)
    for _ in range(15):
        p = _random_members(1, int(rng.integers(1 << 30)))[0] - float(rng.uniform(0, 1.5)) * parse("x1^2*x2^2", 3)
        for r in (0, 1):
            d = is_member(p, "dsos", r).member
            s = is_member(p, "sdsos", r).member
            if d:
                assert s


def test_members_are_nonnegative_on_samples():
    rng = np.random.default_rng(0)
    for p in [motzkin(), EX32] + _random_members(5, 9):
        pts = rng.uniform(-1, 1, size=(1000, p.nvars))
        found = any(is_member(p, c, r).member for c, r in (("dsos", 0), ("dsos", 2)))
        if found:
            assert evaluate(p, pts).min() >= -1e-6


# separating functional ---------------------------------------------------------------

def test_functional_examples():
    assert sdsos_separating_functional(quadratic_family(0.5)) == -1.5
    assert sdsos_separating_functional(parse("x1^2 - 2*x1*x2 + x2^2")) == 4.0
    assert sdsos_separating_functional(motzkin()) == 0.0


@pytest.mark.parametrize("a", [round(0.1 * k, 1) for k in range(1, 10)])
def test_functional_negative_implies_not_sdsos(a):
    f = quadratic_family(a)
    val = sdsos_separating_functional(f)
    assert val == pytest.approx(3 * (1 + a) - 6, abs=1e-12)
    assert val < 0
    assert is_member(f, "sdsos", 0).member is False


def test_quadratic_family_above_threshold_is_sdsos():
    # the separator is silent at a = 1 and larger a makes the form dd
    assert is_member(quadratic_family(2.0), "dsos", 0).member is True


# Polya ---------------------------------------------------------------------------

def test_polya_coeff_nonneg_examples():
    B = ProblemBuilder()
    polya_coeff_nonneg(B, parse("x1^2 + x2^2"), 0)
    assert _feasible(B)
    for r in range(4):
        B = ProblemBuilder()
        polya_coeff_nonneg(B, parse("x1^2 - x2^2"), r)
        assert not _feasible(B)


def test_polya_search_examples():
    assert polya_certificate_search(parse("x1^4 + 2*x1^2*x2^2 + x2^4")) == 0
    # (x1^4 + x2^4 - x1^2 x2^2)(x1^2 + x2^2) = x1^6 + x2^6
    assert polya_certificate_search(parse("x1^4 + x2^4 - x1^2*x2^2")) == 1
    assert polya_certificate_search(motzkin(), 6) is None
    with pytest.raises(ValueError):
        polya_certificate_search(parse("x1^3*x2"))


def test_polya_level_grows_near_the_boundary():
    # x1^4 + x2^4 - c x1^2 x2^2 is positive definite for c < 2; the needed r blows up as c -> 2
    rs = [polya_certificate_search(parse(f"x1^4 + x2^4 - {c}*x1^2*x2^2"), 200) for c in (1.0, 1.5, 1.9)]
    assert rs[0] < rs[1] < rs[2]


# positivity certificate form ---------------------------------------------------------------

def test_positivity_form_examples():
    f = positivity_certificate_form(parse("x1^2"), 1)
    assert f == parse("0.5*x1^4 + 0.5*x2^4")
    g = positivity_certificate_form(parse("x1^2 + x2^2"), 4)
    assert g.nvars == 4 and g.is_homogeneous() and g.degree == 4
    assert is_member(g, "dsos", 0).member is True


def test_positivity_form_evaluates_by_substitution():
    p = parse("x1^4 + x2^4 + x1*x2^3")
    f = positivity_certificate_form(p, 3)
    rng = np.random.default_rng(4)
    for _ in range(20):
        v, w = rng.normal(size=2), rng.normal(size=2)
        x = v**2 - w**2
        d = p.degree // 2
        ref = evaluate(p, x) - np.sum(x**2) ** d / np.sqrt(3) + np.sum(v**4 + w**4) ** d / (2 * np.sqrt(3))
        assert evaluate(f, np.concatenate([v, w])) == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_positivity_form_rejects_bad_input():
    with pytest.raises(ValueError):
        positivity_certificate_form(parse("x1^2"), 0)
    with pytest.raises(ValueError):
        positivity_certificate_form(parse("x1^3 + x1"), 1)
