import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mstpolya import ratlinalg as rl
from mstpolya.errors import CapExceededError, DomainError
from mstpolya.models import (
    SmallTreeType,
    _published,
    build_model,
    closed_forms,
    enumerate_types,
    harmonic,
    leaves_char_identity,
    leaves_gap_urn,
    lemma_root_check,
    node_urn,
    oneprotected_urn,
    phi,
    protected_mean_matrix,
    protected_urn,
    reference_permutation,
    reference_type_order,
    spectral_condition,
    tmap,
    type_count,
)
from mstpolya.ratlinalg import Poly, RatMatrix
from mstpolya.rng import CounterRNG
from mstpolya.trees import EXTERNAL, MSTree, forest_decompose
from mstpolya.urn import asymptotic_law, build_matrix_A, functional_law


def fixture(key):
    return _published()[key]["value"]


def brute_force_types(m):
    """Compositions (k_0..k_{m-1}) with sum <= m, minus the all-external one."""
    return {k for k in product(range(m + 1), repeat=m) if sum(k) <= m and k[0] != m}


# --- types


@pytest.mark.parametrize("m", range(2, 8))
def test_type_enumeration_matches_brute_force(m):
    types = enumerate_types(m)
    assert {t.k for t in types} == brute_force_types(m)
    assert len(types) == type_count(m) == math.comb(2 * m, m) - 1
    assert [t.k for t in types] == sorted((t.k for t in types), reverse=True)


def test_type_counts():
    assert [type_count(m) for m in (2, 3, 4, 10)] == [5, 19, 69, 184755]
    assert len(enumerate_types(4)) == 69


def test_binary_type_set():
    assert {t.k for t in enumerate_types(2)} == {(0, 2), (1, 1), (0, 1), (1, 0), (0, 0)}
    assert reference_type_order(2) == [(0, 2), (1, 1), (0, 1), (1, 0), (0, 0)]
    assert reference_type_order(3)[1] == (0, 1, 2)


def test_bad_arity():
    with pytest.raises(DomainError):
        enumerate_types(1)
    with pytest.raises(DomainError):
        SmallTreeType((3, 0, 0))


@pytest.mark.parametrize("m", range(2, 7))
def test_exactly_m_protected_types(m):
    prot = [t.k for t in enumerate_types(m) if t.protected]
    assert sorted(prot) == [(k0,) + (0,) * (m - 1) for k0 in range(m)]


def test_ternary_activity_and_leaf_vectors():
    order = reference_type_order(3)
    assert [SmallTreeType(k).activity for k in order] == [9, 8, 7, 7, 6, 6, 6, 5, 5, 5, 4, 4, 4, 3, 3, 2, 2, 1, 0]
    assert [SmallTreeType(k).leaf_count for k in order] == [3, 3, 3, 2, 3, 2, 2, 2, 2, 1, 2, 1, 1, 1, 1, 1, 0, 0, 0]
    assert [int(x) for x in fixture("ternary_activities")] == [SmallTreeType(k).activity for k in order]


# --- protected urn


@pytest.mark.parametrize("m", range(2, 6))
def test_every_outcome_adds_one_gap(m):
    spec = protected_urn(m).spec
    for r in spec.rules:
        for o in r.outcomes:
            assert rl.dot(spec.activities, o.delta) == 1


def test_protected_matrices_match_fixtures():
    for m, key in ((2, "binary_A"), (3, "ternary_A")):
        A = build_matrix_A(protected_urn(m).spec)
        assert A.permuted(reference_permutation(m)) == RatMatrix(fixture(key))


def test_ternary_type_two_transitions():
    b = protected_urn(3)
    order = reference_type_order(3)
    labels = {k: i + 1 for i, k in enumerate(order)}  # reference numbering, 1-based
    i = b.type_index.index(SmallTreeType((0, 1, 2)))
    got = {}
    for o in b.spec.rule_for(i).outcomes:
        gained = sorted(labels[b.type_index[j].k] for j, d in enumerate(o.delta) if d > 0)
        got[tuple(gained)] = o.probability
    assert got == {(1,): Fraction(2, 8), (8, 13): Fraction(6, 8)}


@pytest.mark.parametrize("m", [2, 3, 4, 5])
def test_direct_mean_matrix_agrees(m):
    assert np.array_equal(protected_mean_matrix(m), build_matrix_A(protected_urn(m).spec).to_numpy())


def test_protected_caps():
    with pytest.raises(CapExceededError):
        protected_urn(7)
    with pytest.raises(CapExceededError):
        protected_mean_matrix(9)
    assert protected_mean_matrix(7).shape == (3431, 3431)


# --- gap urns


def test_node_urn_matrices():
    assert build_matrix_A(node_urn(3).spec) == RatMatrix([[-1, 3], [2, -2]])
    assert build_matrix_A(node_urn(2).spec) == RatMatrix([[1]])
    assert rl.char_poly(build_matrix_A(node_urn(3).spec)) == Poly([-4, 3, 1])


@pytest.mark.parametrize("m", range(2, 12))
def test_node_urn_char_poly_is_phi(m):
    expanded = Poly([1])
    for i in range(1, m):
        expanded = expanded * Poly([i, 1])
    assert phi(m) == expanded - Poly([math.factorial(m)])
    assert rl.char_poly(build_matrix_A(node_urn(m).spec)) == phi(m)


def test_leaves_gap_urn_m3():
    A = build_matrix_A(leaves_gap_urn(3).spec)
    assert A == RatMatrix([[-1, 0, 2], [2, -2, 2], [0, 3, -3]])
    assert A == RatMatrix(fixture("leaves3_A"))
    with pytest.raises(DomainError):
        leaves_gap_urn(2)


@pytest.mark.parametrize("m", range(3, 9))
def test_leaves_char_poly_factorises(m):
    assert leaves_char_identity(m)
    assert rl.char_poly(build_matrix_A(leaves_gap_urn(m).spec)) == Poly([m, 1]) * phi(m)


def test_oneprotected_full_leaf_rule():
    b = oneprotected_urn(3)
    # third type (0-based 2) is a full leaf
    (o,) = b.spec.rule_for(2).outcomes
    assert o.delta == (2, 1, -1, 1)


# --- closed forms and cross-route agreement


def test_closed_forms():
    assert harmonic(3) == Fraction(11, 6)
    cf = closed_forms(3)
    assert cf["mu_L"] == Fraction(3, 10) and cf["mu_Q"] == Fraction(3, 10)
    assert closed_forms(4)["mu_L"] == Fraction(18, 65)
    with pytest.raises(DomainError):
        closed_forms(2)


@pytest.mark.parametrize("m", range(3, 7))
def test_leaves_law_by_two_urns(m):
    a = leaves_gap_urn(m)
    b = oneprotected_urn(m)
    la = functional_law(asymptotic_law(a.spec), a.functionals["leaves"])
    lb = functional_law(asymptotic_law(b.spec), b.functionals["leaves"])
    assert la == lb
    cf = closed_forms(m)
    assert la[0] == cf["mu_L"]
    assert functional_law(asymptotic_law(b.spec), b.functionals["one_protected"])[0] == cf["mu_Q"]


def test_leaves_law_by_small_tree_urn_m3():
    b = protected_urn(3)
    law = asymptotic_law(b.spec)
    assert functional_law(law, b.functionals["leaves"]) == (Fraction(3, 10), Fraction(89, 2100))
    g = leaves_gap_urn(3)
    assert functional_law(asymptotic_law(g.spec), g.functionals["leaves"]) == (Fraction(3, 10), Fraction(89, 2100))


def test_oneprotected_examples():
    law2 = asymptotic_law(oneprotected_urn(2).spec)
    assert law2.sigma == RatMatrix([[8, -4, 4], [-4, 2, -2], [4, -2, 2]]).scale(Fraction(1, 45))
    b = oneprotected_urn(3)
    law = asymptotic_law(b.spec)
    f = b.functionals
    assert functional_law(law, f["one_protected"])[1] == Fraction(9, 350)
    assert functional_law(law, f["leaves"])[1] == Fraction(89, 2100)
    assert functional_law(law, f["internal"])[1] == Fraction(2, 75)
    L, Q = f["leaves"], f["one_protected"]
    assert rl.dot(L, law.sigma @ Q) == Fraction(-29, 1400)


# --- spectral condition and the gap map


def test_spectral_condition_examples():
    assert spectral_condition(2)["holds"]
    sc = spectral_condition(3)
    assert sc["holds"] and abs(sc["lambda2"] - (-4)) < 1e-12
    assert spectral_condition(26)["holds"]
    assert not spectral_condition(27)["holds"]


def test_spectral_condition_agrees_with_polynomial_roots():
    for m in (5, 12, 26, 27):
        roots = np.roots([float(c) for c in reversed(phi(m).coeffs)])
        rest = sorted(roots, key=lambda z: -z.real)[1:]
        assert abs(max(z.real for z in rest) - spectral_condition(m)["lambda2_re"]) < 1e-9


@pytest.mark.parametrize("m", [2, 3, 4])
def test_gap_map_identity_and_root_containment(m):
    rep = lemma_root_check(m)
    assert rep["identity_holds"], rep["first_mismatch"]
    assert rep["all_contained"]


def test_root_containment_examples():
    roots = {r["root"] for r in lemma_root_check(3)["roots"]}
    assert roots == {1, -4}
    assert {r["root"] for r in lemma_root_check(2)["roots"]} == {1}


def _gap_counts(tree: MSTree):
    """Direct count: external slots, then gaps in non-full nodes with j keys, j = 1..m-2."""
    m = tree.m
    w = [0] * (m - 1)
    for v in tree.nodes():
        kids = tree.children[v]
        if kids is None:
            w[tree.nkeys[v]] += tree.nkeys[v] + 1
        else:
            w[0] += sum(1 for c in kids if c == EXTERNAL)
    return w


@given(st.integers(2, 5), st.integers(0, 300), st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_tmap_turns_small_tree_counts_into_gap_counts(m, extra, seed):
    tree = MSTree(m)
    rng = CounterRNG(seed)
    for _ in range(m + extra):
        tree.insert_random(rng)
    T = tmap(m).matrix
    assert list(T @ forest_decompose(tree)) == _gap_counts(tree)


def test_build_model_rejects_unknown():
    with pytest.raises(DomainError):
        build_model("bushes", 3)
