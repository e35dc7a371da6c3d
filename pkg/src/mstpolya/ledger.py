"""Reproduce every stored published constant from scratch and compare exactly.

Each :class:`LedgerEntry` pairs a fixture from ``data/published.json`` with
the chain of operations that recomputes it.  Rational values are compared
with ``==``; nothing is rounded.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from . import ratlinalg as rl
from .models import (
    _published,
    leaves_gap_urn,
    oneprotected_urn,
    protected_urn,
    reference_permutation,
    spectral_condition,
    type_count,
)
from .ratlinalg import RatMatrix, as_rational, format_rational
from .urn import asymptotics_dual_basis, asymptotics_integral, compute_B, functional_law, projection_PI, spectral


@dataclass
class LedgerEntry:
    id: str
    description: str
    expected: object
    computed_by: str
    status: str = "pending"
    computed: object = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "description": self.description,
            "computed_by": self.computed_by,
            "status": self.status,
            "expected": _show(self.expected),
            "computed": _show(self.computed),
            "detail": self.detail,
        }


def _show(x):
    if isinstance(x, Fraction):
        return format_rational(x)
    if isinstance(x, RatMatrix):
        return x.to_strings()
    if isinstance(x, (list, tuple)):
        return [_show(v) for v in x]
    return x


def fixture(key: str):
    return _published()[key]


def _mat(key: str) -> RatMatrix:
    f = fixture(key)
    M = RatMatrix(f["value"])
    if "scale" in f:
        M = M.scale(as_rational(f["scale"]))
    return M


def _vec(key: str) -> tuple:
    return tuple(as_rational(x) for x in fixture(key)["value"])


def _permute_vec(v, perm):
    return tuple(v[i] for i in perm)


def covariance(law, c, d) -> Fraction:
    """Cross covariance rate ``c' Sigma d`` of two functionals."""
    return rl.dot([as_rational(x) for x in c], law.sigma @ [as_rational(x) for x in d])


@lru_cache(maxsize=None)
def _protected(m: int):
    b = protected_urn(m)
    sd = spectral(b.spec, precision="exact")
    law = asymptotics_integral(b.spec, sd, exact=True)
    return b, sd, law, reference_permutation(m)


@lru_cache(maxsize=None)
def _leaves3():
    b = leaves_gap_urn(3)
    sd = spectral(b.spec, precision="exact")
    return b, sd, asymptotics_dual_basis(b.spec, sd, exact=True), asymptotics_integral(b.spec, sd, exact=True)


@lru_cache(maxsize=None)
def _oneprotected(m: int):
    b = oneprotected_urn(m)
    sd = spectral(b.spec, precision="exact")
    return b, sd, asymptotics_integral(b.spec, sd, exact=True)


def _eig_multiset(sd) -> list[Fraction]:
    return sorted((e.exact for e in sd.eigenvalues), reverse=True)


def _is_eigvec(M: RatMatrix, lam: Fraction, v, left: bool = False) -> bool:
    img = M.T @ v if left else M @ v
    return any(v) and tuple(img) == tuple(lam * x for x in v)


def build_entries() -> list[tuple[LedgerEntry, object]]:
    """Entries paired with zero-argument callables producing the computed value."""
    E = []

    def add(id, key_or_value, computed_by, fn, description=None):
        if isinstance(key_or_value, str) and key_or_value in _published():
            f = fixture(key_or_value)
            desc = description or f["description"]
            expected = f["value"]
        else:
            desc = description or id
            expected = key_or_value
        E.append((LedgerEntry(id, desc, expected, computed_by), fn))

    # --- binary protected urn
    def bin_A():
        b, sd, law, p = _protected(2)
        return sd.A.permuted(p) == _mat("binary_A"), sd.A.permuted(p)

    add("binary.A", "binary_A", "protected_urn(2) -> build_matrix_A -> reference order", bin_A)

    def bin_eig():
        _, sd, _, _ = _protected(2)
        got = _eig_multiset(sd)
        return got == list(_vec("binary_eigenvalues")), got

    add("binary.eigenvalues", "binary_eigenvalues", "char_poly -> rational_roots", bin_eig)

    def bin_v1():
        _, sd, _, p = _protected(2)
        got = _permute_vec(sd.v1, p)
        return got == _vec("binary_v1"), got

    add("binary.v1", "binary_v1", "spectral: nullspace(A - I), a.v1 = 1", bin_v1)

    def bin_u1():
        _, sd, _, p = _protected(2)
        got = _permute_vec(sd.u1, p)
        return got == _vec("binary_u1"), got

    add("binary.u1", "binary_u1", "spectral: nullspace(A' - I), u1.v1 = 1", bin_u1)

    def bin_eigvecs(left):
        def run():
            _, sd, _, p = _protected(2)
            A = sd.A.permuted(p)
            key = "binary_left_eigenvectors" if left else "binary_right_eigenvectors"
            vecs = [tuple(as_rational(x) for x in r) for r in fixture(key)["value"]]
            lams = _vec("binary_eigenvalues")
            ok = all(_is_eigvec(A, lam, v, left) for lam, v in zip(lams, vecs))
            if left:
                R = [tuple(as_rational(x) for x in r) for r in fixture("binary_right_eigenvectors")["value"]]
                ok = ok and all((rl.dot(u, v) != 0) == (i == j) for i, u in enumerate(vecs) for j, v in enumerate(R))
            return ok, "checked"

        return run

    add("binary.right_eigenvectors", "binary_right_eigenvectors", "A v = lambda v exactly", bin_eigvecs(False))
    add("binary.left_eigenvectors", "binary_left_eigenvectors", "u' A = lambda u' exactly; biorthogonal", bin_eigvecs(True))

    def bin_B2():
        b, sd, _, p = _protected(2)
        Bi, _ = compute_B(b.spec, sd)
        drawn = p[fixture("binary_B2")["drawn"]]
        got = Bi[drawn].permuted(p)
        return got == _mat("binary_B2"), got

    add("binary.B2", "binary_B2", "compute_B: E(xi xi') for one type", bin_B2)

    def bin_B():
        b, sd, _, p = _protected(2)
        _, B = compute_B(b.spec, sd)
        got = B.permuted(p)
        return got == _mat("binary_B"), got

    add("binary.B", "binary_B", "compute_B: sum v1_i a_i B_i", bin_B)

    def bin_sigma_int():
        _, _, law, p = _protected(2)
        got = law.sigma.permuted(p)
        return got == _mat("binary_Sigma"), got

    add("binary.Sigma.lyapunov", "binary_Sigma", "asymptotics_integral (deflated Lyapunov)", bin_sigma_int)

    def bin_sigma_dual():
        b, sd, _, p = _protected(2)
        got = asymptotics_dual_basis(b.spec, sd, exact=True).sigma.permuted(p)
        return got == _mat("binary_Sigma"), got

    add("binary.Sigma.dual_basis", "binary_Sigma", "asymptotics_dual_basis", bin_sigma_dual)

    def bin_fun(which):
        def run():
            b, _, law, _ = _protected(2)
            mean, var = functional_law(law, b.functionals["protected"])
            got = mean if which == "mean" else var
            return got == as_rational(fixture(f"binary_protected_{which}")["value"]), got

        return run

    add("binary.protected.mean", "binary_protected_mean", "functional_law(protected indicator)", bin_fun("mean"))
    add("binary.protected.variance", "binary_protected_variance", "functional_law(protected indicator)", bin_fun("variance"))

    # --- ternary protected urn
    def ter_A():
        _, sd, _, p = _protected(3)
        got = sd.A.permuted(p)
        return got == _mat("ternary_A"), got

    add("ternary.A", "ternary_A", "protected_urn(3) -> build_matrix_A -> reference order", ter_A)

    def ter_vec(key, get):
        def run():
            got = get()
            return tuple(got) == _vec(key), got

        return run

    add(
        "ternary.activities",
        "ternary_activities",
        "SmallTreeType.activity",
        ter_vec("ternary_activities", lambda: _permute_vec(_protected(3)[0].spec.activities, _protected(3)[3])),
    )
    add(
        "ternary.leaf_vector",
        "ternary_leaf_vector",
        "SmallTreeType.leaf_count",
        ter_vec("ternary_leaf_vector", lambda: _permute_vec(_protected(3)[0].functionals["leaves"], _protected(3)[3])),
    )
    add("ternary.eigenvalues", "ternary_eigenvalues", "char_poly -> rational_roots", ter_vec("ternary_eigenvalues", lambda: _eig_multiset(_protected(3)[1])))
    add("ternary.v1", "ternary_v1", "spectral", ter_vec("ternary_v1", lambda: _permute_vec(_protected(3)[1].v1, _protected(3)[3])))

    def ter_not_diag():
        sd = _protected(3)[1]
        geo = sd.q - rl.rank(sd.A.sub_identity(-4))
        return (not sd.diagonalizable) and geo == 3, f"diagonalizable={sd.diagonalizable}, geometric multiplicity of -4 = {geo}"

    add("ternary.defective", True, "rank(A + 4I)", ter_not_diag, "ternary mean matrix is not diagonalisable (eigenvalue -4: geometric 3, algebraic 4)")

    def ter_PI():
        _, sd, _, p = _protected(3)
        got = projection_PI(sd).permuted(p)
        return got == _mat("ternary_P_I"), got

    add("ternary.P_I", "ternary_P_I", "I - v1 u1'", ter_PI)

    def ter_B():
        b, sd, _, p = _protected(3)
        got = compute_B(b.spec, sd)[1].permuted(p)
        return got == _mat("ternary_B"), got

    add("ternary.B", "ternary_B", "compute_B", ter_B)

    def ter_sigma():
        _, _, law, p = _protected(3)
        got = law.sigma.permuted(p)
        return got == _mat("ternary_Sigma_scaled"), got

    add("ternary.Sigma", "ternary_Sigma_scaled", "asymptotics_integral (exact rational triangularisation)", ter_sigma)

    def ter_block():
        _, _, law, p = _protected(3)
        got = law.sigma.permuted(p).submatrix([16, 17, 18], [16, 17, 18])
        return got == _mat("ternary_Sigma_protected_block"), got

    add("ternary.Sigma.protected_block", "ternary_Sigma_protected_block", "asymptotics_integral, protected rows", ter_block)

    def ter_fixture_cross():
        S = _mat("ternary_Sigma_scaled").submatrix([16, 17, 18], [16, 17, 18])
        return S == _mat("ternary_Sigma_protected_block"), "fixture sources agree"

    add("ternary.Sigma.fixture_cross_check", True, "compare the two stored covariance sources", ter_fixture_cross,
        "stored full covariance and stored protected block agree")

    def ter_fun(fname, key):
        def run():
            b, _, law, _ = _protected(3)
            mean, var = functional_law(law, b.functionals[fname])
            want = as_rational(fixture(key)["value"])
            got = mean if key.endswith("mean") else var
            return got == want, got

        return run

    add("ternary.protected.mean", "ternary_protected_mean", "functional_law(protected indicator)", ter_fun("protected", "ternary_protected_mean"))
    add("ternary.protected.variance", "ternary_protected_variance", "functional_law(protected indicator)", ter_fun("protected", "ternary_protected_variance"))
    add("ternary.leaves.mean", "ternary_leaves_mean", "functional_law(leaf vector) on the small-tree urn", ter_fun("leaves", "ternary_leaves_mean"))
    add("ternary.leaves.variance", "ternary_leaves_variance", "functional_law(leaf vector) on the small-tree urn", ter_fun("leaves", "ternary_leaves_variance"))

    # --- ternary leaves gap urn
    def lv(check):
        def run():
            b, sd, dual, integ = _leaves3()
            return check(b, sd, dual, integ)

        return run

    add("leaves3.A", "leaves3_A", "leaves_gap_urn(3)", lv(lambda b, sd, d, i: (sd.A == _mat("leaves3_A"), sd.A)))
    add("leaves3.eigenvalues", "leaves3_eigenvalues", "char_poly -> rational_roots",
        lv(lambda b, sd, d, i: (_eig_multiset(sd) == list(_vec("leaves3_eigenvalues")), _eig_multiset(sd))))
    add("leaves3.v1", "leaves3_v1", "spectral", lv(lambda b, sd, d, i: (sd.v1 == _vec("leaves3_v1"), sd.v1)))
    add("leaves3.u1", "leaves3_u1", "spectral", lv(lambda b, sd, d, i: (sd.u1 == _vec("leaves3_u1"), sd.u1)))

    def lv_vecs(b, sd, d, i):
        R = [tuple(as_rational(x) for x in r) for r in fixture("leaves3_right_eigenvectors")["value"]]
        L = [tuple(as_rational(x) for x in r) for r in fixture("leaves3_left_eigenvectors")["value"]]
        lams = _vec("leaves3_eigenvalues")
        ok = all(_is_eigvec(sd.A, lam, v) for lam, v in zip(lams, R)) and all(
            _is_eigvec(sd.A, lam, u, left=True) for lam, u in zip(lams, L)
        )
        return ok, "checked"

    add("leaves3.eigenvectors", True, "A v = lambda v, u' A = lambda u'", lv(lv_vecs), "ternary leaves gap urn: stored eigenvectors are eigenvectors")
    add("leaves3.Sigma.dual_basis", "leaves3_Sigma", "asymptotics_dual_basis", lv(lambda b, sd, d, i: (d.sigma == _mat("leaves3_Sigma"), d.sigma)))
    add("leaves3.Sigma.lyapunov", "leaves3_Sigma", "asymptotics_integral", lv(lambda b, sd, d, i: (i.sigma == _mat("leaves3_Sigma"), i.sigma)))

    def lv_law(b, sd, d, i):
        got = functional_law(i, b.functionals["leaves"])
        want = (as_rational(fixture("ternary_leaves_mean")["value"]), as_rational(fixture("ternary_leaves_variance")["value"]))
        return got == want, got

    add("leaves3.leaves.law", ["3/10", "89/2100"], "functional_law(sum W_k / k) on the gap urn", lv(lv_law),
        "ternary search tree: leaf law through the three-type gap urn")

    # --- one-protected urns
    def op(m, check):
        def run():
            b, sd, law = _oneprotected(m)
            return check(b, law)

        return run

    add("oneprotected2.Sigma", "oneprotected2_Sigma", "oneprotected_urn(2) -> asymptotics_integral",
        op(2, lambda b, law: (law.sigma == _mat("oneprotected2_Sigma"), law.sigma)))
    add("oneprotected2.variance_Q", "oneprotected2_variance_Q", "functional_law(e_3)",
        op(2, lambda b, law: (functional_law(law, b.functionals["one_protected"])[1] == as_rational(fixture("oneprotected2_variance_Q")["value"]),
                              functional_law(law, b.functionals["one_protected"])[1])))
    add("oneprotected2.covariance_LQ", "oneprotected2_covariance_LQ", "leaves' Sigma e_3",
        op(2, lambda b, law: (covariance(law, b.functionals["leaves"], b.functionals["one_protected"]) == as_rational(fixture("oneprotected2_covariance_LQ")["value"]),
                              covariance(law, b.functionals["leaves"], b.functionals["one_protected"]))))
    add("oneprotected3.Sigma", "oneprotected3_Sigma", "oneprotected_urn(3) -> asymptotics_integral",
        op(3, lambda b, law: (law.sigma == _mat("oneprotected3_Sigma"), law.sigma)))
    for key, fn in (
        ("oneprotected3_variance_L", lambda b, law: functional_law(law, b.functionals["leaves"])[1]),
        ("oneprotected3_variance_Q", lambda b, law: functional_law(law, b.functionals["one_protected"])[1]),
        ("oneprotected3_covariance_LQ", lambda b, law: covariance(law, b.functionals["leaves"], b.functionals["one_protected"])),
        ("oneprotected3_internal_variance", lambda b, law: functional_law(law, b.functionals["internal"])[1]),
    ):
        add(
            key.replace("_", ".", 1),
            key,
            "functional_law / covariance on the one-protected urn",
            op(3, lambda b, law, fn=fn, key=key: (fn(b, law) == as_rational(fixture(key)["value"]), fn(b, law))),
        )

    # --- counts and thresholds
    def counts():
        want = {int(k): v for k, v in fixture("type_counts")["value"].items()}
        got = {m: type_count(m) for m in want}
        from .models import enumerate_types

        listed = {m: len(enumerate_types(m)) for m in want}
        return got == want == listed, listed

    add("types.counts", "type_counts", "enumerate_types", counts)

    def threshold():
        last = fixture("node_urn_threshold")["value"]
        ok = spectral_condition(last)["holds"] and not spectral_condition(last + 1)["holds"]
        return ok, f"m={last} holds, m={last + 1} fails" if ok else "mismatch"

    add("nodes.threshold", "node_urn_threshold", "spectral_condition", threshold)
    return E


def run_ledger(select: str | None = None) -> list[LedgerEntry]:
    out = []
    for entry, fn in build_entries():
        if select and not entry.id.startswith(select):
            continue
        t = time.perf_counter()
        try:
            ok, got = fn()
            entry.status = "pass" if ok else "fail"
            entry.computed = got
        except Exception as exc:  # report, never abort the ledger
            entry.status = "error"
            entry.detail = f"{type(exc).__name__}: {exc}"
        entry.detail = entry.detail or f"{time.perf_counter() - t:.3f}s"
        out.append(entry)
    return out
