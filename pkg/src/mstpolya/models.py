"""Urn models of random m-ary search trees.

Four urns are built here for any arity ``m``:

* ``protected_urn`` - balls are the small trees left after cutting every edge
  between two non-leaves; a ball is typed by how many of its root's children
  hold 0, 1, ..., m-1 keys.  Counts protected nodes and leaves.
* ``node_urn`` - one ball per gap, typed by the key count of its node.
* ``leaves_gap_urn`` - like ``node_urn`` but separating leaves from the
  external children of non-leaves.
* ``oneprotected_urn`` - one ball per node or external child of a non-leaf.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources

import numpy as np

from . import ratlinalg as rl
from .errors import CapExceededError, DomainError
from .ratlinalg import Poly, RatMatrix, format_rational
from .urn import ReplacementOutcome, ReplacementRule, UrnSpec, build_matrix_A

#: Largest arity for which the full protected urn specification is built.
PROTECTED_SPEC_CAP = 6
#: Largest arity for which the protected mean matrix (spectrum only) is built.
PROTECTED_SPECTRUM_CAP = 8

MODELS = ("protected", "nodes", "leaves", "one-protected")


@dataclass(frozen=True, order=True)
class SmallTreeType:
    """Composition ``(k_0, ..., k_{m-1})``: the root has ``k_i`` children holding ``i`` keys."""

    k: tuple[int, ...]

    def __post_init__(self):
        k = tuple(int(x) for x in self.k)
        object.__setattr__(self, "k", k)
        m = len(k)
        if m < 2 or any(x < 0 for x in k) or sum(k) > m:
            raise DomainError(f"{k} is not a composition of at most {m} into {m} parts")
        if k[0] == m:
            raise DomainError("a root with only external children is a leaf, not a small-tree root")

    @property
    def m(self) -> int:
        return len(self.k)

    @property
    def activity(self) -> int:
        return sum((i + 1) * x for i, x in enumerate(self.k))

    @property
    def protected(self) -> bool:
        return not any(self.k[1:])

    @property
    def leaf_count(self) -> int:
        return sum(self.k[1:])

    @property
    def label(self) -> str:
        return "(" + ",".join(map(str, self.k)) + ")"

    def __str__(self):
        return self.label


def type_count(m: int) -> int:
    return math.comb(2 * m, m) - 1


def _compositions(total: int, parts: int):
    # lexicographically descending compositions with sum <= total
    if parts == 1:
        for x in range(total, -1, -1):
            yield (x,)
        return
    for x in range(total, -1, -1):
        for rest in _compositions(total - x, parts - 1):
            yield (x,) + rest


def enumerate_types(m: int) -> list[SmallTreeType]:
    """All small-tree types for arity ``m`` in lexicographically descending order."""
    if m < 2:
        raise DomainError(f"arity must be at least 2 (got {m})")
    out = [SmallTreeType(k) for k in _compositions(m, m) if k[0] != m]
    return out


def _raw_types(m: int) -> list[tuple[int, ...]]:
    return [k for k in _compositions(m, m) if k[0] != m]


def start_type(m: int) -> tuple[int, ...]:
    """The type of the single ball present once the tree has ``m`` keys."""
    return (m - 1, 1) + (0,) * (m - 2)


def protected_transitions(k: tuple[int, ...]):
    """Possible results of adding a key to a small tree of type ``k``.

    Yields ``(weight, replacement_type, split_off)`` where ``weight`` is the
    number of gaps leading to that move and ``split_off`` is the type that
    breaks away (or ``None``).
    """
    m = len(k)
    for i in range(m - 1):
        if k[i]:
            new = list(k)
            new[i] -= 1
            new[i + 1] += 1
            yield (i + 1) * k[i], tuple(new), None
    if k[m - 1]:
        new = list(k)
        new[m - 1] -= 1
        yield m * k[m - 1], tuple(new), start_type(m)


@dataclass
class ModelBundle:
    """An urn specification together with its tree interpretation."""

    model: str
    m: int
    spec: UrnSpec
    type_index: list
    functionals: dict[str, tuple[Fraction, ...]]
    start_state: tuple[int, ...]
    n0: int
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, vec in self.functionals.items():
            if len(vec) != self.spec.q:
                raise DomainError(f"functional {name!r} has length {len(vec)}, expected {self.spec.q}")

    @property
    def q(self) -> int:
        return self.spec.q

    def type_labels(self) -> list:
        return [list(t.k) if isinstance(t, SmallTreeType) else t for t in self.type_index]

    def sidecar(self) -> dict:
        return {
            "model": self.model,
            "m": self.m,
            "type_labels": self.type_labels(),
            "functionals": {k: [format_rational(x) for x in v] for k, v in self.functionals.items()},
        }

    def to_json(self, **kw) -> str:
        return json.dumps({"spec": self.spec.to_dict(), "sidecar": self.sidecar()}, **kw)


def _check_protected_cap(m: int, cap: int, cap_override: bool):
    if m < 2:
        raise DomainError(f"arity must be at least 2 (got {m})")
    if m > cap and not cap_override:
        raise CapExceededError(
            f"protected urn for m={m} has {type_count(m)} types; the default limit is m <= {cap}"
        )


def protected_urn(m: int, cap_override: bool = False) -> ModelBundle:
    """Small-tree urn whose protected-type counts give the protected nodes."""
    _check_protected_cap(m, PROTECTED_SPEC_CAP, cap_override)
    types = enumerate_types(m)
    raw = [t.k for t in types]
    index = {k: i for i, k in enumerate(raw)}
    q = len(raw)
    rules = []
    for i, k in enumerate(raw):
        w = types[i].activity
        if w == 0:
            continue
        outcomes = []
        for weight, new, split in protected_transitions(k):
            delta = [0] * q
            delta[i] -= 1
            delta[index[new]] += 1
            if split is not None:
                delta[index[split]] += 1
            outcomes.append(ReplacementOutcome(Fraction(weight, w), tuple(delta)))
        rules.append(ReplacementRule(i, tuple(outcomes)))
    spec = UrnSpec(q, tuple(Fraction(t.activity) for t in types), tuple(rules), tuple(t.label for t in types))
    functionals = {
        "protected": tuple(Fraction(int(t.protected)) for t in types),
        "leaves": tuple(Fraction(t.leaf_count) for t in types),
    }
    for j in range(1, m):
        functionals[f"leaves_with_{j}_keys"] = tuple(Fraction(t.k[j]) for t in types)
    start = [0] * q
    start[index[start_type(m)]] = 1
    return ModelBundle("protected", m, spec, types, functionals, tuple(start), m)


def protected_mean_matrix(m: int, cap_override: bool = False) -> np.ndarray:
    """Integer mean matrix of the protected urn, built directly as a float array.

    Avoids materialising dense replacement vectors, so it reaches further than
    :func:`protected_urn`.  Entries agree with ``build_matrix_A``.
    """
    _check_protected_cap(m, PROTECTED_SPECTRUM_CAP, cap_override)
    raw = _raw_types(m)
    index = {k: i for i, k in enumerate(raw)}
    A = np.zeros((len(raw), len(raw)))
    for j, k in enumerate(raw):
        for weight, new, split in protected_transitions(k):
            A[j, j] -= weight
            A[index[new], j] += weight
            if split is not None:
                A[index[split], j] += weight
    return A


def _gap_rule(drawn: int, q: int, changes: list[tuple[int, int]]) -> ReplacementRule:
    # pairs, not a dict: the same index may appear twice (m = 2)
    delta = [0] * q
    for j, d in changes:
        delta[j] += d
    return ReplacementRule(drawn, (ReplacementOutcome(Fraction(1), tuple(delta)),))


def node_urn(m: int) -> ModelBundle:
    """Gap urn: type ``j`` (1-based) holds the gaps of nodes with ``j - 1`` keys."""
    if m < 2:
        raise DomainError(f"arity must be at least 2 (got {m})")
    q = m - 1
    rules = []
    for j in range(q):  # 0-based; node with j keys, j+1 gaps
        if j < q - 1:
            rules.append(_gap_rule(j, q, [(j, -(j + 1)), (j + 1, j + 2)]))
        else:
            rules.append(_gap_rule(j, q, [(j, -(j + 1)), (0, m)]))
    labels = tuple(f"gaps in nodes with {j} keys" for j in range(q))
    spec = UrnSpec(q, (Fraction(1),) * q, tuple(rules), labels, group_sizes=tuple(range(1, q + 1)))
    functionals = {
        "gaps": (Fraction(1),) * q,
        "nonfull_nodes": tuple(Fraction(1, j + 1) for j in range(q)),
    }
    for j in range(q):
        functionals[f"nodes_with_{j}_keys"] = tuple(Fraction(1, j + 1) if i == j else Fraction(0) for i in range(q))
    start = (1,) + (0,) * (q - 1)
    return ModelBundle("nodes", m, spec, list(labels), functionals, start, 0)


def leaves_gap_urn(m: int) -> ModelBundle:
    """Gap urn separating external children of non-leaves (type 1) from gaps in leaves.

    Type ``j`` for ``2 <= j <= m`` holds the gaps of leaves with ``j - 1`` keys;
    a full leaf counts its ``m`` external children as its gaps.
    """
    if m < 3:
        raise DomainError(f"the leaves gap urn needs m >= 3 (got {m})")
    q = m
    rules = [_gap_rule(0, q, [(0, -1), (1, 2)])]
    for j in range(1, m - 1):  # 0-based index j: leaf with j keys, j+1 gaps
        rules.append(_gap_rule(j, q, [(j, -(j + 1)), (j + 1, j + 2)]))
    rules.append(_gap_rule(m - 1, q, [(m - 1, -m), (0, m - 1), (1, 2)]))
    labels = ("external gaps of non-leaves",) + tuple(f"gaps in leaves with {j} keys" for j in range(1, m))
    spec = UrnSpec(q, (Fraction(1),) * q, tuple(rules), labels, group_sizes=tuple(range(1, q + 1)))
    functionals = {
        "leaves": (Fraction(0),) + tuple(Fraction(1, j) for j in range(2, m + 1)),
        "gaps": (Fraction(1),) * q,
    }
    start = (1,) + (0,) * (q - 1)
    return ModelBundle("leaves", m, spec, list(labels), functionals, start, 0)


def oneprotected_urn(m: int) -> ModelBundle:
    """Node urn with types: external child of a non-leaf, leaves by key count, non-leaves.

    The non-leaf type has activity 0; its count is the number of
    one-protected nodes.
    """
    if m < 2:
        raise DomainError(f"arity must be at least 2 (got {m})")
    q = m + 1
    rules = []
    for i in range(m):  # 0-based type i has activity i+1
        delta = [0] * q
        delta[i] -= 1
        if i < m - 1:
            delta[i + 1] += 1
        else:
            delta[1] += 1
            delta[0] += m - 1
            delta[m] += 1
        rules.append(ReplacementRule(i, (ReplacementOutcome(Fraction(1), tuple(delta)),)))
    labels = ("external child of a non-leaf",) + tuple(f"leaf with {j} keys" for j in range(1, m)) + ("non-leaf",)
    acts = tuple(Fraction(i + 1) for i in range(m)) + (Fraction(0),)
    spec = UrnSpec(q, acts, tuple(rules), labels)
    e = lambda j: tuple(Fraction(int(i == j)) for i in range(q))  # noqa: E731
    leaves = tuple(Fraction(int(1 <= i <= m - 1)) for i in range(q))
    functionals = {
        "one_protected": e(m),
        "leaves": leaves,
        "internal": tuple(x + y for x, y in zip(leaves, e(m))),
    }
    start = (1,) + (0,) * m
    return ModelBundle("one-protected", m, spec, list(labels), functionals, start, 0)


def build_model(model: str, m: int, cap_override: bool = False) -> ModelBundle:
    if model == "protected":
        return protected_urn(m, cap_override=cap_override)
    if model == "nodes":
        return node_urn(m)
    if model == "leaves":
        return leaves_gap_urn(m)
    if model == "one-protected":
        return oneprotected_urn(m)
    raise DomainError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")


# ----------------------------------------------------------------------------
# Polynomials, closed forms, spectral condition


def phi(m: int) -> Poly:
    """prod_{i=1}^{m-1} (x + i) - m!, the characteristic polynomial of the node urn."""
    p = Poly([1])
    for i in range(1, m):
        p = p * Poly([i, 1])
    return p - Poly([math.factorial(m)])


def harmonic(m: int) -> Fraction:
    return sum((Fraction(1, k) for k in range(1, m + 1)), Fraction(0))


def closed_forms(m: int) -> dict[str, Fraction]:
    """Harmonic number and the leaf / one-protected mean rates for arity ``m >= 3``."""
    if m < 3:
        raise DomainError(f"closed forms are stated for m >= 3 (got {m})")
    H = harmonic(m)
    tail = sum((Fraction(1, k * (k + 1)) for k in range(2, m + 1)), Fraction(0))
    if tail != Fraction(m - 1, 2 * (m + 1)):
        raise ArithmeticError("telescoping identity failed")
    return {
        "H_m": H,
        "mu_L": tail / (H - 1),
        "mu_Q": Fraction(1, m + 1) / (H - 1),
    }


def spectral_condition(m: int) -> dict:
    """Whether every non-Perron root of ``phi(m)`` has real part below 1/2."""
    if m < 2:
        raise DomainError(f"arity must be at least 2 (got {m})")
    p = phi(m)
    if m == 2:
        return {"m": m, "holds": True, "lambda2": None, "lambda2_re": None}
    A = build_matrix_A(node_urn(m).spec)
    roots = rl.numeric_eigen(A, poly=p)
    k = min(range(len(roots)), key=lambda i: abs(roots[i] - 1))
    rest = roots[:k] + roots[k + 1:]
    lam2 = rest[0]
    return {"m": m, "holds": lam2.real < 0.5, "lambda2": lam2, "lambda2_re": lam2.real}


def leaves_char_identity(m: int) -> bool:
    """char_poly of the leaves gap urn equals (x + m) * phi(m)."""
    A = build_matrix_A(leaves_gap_urn(m).spec)
    return rl.char_poly(A) == Poly([m, 1]) * phi(m)


# ----------------------------------------------------------------------------
# The map from small-tree counts to gap counts


@dataclass
class TMap:
    """Linear map sending protected-urn counts to node-urn gap counts."""

    m: int
    matrix: RatMatrix

    def apply(self, x):
        return self.matrix @ x


def tmap(m: int, types: list[SmallTreeType] | None = None) -> TMap:
    types = types if types is not None else enumerate_types(m)
    rows = []
    rows.append([t.k[0] + m * t.k[m - 1] for t in types])
    for j in range(2, m):
        rows.append([j * t.k[j - 1] for t in types])
    return TMap(m, RatMatrix(rows))


def lemma_root_check(m: int, cap_override: bool = False) -> dict:
    """Check that the gap counts are a linear image of the small-tree counts and
    that every root of ``phi(m)`` is an eigenvalue of the protected mean matrix.
    """
    bundle = protected_urn(m, cap_override=cap_override)
    A = build_matrix_A(bundle.spec)
    AW = build_matrix_A(node_urn(m).spec)
    T = tmap(m, bundle.type_index).matrix
    lhs, rhs = T @ A, AW @ T
    mismatch = None
    if lhs != rhs:
        for i in range(lhs.rows):
            for j in range(lhs.cols):
                if lhs[i, j] != rhs[i, j]:
                    mismatch = (i, j, lhs[i, j], rhs[i, j])
                    break
            if mismatch:
                break
    p = phi(m)
    # exact certificate: with T A = A_W T and T of full row rank, w' A_W = lam w'
    # gives (w'T) A = lam (w'T) with w'T != 0, so every root of phi is in spec(A)
    certified = mismatch is None and rl.rank(T) == T.rows and rl.char_poly(AW) == p
    roots, rem = rl.rational_roots(p)
    contained = []
    for r, _ in roots:
        ok = rl.rank(A.sub_identity(r)) < A.rows
        contained.append({"root": r, "exact": True, "contained": ok})
    if rem.degree >= 1:
        spectrum = np.array(rl.numeric_eigen(A, check=False))
        An = A.to_numpy()
        for z in rl.numeric_eigen(rl.companion(rem), poly=rem, check=False):
            dist = float(np.min(np.abs(spectrum - z)))
            smin = float(np.linalg.svd(An - z * np.eye(A.rows), compute_uv=False)[-1])
            contained.append({"root": z, "exact": False, "distance": dist, "contained": dist <= 1e-7 or smin <= 1e-10 * np.abs(An).sum(axis=1).max()})
    return {
        "m": m,
        "identity_holds": mismatch is None,
        "first_mismatch": mismatch,
        "roots": contained,
        "all_contained": all(c["contained"] for c in contained),
        "certified": certified,
    }


# ----------------------------------------------------------------------------
# Reference type orders


@lru_cache(maxsize=None)
def _published() -> dict:
    with resources.files("mstpolya.data").joinpath("published.json").open("r", encoding="utf-8") as fh:
        return json.load(fh)


def reference_type_order(m: int) -> list[tuple[int, ...]]:
    """Type numbering used by the published figures (available for m = 2 and 3)."""
    key = f"type_order_m{m}"
    data = _published()
    if key not in data:
        raise DomainError(f"no reference type order stored for m={m}")
    return [tuple(k) for k in data[key]["value"]]


def reference_permutation(m: int) -> list[int]:
    """Canonical indices listed in reference order: ``perm[i]`` is the canonical index of reference type ``i``."""
    index = {t.k: i for i, t in enumerate(enumerate_types(m))}
    return [index[k] for k in reference_type_order(m)]
