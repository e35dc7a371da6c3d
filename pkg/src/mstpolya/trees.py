"""Reference (pure Python) m-ary search trees, fringe statistics and exact small-n laws.

Keys are never stored as numbers: a new key is placed by choosing one of the
``n + 1`` gaps uniformly, which yields the same random tree.  Nodes therefore
only carry their key counts.
"""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .errors import CapExceededError, DomainError
from .models import enumerate_types, protected_urn, start_type
from .ratlinalg import as_rational, format_rational
from .rng import CounterRNG

EXTERNAL = -1
EXACT_N_CAP = 9

STATISTICS = ("two_protected", "one_protected", "leaves", "internal")


class MSTree:
    """Arena-backed m-ary search tree.

    ``nkeys[v]`` is the key count of node ``v``; ``children[v]`` is ``None``
    until the node is full, then a list of ``m`` slots holding node indices or
    ``EXTERNAL``.  ``gaps[v]`` is the number of gaps in the subtree of ``v``.
    Node 0 is the root, present (empty) from the start.
    """

    def __init__(self, m: int):
        if m < 2:
            raise DomainError(f"arity must be at least 2 (got {m})")
        self.m = m
        self.nkeys = [0]
        self.children: list[list[int] | None] = [None]
        self.parent = [-1]
        self.gaps = [1]
        self.n = 0

    @property
    def gap_count(self) -> int:
        return self.gaps[0]

    def _new_node(self, parent: int) -> int:
        self.nkeys.append(0)
        self.children.append(None)
        self.parent.append(parent)
        self.gaps.append(1)
        return len(self.nkeys) - 1

    def locate(self, rank: int):
        """Where gap ``rank`` (in symmetric order) lives.

        Returns ``(node, slot)``: ``slot`` is ``None`` for a gap inside a
        non-full node and the child position for an external child.
        """
        if not 0 <= rank <= self.n:
            raise DomainError(f"gap rank {rank} outside [0, {self.n}]")
        v = 0
        while True:
            kids = self.children[v]
            if kids is None:
                return v, None
            for slot, c in enumerate(kids):
                g = 1 if c == EXTERNAL else self.gaps[c]
                if rank < g:
                    if c == EXTERNAL:
                        return v, slot
                    v = c
                    break
                rank -= g

    def insert(self, rank: int) -> int:
        """Add a key in gap ``rank``; returns the node that received it."""
        v, slot = self.locate(rank)
        if slot is not None:
            c = self._new_node(v)
            self.children[v][slot] = c
            v = c
        self.nkeys[v] += 1
        if self.nkeys[v] == self.m - 1:
            self.children[v] = [EXTERNAL] * self.m
        u = v
        while u != -1:
            self.gaps[u] += 1
            u = self.parent[u]
        self.n += 1
        return v

    def insert_random(self, rng: CounterRNG) -> int:
        return self.insert(rng.randbelow(self.n + 1))

    # --- structure queries

    def internal_children(self, v: int) -> list[int]:
        kids = self.children[v]
        return [] if kids is None else [c for c in kids if c != EXTERNAL]

    def is_leaf(self, v: int) -> bool:
        return self.nkeys[v] > 0 and not self.internal_children(v)

    def nodes(self):
        return (v for v in range(len(self.nkeys)) if self.nkeys[v] > 0)

    def symmetric_order_sizes(self) -> list[int]:
        """Key counts of nodes in symmetric order (a sanity view for tests)."""
        out = []

        def walk(v):
            kids = self.children[v]
            if kids is None:
                out.append(self.nkeys[v])
                return
            for c in kids:
                if c != EXTERNAL:
                    walk(c)
            out.append(self.nkeys[v])

        walk(0)
        return out


@dataclass
class TreeStats:
    n: int
    two_protected: int
    one_protected: int
    leaves: int
    internal: int
    key_count_profile: tuple[int, ...] = ()

    def get(self, name: str) -> int:
        if name not in STATISTICS:
            raise KeyError(f"unknown statistic {name!r}")
        return getattr(self, name)


def count_stats(tree: MSTree) -> TreeStats:
    """Leaves, one-protected, two-protected and internal nodes plus the key-count profile.

    The profile entry 0 counts empty nodes: external children, or the empty
    root of an empty tree.
    """
    m = tree.m
    leaves = internal = two = 0
    profile = [0] * m
    if tree.n == 0:
        profile[0] = 1
    for v in tree.nodes():
        internal += 1
        profile[tree.nkeys[v]] += 1
        kids = tree.children[v]
        if kids is not None:
            profile[0] += sum(1 for c in kids if c == EXTERNAL)
        inner = tree.internal_children(v)
        if not inner:
            leaves += 1
        elif not any(tree.is_leaf(c) for c in inner):
            two += 1
    return TreeStats(tree.n, two, internal - leaves, leaves, internal, tuple(profile))


def small_tree_type(tree: MSTree, v: int) -> tuple[int, ...]:
    """Type of the small tree rooted at non-leaf ``v``."""
    k = [0] * tree.m
    for c in tree.children[v]:
        if c == EXTERNAL:
            k[0] += 1
        elif tree.is_leaf(c):
            k[tree.nkeys[c]] += 1
    return tuple(k)


@lru_cache(maxsize=None)
def _type_index(m: int) -> dict:
    return {t.k: i for i, t in enumerate(enumerate_types(m))}


def forest_decompose(tree: MSTree) -> list[int]:
    """Ball counts of the small-tree urn, in canonical type order."""
    if tree.n < tree.m:
        raise DomainError(f"the forest is defined from n = m = {tree.m} keys on (n = {tree.n})")
    index = _type_index(tree.m)
    x = [0] * len(index)
    for v in tree.nodes():
        if not tree.is_leaf(v):
            x[index[small_tree_type(tree, v)]] += 1
    return x


def small_tree_root_of_gap(tree: MSTree, rank: int) -> int:
    """Root of the small tree that contains gap ``rank``."""
    v, slot = tree.locate(rank)
    if slot is not None and not tree.is_leaf(v):
        return v
    return tree.parent[v]


# ----------------------------------------------------------------------------
# Exact small-n distributions


@dataclass
class ExactDist:
    n: int
    pmf: dict[int, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        if self.pmf and sum(self.pmf.values()) != 1:
            raise ValueError("probabilities do not sum to 1")

    def mean(self) -> Fraction:
        return sum((Fraction(k) * p for k, p in self.pmf.items()), Fraction(0))

    def variance(self) -> Fraction:
        mu = self.mean()
        return sum(((k - mu) ** 2 * p for k, p in self.pmf.items()), Fraction(0))

    def to_dict(self) -> dict:
        return {"n": self.n, "pmf": {str(k): format_rational(p) for k, p in sorted(self.pmf.items())}}

    @classmethod
    def from_dict(cls, d: dict) -> "ExactDist":
        return cls(int(d["n"]), {int(k): as_rational(v) for k, v in d["pmf"].items()})

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# Shapes: an int k is a non-full node with k keys (0 = empty); a tuple is a
# full node and lists its m child shapes in sorted order (child order does
# not affect any statistic or future law).


def _shape_gaps(s) -> int:
    if isinstance(s, int):
        return s + 1
    return sum(_shape_gaps(c) for c in s)


def _grow(s, m: int):
    """Yield (new_shape, number_of_gaps_leading_there)."""
    if isinstance(s, int):
        k = s + 1
        yield ((0,) * m if k == m - 1 else k), s + 1
        return
    acc: dict = defaultdict(int)
    for i, c in enumerate(s):
        for new_c, w in _grow(c, m):
            kids = list(s)
            kids[i] = new_c
            acc[tuple(sorted(kids, key=_shape_key))] += w
    yield from acc.items()


def _shape_key(s):
    return (0, s, ()) if isinstance(s, int) else (1, 0, tuple(_shape_key(c) for c in s))


def _shape_stats(s) -> dict[str, int]:
    out = {"two_protected": 0, "one_protected": 0, "leaves": 0, "internal": 0}

    def walk(t) -> bool:
        """Count the subtree; return whether its root is a leaf (empty -> False)."""
        if isinstance(t, int):
            if t == 0:
                return False
            out["internal"] += 1
            out["leaves"] += 1
            return True
        out["internal"] += 1
        inner = [c for c in t if c != 0]
        child_leaf = [walk(c) for c in inner]
        if not inner:
            out["leaves"] += 1
            return True
        out["one_protected"] += 1
        if not any(child_leaf):
            out["two_protected"] += 1
        return False

    walk(s)
    return out


def exact_small_n(m: int, n_max: int, statistic: str = "two_protected") -> list[ExactDist]:
    """Exact law of a statistic for every ``n = 0..n_max``.

    Each of the ``n!`` equally likely gap sequences is accounted for; sequences
    are merged by the (unordered) tree shape they produce, which leaves the
    probabilities unchanged.
    """
    if statistic not in STATISTICS:
        raise DomainError(f"unknown statistic {statistic!r}; choose from {', '.join(STATISTICS)}")
    if m < 2:
        raise DomainError(f"arity must be at least 2 (got {m})")
    if n_max > EXACT_N_CAP:
        raise CapExceededError(f"exhaustive enumeration is limited to n <= {EXACT_N_CAP}")
    if n_max < 0:
        raise DomainError("n_max must be non-negative")
    layer = {0: Fraction(1)}
    out = []
    for n in range(n_max + 1):
        pmf: dict[int, Fraction] = defaultdict(Fraction)
        for shape, p in layer.items():
            pmf[_shape_stats(shape)[statistic]] += p
        out.append(ExactDist(n, dict(pmf)))
        if n == n_max:
            break
        nxt: dict = defaultdict(Fraction)
        for shape, p in layer.items():
            for new, w in _grow(shape, m):
                nxt[new] += p * Fraction(w, n + 1)
        layer = nxt
    return out


# ----------------------------------------------------------------------------
# Urn / tree consistency


@dataclass
class ConsistencyReport:
    m: int
    n: int
    seed: int
    steps_checked: int = 0
    violations: list = field(default_factory=list)
    start_ok: bool = True

    @property
    def ok(self) -> bool:
        return self.start_ok and not self.violations


def urn_tree_consistency(m: int, n: int, seed: int, trial: int = 0) -> ConsistencyReport:
    """Grow a random tree and check every step against the small-tree urn rules."""
    if n < m:
        raise DomainError(f"need n >= m (got n={n}, m={m})")
    bundle = protected_urn(m, cap_override=True)
    spec = bundle.spec
    index = _type_index(m)
    rep = ConsistencyReport(m, n, seed)
    rng = CounterRNG(seed, trial)
    tree = MSTree(m)
    while tree.n < m:
        tree.insert_random(rng)
    x = forest_decompose(tree)
    expected = [0] * len(index)
    expected[index[start_type(m)]] = 1
    if x != expected:
        rep.start_ok = False
        rep.violations.append({"n": m, "reason": "start state", "state": x})
    allowed = {r.drawn: {o.delta for o in r.outcomes} for r in spec.rules}
    while tree.n < n:
        rank = rng.randbelow(tree.n + 1)
        root = small_tree_root_of_gap(tree, rank)
        drawn = index[small_tree_type(tree, root)]
        tree.insert(rank)
        y = forest_decompose(tree)
        delta = tuple(b - a for a, b in zip(x, y))
        rep.steps_checked += 1
        if delta not in allowed.get(drawn, set()):
            rep.violations.append({"n": tree.n, "drawn": spec.labels[drawn], "delta": delta})
            if len(rep.violations) >= 10:
                break
        x = y
    return rep
