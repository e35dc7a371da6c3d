"""Monte Carlo for m-ary search trees and for urns, with streaming moments.

Two compiled kernels do the work: one grows real trees by uniform gap
choice, the other runs the ball process of an urn specification.  Both use
the counter-based generator of :mod:`mstpolya.rng` (re-implemented here in
uint64 arithmetic), so trial ``t`` of seed ``s`` gives the same result no
matter how trials are batched.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numba
import numpy as np

from .errors import CapExceededError, DomainError
from .models import ModelBundle
from .rng import GOLDEN, TRIAL_SALT
from .trees import STATISTICS as TREE_STATISTICS

_GOLDEN = np.uint64(GOLDEN)
_SALT = np.uint64(TRIAL_SALT)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_ONE = np.uint64(1)

#: Refuse runs above this many elementary steps (trials * n) unless overridden.
MAX_WORK = 2 * 10**9


@numba.njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


@numba.njit(cache=True)
def _stream_key(seed, trial):
    return _mix64(_mix64(seed) ^ ((np.uint64(trial) + _ONE) * _SALT))


@numba.njit(cache=True)
def _randbelow(key, counter, bound):
    """Uniform integer in [0, bound) and the advanced counter."""
    mask = np.uint64(0)
    b = np.uint64(bound - 1)
    while mask < b:
        mask = (mask << _ONE) | _ONE
    ub = np.uint64(bound)
    while True:
        counter += 1
        x = _mix64(key + np.uint64(counter) * _GOLDEN) & mask
        if x < ub:
            return np.int64(x), counter


@numba.njit(cache=True)
def _grow_tree(m, n, key, nkeys, child, gaps):
    """Insert n keys into an empty tree held in the given arena; returns the node count."""
    nkeys[0] = 0
    gaps[0] = 1
    for j in range(m):
        child[0, j] = -1
    used = 1
    counter = 0
    for t in range(n):
        r, counter = _randbelow(key, counter, t + 1)
        v = 0
        while True:
            gaps[v] += 1
            if nkeys[v] < m - 1:
                break
            nxt = -1
            for j in range(m):
                c = child[v, j]
                g = 1 if c < 0 else gaps[c]
                if r < g:
                    if c < 0:
                        c = used
                        used += 1
                        nkeys[c] = 0
                        gaps[c] = 2
                        for jj in range(m):
                            child[c, jj] = -1
                        child[v, j] = c
                        nxt = -2 - c
                    else:
                        nxt = c
                    break
                r -= g
            if nxt <= -2:
                v = -2 - nxt
                break
            v = nxt
        nkeys[v] += 1
    return used


@numba.njit(cache=True)
def _tree_stats(m, used, nkeys, child, out):
    # out: two_protected, one_protected, leaves, internal
    two = 0
    one = 0
    leaves = 0
    internal = 0
    for v in range(used):
        if nkeys[v] == 0:
            continue
        internal += 1
        if nkeys[v] < m - 1:
            leaves += 1
            continue
        inner = 0
        leafkid = 0
        for j in range(m):
            c = child[v, j]
            if c >= 0:
                inner += 1
                if nkeys[c] < m - 1:
                    leafkid = 1
                else:
                    isleaf = 1
                    for jj in range(m):
                        if child[c, jj] >= 0:
                            isleaf = 0
                            break
                    if isleaf:
                        leafkid = 1
        if inner == 0:
            leaves += 1
        else:
            one += 1
            if leafkid == 0:
                two += 1
    out[0] = two
    out[1] = one
    out[2] = leaves
    out[3] = internal


@numba.njit(cache=True)
def _tree_kernel(m, n, seed, first_trial, trials):
    cap = n + 2
    nkeys = np.zeros(cap, dtype=np.int32)
    gaps = np.zeros(cap, dtype=np.int64)
    child = np.full((cap, m), -1, dtype=np.int32)
    out = np.zeros((trials, 4), dtype=np.int64)
    for t in range(trials):
        key = _stream_key(seed, first_trial + t)
        used = _grow_tree(m, n, key, nkeys, child, gaps)
        _tree_stats(m, used, nkeys, child, out[t])
    return out


@numba.njit(cache=True)
def _urn_kernel(start, act, rule_off, cum_w, delta_off, delta_idx, delta_val, steps, seed, first_trial, trials):
    q = start.shape[0]
    out = np.zeros((trials, q), dtype=np.int64)
    x = np.zeros(q, dtype=np.int64)
    for t in range(trials):
        key = _stream_key(seed, first_trial + t)
        counter = 0
        total = 0
        for i in range(q):
            x[i] = start[i]
            total += act[i] * x[i]
        for s in range(steps):
            r, counter = _randbelow(key, counter, total)
            i = 0
            while True:
                w = act[i] * x[i]
                if r < w:
                    break
                r -= w
                i += 1
            lo = rule_off[i]
            hi = rule_off[i + 1]
            o = lo
            if hi - lo > 1:
                r2, counter = _randbelow(key, counter, cum_w[hi - 1])
                while cum_w[o] <= r2:
                    o += 1
            for e in range(delta_off[o], delta_off[o + 1]):
                j = delta_idx[e]
                x[j] += delta_val[e]
                total += act[j] * delta_val[e]
        for i in range(q):
            out[t, i] = x[i]
    return out


# ----------------------------------------------------------------------------
# Streaming moments


@dataclass
class SimStats:
    """Running count, mean and central moment sums of one statistic.

    Updates follow Welford (extended to the third and fourth moments);
    :meth:`merge` combines two summaries with the pairwise formulas, so
    batches can be summarised independently and folded together.
    """

    statistic: str
    m: int
    n: int
    seed: int
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0
    samples: np.ndarray | None = field(default=None, repr=False)

    def push(self, x: float):
        n1 = self.count
        self.count += 1
        n = self.count
        delta = x - self.mean
        dn = delta / n
        dn2 = dn * dn
        term1 = delta * dn * n1
        self.mean += dn
        self.m4 += term1 * dn2 * (n * n - 3 * n + 3) + 6 * dn2 * self.m2 - 4 * dn * self.m3
        self.m3 += term1 * dn * (n - 2) - 3 * dn * self.m2
        self.m2 += term1

    def extend(self, values):
        for x in values:
            self.push(float(x))

    def merge(self, other: "SimStats") -> "SimStats":
        if (self.statistic, self.m, self.n) != (other.statistic, other.m, other.n):
            raise DomainError("cannot merge summaries of different statistics")
        na, nb = self.count, other.count
        out = SimStats(self.statistic, self.m, self.n, self.seed)
        if na == 0 or nb == 0:
            src = other if na == 0 else self
            out.count, out.mean, out.m2, out.m3, out.m4 = src.count, src.mean, src.m2, src.m3, src.m4
        else:
            n = na + nb
            d = other.mean - self.mean
            d2, d3, d4 = d * d, d**3, d**4
            out.count = n
            out.mean = self.mean + d * nb / n
            out.m2 = self.m2 + other.m2 + d2 * na * nb / n
            out.m3 = (
                self.m3 + other.m3 + d3 * na * nb * (na - nb) / n**2 + 3 * d * (na * other.m2 - nb * self.m2) / n
            )
            out.m4 = (
                self.m4
                + other.m4
                + d4 * na * nb * (na * na - na * nb + nb * nb) / n**3
                + 6 * d2 * (na * na * other.m2 + nb * nb * self.m2) / n**2
                + 4 * d * (na * other.m3 - nb * self.m3) / n
            )
        if self.samples is not None and other.samples is not None:
            out.samples = np.concatenate([self.samples, other.samples])
        return out

    @property
    def trials(self) -> int:
        return self.count

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else float("nan")

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 1 else float("nan")

    @property
    def skewness(self) -> float:
        if self.count < 3 or self.m2 == 0:
            return float("nan")
        return math.sqrt(self.count) * self.m3 / self.m2**1.5

    @property
    def excess_kurtosis(self) -> float:
        if self.count < 4 or self.m2 == 0:
            return float("nan")
        return self.count * self.m4 / (self.m2 * self.m2) - 3.0

    def row(self) -> dict:
        return {
            "statistic": self.statistic,
            "m": self.m,
            "n": self.n,
            "trials": self.count,
            "mean": repr(self.mean),
            "variance": repr(self.variance),
            "std_error": repr(self.std_error),
            "seed": self.seed,
        }


CSV_COLUMNS = ("statistic", "m", "n", "trials", "mean", "variance", "std_error", "seed")


def stats_to_csv(stats, extra_columns: tuple = ()) -> str:
    """CSV text with one row per summary; extra columns are taken from ``row_extra`` dicts."""
    buf = io.StringIO()
    cols = list(CSV_COLUMNS) + list(extra_columns)
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for s in stats:
        row = s.row() if isinstance(s, SimStats) else dict(s)
        w.writerow({k: row.get(k, "") for k in cols})
    return buf.getvalue()


def stats_from_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


# ----------------------------------------------------------------------------
# Drivers


def _check_work(n: int, trials: int, cap_override: bool):
    if n < 1 or trials < 1:
        raise DomainError("n and trials must be positive")
    if n * trials > MAX_WORK and not cap_override:
        raise CapExceededError(f"{trials} trials of {n} steps exceed the default budget of {MAX_WORK} steps")


def simulate_trees(m: int, n: int, trials: int, seed: int, first_trial: int = 0) -> np.ndarray:
    """Per-trial (two_protected, one_protected, leaves, internal) counts of grown trees."""
    if m < 2:
        raise DomainError(f"arity must be at least 2 (got {m})")
    return _tree_kernel(m, n, np.uint64(seed & (2**64 - 1)), first_trial, trials)


def _compile_urn(bundle: ModelBundle):
    spec = bundle.spec
    scale = math.lcm(*(a.denominator for a in spec.activities))
    act = np.array([int(a * scale) for a in spec.activities], dtype=np.int64)
    rule_off = [0]
    cum_w, delta_off, delta_idx, delta_val = [], [0], [], []
    for i in range(spec.q):
        r = spec.rule_for(i)
        if r is not None:
            den = math.lcm(*(o.probability.denominator for o in r.outcomes))
            acc = 0
            for o in r.outcomes:
                acc += int(o.probability * den)
                cum_w.append(acc)
                for j, d in enumerate(o.delta):
                    if d:
                        delta_idx.append(j)
                        delta_val.append(d)
                delta_off.append(len(delta_idx))
        rule_off.append(len(cum_w))
    return (
        act,
        np.array(rule_off, dtype=np.int64),
        np.array(cum_w, dtype=np.int64),
        np.array(delta_off, dtype=np.int64),
        np.array(delta_idx, dtype=np.int64),
        np.array(delta_val, dtype=np.int64),
    )


def simulate_urn(bundle: ModelBundle, n: int, trials: int, seed: int, first_trial: int = 0) -> np.ndarray:
    """Final ball counts (one row per trial) after growing the urn to ``n`` keys."""
    if n < bundle.n0:
        raise DomainError(f"the {bundle.model} urn starts at n = {bundle.n0}")
    act, rule_off, cum_w, delta_off, delta_idx, delta_val = _compile_urn(bundle)
    start = np.array(bundle.start_state, dtype=np.int64)
    return _urn_kernel(
        start, act, rule_off, cum_w, delta_off, delta_idx, delta_val,
        n - bundle.n0, np.uint64(seed & (2**64 - 1)), first_trial, trials,
    )


def run_mc(
    model=None,
    m: int | None = None,
    n: int = 1000,
    trials: int = 100,
    seed: int = 0,
    statistics=("two_protected",),
    keep_samples: bool = False,
    first_trial: int = 0,
    cap_override: bool = False,
) -> dict[str, SimStats]:
    """Monte Carlo summaries of the requested statistics.

    ``model`` is ``None`` or ``"tree"`` for real trees (statistics from
    ``two_protected, one_protected, leaves, internal``) or a
    :class:`ModelBundle` for the urn (statistics are its functional names,
    each evaluated on the final ball counts).
    """
    _check_work(n, trials, cap_override)
    statistics = tuple(statistics)
    if model is None or model == "tree":
        if m is None:
            raise DomainError("tree mode needs the arity m")
        bad = [s for s in statistics if s not in TREE_STATISTICS]
        if bad:
            raise DomainError(f"unknown statistic {bad[0]!r}; choose from {', '.join(TREE_STATISTICS)}")
        raw = simulate_trees(m, n, trials, seed, first_trial)
        cols = {s: raw[:, TREE_STATISTICS.index(s)].astype(float) for s in statistics}
    elif isinstance(model, ModelBundle):
        m = model.m
        bad = [s for s in statistics if s not in model.functionals]
        if bad:
            raise DomainError(f"unknown statistic {bad[0]!r}; choose from {', '.join(model.functionals)}")
        counts = simulate_urn(model, n, trials, seed, first_trial)
        cols = {}
        for s in statistics:
            c = model.functionals[s]
            den = math.lcm(*(Fraction(x).denominator for x in c))
            ci = np.array([int(Fraction(x) * den) for x in c], dtype=np.int64)
            cols[s] = (counts @ ci).astype(float) / den
    else:
        raise DomainError(f"unsupported model {model!r}")
    out = {}
    for s in statistics:
        st = SimStats(s, m, n, seed)
        st.extend(cols[s])
        if keep_samples:
            st.samples = cols[s].copy()
        out[s] = st
    return out
