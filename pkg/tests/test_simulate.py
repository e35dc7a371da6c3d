import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from mstpolya.errors import CapExceededError, DomainError
from mstpolya.models import leaves_gap_urn, oneprotected_urn, protected_urn
from mstpolya.rng import CounterRNG
from mstpolya.simulate import (
    MAX_WORK,
    SimStats,
    run_mc,
    simulate_trees,
    simulate_urn,
    stats_from_csv,
    stats_to_csv,
)
from mstpolya.trees import MSTree, count_stats, forest_decompose
from mstpolya.urn import asymptotic_law, functional_law


def reference_tree_rows(m, n, seed, trials):
    rows = []
    for t in range(trials):
        tree = MSTree(m)
        rng = CounterRNG(seed, t)
        for _ in range(n):
            tree.insert_random(rng)
        s = count_stats(tree)
        rows.append([s.two_protected, s.one_protected, s.leaves, s.internal])
    return np.array(rows)


def reference_urn(bundle, n, seed, trial):
    """Pure Python ball process with the same draw protocol as the compiled kernel."""
    spec = bundle.spec
    scale = math.lcm(*(a.denominator for a in spec.activities))
    act = [int(a * scale) for a in spec.activities]
    x = list(bundle.start_state)
    rng = CounterRNG(seed, trial)
    for _ in range(n - bundle.n0):
        r = rng.randbelow(sum(a * c for a, c in zip(act, x)))
        i = 0
        while r >= act[i] * x[i]:
            r -= act[i] * x[i]
            i += 1
        outs = spec.rule_for(i).outcomes
        o = outs[0]
        if len(outs) > 1:
            den = math.lcm(*(p.probability.denominator for p in outs))
            r2 = rng.randbelow(den)
            for o in outs:
                w = int(o.probability * den)
                if r2 < w:
                    break
                r2 -= w
        x = [a + d for a, d in zip(x, o.delta)]
    return x


@pytest.mark.parametrize("m", [2, 3, 4, 6])
def test_compiled_trees_match_reference(m):
    got = simulate_trees(m, 300, 20, seed=11)
    assert np.array_equal(got, reference_tree_rows(m, 300, 11, 20))


@pytest.mark.parametrize("bundle", [protected_urn(2), protected_urn(3), leaves_gap_urn(4), oneprotected_urn(3)], ids=lambda b: f"{b.model}-{b.m}")
def test_compiled_urn_matches_reference(bundle):
    got = simulate_urn(bundle, 200, 10, seed=5)
    for t in range(10):
        assert list(got[t]) == reference_urn(bundle, 200, 5, t)


def test_urn_mode_agrees_with_tree_mode():
    b = protected_urn(3)
    n, trials = 2000, 3000
    urn = run_mc(b, n=n, trials=trials, seed=3, statistics=("protected", "leaves"))
    tree = run_mc("tree", 3, n, trials, seed=4, statistics=("two_protected", "leaves"))
    for u, t in (("protected", "two_protected"), ("leaves", "leaves")):
        a, c = urn[u], tree[t]
        se = math.sqrt(a.variance / a.count + c.variance / c.count)
        assert abs(a.mean - c.mean) < 5 * se


def test_urn_state_is_forest_of_tree():
    # after the same number of keys, ball counts have the forest's mean
    b = protected_urn(2)
    n, trials = 60, 4000
    urn = simulate_urn(b, n, trials, seed=8).mean(axis=0)
    acc = np.zeros(b.q)
    for t in range(trials):
        tree = MSTree(2)
        rng = CounterRNG(99, t)
        for _ in range(n):
            tree.insert_random(rng)
        acc += forest_decompose(tree)
    tree_mean = acc / trials
    assert np.allclose(urn, tree_mean, atol=0.35)


def test_determinism_and_batching():
    a = run_mc("tree", 3, 500, 40, seed=9, statistics=("leaves",), keep_samples=True)["leaves"]
    b = run_mc("tree", 3, 500, 40, seed=9, statistics=("leaves",), keep_samples=True)["leaves"]
    assert a == b if a.samples is None else np.array_equal(a.samples, b.samples) and a.mean == b.mean
    first = run_mc("tree", 3, 500, 15, seed=9, statistics=("leaves",), keep_samples=True)["leaves"]
    rest = run_mc("tree", 3, 500, 25, seed=9, statistics=("leaves",), keep_samples=True, first_trial=15)["leaves"]
    merged = first.merge(rest)
    assert np.array_equal(merged.samples, a.samples)
    assert merged.mean == pytest.approx(a.mean, rel=1e-12)
    assert merged.m2 == pytest.approx(a.m2, rel=1e-12)


def test_errors():
    with pytest.raises(DomainError):
        run_mc("tree", 3, 100, 10, 1, statistics=("roots",))
    with pytest.raises(DomainError):
        run_mc(protected_urn(2), n=100, trials=10, statistics=("leaves_with_7_keys",))
    with pytest.raises(CapExceededError):
        run_mc("tree", 3, MAX_WORK, 2, 1)
    with pytest.raises(DomainError):
        simulate_urn(protected_urn(3), 2, 1, 1)


# --- streaming moments


@given(
    st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=4, max_size=200),
    st.integers(1, 6),
    st.randoms(use_true_random=False),
)
@settings(max_examples=80, deadline=None)
def test_merge_matches_direct_and_is_order_free(xs, parts, rnd):
    whole = SimStats("x", 2, 10, 0)
    whole.extend(xs)
    cuts = sorted(rnd.sample(range(1, len(xs)), min(parts - 1, len(xs) - 1)))
    chunks = [xs[i:j] for i, j in zip([0] + cuts, cuts + [len(xs)])]
    summaries = []
    for c in chunks:
        s = SimStats("x", 2, 10, 0)
        s.extend(c)
        summaries.append(s)
    rnd.shuffle(summaries)
    acc = summaries[0]
    for s in summaries[1:]:
        acc = acc.merge(s)
    assert acc.count == whole.count
    scale = max(1.0, max(abs(x) for x in xs))
    assert acc.mean == pytest.approx(whole.mean, rel=1e-12, abs=1e-12 * scale)
    assert acc.m2 == pytest.approx(whole.m2, rel=1e-12, abs=1e-9 * scale**2)
    arr = np.array(xs)
    assert whole.mean == pytest.approx(arr.mean(), rel=1e-12, abs=1e-12 * scale)
    if arr.std() > 1e-6 * scale:
        assert whole.variance == pytest.approx(arr.var(ddof=1), rel=1e-9)
        assert whole.skewness == pytest.approx(scipy.stats.skew(arr), rel=1e-6, abs=1e-9)
        assert whole.excess_kurtosis == pytest.approx(scipy.stats.kurtosis(arr), rel=1e-6, abs=1e-9)


def test_merge_rejects_mismatched_statistics():
    with pytest.raises(DomainError):
        SimStats("a", 2, 10, 0).merge(SimStats("b", 2, 10, 0))


def test_csv_round_trip():
    res = run_mc("tree", 2, 100, 10, seed=1, statistics=("leaves", "internal"))
    text = stats_to_csv(res.values())
    rows = stats_from_csv(text)
    assert [r["statistic"] for r in rows] == ["leaves", "internal"]
    for r in rows:
        s = res[r["statistic"]]
        assert float(r["mean"]) == s.mean and int(r["trials"]) == s.count
        assert float(r["variance"]) == s.variance


# --- limit law shape (means and variances are covered by the acceptance suite)


@pytest.mark.slow
def test_clt_shape_ternary_protected():
    # sampling sd of the skewness is about sqrt(6/2000) = 0.055, so the bound is under 2 sd
    res = run_mc("tree", 3, 100_000, 2000, seed=1, statistics=("two_protected",))["two_protected"]
    assert abs(res.skewness) < 0.1
    assert abs(res.excess_kurtosis) < 0.2
    law = asymptotic_law(protected_urn(3).spec)
    mu, var = functional_law(law, protected_urn(3).functionals["protected"])
    z = (res.mean - float(mu) * 1e5) / math.sqrt(float(var) * 1e5 / res.count)
    assert abs(z) < 4
