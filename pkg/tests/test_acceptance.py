"""One test per acceptance criterion, each at its stated tolerance.

Every test records a PASS/FAIL line that is printed in the terminal summary.
"""
import math
import time
from fractions import Fraction

import numpy as np

from mstpolya import ledger
from mstpolya import ratlinalg as rl
from mstpolya.models import (
    build_model,
    enumerate_types,
    leaves_char_identity,
    lemma_root_check,
    protected_mean_matrix,
    spectral_condition,
    type_count,
)
from mstpolya.simulate import run_mc, simulate_trees
from mstpolya.trees import exact_small_n, urn_tree_consistency
from mstpolya.urn import asymptotic_law, build_matrix_A, certify_u1_sigma, spectral

BUILT_UP_TO_4 = [
    ("protected", 2), ("protected", 3), ("protected", 4),
    ("nodes", 2), ("nodes", 3), ("nodes", 4),
    ("leaves", 3), ("leaves", 4),
    ("one-protected", 2), ("one-protected", 3), ("one-protected", 4),
]


def test_criterion_1_exact_ledger(acceptance_report):
    for f in (ledger._protected, ledger._leaves3, ledger._oneprotected):
        f.cache_clear()
    t0 = time.perf_counter()
    entries = ledger.run_ledger()
    elapsed = time.perf_counter() - t0
    groups = ("binary.", "ternary.", "leaves3.", "oneprotected2.", "oneprotected3.")
    relevant = [e for e in entries if e.id.startswith(groups)]
    failed = [e.id for e in relevant if not e.passed]
    ok = not failed and len(relevant) == 43 and elapsed < 60
    acceptance_report("criterion 1: exact ledger reproduction", ok, f"{len(relevant) - len(failed)}/{len(relevant)} entries exact in {elapsed:.1f}s; failed={failed}")
    assert ok


def test_criterion_2_structural_identities(acceptance_report):
    problems = []
    for model, m in BUILT_UP_TO_4:
        b = build_model(model, m)
        A = build_matrix_A(b.spec)
        if A.rmatvec(b.spec.activities) != tuple(b.spec.activities):
            problems.append(f"a'A != a' for {model} m={m}")
        sd = spectral(b.spec)
        if b.q <= 40:
            law = asymptotic_law(b.spec, sd)
            if not law.exact or any(law.sigma.rmatvec(sd.u1)):
                problems.append(f"u1'Sigma != 0 for {model} m={m}")
        elif not certify_u1_sigma(b.spec, sd):
            problems.append(f"u1'Sigma certificate fails for {model} m={m}")
    for m in (2, 3, 4):
        rep = lemma_root_check(m)
        if not (rep["identity_holds"] and rep["certified"] and rep["all_contained"]):
            problems.append(f"gap map / root containment fails at m={m}")
    for m in range(3, 9):
        if not leaves_char_identity(m):
            problems.append(f"leaves characteristic polynomial fails at m={m}")
    counts = [len(enumerate_types(m)) for m in (2, 3, 4, 10)]
    if counts != [5, 19, 69, 184755] or [type_count(m) for m in (2, 3, 4, 10)] != counts:
        problems.append(f"type counts {counts}")
    acceptance_report("criterion 2: structural identities", not problems, "; ".join(problems) or "all exact")
    assert not problems


def test_criterion_3_spectral_condition(acceptance_report):
    tol = 1e-6
    lam2 = {m: spectral_condition(m)["lambda2_re"] for m in range(3, 31)}
    ok_small = all(lam2[m] < 0.5 - tol for m in range(3, 27))
    ok_large = all(lam2[m] > 0.5 + tol for m in range(27, 31))
    protected = {}
    t0 = time.perf_counter()
    for m in (4, 5, 6):
        vals = rl.numeric_eigen(protected_mean_matrix(m), check=m <= 4)
        k = min(range(len(vals)), key=lambda i: abs(vals[i] - 1))
        protected[m] = max(z.real for i, z in enumerate(vals) if i != k)
    elapsed = time.perf_counter() - t0
    ok_prot = all(v < 0.5 - tol for v in protected.values()) and elapsed < 600
    ok = ok_small and ok_large and ok_prot
    detail = (
        f"Re lambda2(26)={lam2[26]:.6f}, Re lambda2(27)={lam2[27]:.6f}; "
        f"protected max non-Perron Re: " + ", ".join(f"m={m}: {v:.3g}" for m, v in protected.items())
        + f" ({elapsed:.1f}s)"
    )
    acceptance_report("criterion 3: spectral condition", ok, detail)
    assert ok


def test_criterion_4_oracle_equivalence(acceptance_report):
    trials = 10**6
    dists = exact_small_n(2, 7, "two_protected")
    worst = 0.0
    outside = 0
    for n in range(1, 8):
        values = simulate_trees(2, n, trials, seed=2024 + n)[:, 0]
        counts = np.bincount(values)
        for k in range(counts.size):
            p = float(dists[n].pmf.get(k, Fraction(0)))
            if p == 0:
                outside += int(counts[k])
                continue
            sd = math.sqrt(trials * p * (1 - p))
            dev = abs(counts[k] - trials * p)
            worst = max(worst, dev / sd if sd else (math.inf if dev else 0.0))
    assert dists[0].pmf == {0: 1}
    mean3 = dists[3].mean()
    ok = worst <= 4 and outside == 0 and mean3 == Fraction(2, 3)
    acceptance_report("criterion 4: oracle vs Monte Carlo", ok, f"max |dev|/sd = {worst:.2f} over n=1..7 at 1e6 trials; E at n=3 = {mean3}")
    assert ok


def _clt_case(m, statistic, mu, var):
    n, trials = 100_000, 400
    t0 = time.perf_counter()
    res = run_mc("tree", m, n, trials, seed=1, statistics=(statistic,))[statistic]
    elapsed = time.perf_counter() - t0
    dev = abs(res.mean / n - float(mu))
    bound = 4 * math.sqrt(float(var) / n) / math.sqrt(trials)
    ratio = res.variance / n / float(var)
    ok = dev < bound and abs(ratio - 1) < 0.15 and elapsed < 300
    return ok, f"|mean/n - mu| = {dev:.2e} (< {bound:.2e}), Var/n / sigma^2 = {ratio:.3f}, {elapsed:.1f}s"


def test_criterion_5_monte_carlo(acceptance_report):
    cases = [
        (3, "two_protected", Fraction(57, 700), Fraction(1692302314867, 43692253605000)),
        (2, "two_protected", Fraction(11, 30), Fraction(29, 225)),
        (3, "leaves", Fraction(3, 10), Fraction(89, 2100)),
    ]
    all_ok = True
    for m, stat, mu, var in cases:
        ok, detail = _clt_case(m, stat, mu, var)
        acceptance_report(f"criterion 5: Monte Carlo m={m} {stat}", ok, detail)
        all_ok &= ok
    assert all_ok


def test_criterion_6_urn_tree_consistency(acceptance_report):
    bad = []
    for m in (2, 3):
        for seed in range(100):
            rep = urn_tree_consistency(m, 200, seed)
            if not rep.ok:
                bad.append((m, seed, rep.violations[:1]))
    acceptance_report("criterion 6: urn/tree consistency", not bad, f"200 runs, violations in {len(bad)}")
    assert not bad
