"""Generalized Pólya urns: mean matrix, assumption checks, spectra and limit laws.

An urn has ``q`` ball types.  Type ``i`` has an activity ``a_i`` and, when a
ball of that type is drawn (probability proportional to activity), a random
replacement vector whose law is a finite list of :class:`ReplacementOutcome`.
The vector may remove the drawn ball (entry -1 at the drawn index).

The mean matrix is ``A[i, j] = a_j * E delta_j[i]`` (column = drawn type).
Under the usual spectral-gap hypothesis the ball counts satisfy
``(X_n - n mu)/sqrt(n) -> N(0, Sigma)`` and this module computes ``mu`` and
``Sigma`` two ways: from dual eigenbases (diagonalisable ``A`` only) and
from a Lyapunov equation (any ``A``, constant step increment).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from . import ratlinalg as rl
from .errors import (
    AssumptionError,
    CapExceededError,
    DimensionError,
    MethodNotApplicable,
    NotNormalError,
    SpecError,
)
from .ratlinalg import Poly, RatMatrix, as_rational, format_rational

#: Largest type count for which the characteristic polynomial is computed exactly.
EXACT_SPECTRUM_CAP = 100
#: Largest order for the dense exact solve used when the spectrum is not rational.
EXACT_KRONECKER_CAP = 24
#: Margin for numeric comparisons against lambda1/2.
REGIME_MARGIN = 1e-9

NORMAL = "normal"
NOT_NORMAL = "not-normal"
BOUNDARY = "boundary"


# ----------------------------------------------------------------------------
# Specification


@dataclass(frozen=True)
class ReplacementOutcome:
    probability: Fraction
    delta: tuple[int, ...]

    def __post_init__(self):
        p = as_rational(self.probability)
        object.__setattr__(self, "probability", p)
        object.__setattr__(self, "delta", tuple(int(d) for d in self.delta))
        if not (0 < p <= 1):
            raise SpecError(f"outcome probability {p} outside (0, 1]")


@dataclass(frozen=True)
class ReplacementRule:
    drawn: int
    outcomes: tuple[ReplacementOutcome, ...]

    def __post_init__(self):
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        if not self.outcomes:
            raise SpecError(f"rule for type {self.drawn} has no outcomes")
        total = sum((o.probability for o in self.outcomes), Fraction(0))
        if total != 1:
            raise SpecError(f"probabilities for type {self.drawn} sum to {format_rational(total)}, not 1")

    def mean(self) -> tuple[Fraction, ...]:
        return self._mean

    @cached_property
    def _mean(self) -> tuple[Fraction, ...]:
        acc = [Fraction(0)] * len(self.outcomes[0].delta)
        for o in self.outcomes:
            for j, d in enumerate(o.delta):
                if d:
                    acc[j] += o.probability * d
        return tuple(acc)

    def second_moment(self) -> RatMatrix:
        q = len(self.outcomes[0].delta)
        acc = [[Fraction(0)] * q for _ in range(q)]
        for o in self.outcomes:
            nz = [(j, d) for j, d in enumerate(o.delta) if d]
            for i, di in nz:
                for j, dj in nz:
                    acc[i][j] += o.probability * di * dj
        return RatMatrix(acc)


@dataclass(frozen=True)
class UrnSpec:
    """Complete urn definition.

    ``group_sizes`` is optional: when balls come in indivisible groups (for
    instance all the gaps of one tree node) entry ``j`` is the group size of
    type ``j``, and the sign constraints are checked per group rather than
    per ball.  ``step_increment`` may be given explicitly; it is validated
    against the rules either way.
    """

    q: int
    activities: tuple[Fraction, ...]
    rules: tuple[ReplacementRule, ...]
    labels: tuple[str, ...] = ()
    step_increment: Fraction | None = None
    group_sizes: tuple[int, ...] | None = None

    def __post_init__(self):
        q = int(self.q)
        object.__setattr__(self, "q", q)
        if q < 1:
            raise SpecError("an urn needs at least one type")
        acts = tuple(as_rational(a) for a in self.activities)
        object.__setattr__(self, "activities", acts)
        if len(acts) != q:
            raise SpecError(f"{len(acts)} activities for {q} types")
        if any(a < 0 for a in acts):
            raise SpecError("activities must be non-negative")
        labels = tuple(str(x) for x in self.labels) if self.labels else tuple(str(i + 1) for i in range(q))
        if len(labels) != q:
            raise SpecError(f"{len(labels)} labels for {q} types")
        object.__setattr__(self, "labels", labels)
        rules = tuple(sorted(self.rules, key=lambda r: r.drawn))
        object.__setattr__(self, "rules", rules)
        seen = set()
        for r in rules:
            if not 0 <= r.drawn < q:
                raise SpecError(f"rule for unknown type index {r.drawn}")
            if r.drawn in seen:
                raise SpecError(f"duplicate rule for type {r.drawn}")
            seen.add(r.drawn)
            if acts[r.drawn] == 0:
                raise SpecError(f"type {r.drawn} has activity 0 but carries a rule")
            for o in r.outcomes:
                if len(o.delta) != q:
                    raise SpecError(f"outcome of type {r.drawn} has length {len(o.delta)}, expected {q}")
        missing = [i for i in range(q) if acts[i] > 0 and i not in seen]
        if missing:
            raise SpecError(f"types {missing} have positive activity but no rule")
        if self.group_sizes is not None:
            g = tuple(int(x) for x in self.group_sizes)
            if len(g) != q or any(x < 1 for x in g):
                raise SpecError("group sizes must be q positive integers")
            object.__setattr__(self, "group_sizes", g)
        derived = self._derived_increment()
        if self.step_increment is not None:
            s = as_rational(self.step_increment)
            if derived != s:
                raise SpecError(f"declared step increment {s} but a.E(xi_i) is {derived}")
            object.__setattr__(self, "step_increment", s)
        else:
            object.__setattr__(self, "step_increment", derived)

    def _derived_increment(self) -> Fraction | None:
        vals = {rl.dot(self.activities, r.mean()) for r in self.rules}
        if len(vals) == 1:
            s = vals.pop()
            return s if s > 0 else None
        return None

    def rule_for(self, i: int) -> ReplacementRule | None:
        for r in self.rules:
            if r.drawn == i:
                return r
        return None

    @property
    def active_types(self) -> list[int]:
        return [i for i, a in enumerate(self.activities) if a > 0]

    # --- JSON

    def to_dict(self) -> dict:
        d = {
            "q": self.q,
            "activities": [format_rational(a) for a in self.activities],
            "labels": list(self.labels),
            "rules": [
                {
                    "drawn": r.drawn,
                    "outcomes": [{"p": format_rational(o.probability), "delta": list(o.delta)} for o in r.outcomes],
                }
                for r in self.rules
            ],
        }
        if self.group_sizes is not None:
            d["group_sizes"] = list(self.group_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "UrnSpec":
        try:
            rules = tuple(
                ReplacementRule(
                    int(r["drawn"]),
                    tuple(ReplacementOutcome(as_rational(o["p"]), tuple(o["delta"])) for o in r["outcomes"]),
                )
                for r in d["rules"]
            )
            return cls(
                q=int(d["q"]),
                activities=tuple(as_rational(a) for a in d["activities"]),
                rules=rules,
                labels=tuple(d.get("labels") or ()),
                group_sizes=tuple(d["group_sizes"]) if d.get("group_sizes") else None,
            )
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise SpecError(f"malformed urn specification: {exc}") from exc

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "UrnSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def build_matrix_A(spec: UrnSpec) -> RatMatrix:
    """Mean replacement matrix; column j is a_j * E(delta | type j drawn)."""
    q = spec.q
    cols = [[Fraction(0)] * q for _ in range(q)]
    for r in spec.rules:
        a = spec.activities[r.drawn]
        cols[r.drawn] = [a * x if x else x for x in r.mean()]
    return RatMatrix.from_columns(cols)


# ----------------------------------------------------------------------------
# Spectra


class Eigenvalue(NamedTuple):
    value: complex
    exact: Fraction | None = None

    def __repr__(self):
        if self.exact is not None:
            return f"Eigenvalue({format_rational(self.exact)})"
        return f"Eigenvalue({self.value:.12g})"


@dataclass
class SpectralData:
    """Spectrum of the mean matrix with the normalised Perron vectors.

    ``v1`` and ``u1`` are tuples of Fractions when ``exact`` is set and float
    arrays otherwise.  ``char_poly`` is present only when it was computed.
    """

    A: RatMatrix
    activities: tuple
    eigenvalues: list[Eigenvalue]
    lambda1: Fraction | float
    v1: object
    u1: object
    diagonalizable: bool
    exact: bool
    char_poly: Poly | None = None
    dual_bases: tuple | None = None

    @property
    def q(self) -> int:
        return self.A.rows

    def non_perron(self) -> list[Eigenvalue]:
        """All eigenvalues with one copy of lambda1 removed."""
        out = list(self.eigenvalues)
        if self.exact:
            k = next(i for i, e in enumerate(out) if e.exact == self.lambda1)
        else:
            lam = float(self.lambda1)
            k = min(range(len(out)), key=lambda i: abs(out[i].value - lam))
        out.pop(k)
        return out

    def lambda2(self) -> Eigenvalue | None:
        rest = self.non_perron()
        return rest[0] if rest else None

    def v1_float(self) -> np.ndarray:
        return np.array([float(x) for x in self.v1]) if self.exact else np.asarray(self.v1, dtype=float)

    def u1_float(self) -> np.ndarray:
        return np.array([float(x) for x in self.u1]) if self.exact else np.asarray(self.u1, dtype=float)


def _exact_spectrum(A: RatMatrix):
    p = rl.char_poly(A)
    roots, rem = rl.rational_roots(p)
    eig = [Eigenvalue(complex(float(r)), r) for r, k in roots for _ in range(k)]
    if rem.degree >= 1:
        comp = rl.companion(rem)
        eig += [Eigenvalue(z) for z in rl.numeric_eigen(comp, poly=rem, check=False)]
    eig.sort(key=lambda e: (-e.value.real, -e.value.imag))
    return p, roots, rem, eig


def _exact_diagonalizable(A: RatMatrix, roots, rem: Poly) -> bool:
    q = A.rows
    for r, k in roots:
        if k > 1 and q - rl.rank(A.sub_identity(r)) != k:
            return False
    if rem.degree >= 1 and rl.poly_gcd(rem, rem.derivative()).degree >= 1:
        return _squarefree_annihilates(A, roots, rem)
    return True


def _squarefree_annihilates(A: RatMatrix, roots, rem: Poly) -> bool:
    s = rl.squarefree_part(rem)
    for r, _ in roots:
        s = s * Poly([-r, 1])
    return s.eval_matrix(A).is_zero()


def spectral(spec: UrnSpec, precision: str = "auto") -> SpectralData:
    """Eigenvalues, Perron root and normalised Perron vectors of the urn.

    ``precision`` is ``"exact"`` (raise if the type count is beyond the exact
    cap), ``"float"`` or ``"auto"`` (exact when small enough).
    """
    A = build_matrix_A(spec)
    q = spec.q
    a = spec.activities
    if precision not in ("auto", "exact", "float"):
        raise ValueError(f"unknown precision {precision!r}")
    if precision == "exact" and q > EXACT_SPECTRUM_CAP:
        raise CapExceededError(f"exact spectra are limited to {EXACT_SPECTRUM_CAP} types (got {q})")
    use_exact = precision == "exact" or (precision == "auto" and q <= EXACT_SPECTRUM_CAP)
    if use_exact:
        p, roots, rem, eig = _exact_spectrum(A)
        top = eig[0]
        if top.exact is None:
            raise AssumptionError("the eigenvalue of largest real part is not rational; use float precision")
        lam1 = top.exact
        if lam1 <= 0:
            raise AssumptionError(f"largest eigenvalue {format_rational(lam1)} is not positive")
        mult = dict(roots)[lam1]
        others = eig[1:]
        if mult > 1 or (others and others[0].value.real >= float(lam1) - 1e-12 and others[0].exact is None):
            raise AssumptionError(f"largest eigenvalue {format_rational(lam1)} is not simple")
        right = rl.nullspace(A.sub_identity(lam1))
        left = rl.nullspace(A.T.sub_identity(lam1))
        v = right[0]
        av = rl.dot(a, v)
        if av == 0:
            raise AssumptionError("activity vector is orthogonal to the Perron eigenvector")
        v1 = tuple(x / av for x in v)
        u = left[0]
        uv = rl.dot(u, v1)
        u1 = tuple(x / uv for x in u)
        diag = _exact_diagonalizable(A, roots, rem)
        return SpectralData(A, a, eig, lam1, v1, u1, diag, True, p)

    An = A.to_numpy()
    w, vl, vr = scipy.linalg.eig(An, left=True, right=True)
    order = sorted(range(q), key=lambda i: (-w[i].real, -w[i].imag))
    eig = [Eigenvalue(complex(w[i])) for i in order]
    lam = eig[0].value
    if abs(lam.imag) > 1e-9 or lam.real <= 0:
        raise AssumptionError(f"largest eigenvalue {lam} is not real and positive")
    if q > 1 and abs(eig[1].value - lam) < 1e-8 * max(1.0, abs(lam)):
        raise AssumptionError(f"largest eigenvalue {lam.real} appears not to be simple")
    k = order[0]
    an = np.array([float(x) for x in a])
    v = vr[:, k].real
    v1 = v / (an @ v)
    u = vl[:, k].real
    u1 = u / (u @ v1)
    lam1 = lam.real
    # snap to a small rational when the float is clearly one (e.g. 1 for tree urns)
    snapped = Fraction(lam1).limit_denominator(1000)
    if abs(float(snapped) - lam1) < 1e-10:
        lam1 = float(snapped)
    cond = np.linalg.cond(vr)
    diag = bool(np.isfinite(cond) and cond < 1e8)
    return SpectralData(A, a, eig, lam1, v1, u1, diag, False)


def classify_regime(sd: SpectralData) -> str:
    """``normal`` iff every non-Perron eigenvalue has real part below lambda1/2."""
    half = sd.lambda1 / 2
    worst = None
    for e in sd.non_perron():
        if e.exact is not None and sd.exact:
            if e.exact > half:
                return NOT_NORMAL
            if e.exact == half:
                worst = BOUNDARY
            continue
        re = e.value.real
        h = float(half)
        if re > h + REGIME_MARGIN:
            return NOT_NORMAL
        if abs(re - h) <= REGIME_MARGIN:
            worst = BOUNDARY
    return worst or NORMAL


# ----------------------------------------------------------------------------
# Assumption checks


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    detail: str = ""
    witness: object = None


@dataclass
class AssumptionReport:
    checks: list[AssumptionCheck] = field(default_factory=list)
    dominating: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    def raise_if_failed(self):
        bad = self.failures()
        if bad:
            c = bad[0]
            raise AssumptionError(f"{c.name} fails: {c.detail} (witness {c.witness})")

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _group_delta(spec: UrnSpec, drawn: int, delta: Sequence[int]):
    """Outcome expressed in group units (or None when not divisible)."""
    g = spec.group_sizes
    if g is None:
        return tuple(delta)
    if any(d % gj for d, gj in zip(delta, g)):
        return None
    return tuple(d // gj for d, gj in zip(delta, g))


def dominating_types(spec: UrnSpec) -> list[int]:
    """Types from which every other type can appear, by closure over 'may add' edges."""
    q = spec.q
    adds = [set() for _ in range(q)]
    for r in spec.rules:
        for o in r.outcomes:
            adds[r.drawn].update(j for j, d in enumerate(o.delta) if d > 0)
    dom = []
    for i in range(q):
        seen = {i}
        stack = [i]
        while stack:
            k = stack.pop()
            for j in adds[k]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        if len(seen) == q:
            dom.append(i)
    return dom


def check_assumptions(spec: UrnSpec, start: Sequence | None = None, sd: SpectralData | None = None) -> AssumptionReport:
    """Run the seven standing urn assumptions and report each with a witness.

    The start-state condition is only checked when ``start`` is given.
    """
    rep = AssumptionReport()
    q = spec.q
    # A1: sign constraints (per group when group sizes are declared)
    bad = None
    for r in spec.rules:
        for o in r.outcomes:
            d = _group_delta(spec, r.drawn, o.delta)
            if d is None:
                bad = (r.drawn, o.delta, "not a whole number of groups")
                break
            for j, x in enumerate(d):
                if (j != r.drawn and x < 0) or (j == r.drawn and x < -1):
                    bad = (r.drawn, o.delta, j)
                    break
            if bad:
                break
        if bad:
            break
    rep.checks.append(
        AssumptionCheck(
            "A1",
            bad is None,
            "other types never removed, drawn type removed at most once" if bad is None else "sign constraint violated",
            bad,
        )
    )
    rep.checks.append(AssumptionCheck("A2", True, "finite support, second moments finite"))
    if sd is None:
        try:
            sd = spectral(spec)
        except AssumptionError as exc:
            rep.checks.append(AssumptionCheck("A3", False, str(exc)))
            rep.checks.append(AssumptionCheck("A4", False, str(exc)))
            sd = None
    if sd is not None:
        lam = sd.lambda1
        rep.checks.append(AssumptionCheck("A3", lam > 0, f"lambda1 = {lam}", lam))
        second = sd.lambda2()
        simple = second is None or (
            (second.exact != lam) if (sd.exact and second.exact is not None) else abs(second.value - float(lam)) > 1e-8
        )
        rep.checks.append(AssumptionCheck("A4", simple, "lambda1 simple" if simple else "lambda1 repeated", second))
    dom = dominating_types(spec)
    rep.dominating = dom
    active = spec.active_types
    undominated = [i for i in active if i not in dom]
    rep.checks.append(
        AssumptionCheck(
            "dominating",
            not undominated,
            "every type with positive activity is dominating",
            undominated or None,
        )
    )
    if start is not None:
        x0 = list(start)
        if len(x0) != q:
            raise DimensionError(f"start state of length {len(x0)} for {q} types")
        hit = [i for i in dom if x0[i] > 0]
        rep.checks.append(AssumptionCheck("A5", bool(hit), "start holds a dominating ball", hit or None))
    if sd is not None and dom:
        sub = sd.A.submatrix(dom, dom)
        if sd.exact:
            ok = rl.rank(sub.sub_identity(sd.lambda1)) < len(dom)
        else:
            smin = np.linalg.svd(sub.to_numpy() - float(sd.lambda1) * np.eye(len(dom)), compute_uv=False)[-1]
            ok = bool(smin < 1e-8 * max(1.0, np.abs(sub.to_numpy()).sum(axis=1).max()))
        rep.checks.append(AssumptionCheck("A6", ok, "lambda1 is an eigenvalue of the dominating block"))
    elif sd is not None:
        rep.checks.append(AssumptionCheck("A6", False, "no dominating type"))
    # A7: activity never decreases and every active type is dominating, so an
    # active (hence dominating) ball is always present
    worst = None
    for r in spec.rules:
        for o in r.outcomes:
            gain = rl.dot(spec.activities, o.delta)
            if gain < 0 and (worst is None or gain < worst[0]):
                worst = (gain, r.drawn, o.delta)
    ok7 = worst is None and not undominated
    if start is not None:
        ok7 = ok7 and rl.dot(spec.activities, [as_rational(x) for x in start]) > 0
    rep.checks.append(
        AssumptionCheck("A7", ok7, "total activity never decreases" if worst is None else "an outcome lowers total activity", worst)
    )
    return rep


# ----------------------------------------------------------------------------
# Covariance ingredients


def compute_B(spec: UrnSpec, sd: SpectralData):
    """Second-moment matrices ``B_i`` and their Perron-weighted sum ``B``."""
    q = spec.q
    Bi = []
    for i in range(q):
        r = spec.rule_for(i)
        Bi.append(r.second_moment() if r is not None else RatMatrix.zeros(q))
    if sd.exact:
        B = RatMatrix.zeros(q)
        for i in spec.active_types:
            w = sd.v1[i] * spec.activities[i]
            if w:
                B = B + Bi[i].scale(w)
        return Bi, B
    v1 = sd.v1_float()
    B = np.zeros((q, q))
    for i in spec.active_types:
        B += v1[i] * float(spec.activities[i]) * Bi[i].to_numpy()
    return Bi, B


@dataclass
class AsymptoticLaw:
    """Mean rate ``mu`` and covariance ``sigma`` of the normal limit.

    Exact laws hold tuples of Fractions and a :class:`RatMatrix`; float laws
    hold numpy arrays.
    """

    mu: object
    sigma: object
    regime: str
    method: str
    exact: bool
    lambda1: object = 1
    labels: tuple = ()

    @property
    def q(self) -> int:
        return len(self.mu)

    def sigma_float(self) -> np.ndarray:
        return self.sigma.to_numpy() if self.exact else np.asarray(self.sigma, dtype=float)

    def mu_float(self) -> np.ndarray:
        return np.array([float(x) for x in self.mu])

    def to_dict(self) -> dict:
        if self.exact:
            mu = [format_rational(x) for x in self.mu]
            sigma = self.sigma.to_strings()
            lam = format_rational(self.lambda1)
        else:
            mu = [float(x) for x in self.mu]
            sigma = [[float(x) for x in row] for row in np.asarray(self.sigma)]
            lam = float(self.lambda1)
        return {
            "mu": mu,
            "sigma": sigma,
            "regime": self.regime,
            "method": self.method,
            "exact": self.exact,
            "lambda1": lam,
            "labels": list(self.labels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AsymptoticLaw":
        if d["exact"]:
            mu = tuple(as_rational(x) for x in d["mu"])
            sigma = RatMatrix(d["sigma"])
            lam = as_rational(d["lambda1"])
        else:
            mu = np.array(d["mu"], dtype=float)
            sigma = np.array(d["sigma"], dtype=float)
            lam = float(d["lambda1"])
        return cls(mu, sigma, d["regime"], d["method"], bool(d["exact"]), lam, tuple(d.get("labels", ())))


def _require_normal(sd: SpectralData) -> str:
    regime = classify_regime(sd)
    if regime != NORMAL:
        lam2 = sd.lambda2()
        raise NotNormalError(
            f"regime is {regime}: an eigenvalue ({lam2.value:.6g}) has real part >= lambda1/2", regime=regime
        )
    return regime


def _mu(sd: SpectralData):
    if sd.exact:
        return tuple(sd.lambda1 * x for x in sd.v1)
    return float(sd.lambda1) * sd.v1_float()


def _exact_dual_bases(sd: SpectralData):
    """Dual left/right eigenbases over Q for a diagonalisable rational spectrum."""
    A = sd.A
    distinct = []
    for e in sd.eigenvalues:
        if e.exact not in distinct:
            distinct.append(e.exact)
    pairs = []
    for lam in distinct:
        V = rl.nullspace(A.sub_identity(lam))
        U = rl.nullspace(A.T.sub_identity(lam))
        G = RatMatrix([[rl.dot(u, v) for v in V] for u in U])  # G[i][j] = u_i . v_j
        Ginv = rl.inverse(G)
        k = len(V)
        # new u_j = sum_i U_i * Ginv[j][i]  gives  u_j . v_l = (Ginv G)[j][l] = delta
        for j in range(k):
            u = tuple(sum((Ginv[j, i] * U[i][t] for i in range(k)), Fraction(0)) for t in range(A.rows))
            pairs.append((lam, u, V[j]))
    return pairs


def asymptotics_dual_basis(spec: UrnSpec, sd: SpectralData, exact: bool | None = None) -> AsymptoticLaw:
    """Covariance from dual eigenbases; needs a diagonalisable mean matrix."""
    if not sd.diagonalizable:
        raise MethodNotApplicable("mean matrix is not diagonalisable; use the Lyapunov route")
    regime = _require_normal(sd)
    rational = sd.exact and all(e.exact is not None for e in sd.eigenvalues)
    if exact is None:
        exact = rational
    if exact and not rational:
        raise MethodNotApplicable("exact dual bases need a rational spectrum")
    _, B = compute_B(spec, sd)
    lam1 = sd.lambda1
    q = spec.q
    if exact:
        pairs = _exact_dual_bases(sd)
        # drop one pair belonging to lambda1 (the Perron direction)
        k1 = next(i for i, p in enumerate(pairs) if p[0] == lam1)
        pairs.pop(k1)
        BU = [B @ u for _, u, _ in pairs]
        acc = [[Fraction(0)] * q for _ in range(q)]
        for j, (lj, uj, vj) in enumerate(pairs):
            for k, (lk, uk, vk) in enumerate(pairs):
                num = rl.dot(uj, BU[k])
                if not num:
                    continue
                c = num / (lam1 - lj - lk)
                for r in range(q):
                    if vj[r]:
                        cr = c * vj[r]
                        row = acc[r]
                        for t in range(q):
                            if vk[t]:
                                row[t] += cr * vk[t]
        sigma = RatMatrix(acc)
        return AsymptoticLaw(_mu(sd), sigma, regime, "dual-basis", True, lam1, spec.labels)
    An = sd.A.to_numpy()
    w, V = np.linalg.eig(An)
    U = np.linalg.inv(V)  # rows are left eigenvectors, dual to the columns of V
    k1 = int(np.argmin(np.abs(w - float(lam1))))
    keep = [i for i in range(q) if i != k1]
    Bn = B.to_numpy() if isinstance(B, RatMatrix) else B
    Uk = U[keep]
    Vk = V[:, keep]
    wk = w[keep]
    K = (Uk @ Bn @ Uk.T) / (float(lam1) - wk[:, None] - wk[None, :])
    S = Vk @ K @ Vk.T
    scale = max(np.abs(S).max(), 1.0)
    if np.abs(S.imag).max() > 1e-9 * scale:
        raise ArithmeticError("dual-basis covariance has a non-negligible imaginary part")
    S = S.real
    return AsymptoticLaw(_mu(sd), 0.5 * (S + S.T), regime, "dual-basis", False, lam1, spec.labels)


def projection_PI(sd: SpectralData):
    if sd.exact:
        return RatMatrix.identity(sd.q) - RatMatrix.outer(sd.v1, sd.u1)
    return np.eye(sd.q) - np.outer(sd.v1_float(), sd.u1_float())


def asymptotics_integral(spec: UrnSpec, sd: SpectralData, exact: bool | None = None) -> AsymptoticLaw:
    """Covariance as ``s`` times the Perron-deflated Lyapunov solution.

    With ``M = A - lambda1 v1 u1'`` and ``F = M - lambda1/2 I`` the matrix
    ``X`` solving ``F X + X F' = -P B P'`` (``P = I - v1 u1'``) equals the
    integral of ``P e^{tA} B e^{tA'} P' e^{-lambda1 t}`` over ``t >= 0``,
    because ``e^{tM} P = e^{tA} P`` and ``F`` is stable.
    """
    s = spec.step_increment
    if s is None:
        raise MethodNotApplicable("a.E(xi_i) is not the same positive constant for every active type")
    regime = _require_normal(sd)
    q = spec.q
    rational = sd.exact and all(e.exact is not None for e in sd.eigenvalues)
    if exact is None:
        exact = sd.exact and q <= rl.EXACT_LYAPUNOV_CAP and (rational or q <= EXACT_KRONECKER_CAP)
    if exact:
        if not sd.exact:
            raise MethodNotApplicable("exact Lyapunov route needs exact Perron vectors")
        if q > rl.EXACT_LYAPUNOV_CAP or (not rational and q > EXACT_KRONECKER_CAP):
            raise CapExceededError(f"exact Lyapunov solve not available for {q} types with this spectrum")
    _, B = compute_B(spec, sd)
    P = projection_PI(sd)
    if exact:
        lam1 = sd.lambda1
        M = sd.A - RatMatrix.outer(sd.v1, sd.u1).scale(lam1)
        F = M.sub_identity(lam1 / 2)
        C = P @ B @ P.T
        X = rl.solve_lyapunov(F, C, exact=True)
        return AsymptoticLaw(_mu(sd), X.scale(s), regime, "lyapunov", True, lam1, spec.labels)
    lam1 = float(sd.lambda1)
    v1, u1 = sd.v1_float(), sd.u1_float()
    An = sd.A.to_numpy()
    F = An - lam1 * np.outer(v1, u1) - 0.5 * lam1 * np.eye(q)
    Bn = B.to_numpy() if isinstance(B, RatMatrix) else np.asarray(B)
    Pn = P.to_numpy() if isinstance(P, RatMatrix) else P
    C = Pn @ Bn @ Pn.T
    X = rl.solve_lyapunov(F, C, exact=False)
    return AsymptoticLaw(_mu(sd), float(s) * X, regime, "lyapunov", False, sd.lambda1, spec.labels)


def certify_u1_sigma(spec: UrnSpec, sd: SpectralData) -> bool:
    """Exact proof that ``u1' Sigma = 0`` without solving for ``Sigma``.

    With ``y = X' u1`` the Lyapunov equation gives ``(F - lambda1/2 I) y = -C u1``.
    So ``u1' C = 0``, ``u1' F = -lambda1/2 u1'`` and a nonsingular
    ``F - lambda1/2 I`` force ``y = 0``.  Needs exact spectral data; costs a
    few rational matrix products and one rank.
    """
    if not sd.exact:
        raise MethodNotApplicable("the certificate needs exact Perron vectors")
    lam1 = sd.lambda1
    _, B = compute_B(spec, sd)
    P = projection_PI(sd)
    C = P @ B @ P.T
    F = (sd.A - RatMatrix.outer(sd.v1, sd.u1).scale(lam1)).sub_identity(lam1 / 2)
    u1 = sd.u1
    if any(C.rmatvec(u1)):
        return False
    if F.rmatvec(u1) != tuple(-lam1 / 2 * x for x in u1):
        return False
    return rl.rank(F.sub_identity(lam1 / 2)) == spec.q


def asymptotic_law(spec: UrnSpec, sd: SpectralData | None = None, precision: str = "auto") -> AsymptoticLaw:
    """Preferred route: the Lyapunov solve, falling back to dual bases when the increment varies."""
    if sd is None:
        sd = spectral(spec, precision=precision)
    exact = None if precision == "auto" else precision == "exact"
    if spec.step_increment is not None:
        return asymptotics_integral(spec, sd, exact=exact)
    return asymptotics_dual_basis(spec, sd, exact=exact)


def functional_law(law: AsymptoticLaw, c: Sequence):
    """Mean rate ``c.mu`` and variance rate ``c' Sigma c`` of a linear functional."""
    if len(c) != law.q:
        raise DimensionError(f"functional of length {len(c)} for a {law.q}-type law")
    if law.exact:
        try:
            cv = [as_rational(x) for x in c]
        except TypeError:
            cv = None
        if cv is not None:
            mean = rl.dot(cv, law.mu)
            var = rl.dot(cv, law.sigma @ cv)
            return mean, var
    cf = np.array([float(x) for x in c])
    return float(cf @ law.mu_float()), float(cf @ law.sigma_float() @ cf)
