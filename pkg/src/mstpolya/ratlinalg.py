"""Exact rational linear algebra plus a thin float layer.

Rationals are :class:`fractions.Fraction` (always reduced, positive
denominator).  :class:`RatMatrix` is a small immutable dense matrix over
them; :class:`Poly` holds polynomials with rational coefficients in
ascending order.  The float side (numeric spectra, Lyapunov solves for large
systems) goes through numpy/scipy.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational as _RationalABC
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DimensionError, DomainError, SingularLyapunovError

Rational = Fraction

#: Largest order for which the exact Lyapunov path is attempted.
EXACT_LYAPUNOV_CAP = 40
#: Above this degree the polish runs on the characteristic polynomial itself.
SQUAREFREE_POLISH_CAP = 200

_ZERO = Fraction(0)
_ONE = Fraction(1)


def as_rational(x) -> Fraction:
    """Coerce ints, Fractions and ``"p/q"`` strings; floats are rejected."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("refusing to treat a bool as a rational")
    if isinstance(x, (int, _RationalABC)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, np.integer):
        return Fraction(int(x))
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


def format_rational(x: Fraction) -> str:
    x = as_rational(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def dot(u: Sequence, v: Sequence):
    if len(u) != len(v):
        raise DimensionError(f"dot product of lengths {len(u)} and {len(v)}")
    return sum((a * b for a, b in zip(u, v) if a and b), _ZERO)


class RatMatrix:
    """Immutable dense matrix of Fractions, stored row-major."""

    __slots__ = ("_rows", "rows", "cols")

    def __init__(self, rows: Iterable[Iterable]):
        data = tuple(tuple(as_rational(x) for x in r) for r in rows)
        if not data or not data[0]:
            raise DimensionError("a RatMatrix needs at least one row and one column")
        width = len(data[0])
        if any(len(r) != width for r in data):
            raise DimensionError("ragged rows")
        self._rows = data
        self.rows = len(data)
        self.cols = width

    @classmethod
    def _trusted(cls, rows):
        # rows already tuples of Fractions
        obj = cls.__new__(cls)
        obj._rows = rows
        obj.rows = len(rows)
        obj.cols = len(rows[0])
        return obj

    @classmethod
    def zeros(cls, rows: int, cols: int | None = None) -> "RatMatrix":
        cols = rows if cols is None else cols
        return cls._trusted(tuple((_ZERO,) * cols for _ in range(rows)))

    @classmethod
    def identity(cls, n: int) -> "RatMatrix":
        return cls._trusted(tuple(tuple(_ONE if i == j else _ZERO for j in range(n)) for i in range(n)))

    @classmethod
    def diag(cls, entries: Sequence) -> "RatMatrix":
        n = len(entries)
        vals = [as_rational(e) for e in entries]
        return cls._trusted(tuple(tuple(vals[i] if i == j else _ZERO for j in range(n)) for i in range(n)))

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence]) -> "RatMatrix":
        return cls(zip(*columns))

    @classmethod
    def outer(cls, u: Sequence, v: Sequence) -> "RatMatrix":
        u = [as_rational(x) for x in u]
        v = [as_rational(x) for x in v]
        return cls._trusted(tuple(tuple(a * b for b in v) for a in u))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def __getitem__(self, idx):
        i, j = idx
        return self._rows[i][j]

    def row(self, i: int) -> tuple:
        return self._rows[i]

    def col(self, j: int) -> tuple:
        return tuple(r[j] for r in self._rows)

    def __iter__(self):
        return iter(self._rows)

    def tolist(self) -> list[list[Fraction]]:
        return [list(r) for r in self._rows]

    @property
    def T(self) -> "RatMatrix":
        return RatMatrix._trusted(tuple(zip(*self._rows)))

    def _check_same_shape(self, other):
        if self.shape != other.shape:
            raise DimensionError(f"shape mismatch {self.shape} vs {other.shape}")

    def __add__(self, other: "RatMatrix") -> "RatMatrix":
        self._check_same_shape(other)
        return RatMatrix._trusted(tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self._rows, other._rows)))

    def __sub__(self, other: "RatMatrix") -> "RatMatrix":
        self._check_same_shape(other)
        return RatMatrix._trusted(tuple(tuple(a - b for a, b in zip(r, s)) for r, s in zip(self._rows, other._rows)))

    def __neg__(self) -> "RatMatrix":
        return RatMatrix._trusted(tuple(tuple(-a for a in r) for r in self._rows))

    def scale(self, c) -> "RatMatrix":
        c = as_rational(c)
        return RatMatrix._trusted(tuple(tuple(c * a for a in r) for r in self._rows))

    def __mul__(self, c):
        if isinstance(c, RatMatrix):
            raise TypeError("use @ for matrix products")
        return self.scale(c)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, RatMatrix):
            if self.cols != other.rows:
                raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
            cols = tuple(zip(*other._rows))
            out = []
            for r in self._rows:
                nz = [(k, a) for k, a in enumerate(r) if a]
                out.append(tuple(sum((a * c[k] for k, a in nz if c[k]), _ZERO) for c in cols))
            return RatMatrix._trusted(tuple(out))
        vec = [as_rational(x) for x in other]
        if len(vec) != self.cols:
            raise DimensionError(f"cannot multiply {self.shape} by a vector of length {len(vec)}")
        return tuple(dot(r, vec) for r in self._rows)

    def rmatvec(self, vec: Sequence) -> tuple:
        """Row vector times matrix, ``vec' M``."""
        return self.T @ vec

    def sub_identity(self, lam) -> "RatMatrix":
        """``M - lam*I``."""
        lam = as_rational(lam)
        return RatMatrix._trusted(
            tuple(tuple(a - lam if i == j else a for j, a in enumerate(r)) for i, r in enumerate(self._rows))
        )

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> "RatMatrix":
        return RatMatrix._trusted(tuple(tuple(self._rows[i][j] for j in cols) for i in rows))

    def permuted(self, order: Sequence[int]) -> "RatMatrix":
        """Symmetric permutation: entry (i, j) of the result is entry (order[i], order[j])."""
        return self.submatrix(order, order)

    def is_zero(self) -> bool:
        return not any(a for r in self._rows for a in r)

    def is_symmetric(self) -> bool:
        return self.is_square and all(self._rows[i][j] == self._rows[j][i] for i in range(self.rows) for j in range(i))

    def is_integer(self) -> bool:
        return all(a.denominator == 1 for r in self._rows for a in r)

    def trace(self) -> Fraction:
        return sum((self._rows[i][i] for i in range(min(self.shape))), _ZERO)

    def norm_inf(self) -> Fraction:
        return max(sum(abs(a) for a in r) for r in self._rows)

    def to_numpy(self) -> np.ndarray:
        return np.array([[float(a) for a in r] for r in self._rows], dtype=float)

    def to_strings(self) -> list[list[str]]:
        return [[format_rational(a) for a in r] for r in self._rows]

    def __eq__(self, other):
        if not isinstance(other, RatMatrix):
            return NotImplemented
        return self._rows == other._rows

    def __hash__(self):
        return hash(self._rows)

    def __repr__(self):
        body = "; ".join(" ".join(format_rational(a) for a in r) for r in self._rows[:6])
        more = " ..." if self.rows > 6 else ""
        return f"RatMatrix({self.rows}x{self.cols}: [{body}{more}])"


# ----------------------------------------------------------------------------
# Polynomials


class Poly:
    """Polynomial with Fraction coefficients, lowest degree first."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        c = [as_rational(x) for x in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.coeffs = tuple(c)

    @classmethod
    def from_roots(cls, roots: Iterable) -> "Poly":
        p = cls([1])
        for r in roots:
            p = p * cls([-as_rational(r), 1])
        return p

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def leading(self) -> Fraction:
        return self.coeffs[-1] if self.coeffs else _ZERO

    def monic(self) -> "Poly":
        return Poly(c / self.leading for c in self.coeffs)

    def __call__(self, x):
        acc = 0 * x
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def eval_complex_exact(self, re: Fraction, im: Fraction) -> tuple[Fraction, Fraction]:
        """Horner evaluation at re + i*im in exact rational complex arithmetic."""
        ar, ai = _ZERO, _ZERO
        for c in reversed(self.coeffs):
            ar, ai = ar * re - ai * im + c, ar * im + ai * re
        return ar, ai

    def eval_matrix(self, M: RatMatrix) -> RatMatrix:
        if not M.is_square:
            raise DimensionError("polynomial of a non-square matrix")
        n = M.rows
        acc = RatMatrix.zeros(n)
        for c in reversed(self.coeffs):
            acc = (acc @ M) + RatMatrix.identity(n).scale(c)
        return acc

    def derivative(self) -> "Poly":
        return Poly(i * c for i, c in enumerate(self.coeffs) if i)

    def reflect(self) -> "Poly":
        """p(-x)."""
        return Poly(c if i % 2 == 0 else -c for i, c in enumerate(self.coeffs))

    def __add__(self, other: "Poly") -> "Poly":
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (_ZERO,) * (n - len(self.coeffs))
        b = other.coeffs + (_ZERO,) * (n - len(other.coeffs))
        return Poly(x + y for x, y in zip(a, b))

    def __neg__(self) -> "Poly":
        return Poly(-c for c in self.coeffs)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            c = as_rational(other)
            return Poly(c * x for x in self.coeffs)
        if self.is_zero() or other.is_zero():
            return Poly()
        out = [_ZERO] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Poly":
        out = Poly([1])
        for _ in range(k):
            out = out * self
        return out

    def __divmod__(self, other: "Poly") -> tuple["Poly", "Poly"]:
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dq = other.degree
        lead = other.leading
        quot = [_ZERO] * max(len(rem) - dq, 1)
        for k in range(len(rem) - 1 - dq, -1, -1):
            c = rem[k + dq] / lead
            quot[k] = c
            if c:
                for j, b in enumerate(other.coeffs):
                    rem[k + j] -= c * b
        return Poly(quot), Poly(rem[:dq] if dq > 0 else [])

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def __mod__(self, other):
        return divmod(self, other)[1]

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.coeffs == other.coeffs
        return NotImplemented

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        if not self.coeffs:
            return "Poly(0)"
        terms = []
        for i in range(self.degree, -1, -1):
            c = self.coeffs[i]
            if c:
                terms.append(f"{format_rational(c)}*x^{i}" if i else format_rational(c))
        return "Poly(" + " + ".join(terms) + ")"


def poly_gcd(p: Poly, q: Poly) -> Poly:
    """Monic gcd over Q (zero if both inputs are zero)."""
    a, b = p, q
    while not b.is_zero():
        a, b = b, a % b
    return a.monic() if not a.is_zero() else a


def squarefree_part(p: Poly) -> Poly:
    g = poly_gcd(p, p.derivative())
    return (p // g).monic()


# ----------------------------------------------------------------------------
# Characteristic polynomial (Berkowitz)


def char_poly(M: RatMatrix) -> Poly:
    """det(x I - M) by the division-free Berkowitz recursion.

    Integer matrices are processed in Python ints, everything else in
    Fractions; either way the result is exact and monic.
    """
    if not M.is_square:
        raise DimensionError(f"characteristic polynomial of a {M.rows}x{M.cols} matrix")
    n = M.rows
    if M.is_integer():
        a = [[int(x) for x in r] for r in M]
        one = 1
    else:
        a = [list(r) for r in M]
        one = _ONE
    # vec: descending coefficients of the char poly of the trailing principal block
    vec = [one, -a[n - 1][n - 1]]
    for i in range(n - 2, -1, -1):
        k = n - 1 - i  # size of the trailing block a[i+1:, i+1:]
        row = a[i][i + 1:]
        col = [a[r][i] for r in range(i + 1, n)]
        toeplitz = [one, -a[i][i]]
        w = col
        for _ in range(k):
            toeplitz.append(-sum(x * y for x, y in zip(row, w)))
            w = [sum(a[i + 1 + r][i + 1 + c] * w[c] for c in range(k) if w[c]) for r in range(k)]
        # toeplitz has k+2 entries; new vec (length k+2) = T (k+2 x k+1) @ vec
        vec = [sum(toeplitz[r - c] * vec[c] for c in range(min(r, k) + 1)) for r in range(k + 2)]
    return Poly(reversed(vec))


# ----------------------------------------------------------------------------
# Rational roots


def _is_root(ints: list[int], r: Fraction) -> bool:
    d = len(ints) - 1
    num, den = r.numerator, r.denominator
    acc = 0
    for i, c in enumerate(ints):
        acc += c * num**i * den ** (d - i)
    return acc == 0


def _convergents(x: Fraction, qmax: int):
    """Continued-fraction convergents of ``x`` with denominators up to ``qmax``."""
    h0, h1, k0, k1 = 0, 1, 1, 0
    a_num, a_den = x.numerator, x.denominator
    while a_den:
        t, r = divmod(a_num, a_den)
        h0, h1 = h1, t * h1 + h0
        k0, k1 = k1, t * k1 + k0
        if k1 > qmax:
            break
        yield Fraction(h1, k1)
        a_num, a_den = a_den, r


def _small_divisors(n: int, limit: int = 64) -> list[int]:
    n = abs(n)
    return [d for d in range(1, min(n, limit) + 1) if n % d == 0]


def _rational_candidates(ints: list[int]) -> set[Fraction]:
    """Rational numbers near the numeric roots whose denominators divide the leading coefficient."""
    lead = ints[-1]
    coeffs = [float(c) for c in reversed(ints)]
    if not all(math.isfinite(c) for c in coeffs):
        scale = max(abs(c) for c in ints)
        coeffs = [float(Fraction(c, scale)) for c in reversed(ints)]
    approx = np.roots(coeffs)
    out = set()
    for z in approx:
        if not np.isfinite(z) or abs(z.imag) > 1e-3 * (1 + abs(z)):
            continue
        x = Fraction(float(z.real))
        for c in _convergents(x, 10**6):
            if lead % c.denominator == 0:
                out.add(c)
        for q in _small_divisors(lead):
            base = round(float(z.real) * q)
            for num in (base - 1, base, base + 1):
                out.add(Fraction(num, q))
    return out


def rational_roots(p: Poly) -> tuple[list[tuple[Fraction, int]], Poly]:
    """All rational roots of ``p`` with multiplicities, and the deflated remainder.

    Zero roots are stripped first.  For the rest, candidates p/q (q dividing
    the leading coefficient of the cleared integer polynomial) are taken near
    the numeric roots of the squarefree part, where every root is simple and
    therefore located accurately.  Each candidate is confirmed exactly and
    deflated as often as it divides.  Roots are returned in descending order.
    """
    if p.is_zero():
        raise DomainError("the zero polynomial has every number as a root")
    rem = p
    found: dict[Fraction, int] = {}
    while rem.degree >= 1 and rem.coeffs[0] == 0:
        rem = Poly(rem.coeffs[1:])
        found[_ZERO] = found.get(_ZERO, 0) + 1
    if rem.degree >= 1:
        sq = squarefree_part(rem)
        den = math.lcm(*(c.denominator for c in sq.coeffs))
        ints = [int(c * den) for c in sq.coeffs]
        g = math.gcd(*ints)
        ints = [x // g for x in ints]
        c0 = ints[0]
        cands = sorted(
            (r for r in _rational_candidates(ints) if r and c0 % r.numerator == 0 and _is_root(ints, r)),
            reverse=True,
        )
        for r in cands:
            lin = Poly([-r, 1])
            while rem.degree >= 1:
                quot, rest = divmod(rem, lin)
                if not rest.is_zero():
                    break
                rem = quot
                found[r] = found.get(r, 0) + 1
    roots = sorted(found.items(), key=lambda t: t[0], reverse=True)
    return roots, rem


# ----------------------------------------------------------------------------
# Elimination


def rref(M: RatMatrix) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form and pivot columns."""
    a = [list(r) for r in M]
    rows, cols = M.rows, M.cols
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = next((i for i in range(r, rows) if a[i][c]), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        piv = a[r][c]
        if piv != 1:
            a[r] = [x / piv for x in a[r]]
        prow = a[r]
        nz = [j for j in range(c, cols) if prow[j]]
        for i in range(rows):
            if i != r:
                f = a[i][c]
                if f:
                    ai = a[i]
                    for j in nz:
                        ai[j] -= f * prow[j]
        pivots.append(c)
        r += 1
    return a, pivots


def rank(M: RatMatrix) -> int:
    return len(rref(M)[1])


def nullspace(M: RatMatrix) -> list[tuple[Fraction, ...]]:
    """Exact basis of {x : Mx = 0}, one vector per free column (empty iff injective)."""
    red, pivots = rref(M)
    pivset = set(pivots)
    basis = []
    for f in range(M.cols):
        if f in pivset:
            continue
        v = [_ZERO] * M.cols
        v[f] = _ONE
        for i, pc in enumerate(pivots):
            v[pc] = -red[i][f]
        basis.append(tuple(v))
    return basis


def solve(M: RatMatrix, rhs: RatMatrix) -> RatMatrix:
    """Exact solution of M X = rhs for square invertible M."""
    if not M.is_square or M.rows != rhs.rows:
        raise DimensionError(f"cannot solve {M.shape} system with rhs {rhs.shape}")
    n = M.rows
    aug = RatMatrix._trusted(tuple(r + s for r, s in zip(M._rows, rhs._rows)))
    red, pivots = rref(aug)
    if pivots[:n] != list(range(n)):
        raise ZeroDivisionError("singular matrix")
    return RatMatrix._trusted(tuple(tuple(red[i][n:]) for i in range(n)))


def inverse(M: RatMatrix) -> RatMatrix:
    return solve(M, RatMatrix.identity(M.rows))


# ----------------------------------------------------------------------------
# Numeric spectra


def sort_eigenvalues(vals: Iterable[complex]) -> list[complex]:
    return sorted(vals, key=lambda z: (-z.real, -z.imag))


def _dyadic(x: float) -> tuple[int, int]:
    """(numerator, exponent) with x = numerator / 2**exponent."""
    f = Fraction(x)
    return f.numerator, f.denominator.bit_length() - 1


def _int_horner(ints: list[int], re: float, im: float) -> tuple[int, int, int]:
    """Scaled exact value of an integer polynomial at re + i*im.

    Returns (R, I, D) with p(z) = (R + iI) / D**deg, where D is a power of two.
    """
    xr, er = _dyadic(re)
    xi, ei = _dyadic(im)
    e = max(er, ei)
    xr <<= e - er
    xi <<= e - ei
    D = 1 << e
    ar, ai = 0, 0
    scale = 1
    for c in reversed(ints):
        ar, ai = ar * xr - ai * xi + c * scale, ar * xi + ai * xr
        scale *= D
    return ar, ai, D


def _newton_step(z: complex, ints: list[int], dints: list[int]) -> complex:
    d = len(ints) - 1
    pr, pi_, D = _int_horner(ints, z.real, z.imag)
    dr, di, _ = _int_horner(dints, z.real, z.imag)
    den = dr * dr + di * di
    if not den:
        return z
    # p/p' = (pr + i pi) / ((dr + i di) * D)
    step = complex(Fraction(pr * dr + pi_ * di, den * D), Fraction(pi_ * dr - pr * di, den * D))
    new = z - step
    if not (math.isfinite(new.real) and math.isfinite(new.imag)):
        return z
    nr, ni, Dn = _int_horner(ints, new.real, new.imag)
    # compare |p(new)|^2 < |p(z)|^2 exactly
    if (nr * nr + ni * ni) * D ** (2 * d) < (pr * pr + pi_ * pi_) * Dn ** (2 * d):
        return new
    return z


def _newton_polish(z: complex, ints: list[int], dints: list[int], max_steps: int = 60) -> complex:
    """Newton iterations on an integer polynomial while |p| strictly decreases.

    The start is returned unchanged if the iterate wanders further than
    1e-2 * max(1, |z|) from it: then it has found a different root.
    """
    start = z
    for _ in range(max_steps):
        new = _newton_step(z, ints, dints)
        if new == z:
            break
        z = new
    if abs(z - start) > 1e-2 * max(1.0, abs(start)):
        return start
    return z


def companion(p: Poly) -> np.ndarray:
    """Float companion matrix of a polynomial of degree >= 1."""
    c = [float(x / p.leading) for x in p.coeffs]
    d = p.degree
    M = np.zeros((d, d))
    M[1:, :-1] = np.eye(d - 1)
    M[:, -1] = [-x for x in c[:-1]]
    return M


def numeric_eigen(M, poly: Poly | None = None, check: bool | None = None) -> list[complex]:
    """All eigenvalues of a real square matrix, sorted by (-Re, -Im).

    LAPACK's Hessenberg + shifted-QR driver does the work.  When the exact
    characteristic polynomial ``poly`` is supplied every root is refined by
    Newton steps on its squarefree part (evaluated exactly, each step kept
    only if it lowers the residual), which also recovers the accuracy lost
    at defective eigenvalues.  With ``check`` (default for
    orders up to 150) each eigenvalue is verified to satisfy
    sigma_min(M - lam I) <= 1e-8 * ||M||_inf.
    """
    A = M.to_numpy() if isinstance(M, RatMatrix) else np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"eigenvalues of a non-square array of shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    n = A.shape[0]
    try:
        vals = scipy.linalg.eigvals(A, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"QR iteration failed to converge on a {n}x{n} matrix") from exc
    if not np.all(np.isfinite(vals)):
        raise ConvergenceError(f"non-finite eigenvalues for a {n}x{n} matrix")
    out = []
    if poly is not None:
        if poly.degree != n:
            raise DimensionError(f"polynomial of degree {poly.degree} for a {n}x{n} matrix")
        sf = squarefree_part(poly) if poly.degree <= SQUAREFREE_POLISH_CAP else poly
        den = math.lcm(*(c.denominator for c in sf.coeffs))
        ints = [int(c * den) for c in sf.coeffs]
        dints = [i * c for i, c in enumerate(ints) if i]
    for z in vals:
        z = complex(z)
        if z.imag < 0:
            continue
        paired = z.imag > 0
        if poly is not None:
            z = _newton_polish(z, ints, dints)
            if abs(z.imag) <= 1e-13 * max(1.0, abs(z.real)):
                z = complex(z.real, 0.0)
        out.append(z)
        if paired:
            out.append(z.conjugate())
    # real eigenvalues reported with tiny negative imaginary parts are not expected from a real
    # LAPACK driver, but keep the count honest
    if len(out) != n:
        out = [complex(z) for z in vals]
    out = sort_eigenvalues(out)
    if check is None:
        check = n <= 150
    if check:
        tol = 1e-8 * max(np.abs(A).sum(axis=1).max(), 1.0)
        eye = np.eye(n)
        for z in out:
            smin = np.linalg.svd(A - z * eye, compute_uv=False)[-1]
            if smin > tol:
                raise ConvergenceError(
                    f"eigenvalue {z} of a {n}x{n} matrix fails the residual check ({smin:.3g} > {tol:.3g})"
                )
    return out


# ----------------------------------------------------------------------------
# Lyapunov equations  F X + X F' = -C


def _kron_lyapunov(F: RatMatrix, C: RatMatrix) -> RatMatrix:
    """Solve the symmetric Lyapunov equation as a dense linear system in the upper triangle."""
    n = F.rows
    idx = {}
    for i in range(n):
        for j in range(i, n):
            idx[(i, j)] = len(idx)
    N = len(idx)
    rows = []
    for (i, j), e in idx.items():
        coeffs = [_ZERO] * N
        # (F X)_ij = sum_k F_ik X_kj ; (X F')_ij = sum_k X_ik F_jk
        for k in range(n):
            f = F[i, k]
            if f:
                coeffs[idx[(min(k, j), max(k, j))]] += f
            f = F[j, k]
            if f:
                coeffs[idx[(min(i, k), max(i, k))]] += f
        rows.append(coeffs)
    rhs = RatMatrix._trusted(tuple((-C[i, j],) for (i, j) in idx))
    sol = solve(RatMatrix._trusted(tuple(tuple(r) for r in rows)), rhs)
    X = [[_ZERO] * n for _ in range(n)]
    for (i, j), e in idx.items():
        X[i][j] = X[j][i] = sol[e, 0]
    return RatMatrix._trusted(tuple(tuple(r) for r in X))


def _rational_triangularize(F: RatMatrix, eigenvalues: list[Fraction]):
    """Rational S with S^-1 F S upper triangular, for a matrix whose spectrum is rational.

    Returns (T, S, S_inv).  Each step finds an eigenvector of the trailing
    block and moves it to the front with an elementary change of basis.
    """
    n = F.rows
    T = [list(r) for r in F]
    S = [[_ONE if i == j else _ZERO for j in range(n)] for i in range(n)]
    Sinv = [row[:] for row in S]
    remaining = list(eigenvalues)
    for k in range(n - 1):
        block = RatMatrix._trusted(tuple(tuple(T[i][k:]) for i in range(k, n)))
        x = None
        for pos, lam in enumerate(remaining):
            ns = nullspace(block.sub_identity(lam))
            if ns:
                x = ns[0]
                remaining.pop(pos)
                break
        if x is None:
            raise ArithmeticError("eigenvalue list does not match the matrix")
        p = next(i for i, v in enumerate(x) if v)
        xp = x[p]
        m = n - k
        order = [p] + [j for j in range(m) if j != p]
        # columns: new block column 0 = sum_i x_i col(k+i); others are old columns minus (k+p)
        def right(mat, nrows):
            for r in range(nrows):
                row = mat[r]
                old = row[k:]
                first = sum((x[i] * old[i] for i in range(m) if x[i] and old[i]), _ZERO)
                row[k:] = [first] + [old[j] for j in order[1:]]
        def left(mat, ncols):
            old = [mat[k + i] for i in range(m)]
            prow = [v / xp for v in old[p]]
            new = [prow]
            for j in order[1:]:
                xj = x[j]
                if xj:
                    new.append([a - xj * b for a, b in zip(old[j], prow)])
                else:
                    new.append(old[j])
            mat[k:] = new
        right(T, n)
        left(T, n)
        right(S, n)
        left(Sinv, n)
    return T, S, Sinv


def _triangular_lyapunov(T, R):
    """Solve T Y + Y T' = R with T upper triangular (lists of Fractions)."""
    n = len(T)
    Y = [[_ZERO] * n for _ in range(n)]
    for j in range(n - 1, -1, -1):
        for i in range(n - 1, -1, -1):
            acc = R[i][j]
            Ti = T[i]
            Tj = T[j]
            for k in range(i + 1, n):
                if Ti[k]:
                    acc -= Ti[k] * Y[k][j]
            Yi = Y[i]
            for l in range(j + 1, n):
                if Tj[l]:
                    acc -= Yi[l] * Tj[l]
            Y[i][j] = acc / (Ti[i] + Tj[j])
    return Y


def _mat(rows) -> RatMatrix:
    return RatMatrix._trusted(tuple(tuple(r) for r in rows))


def _exact_lyapunov(F: RatMatrix, C: RatMatrix) -> RatMatrix:
    p = char_poly(F)
    roots, rem = rational_roots(p)
    if rem.degree < 1:
        eig = [r for r, mult in roots for _ in range(mult)]
        for i, a in enumerate(eig):
            for b in eig[i:]:
                if a + b == 0:
                    raise SingularLyapunovError(
                        f"eigenvalues {format_rational(a)} and {format_rational(b)} sum to zero", pair=(a, b)
                    )
        T, S, Sinv = _rational_triangularize(F, eig)
        Sinv_m, S_m = _mat(Sinv), _mat(S)
        Ct = Sinv_m @ C @ Sinv_m.T
        Y = _triangular_lyapunov(T, [[-v for v in r] for r in Ct])
        X = S_m @ _mat(Y) @ S_m.T
    else:
        shared = poly_gcd(p, p.reflect())
        if shared.degree >= 1:
            raise SingularLyapunovError(
                f"eigenvalues lam and -lam coexist (common factor {shared!r})", pair=shared
            )
        X = _kron_lyapunov(F, C)
    residual = F @ X + X @ F.T + C
    if not residual.is_zero():
        raise ArithmeticError("exact Lyapunov solve produced a nonzero residual")
    return X


def solve_lyapunov(F, C, exact: bool | None = None):
    """Solve ``F X + X F' = -C`` for symmetric ``X``.

    Exact inputs (:class:`RatMatrix`) of order up to ``EXACT_LYAPUNOV_CAP``
    are solved over the rationals: by rational triangularisation and
    back-substitution when the spectrum of ``F`` is rational, otherwise by the
    dense linear system on the upper triangle.  Anything else goes through the
    Schur-based float solver and returns an ndarray.
    """
    is_exact = isinstance(F, RatMatrix) and isinstance(C, RatMatrix)
    n = F.rows if isinstance(F, RatMatrix) else np.asarray(F).shape[0]
    if exact is None:
        exact = is_exact and n <= EXACT_LYAPUNOV_CAP
    if exact:
        if not is_exact:
            raise TypeError("exact Lyapunov solve needs RatMatrix inputs")
        if not F.is_square or F.shape != C.shape:
            raise DimensionError(f"Lyapunov shapes {F.shape} and {C.shape}")
        return _exact_lyapunov(F, C)
    Fn = F.to_numpy() if isinstance(F, RatMatrix) else np.asarray(F, dtype=float)
    Cn = C.to_numpy() if isinstance(C, RatMatrix) else np.asarray(C, dtype=float)
    if Fn.shape != Cn.shape or Fn.shape[0] != Fn.shape[1]:
        raise DimensionError(f"Lyapunov shapes {Fn.shape} and {Cn.shape}")
    eig = scipy.linalg.eigvals(Fn)
    scale = max(np.abs(eig).max(), 1.0)
    sums = eig[:, None] + eig[None, :]
    i, j = np.unravel_index(np.argmin(np.abs(sums)), sums.shape)
    if abs(sums[i, j]) <= 1e-12 * scale:
        raise SingularLyapunovError(f"eigenvalues {eig[i]} and {eig[j]} sum to zero", pair=(eig[i], eig[j]))
    X = scipy.linalg.solve_continuous_lyapunov(Fn, -Cn)
    return 0.5 * (X + X.T)
