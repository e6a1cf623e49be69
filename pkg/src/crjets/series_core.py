"""Exact truncated multivariate power series over the Gaussian rationals.

Series are stored sparsely; an exponent vector is packed into one integer
(8 bits per variable) so that multiplying monomials is a single addition.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Sequence

from gmpy2 import mpq

_BITS = 8
_MASK = (1 << _BITS) - 1
MAX_EXPONENT = _MASK

_ZERO = mpq(0)
_ONE = mpq(1)


class SeriesError(ValueError):
    """Raised when an operation's precondition fails."""


class SingularError(SeriesError):
    """Raised when a matrix or pivot that must be a unit vanishes at 0."""


def _q(x) -> mpq:
    if isinstance(x, bool):
        raise TypeError("bool is not a coefficient")
    if isinstance(x, (int, type(_ZERO))):
        return mpq(x)
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, str):
        return mpq(Fraction(x.strip()).numerator, Fraction(x.strip()).denominator)
    if isinstance(x, (tuple, list)) and len(x) == 2:
        num, den = x
        if not isinstance(num, int) or not isinstance(den, int) or den == 0:
            raise TypeError(f"bad rational pair {x!r}")
        return mpq(num, den)
    # floats and the like would silently carry binary rounding
    raise TypeError(f"not an exact rational: {x!r}")


class GaussianRational:
    """Exact element ``re + i*im`` of Q(i)."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        if isinstance(re, GaussianRational):
            if im:
                raise TypeError("imaginary part given twice")
            self.re, self.im = re.re, re.im
            return
        if isinstance(re, complex):
            raise TypeError("complex floats are not exact")
        self.re = _q(re)
        self.im = _q(im)

    @classmethod
    def _raw(cls, re: mpq, im: mpq) -> GaussianRational:
        g = object.__new__(cls)
        g.re = re
        g.im = im
        return g

    @classmethod
    def coerce(cls, x) -> GaussianRational:
        if isinstance(x, GaussianRational):
            return x
        return cls(x)

    def __add__(self, o):
        o = _coerce_or_none(o)
        if o is None:
            return NotImplemented
        return GaussianRational._raw(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        o = _coerce_or_none(o)
        if o is None:
            return NotImplemented
        return GaussianRational._raw(self.re - o.re, self.im - o.im)

    def __rsub__(self, o):
        o = _coerce_or_none(o)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, o):
        o = _coerce_or_none(o)
        if o is None:
            return NotImplemented
        return GaussianRational._raw(self.re * o.re - self.im * o.im,
                                     self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = _coerce_or_none(o)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, o):
        o = _coerce_or_none(o)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = GaussianRational._raw(_ONE, _ZERO)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def inverse(self) -> GaussianRational:
        n = self.re * self.re + self.im * self.im
        if not n:
            raise ZeroDivisionError("division by zero in Q(i)")
        return GaussianRational._raw(self.re / n, -self.im / n)

    def __neg__(self):
        return GaussianRational._raw(-self.re, -self.im)

    def __pos__(self):
        return self

    def conjugate(self) -> GaussianRational:
        return GaussianRational._raw(self.re, -self.im)

    def norm(self) -> mpq:
        return self.re * self.re + self.im * self.im

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, o):
        o = _coerce_or_none(o)
        if o is None:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    def is_real(self) -> bool:
        return not self.im

    def is_gaussian_integer(self) -> bool:
        return self.re.denominator == 1 and self.im.denominator == 1

    def to_pairs(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return ((int(self.re.numerator), int(self.re.denominator)),
                (int(self.im.numerator), int(self.im.denominator)))

    def __repr__(self):
        return f"GaussianRational({self})"

    def __str__(self):
        if not self.im:
            return str(self.re)
        im = "i" if self.im == 1 else "-i" if self.im == -1 else f"{self.im}i"
        if not self.re:
            return im
        sign = "" if im.startswith("-") else "+"
        return f"{self.re}{sign}{im}"


def _coerce_or_none(x):
    if isinstance(x, GaussianRational):
        return x
    try:
        return GaussianRational(x)
    except TypeError:
        return None


I = GaussianRational(0, 1)
ONE = GaussianRational(1)
ZERO = GaussianRational(0)


# ---------------------------------------------------------------------------
# exponent packing

def pack(exp: Sequence[int]) -> int:
    key = 0
    for i, e in enumerate(exp):
        if e < 0 or e > MAX_EXPONENT:
            raise SeriesError(f"exponent {e} out of range")
        key |= e << (_BITS * i)
    return key


def unpack(key: int, m: int) -> tuple[int, ...]:
    return tuple((key >> (_BITS * i)) & _MASK for i in range(m))


_DEG: dict[int, int] = {}


def _deg(key: int) -> int:
    d = _DEG.get(key)
    if d is None:
        d = sum(key.to_bytes((key.bit_length() + 7) // 8 or 1, "little"))
        _DEG[key] = d
    return d


def _unit(i: int) -> int:
    return 1 << (_BITS * i)


# ---------------------------------------------------------------------------

class TruncatedSeries:
    """Sparse power series in ``m`` variables known up to total degree ``cap``.

    Coefficients live in Q(i).  Terms above ``cap`` are never stored and zero
    coefficients are dropped, so the term dictionary is canonical.  Two series
    compare equal when their coefficients agree up to the smaller cap.
    """

    __slots__ = ("m", "cap", "_t")

    def __init__(self, m: int, cap: int, terms: Mapping | Iterable = ()):
        if m < 0:
            raise SeriesError("negative variable count")
        if cap > MAX_EXPONENT:
            raise SeriesError(f"cap {cap} exceeds {MAX_EXPONENT}")
        self.m = m
        self.cap = cap
        items = terms.items() if isinstance(terms, Mapping) else terms
        t: dict[int, tuple[mpq, mpq]] = {}
        for exp, c in items:
            exp = tuple(exp)
            if len(exp) != m:
                raise SeriesError(f"exponent {exp} has wrong length for m={m}")
            if sum(exp) > cap:
                continue
            g = GaussianRational.coerce(c)
            k = pack(exp)
            if k in t:
                r, s = t[k]
                g = GaussianRational._raw(r + g.re, s + g.im)
            t[k] = (g.re, g.im)
        self._t = {k: v for k, v in t.items() if v[0] or v[1]}

    @classmethod
    def _make(cls, m: int, cap: int, t: dict) -> TruncatedSeries:
        s = object.__new__(cls)
        s.m = m
        s.cap = cap
        s._t = t
        return s

    # constructors --------------------------------------------------------
    @classmethod
    def zero(cls, m: int, cap: int) -> TruncatedSeries:
        return cls._make(m, cap, {})

    @classmethod
    def const(cls, m: int, cap: int, c) -> TruncatedSeries:
        g = GaussianRational.coerce(c)
        if cap < 0 or not g:
            return cls._make(m, cap, {})
        return cls._make(m, cap, {0: (g.re, g.im)})

    @classmethod
    def one(cls, m: int, cap: int) -> TruncatedSeries:
        return cls.const(m, cap, 1)

    @classmethod
    def var(cls, m: int, cap: int, i: int, c=1) -> TruncatedSeries:
        if not 0 <= i < m:
            raise SeriesError(f"variable index {i} out of range")
        g = GaussianRational.coerce(c)
        if cap < 1 or not g:
            return cls._make(m, cap, {})
        return cls._make(m, cap, {_unit(i): (g.re, g.im)})

    @classmethod
    def monomial(cls, m: int, cap: int, exp: Sequence[int], c=1) -> TruncatedSeries:
        return cls(m, cap, {tuple(exp): c})

    # inspection ----------------------------------------------------------
    def terms(self) -> list[tuple[tuple[int, ...], GaussianRational]]:
        """Terms in graded-lexicographic order."""
        out = [(unpack(k, self.m), GaussianRational._raw(*v)) for k, v in self._t.items()]
        out.sort(key=lambda p: (sum(p[0]), tuple(-e for e in p[0])))
        return out

    def coeff(self, exp: Sequence[int]) -> GaussianRational:
        if len(exp) != self.m:
            raise SeriesError("exponent length mismatch")
        if sum(exp) > self.cap:
            raise SeriesError(f"coefficient {tuple(exp)} lies above cap {self.cap}")
        v = self._t.get(pack(exp))
        return GaussianRational._raw(*v) if v else ZERO

    def __len__(self):
        return len(self._t)

    def is_zero(self) -> bool:
        return not self._t

    def __bool__(self):
        return bool(self._t)

    def degree(self) -> int:
        """Top degree of a stored term, -1 for the zero series."""
        return max((_deg(k) for k in self._t), default=-1)

    def order(self) -> int | None:
        """Lowest degree of a stored term (None for zero up to cap)."""
        return min((_deg(k) for k in self._t), default=None)

    def looks_polynomial(self) -> bool:
        return self.degree() < self.cap

    def eval0(self) -> GaussianRational:
        v = self._t.get(0)
        return GaussianRational._raw(*v) if v else ZERO

    def is_real(self) -> bool:
        return all(not v[1] for v in self._t.values())

    def variables(self) -> set[int]:
        used = set()
        for k in self._t:
            for i in range(self.m):
                if (k >> (_BITS * i)) & _MASK:
                    used.add(i)
        return used

    # truncation ----------------------------------------------------------
    def truncate(self, cap: int) -> TruncatedSeries:
        if cap >= self.cap:
            return self
        return TruncatedSeries._make(self.m, cap,
                                     {k: v for k, v in self._t.items() if _deg(k) <= cap})

    def homogeneous_part(self, k: int) -> TruncatedSeries:
        return TruncatedSeries._make(self.m, self.cap,
                                     {e: v for e, v in self._t.items() if _deg(e) == k})

    def by_degree(self) -> dict[int, list]:
        groups: dict[int, list] = {}
        for k, v in self._t.items():
            groups.setdefault(_deg(k), []).append((k, v))
        return groups

    # arithmetic ----------------------------------------------------------
    def _lift(self, o) -> TruncatedSeries | None:
        if isinstance(o, TruncatedSeries):
            if o.m != self.m:
                raise SeriesError(f"variable count mismatch: {self.m} vs {o.m}")
            return o
        g = _coerce_or_none(o)
        if g is None:
            return None
        return TruncatedSeries.const(self.m, self.cap, g)

    def __add__(self, o):
        o = self._lift(o)
        if o is None:
            return NotImplemented
        cap = min(self.cap, o.cap)
        t = {k: v for k, v in self._t.items() if _deg(k) <= cap} if cap < self.cap else dict(self._t)
        for k, (b, c) in o._t.items():
            if cap < o.cap and _deg(k) > cap:
                continue
            if k in t:
                r, s = t[k]
                r, s = r + b, s + c
                if r or s:
                    t[k] = (r, s)
                else:
                    del t[k]
            else:
                t[k] = (b, c)
        return TruncatedSeries._make(self.m, cap, t)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries._make(self.m, self.cap, {k: (-a, -b) for k, (a, b) in self._t.items()})

    def __sub__(self, o):
        o = self._lift(o)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, o):
        o = self._lift(o)
        if o is None:
            return NotImplemented
        return o + (-self)

    def scale(self, c) -> TruncatedSeries:
        g = GaussianRational.coerce(c)
        if not g:
            return TruncatedSeries.zero(self.m, self.cap)
        x, y = g.re, g.im
        if not y:
            t = {k: (a * x, b * x) for k, (a, b) in self._t.items()}
        else:
            t = {k: (a * x - b * y, a * y + b * x) for k, (a, b) in self._t.items()}
        return TruncatedSeries._make(self.m, self.cap, t)

    def __mul__(self, o):
        if isinstance(o, TruncatedSeries):
            if o.m != self.m:
                raise SeriesError(f"variable count mismatch: {self.m} vs {o.m}")
            return _mul(self, o, min(self.cap, o.cap))
        g = _coerce_or_none(o)
        if g is None:
            return NotImplemented
        return self.scale(g)

    def __rmul__(self, o):
        g = _coerce_or_none(o)
        if g is None:
            return NotImplemented
        return self.scale(g)

    def mul(self, o: TruncatedSeries, cap: int) -> TruncatedSeries:
        """Product computed only up to degree ``cap``."""
        return _mul(self, o, min(cap, self.cap, o.cap))

    def __truediv__(self, o):
        g = _coerce_or_none(o)
        if g is None:
            return NotImplemented
        return self.scale(g.inverse())

    def __pow__(self, k: int):
        if k < 0:
            return inverse(self) ** (-k)
        out = TruncatedSeries.one(self.m, self.cap)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def diff(self, i: int) -> TruncatedSeries:
        """Partial derivative in variable ``i``; the result is known to cap-1."""
        if not 0 <= i < self.m:
            raise SeriesError(f"variable index {i} out of range")
        sh = _BITS * i
        u = 1 << sh
        t = {}
        for k, (a, b) in self._t.items():
            e = (k >> sh) & _MASK
            if e:
                t[k - u] = (a * e, b * e)
        return TruncatedSeries._make(self.m, self.cap - 1, t)

    def conjugate(self) -> TruncatedSeries:
        return TruncatedSeries._make(self.m, self.cap, {k: (a, -b) for k, (a, b) in self._t.items()})

    # comparison ----------------------------------------------------------
    def __eq__(self, o):
        if isinstance(o, TruncatedSeries):
            if o.m != self.m:
                return False
            return self.first_difference(o) is None
        g = _coerce_or_none(o)
        if g is None:
            return NotImplemented
        return self.first_difference(TruncatedSeries.const(self.m, self.cap, g)) is None

    __hash__ = None

    def first_difference(self, o: TruncatedSeries):
        """First (graded order) exponent up to the common cap where the two differ."""
        cap = min(self.cap, o.cap)
        bad = []
        for k in set(self._t) | set(o._t):
            if _deg(k) <= cap and self._t.get(k) != o._t.get(k):
                bad.append(k)
        if not bad:
            return None
        k = min(bad, key=lambda k: (_deg(k), tuple(-e for e in unpack(k, self.m))))
        return unpack(k, self.m), self.coeff(unpack(k, self.m)), o.coeff(unpack(k, self.m))

    def same(self, o: TruncatedSeries) -> bool:
        """Equal caps and identical terms."""
        return self.m == o.m and self.cap == o.cap and self._t == o._t

    # variable bookkeeping --------------------------------------------------
    def remap(self, m: int, index_map: Sequence[int], cap: int | None = None) -> TruncatedSeries:
        """Rename variable ``i`` to ``index_map[i]`` in a ring with ``m`` variables."""
        if len(index_map) != self.m:
            raise SeriesError("index map length mismatch")
        cap = self.cap if cap is None else min(cap, self.cap)
        shifts = [(_BITS * i, _BITS * j) for i, j in enumerate(index_map)]
        t = {}
        for k, v in self._t.items():
            if _deg(k) > cap:
                continue
            nk = 0
            for si, sj in shifts:
                e = (k >> si) & _MASK
                if e:
                    nk += e << sj
            if nk in t:
                a, b = t[nk]
                a, b = a + v[0], b + v[1]
                if a or b:
                    t[nk] = (a, b)
                else:
                    del t[nk]
            else:
                t[nk] = v
        return TruncatedSeries._make(m, cap, t)

    def with_cap(self, cap: int) -> TruncatedSeries:
        """Relabel the cap; only valid when the series is known to that degree."""
        return TruncatedSeries._make(self.m, cap, {k: v for k, v in self._t.items() if _deg(k) <= cap})

    def map_coefficients(self, fn) -> TruncatedSeries:
        t = {}
        for k, v in self._t.items():
            g = GaussianRational.coerce(fn(unpack(k, self.m), GaussianRational._raw(*v)))
            if g:
                t[k] = (g.re, g.im)
        return TruncatedSeries._make(self.m, self.cap, t)

    # display -------------------------------------------------------------
    def to_str(self, names: Sequence[str] | None = None) -> str:
        names = names or [f"x{i}" for i in range(self.m)]
        if not self._t:
            return "0"
        parts = []
        for exp, c in self.terms():
            mono = "*".join(n if e == 1 else f"{n}^{e}" for n, e in zip(names, exp) if e)
            cs = str(c)
            if c.re and c.im:
                cs = f"({cs})"
            if not mono:
                parts.append(cs)
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{cs}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self):
        return f"TruncatedSeries(m={self.m}, cap={self.cap}, {self.to_str()})"


def _mul(a: TruncatedSeries, b: TruncatedSeries, cap: int) -> TruncatedSeries:
    if not a._t or not b._t:
        return TruncatedSeries._make(a.m, cap, {})
    ga = a.by_degree()
    gb = b.by_degree()
    re: dict[int, mpq] = {}
    im: dict[int, mpq] = {}
    for da, la in ga.items():
        if da > cap:
            continue
        for db, lb in gb.items():
            if da + db > cap:
                continue
            for ka, (ar, ai) in la:
                if ai:
                    for kb, (br, bi) in lb:
                        k = ka + kb
                        re[k] = re.get(k, _ZERO) + (ar * br - ai * bi)
                        im[k] = im.get(k, _ZERO) + (ar * bi + ai * br)
                else:
                    for kb, (br, bi) in lb:
                        k = ka + kb
                        re[k] = re.get(k, _ZERO) + ar * br
                        if bi:
                            im[k] = im.get(k, _ZERO) + ar * bi
    t = {}
    for k, r in re.items():
        s = im.get(k, _ZERO)
        if r or s:
            t[k] = (r, s)
    for k, s in im.items():
        if k not in re and s:
            t[k] = (_ZERO, s)
    return TruncatedSeries._make(a.m, cap, t)


Series = TruncatedSeries
SeriesVector = list
SeriesMatrix = list


# ---------------------------------------------------------------------------
# substitution

def compose(f: TruncatedSeries, g: Sequence[TruncatedSeries], cap: int | None = None) -> TruncatedSeries:
    """Substitute ``g[i]`` for variable ``i`` of ``f``.

    Every ``g[i]`` must have zero constant term, which makes the result
    exact up to the smallest cap involved.
    """
    if len(g) != f.m:
        raise SeriesError(f"need {f.m} substitutions, got {len(g)}")
    if not g:
        return f
    mm = g[0].m
    for s in g:
        if s.m != mm:
            raise SeriesError("substitutions live in different rings")
        if s._t.get(0):
            raise SeriesError("substitution with nonzero constant term")
    out_cap = min([f.cap] + [s.cap for s in g])
    if cap is not None:
        out_cap = min(out_cap, cap)
    powers: list[list[TruncatedSeries]] = [[TruncatedSeries.one(mm, out_cap)] for _ in g]

    def power(i: int, e: int) -> TruncatedSeries:
        p = powers[i]
        while len(p) <= e:
            p.append(p[-1].mul(g[i], out_cap))
        return p[e]

    orders = [s.order() for s in g]
    memo: dict[int, TruncatedSeries] = {0: TruncatedSeries.one(mm, out_cap)}

    def mono(k: int) -> TruncatedSeries | None:
        r = memo.get(k)
        if r is not None:
            return r
        j = (k.bit_length() - 1) // _BITS
        e = (k >> (_BITS * j)) & _MASK
        rest = k - (e << (_BITS * j))
        pre = mono(rest)
        r = pre.mul(power(j, e), out_cap) if pre else pre
        memo[k] = r
        return r

    re: dict[int, mpq] = {}
    im: dict[int, mpq] = {}
    for k, (cr, ci) in f._t.items():
        if _deg(k) > out_cap:
            continue
        low = 0
        dead = False
        for i in range(f.m):
            e = (k >> (_BITS * i)) & _MASK
            if e:
                if orders[i] is None:
                    dead = True
                    break
                low += e * orders[i]
        if dead or low > out_cap:
            continue
        p = mono(k)
        for kk, (a, b) in p._t.items():
            if ci:
                re[kk] = re.get(kk, _ZERO) + (cr * a - ci * b)
                im[kk] = im.get(kk, _ZERO) + (cr * b + ci * a)
            else:
                re[kk] = re.get(kk, _ZERO) + cr * a
                if b:
                    im[kk] = im.get(kk, _ZERO) + cr * b
    t = {}
    for k in set(re) | set(im):
        r = re.get(k, _ZERO)
        s = im.get(k, _ZERO)
        if r or s:
            t[k] = (r, s)
    return TruncatedSeries._make(mm, out_cap, t)


def compose_vector(fs: Sequence[TruncatedSeries], g: Sequence[TruncatedSeries],
                   cap: int | None = None) -> list[TruncatedSeries]:
    return [compose(f, g, cap) for f in fs]


def variables(m: int, cap: int) -> list[TruncatedSeries]:
    return [TruncatedSeries.var(m, cap, i) for i in range(m)]


# ---------------------------------------------------------------------------
# matrices of series

def jacobian(fs: Sequence[TruncatedSeries], idx: Iterable[int]) -> list[list[TruncatedSeries]]:
    idx = list(idx)
    return [[f.diff(j) for j in idx] for f in fs]


def mat_vec(A: Sequence[Sequence[TruncatedSeries]], x: Sequence[TruncatedSeries]) -> list[TruncatedSeries]:
    out = []
    for row in A:
        acc = None
        for a, b in zip(row, x):
            acc = a * b if acc is None else acc + a * b
        out.append(acc)
    return out


def det(A: Sequence[Sequence[TruncatedSeries]]) -> TruncatedSeries:
    """Determinant by cofactor expansion (matrices here are at most a few rows)."""
    n = len(A)
    if n == 0:
        raise SeriesError("empty matrix")
    if any(len(r) != n for r in A):
        raise SeriesError("determinant of a non-square matrix")
    if n == 1:
        return A[0][0]
    if n == 2:
        return A[0][0] * A[1][1] - A[0][1] * A[1][0]
    acc = None
    for j in range(n):
        if not A[0][j]:
            continue
        minor = [row[:j] + row[j + 1:] for row in A[1:]]
        term = A[0][j] * det(minor)
        if j % 2:
            term = -term
        acc = term if acc is None else acc + term
    if acc is None:
        return TruncatedSeries.zero(A[0][0].m, min(e.cap for r in A for e in r))
    return acc


def adjugate(A: Sequence[Sequence[TruncatedSeries]]) -> list[list[TruncatedSeries]]:
    n = len(A)
    if n == 1:
        return [[TruncatedSeries.one(A[0][0].m, A[0][0].cap)]]
    adj = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for r, row in enumerate(A) if r != i]
            c = det(minor)
            adj[j][i] = -c if (i + j) % 2 else c
    return adj


def inverse(s: TruncatedSeries) -> TruncatedSeries:
    """Inverse of a unit series (nonzero constant term)."""
    c0 = s.eval0()
    if not c0:
        raise SingularError("series is not a unit: constant term vanishes")
    x = TruncatedSeries.const(s.m, s.cap, c0.inverse())
    prec = 1
    while prec <= s.cap:
        prec = min(2 * prec, s.cap + 1)
        # Newton step doubles the number of correct degrees
        x = _mul(x, 2 - _mul(s, x, prec - 1), prec - 1).with_cap(s.cap)
    return x


class CramerSolution(NamedTuple):
    x: list[TruncatedSeries]
    det: TruncatedSeries
    det_inverse: TruncatedSeries


def cramer_solve(A: Sequence[Sequence[TruncatedSeries]], b: Sequence[TruncatedSeries]) -> CramerSolution:
    """Solve ``A x = b`` for a matrix whose determinant is a unit."""
    D = det(A)
    if not D.eval0():
        raise SingularError("matrix is singular at the origin")
    Dinv = inverse(D)
    x = [Dinv * e for e in mat_vec(adjugate(A), b)]
    return CramerSolution(x, D, Dinv)


# ---------------------------------------------------------------------------
# exact linear algebra over Q(i) on scalar matrices

def _scalar_rref(rows: list[list[GaussianRational]]):
    rows = [list(r) for r in rows]
    pivots = []
    r = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        p = next((i for i in range(r, len(rows)) if rows[i][c]), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        inv = rows[r][c].inverse()
        rows[r] = [e * inv for e in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c]:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows[:r], pivots


def scalar_rank(rows: Sequence[Sequence]) -> int:
    rows = [[GaussianRational.coerce(e) for e in r] for r in rows]
    if not rows:
        return 0
    return len(_scalar_rref(rows)[1])


def scalar_inverse(rows: Sequence[Sequence]) -> list[list[GaussianRational]]:
    n = len(rows)
    aug = [[GaussianRational.coerce(e) for e in r] + [ONE if i == j else ZERO for j in range(n)]
           for i, r in enumerate(rows)]
    red, piv = _scalar_rref(aug)
    if piv[:n] != list(range(n)) or len(piv) < n:
        raise SingularError("scalar matrix is singular")
    return [r[n:] for r in red]


def scalar_nullspace(rows: Sequence[Sequence], ncols: int) -> list[list[GaussianRational]]:
    rows = [[GaussianRational.coerce(e) for e in r] for r in rows]
    if not rows:
        return [[ONE if i == j else ZERO for i in range(ncols)] for j in range(ncols)]
    red, piv = _scalar_rref(rows)
    free = [c for c in range(ncols) if c not in piv]
    basis = []
    for f in free:
        v = [ZERO] * ncols
        v[f] = ONE
        for r, c in zip(red, piv):
            v[c] = -r[f]
        basis.append(v)
    return basis


def scalar_solve(rows: Sequence[Sequence], rhs: Sequence) -> list[GaussianRational] | None:
    """One solution of a (possibly non-square) consistent system, or None."""
    n = len(rows[0]) if rows else 0
    aug = [[GaussianRational.coerce(e) for e in r] + [GaussianRational.coerce(b)] for r, b in zip(rows, rhs)]
    red, piv = _scalar_rref(aug)
    if n in piv:
        return None
    x = [ZERO] * n
    for r, c in zip(red, piv):
        x[c] = r[n]
    return x


# ---------------------------------------------------------------------------
# implicit functions

def implicit_solve(F: Sequence[TruncatedSeries], k: int) -> list[TruncatedSeries]:
    """Solve ``F(x, y) = 0`` for ``y = f(x)`` with ``f(0) = 0``.

    ``F`` has ``len(F)`` entries in the ``k + len(F)`` variables ``(x, y)``.
    Degree ``j`` of ``f`` is fixed by the degree ``j`` part of ``F(x, f)``.
    For a single equation the degree ``j`` coefficients have denominators
    dividing ``det(dF/dy(0))**(2j - 1)`` times those of ``F``.
    """
    mdim = len(F)
    if any(f.m != k + mdim for f in F):
        raise SeriesError("F must live in k + len(F) variables")
    if any(f.eval0() for f in F):
        raise SeriesError("F(0, 0) must vanish")
    cap = min(f.cap for f in F)
    A0 = [[f.diff(k + j).eval0() for j in range(mdim)] for f in F]
    try:
        Ainv = scalar_inverse(A0)
    except SingularError:
        raise SingularError("dF/dy(0,0) is singular") from None
    xs = variables(k, cap)
    y = [TruncatedSeries.zero(k, cap) for _ in range(mdim)]
    for j in range(1, cap + 1):
        r = [compose(f, xs + y, cap=j).homogeneous_part(j).with_cap(cap) for f in F]
        y = [yi - sum((r[q].scale(Ainv[i][q]) for q in range(mdim) if Ainv[i][q]),
                      TruncatedSeries.zero(k, cap)) for i, yi in enumerate(y)]
    return y


def singular_implicit_solve(u: Sequence[TruncatedSeries], nx: int, nt: int):
    """Solve ``u(x, t, y) = w`` when ``du/dy(x,0,0)`` is only generically invertible.

    ``u`` has ``d`` entries in the variables ``(x, t, y)`` with ``y`` of size ``d``
    and ``u(x, 0, 0) = 0``.  With ``delta = det du/dy(x,0,0)`` the solution is
    ``y = delta * theta(x, t/delta**2, w/delta**2)``; ``theta`` is returned as a
    series in the fresh variables ``(x, t', w')``.
    """
    d = len(u)
    m = nx + nt + d
    if any(f.m != m for f in u):
        raise SeriesError("u must live in nx + nt + len(u) variables")
    cap = min(f.cap for f in u)
    # u(x,0,0) must vanish
    for f in u:
        for k in f._t:
            if not any((k >> (_BITS * i)) & _MASK for i in range(nx, m)):
                raise SeriesError("u(x, 0, 0) does not vanish")
    xonly = list(range(nx))
    # g(x) = du/dy(x,0,0): the t-free terms linear in y
    gt = [[{} for _ in range(d)] for _ in range(d)]
    for i, f in enumerate(u):
        for k, v in f._t.items():
            exp = unpack(k, m)
            if sum(exp[nx:nx + nt]) == 0 and sum(exp[nx + nt:]) == 1:
                gt[i][exp[nx + nt:].index(1)][pack(exp[:nx])] = v
    g = [[TruncatedSeries._make(nx, cap, t) for t in row] for row in gt]
    delta = det(g)
    if delta.is_zero():
        raise SingularError("delta vanishes identically up to cap")
    b = adjugate(g)

    # E = u - g y; each monomial has t-degree >= 1 or y-degree >= 2
    yvars = [TruncatedSeries.var(m, cap, nx + nt + j) for j in range(d)]
    g_m = [[e.remap(m, xonly) for e in row] for row in g]
    E = [f - sum((g_m[i][j] * yvars[j] for j in range(d)), TruncatedSeries.zero(m, cap))
         for i, f in enumerate(u)]

    # fresh ring (x, t', w', y') of size nx + nt + d + d
    M = nx + nt + 2 * d
    dpow = [TruncatedSeries.one(M, cap)]
    delta_M = delta.remap(M, xonly)
    K = []
    for f in E:
        acc = TruncatedSeries.zero(M, cap)
        for k, (cr, ci) in f._t.items():
            exp = unpack(k, m)
            tdeg = sum(exp[nx:nx + nt])
            ydeg = sum(exp[nx + nt:])
            p = 2 * tdeg + ydeg - 2
            if p < 0:
                raise SeriesError("u - g y has a term linear in y without t")
            newexp = exp[:nx + nt] + (0,) * d + exp[nx + nt:]
            if sum(newexp) > cap:
                continue
            while len(dpow) <= p:
                dpow.append(dpow[-1] * delta_M)
            acc = acc + dpow[p] * TruncatedSeries.monomial(M, cap, newexp, GaussianRational._raw(cr, ci))
        K.append(acc)
    # y' + b K - b w' = 0, solved for y' over parameters (x, t', w')
    b_M = [[e.remap(M, xonly) for e in row] for row in b]
    wvars = [TruncatedSeries.var(M, cap, nx + nt + j) for j in range(d)]
    G = []
    for i in range(d):
        acc = TruncatedSeries.var(M, cap, nx + nt + d + i)
        for j in range(d):
            acc = acc + b_M[i][j] * (K[j] - wvars[j])
        G.append(acc)
    theta = implicit_solve(G, nx + nt + d)
    return theta, delta


# ---------------------------------------------------------------------------
# generic rank

class RankReport(NamedTuple):
    rank: int
    truncation_warning: bool


def rank_report(A: Sequence[Sequence[TruncatedSeries]], polynomial: bool | None = None) -> RankReport:
    """Rank over the fraction field by fraction-free elimination.

    Polynomial entries (every entry below its cap unless told otherwise) are
    eliminated without truncation loss.  For genuine truncated series a
    pivot that vanishes up to cap may be a truncation artifact; the report
    flags that case instead of guessing.
    """
    rows = [list(r) for r in A if r]
    if not rows:
        return RankReport(0, False)
    ncols = len(rows[0])
    cap = min(e.cap for r in rows for e in r)
    if polynomial is None:
        polynomial = all(e.looks_polynomial() for r in rows for e in r)
    if polynomial:
        top = max((e.degree() for r in rows for e in r), default=0)
        top = max(top, 0)
        steps = min(len(rows), ncols)
        work = min(MAX_EXPONENT, max(cap, top * (2 ** steps)))
        rows = [[e.with_cap(work) for e in r] for r in rows]
    rank = 0
    col = 0
    while rows and col < ncols:
        cands = [(r[col].order(), i) for i, r in enumerate(rows) if not r[col].is_zero()]
        if not cands:
            col += 1
            continue
        _, pi = min(cands)
        prow = rows.pop(pi)
        p = prow[col]
        new = []
        for r in rows:
            a = r[col]
            if a.is_zero():
                new.append(r)
            else:
                new.append([p * x - a * y for x, y in zip(r, prow)])
        rows = [r for r in new if any(not e.is_zero() for e in r)]
        rank += 1
        col += 1
    full = min(len(A), ncols)
    return RankReport(rank, (not polynomial) and rank < full)


def generic_rank(A: Sequence[Sequence[TruncatedSeries]], polynomial: bool | None = None) -> int:
    return rank_report(A, polynomial).rank


# ---------------------------------------------------------------------------

def weighted_decompose(g: TruncatedSeries, weights: Sequence[int]) -> dict[int, TruncatedSeries]:
    """Split ``g`` into parts of fixed weighted degree ``sum(w_j * a_j)``."""
    if len(weights) != g.m or any(w <= 0 for w in weights):
        raise SeriesError("need one positive weight per variable")
    parts: dict[int, dict] = {}
    for k, v in g._t.items():
        exp = unpack(k, g.m)
        nu = sum(w * e for w, e in zip(weights, exp))
        parts.setdefault(nu, {})[k] = v
    return {nu: TruncatedSeries._make(g.m, g.cap, t) for nu, t in sorted(parts.items())}


def weighted_degree(exp: Sequence[int], weights: Sequence[int]) -> int:
    return sum(w * e for w, e in zip(weights, exp))


def sparse_nullspace(rows: Iterable[Mapping[int, GaussianRational]], ncols: int) -> list[dict[int, GaussianRational]]:
    """Nullspace basis of a sparse system given as ``{column: coefficient}`` rows.

    Basis vectors come back as sparse dicts, one per free column, ordered by
    the free column index.
    """
    pivots: dict[int, dict[int, GaussianRational]] = {}  # pivot column -> normalized row
    for row in rows:
        r = {c: v for c, v in row.items() if v}
        # pivot rows are fully reduced, so one pass clears every pivot column
        for c in [k for k in r if k in pivots]:
            f = r.get(c)
            if not f:
                continue
            for k, v in pivots[c].items():
                nv = r.get(k, ZERO) - f * v
                if nv:
                    r[k] = nv
                else:
                    r.pop(k, None)
        if not r:
            continue
        c = min(r)
        inv = r[c].inverse()
        r = {k: v * inv for k, v in r.items()}
        # keep the pivot rows fully reduced
        for pc, p in pivots.items():
            if c in p:
                f = p[c]
                for k, v in r.items():
                    nv = p.get(k, ZERO) - f * v
                    if nv:
                        p[k] = nv
                    else:
                        p.pop(k, None)
        pivots[c] = r
    basis = []
    for f in range(ncols):
        if f in pivots:
            continue
        v = {f: ONE}
        for c, p in pivots.items():
            if f in p:
                v[c] = -p[f]
        basis.append(v)
    return basis
