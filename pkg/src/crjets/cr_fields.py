"""Tangent formal vector fields, Lie brackets and the bracket flag at 0."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .manifold import FormalSubmanifold
from .series_core import GaussianRational, TruncatedSeries, _scalar_rref

S = TruncatedSeries


@dataclass(frozen=True, eq=False)
class FormalVectorField:
    """``sum a_i d/dZ_i + sum b_i d/dzeta_i`` with series coefficients in ``(Z, zeta)``."""

    a: tuple[TruncatedSeries, ...]
    b: tuple[TruncatedSeries, ...]

    @property
    def N(self) -> int:
        return len(self.a)

    @property
    def cap(self) -> int:
        return min(c.cap for c in self.a + self.b)

    def coefficients(self) -> tuple[TruncatedSeries, ...]:
        return self.a + self.b

    def is_01(self) -> bool:
        return all(c.is_zero() for c in self.a)

    def is_10(self) -> bool:
        return all(c.is_zero() for c in self.b)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.a + self.b)

    def __call__(self, f: TruncatedSeries) -> TruncatedSeries:
        """Apply the field to a series in ``(Z, zeta)``; the result is known to cap-1."""
        acc = None
        for i, c in enumerate(self.coefficients()):
            if c.is_zero():
                continue
            term = c * f.diff(i)
            acc = term if acc is None else acc + term
        if acc is None:
            return S.zero(f.m, min(f.cap - 1, self.cap))
        return acc

    def at0(self) -> list[GaussianRational]:
        return [c.eval0() for c in self.coefficients()]

    def __add__(self, o: FormalVectorField) -> FormalVectorField:
        return FormalVectorField(tuple(x + y for x, y in zip(self.a, o.a)),
                                 tuple(x + y for x, y in zip(self.b, o.b)))

    def __neg__(self):
        return FormalVectorField(tuple(-x for x in self.a), tuple(-x for x in self.b))

    def __sub__(self, o: FormalVectorField) -> FormalVectorField:
        return self + (-o)

    def scale(self, f) -> FormalVectorField:
        """Multiply by a scalar or by a series (module action)."""
        return FormalVectorField(tuple(x * f for x in self.a), tuple(x * f for x in self.b))

    def truncate(self, cap: int) -> FormalVectorField:
        return FormalVectorField(tuple(x.truncate(cap) for x in self.a),
                                 tuple(x.truncate(cap) for x in self.b))

    def to_str(self, names: Sequence[str] | None = None) -> str:
        m = 2 * self.N
        names = names or [f"x{i}" for i in range(m)]
        parts = []
        for nm, c in zip(names, self.coefficients()):
            if c.is_zero():
                continue
            cs = c.to_str(names)
            parts.append(f"d/d{nm}" if cs == "1" else f"({cs})*d/d{nm}")
        return " + ".join(parts) or "0"

    def __eq__(self, o):
        if not isinstance(o, FormalVectorField):
            return NotImplemented
        return all(x == y for x, y in zip(self.coefficients(), o.coefficients()))

    __hash__ = None


def partial(N: int, cap: int, i: int) -> FormalVectorField:
    """The coordinate field ``d/dx_i`` in the ring ``(Z, zeta)`` of size ``2N``."""
    c = [S.zero(2 * N, cap) for _ in range(2 * N)]
    c[i] = S.one(2 * N, cap)
    return FormalVectorField(tuple(c[:N]), tuple(c[N:]))


def field_from(N: int, coeffs: dict[int, TruncatedSeries], cap: int) -> FormalVectorField:
    c = [S.zero(2 * N, cap) for _ in range(2 * N)]
    for i, f in coeffs.items():
        c[i] = c[i] + f
    return FormalVectorField(tuple(c[:N]), tuple(c[N:]))


def bracket(X: FormalVectorField, Y: FormalVectorField) -> FormalVectorField:
    """Lie bracket ``[X, Y]``; the output is known to one degree less."""
    out = [X(c) - Y(d) for c, d in zip(Y.coefficients(), X.coefficients())]
    N = X.N
    return FormalVectorField(tuple(out[:N]), tuple(out[N:]))


def cr_basis(M: FormalSubmanifold) -> list[FormalVectorField]:
    """``L_j = d/dchi_j + sum_k Qbar_k,chi_j(chi, z, w) d/dtau_k``."""
    L = M.layout
    cap = M.cap
    qb = M.Qbar_full()
    out = []
    for j in range(L.n):
        coeffs = {L.chi[j]: S.one(2 * L.N, cap)}
        for k in range(L.d):
            coeffs[L.tau[k]] = qb[k].diff(L.chi[j])
        out.append(field_from(L.N, coeffs, cap))
    return out


def aux_fields(M: FormalSubmanifold):
    """The fields ``(tildeL, T, V)`` built from ``Q`` and ``Qbar``."""
    L = M.layout
    cap = M.cap
    q = M.Q_full()
    qb = M.Qbar_full()
    one = S.one(2 * L.N, cap)
    tl, T, V = [], [], []
    for j in range(L.n):
        coeffs = {L.z[j]: one}
        for k in range(L.d):
            coeffs[L.w[k]] = q[k].diff(L.z[j])
        tl.append(field_from(L.N, coeffs, cap))
    for j in range(L.d):
        coeffs = {L.w[j]: one}
        for k in range(L.d):
            coeffs[L.tau[k]] = qb[k].diff(L.w[j])
        T.append(field_from(L.N, coeffs, cap))
    for j in range(L.n):
        v = tl[j]
        for k in range(L.d):
            v = v - T[k].scale(q[k].diff(L.z[j]))
        V.append(v)
    return tl, T, V


def tangency_residual(M: FormalSubmanifold, X: FormalVectorField) -> list[TruncatedSeries]:
    """``X(w - Q)`` reduced by ``tau = Qbar(chi, z, w)``; zero iff ``X`` is tangent."""
    return [M.restrict_to_manifold(X(r)) for r in M.rho_complex()]


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HormanderFlag:
    m: tuple[int, ...]
    l: tuple[int, ...]
    mu: tuple[int, ...]
    r: int
    E_dims: tuple[int, ...]
    D0_dim: int
    g0_dim: int
    d: int
    # "finite" when r = d, "infinite" when all brackets vanish identically,
    # otherwise "inconclusive" within max_length
    status: str
    max_length: int

    @property
    def finite_type(self) -> bool | None:
        return {"finite": True, "infinite": False}.get(self.status)


class _Span:
    """Incremental row-reduced span over Q(i)."""

    def __init__(self, dim: int):
        self.dim = dim
        self.rows: list[list[GaussianRational]] = []

    def __len__(self):
        return len(self.rows)

    def add(self, v: Sequence[GaussianRational]) -> bool:
        rows = self.rows + [list(v)]
        red, piv = _scalar_rref(rows)
        if len(piv) > len(self.rows):
            self.rows = red
            return True
        return False

    def contains(self, v) -> bool:
        red, piv = _scalar_rref(self.rows + [list(v)])
        return len(piv) == len(self.rows)


def _constant_fields(M: FormalSubmanifold) -> bool:
    tl, _, _ = aux_fields(M)
    return all(c.degree() <= 0 for g in tl + cr_basis(M) for c in g.coefficients())


def hormander_flag(M: FormalSubmanifold, max_length: int | None = None) -> HormanderFlag:
    """Flag ``E_1 c E_2 c ...`` from iterated brackets of ``tildeL`` and ``L``."""
    L = M.layout
    if max_length is None:
        max_length = L.d + 2
    if max_length > M.cap:
        raise ValueError(f"max_length {max_length} exceeds cap {M.cap}")
    # a length-k bracket at 0 only sees Q up to degree k
    Mt = M.with_cap(max_length)
    tl, _, _ = aux_fields(Mt)
    gens = tl + cr_basis(Mt)
    span = _Span(2 * L.N)
    for g in gens:
        span.add(g.at0())
    D0 = len(span)
    ms, ls, dims = [], [], []
    level = gens
    for k in range(2, max_length + 1):
        nxt = []
        for g in gens:
            for c in level:
                b = bracket(g, c)
                if not b.is_zero() and not any(b == e for e in nxt):
                    nxt.append(b)
        before = len(span)
        for b in nxt:
            span.add(b.at0())
        if len(span) > before:
            ms.append(k)
            ls.append(len(span) - before)
            dims.append(len(span))
        level = nxt
        if len(span) - D0 == L.d or not nxt:
            break
    r = sum(ls)
    if r == L.d:
        status = "finite"
    elif _constant_fields(M):
        # constant coefficients commute, so no bracket ever leaves E_1
        status = "infinite"
    else:
        status = "inconclusive"
    mu = tuple(m for m, l in zip(ms, ls) for _ in range(l))
    return HormanderFlag(tuple(ms), tuple(ls), mu, r, tuple(dims), D0, D0 + r, L.d, status, max_length)
