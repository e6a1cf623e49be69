"""Formal maps between normalized submanifolds, their jets, and a brute-force
degreewise solver for the mapping equation."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Mapping, Sequence

from .cr_fields import FormalVectorField
from .manifold import CheckResult, FormalSubmanifold
from .nondegen import multi_indices
from .series_core import (
    ONE,
    GaussianRational,
    SeriesError,
    TruncatedSeries,
    _scalar_rref,
    compose,
    implicit_solve,
    scalar_rank,
    weighted_decompose,
)

S = TruncatedSeries


@dataclass(frozen=True, eq=False)
class FormalMap:
    """``H = (F, G)``: ``n_dst + d_dst`` series in the source coordinates ``(z, w)``."""

    components: tuple[TruncatedSeries, ...]
    n_dst: int
    d_dst: int

    def __post_init__(self):
        if len(self.components) != self.n_dst + self.d_dst:
            raise SeriesError("component count does not match target dimensions")
        if any(c.eval0() for c in self.components):
            raise SeriesError("a formal map must send 0 to 0")

    @property
    def N_src(self) -> int:
        return self.components[0].m

    @property
    def N_dst(self) -> int:
        return self.n_dst + self.d_dst

    @property
    def F(self) -> tuple[TruncatedSeries, ...]:
        return self.components[: self.n_dst]

    @property
    def G(self) -> tuple[TruncatedSeries, ...]:
        return self.components[self.n_dst:]

    @property
    def cap(self) -> int:
        return min(c.cap for c in self.components)

    def with_cap(self, cap: int) -> FormalMap:
        return FormalMap(tuple(c.truncate(cap) for c in self.components), self.n_dst, self.d_dst)

    def __call__(self, subs: Sequence[TruncatedSeries]) -> list[TruncatedSeries]:
        return [compose(c, subs) for c in self.components]

    def jacobian_at0(self) -> list[list[GaussianRational]]:
        return [[c.diff(i).eval0() for i in range(self.N_src)] for c in self.components]

    def __eq__(self, o):
        if not isinstance(o, FormalMap):
            return NotImplemented
        return (self.n_dst, self.d_dst) == (o.n_dst, o.d_dst) and all(
            a == b for a, b in zip(self.components, o.components))

    __hash__ = None

    def first_difference(self, o: FormalMap):
        for i, (a, b) in enumerate(zip(self.components, o.components)):
            diff = a.first_difference(b)
            if diff is not None:
                return (i,) + diff
        return None

    @classmethod
    def identity(cls, n: int, d: int, cap: int) -> FormalMap:
        return cls(tuple(S.var(n + d, cap, i) for i in range(n + d)), n, d)


# ---------------------------------------------------------------------------
# mapping equation

def mapping_residual(H: FormalMap, M: FormalSubmanifold, Mp: FormalSubmanifold,
                     cap: int | None = None) -> list[TruncatedSeries]:
    """``G(z, Q) - Q'(F(z, Q), Fbar(chi, tau), Gbar(chi, tau))`` in ``(z, chi, tau)``."""
    n, d = M.n, M.d
    m = 2 * n + d
    cap = min(H.cap, M.cap, Mp.cap) if cap is None else cap
    v = [S.var(m, cap, i) for i in range(m)]
    Zsub = v[:n] + [q.truncate(cap) for q in M.Q]
    Hz = [compose(c, Zsub, cap) for c in H.components]
    # conjugate components read in (chi, tau)
    Hb = [c.conjugate().remap(m, list(range(n, m)), cap) for c in H.components]
    rhs = [compose(q, Hz[: Mp.n] + Hb, cap) for q in Mp.Q]
    return [g - r for g, r in zip(Hz[Mp.n:], rhs)]


def conjugate_mapping_residual(H: FormalMap, M: FormalSubmanifold, Mp: FormalSubmanifold,
                               cap: int | None = None) -> list[TruncatedSeries]:
    """``Gbar(chi, Qbar) - Qbar'(Fbar(chi, Qbar), F(z, w), G(z, w))`` in ``(z, chi, w)``."""
    n, d = M.n, M.d
    m = 2 * n + d
    cap = min(H.cap, M.cap, Mp.cap) if cap is None else cap
    # Qbar slots (chi, z, w) read in the ring (z, chi, w)
    qb_map = list(range(n, 2 * n)) + list(range(n)) + list(range(2 * n, m))
    qb = [q.remap(m, qb_map, cap) for q in M.Qbar()]
    v = [S.var(m, cap, i) for i in range(m)]
    zeta = v[n:2 * n] + qb
    Hb = [compose(c.conjugate(), zeta, cap) for c in H.components]
    Hz = [c.remap(m, list(range(n)) + list(range(2 * n, m)), cap) for c in H.components]
    rhs = [compose(q, Hb[: Mp.n] + Hz, cap) for q in Mp.Qbar()]
    return [g - r for g, r in zip(Hb[Mp.n:], rhs)]


def check_maps_into(H: FormalMap, M: FormalSubmanifold, Mp: FormalSubmanifold) -> CheckResult:
    """Both forms of the mapping equation, coefficientwise up to the common cap."""
    if H.N_src != M.N or H.N_dst != Mp.N or H.n_dst != Mp.n:
        raise SeriesError("map dimensions do not match the submanifolds")
    for label, res in (("G(z,Q) = Q'(F, Fbar, Gbar)", mapping_residual(H, M, Mp)),
                       ("Gbar(chi,Qbar) = Qbar'(Fbar, F, G)", conjugate_mapping_residual(H, M, Mp))):
        for j, r in enumerate(res):
            if not r.is_zero():
                exp, a, _ = r.first_difference(S.zero(r.m, r.cap))
                return CheckResult(False, f"{label} fails in component {j} at {exp}: residual {a}")
    return CheckResult(True)


def is_cr_submersive(H: FormalMap, M: FormalSubmanifold, Mp: FormalSubmanifold | None = None) -> bool:
    """``dF/dz(0)`` has full rank ``n'``."""
    J = [[f.diff(i).eval0() for i in range(M.n)] for f in H.F]
    return scalar_rank(J) == H.n_dst


# ---------------------------------------------------------------------------
# jets

def _fact(exp: Sequence[int]) -> int:
    out = 1
    for e in exp:
        out *= factorial(e)
    return out


@dataclass(frozen=True, eq=False)
class Jet:
    """Derivatives ``d^a H_i(0)`` for ``1 <= |a| <= order``.

    ``values[(i, a)]`` holds the derivative of component ``i``; components
    below ``n_dst`` are the ``F`` entries (lambda), the rest are ``G`` (mu).
    """

    order: int
    n_src: int
    d_src: int
    n_dst: int
    d_dst: int
    values: Mapping[tuple[int, tuple[int, ...]], GaussianRational] = field(default_factory=dict)

    @property
    def N_src(self) -> int:
        return self.n_src + self.d_src

    @property
    def N_dst(self) -> int:
        return self.n_dst + self.d_dst

    def keys(self) -> list[tuple[int, tuple[int, ...]]]:
        """Coordinates of the jet space in a fixed order."""
        out = []
        for i in range(self.N_dst):
            for k in range(1, self.order + 1):
                for a in multi_indices(self.N_src, k):
                    out.append((i, a))
        return out

    def __getitem__(self, key) -> GaussianRational:
        i, a = key
        if sum(a) > self.order or sum(a) < 1:
            raise KeyError(key)
        return self.values.get((i, tuple(a)), GaussianRational(0))

    def is_double_prime(self, key) -> bool:
        """``mu_{z^gamma}``: a ``G`` derivative purely in ``z``."""
        i, a = key
        return i >= self.n_dst and not any(a[self.n_src:])

    def prime(self) -> dict:
        return {k: self[k] for k in self.keys() if not self.is_double_prime(k)}

    def double_prime(self) -> dict:
        return {k: self[k] for k in self.keys() if self.is_double_prime(k)}

    def project(self, l: int) -> Jet:
        if l > self.order:
            raise ValueError("cannot project to a higher order")
        vals = {k: v for k, v in self.values.items() if sum(k[1]) <= l}
        return Jet(l, self.n_src, self.d_src, self.n_dst, self.d_dst, vals)

    def conjugate(self) -> Jet:
        return Jet(self.order, self.n_src, self.d_src, self.n_dst, self.d_dst,
                   {k: v.conjugate() for k, v in self.values.items()})

    def replace(self, updates: Mapping) -> Jet:
        vals = dict(self.values)
        for k, v in updates.items():
            vals[k] = GaussianRational.coerce(v)
        return Jet(self.order, self.n_src, self.d_src, self.n_dst, self.d_dst,
                   {k: v for k, v in vals.items() if v})

    def __eq__(self, o):
        if not isinstance(o, Jet):
            return NotImplemented
        if (self.order, self.N_src, self.n_dst, self.d_dst) != (o.order, o.N_src, o.n_dst, o.d_dst):
            return False
        return all(self[k] == o[k] for k in self.keys())

    __hash__ = None

    def first_difference(self, o: Jet):
        for k in self.keys():
            if self[k] != o[k]:
                return k, self[k], o[k]
        return None


def jet(H: FormalMap, k: int, n_src: int) -> Jet:
    """The ``k``-jet of ``H`` at 0 in derivative coordinates."""
    if k > H.cap:
        raise ValueError(f"jet order {k} exceeds cap {H.cap}")
    vals = {}
    for i, c in enumerate(H.components):
        for exp, v in c.terms():
            s = sum(exp)
            if 1 <= s <= k:
                vals[(i, exp)] = v * _fact(exp)
    return Jet(k, n_src, H.N_src - n_src, H.n_dst, H.d_dst, vals)


def jet_project(L: Jet, l: int) -> Jet:
    return L.project(l)


def jet_to_map(L: Jet, cap: int | None = None) -> FormalMap:
    """The polynomial map whose Taylor coefficients are the jet's."""
    cap = L.order if cap is None else cap
    comps = []
    for i in range(L.N_dst):
        t = {}
        for (j, a), v in L.values.items():
            if j == i and v:
                t[a] = v / _fact(a)
        comps.append(S(L.N_src, cap, t))
    return FormalMap(tuple(comps), L.n_dst, L.d_dst)


# ---------------------------------------------------------------------------
# invertibility and push-forwards

@dataclass(frozen=True)
class InvertibilityReport:
    invertible: bool
    submersive: bool | None
    dG_dw_rank: int | None
    consistent: bool


def check_invertible(H: FormalMap, M: FormalSubmanifold | None = None,
                     Mp: FormalSubmanifold | None = None) -> InvertibilityReport:
    """``dH(0)`` invertible; with the submanifolds also compare against CR
    submersivity and the rank of ``dG/dw(0)``."""
    if H.N_src != H.N_dst:
        raise SeriesError("invertibility needs equal dimensions")
    inv = scalar_rank(H.jacobian_at0()) == H.N_src
    if M is None or Mp is None:
        return InvertibilityReport(inv, None, None, True)
    sub = is_cr_submersive(H, M, Mp)
    J = [[g.diff(M.n + j).eval0() for j in range(M.d)] for g in H.G]
    r = scalar_rank(J)
    from .cr_fields import hormander_flag

    consistent = True
    if sub and hormander_flag(Mp, min(Mp.cap, Mp.d + 2)).status == "finite":
        consistent = inv and r == Mp.d
    return InvertibilityReport(inv, sub, r, consistent)


def inverse_map(H: FormalMap) -> FormalMap:
    """Formal inverse by solving ``H(y) - x = 0`` for ``y``."""
    N = H.N_src
    m = 2 * N
    cap = H.cap
    ys = [S.var(m, cap, N + i) for i in range(N)]
    eqs = [compose(c, ys) - S.var(m, cap, i) for i, c in enumerate(H.components)]
    sol = implicit_solve(eqs, N)
    return FormalMap(tuple(sol), H.n_dst, H.d_dst)


def complexified(H: FormalMap) -> list[TruncatedSeries]:
    """``(H(Z), Hbar(zeta))`` in the ring ``(Z, zeta)``."""
    N = H.N_src
    m = 2 * N
    out = [c.remap(m, list(range(N))) for c in H.components]
    out += [c.conjugate().remap(m, list(range(N, m))) for c in H.components]
    return out


def pushforward_at0(H: FormalMap, X: FormalVectorField) -> list[GaussianRational]:
    """``dH(X)`` at 0: the vector ``((X h)(0))`` over the complexified components."""
    return [X(h).eval0() for h in complexified(H)]


def pushforward_field(H: FormalMap, X: FormalVectorField) -> FormalVectorField:
    """``H_* X`` for an invertible ``H``: coefficients ``(X h) o H^{-1}``."""
    Hinv = complexified(inverse_map(H))
    coeffs = [compose(X(h), Hinv) for h in complexified(H)]
    N = H.N_dst
    return FormalVectorField(tuple(coeffs[:N]), tuple(coeffs[N:]))


# ---------------------------------------------------------------------------
# degreewise solver

@dataclass(frozen=True, eq=False)
class DegreewiseResult:
    status: str  # "unique", "family" or "none"
    solution: FormalMap | None
    free_dims: dict[int, int]
    free_dimension: int
    directions: tuple[dict, ...]
    violation: str | None
    target_degree: int

    @property
    def extensions(self) -> list[FormalMap]:
        return [] if self.solution is None else [self.solution]

    @property
    def unique(self) -> bool:
        return self.status == "unique"


class NonlinearSystemError(SeriesError):
    pass


Coeffs = dict  # (component, exponent) -> GaussianRational Taylor coefficient

_I = GaussianRational(0, 1)


def _assemble(coeffs: Mapping, N: int, ncomp: int, cap: int) -> list[TruncatedSeries]:
    per = [dict() for _ in range(ncomp)]
    for (i, a), v in coeffs.items():
        if v and sum(a) <= cap:
            per[i][a] = v
    return [S(N, cap, t) for t in per]


def _axpy(p: Mapping, c: GaussianRational, q: Mapping) -> Coeffs:
    out = dict(p)
    if not c:
        return out
    for k, v in q.items():
        nv = out.get(k, GaussianRational(0)) + c * v
        if nv:
            out[k] = nv
        else:
            out.pop(k, None)
    return out


def _real_rank(vectors: Sequence[Mapping], keys) -> int:
    keys = list(keys)
    rows = []
    for v in vectors:
        row = []
        for k in keys:
            c = v.get(k, GaussianRational(0))
            row += [GaussianRational(c.re), GaussianRational(c.im)]
        rows.append(row)
    return scalar_rank(rows) if rows and keys else 0


def _of_weight(N: int, n: int, e: int) -> list[tuple[int, ...]]:
    """Exponents ``(a, b)`` in ``(z, w)`` with ``|a| + 2|b| = e``."""
    out = []
    for bw in range(e // 2 + 1):
        for b in multi_indices(N - n, bw):
            for a in multi_indices(n, e - 2 * bw):
                out.append(a + b)
    return out


def solve_maps_degreewise(M: FormalSubmanifold, Mp: FormalSubmanifold, seed: Jet,
                          target_degree: int, lookahead: int = 1) -> DegreewiseResult:
    """Extend ``seed`` to a map of degree ``target_degree`` by imposing the
    mapping equation one weighted degree at a time.

    Weights are 1 on ``z, chi`` and 2 on ``w, tau``; every term of ``Q`` and
    ``Q'`` has weight at least 2, so the residual of weight ``e`` involves the
    new unknowns ``G`` of weight ``e`` and ``F`` of weight ``e - 1`` together
    with the still-free real directions from earlier weights.  Each stage
    must be affine in these (checked by a doubling test).  Free directions
    are carried forward and ``lookahead`` extra weights are imposed past the
    last output coefficient.
    """
    N, Np, n_p, n = M.N, Mp.N, Mp.n, M.n
    k = seed.order
    D = target_degree
    top = 2 * D + 1 + lookahead
    if min(M.cap, Mp.cap) < top:
        raise ValueError(f"submanifold caps must be >= {top}")
    rw = [1] * (2 * n) + [2] * M.d
    p: Coeffs = {key: v / _fact(key[1]) for key, v in seed.values.items() if v}

    def residual_part(cs, e):
        H = FormalMap(tuple(_assemble(cs, N, Np, e)), n_p, Mp.d)
        out = []
        for r in mapping_residual(H, M, Mp, cap=e):
            out.append(weighted_decompose(r, rw).get(e, S.zero(r.m, e)))
        return out

    # weights <= k only involve seed coefficients
    for e in range(1, k + 1):
        for j, r in enumerate(residual_part(p, e)):
            if not r.is_zero():
                exp, a, _ = r.first_difference(S.zero(r.m, r.cap))
                return DegreewiseResult("none", None, {}, 0, (),
                                        f"seed violates component {j} at weight {e}, exponent {exp}: {a}", D)

    dirs: list[Coeffs] = []
    for e in range(k + 1, top + 1):
        new = [(n_p + j, a) for j in range(Mp.d) for a in _of_weight(N, n, e) if sum(a) > k]
        new += [(i, a) for i in range(n_p) for a in _of_weight(N, n, e - 1) if sum(a) > k]
        # real unknowns: carried directions, then re/im of each new coefficient
        moves = dirs + [{key: unit} for key in new for unit in (ONE, _I)]
        base = residual_part(p, e)
        cols = [[r - b for r, b in zip(residual_part(_axpy(p, ONE, mv), e), base)] for mv in moves]
        probe = {}
        for idx, mv in enumerate(moves):
            probe = _axpy(probe, GaussianRational(idx + 1, 0) / (idx + 2), mv)
        d1 = [r - b for r, b in zip(residual_part(_axpy(p, ONE, probe), e), base)]
        d2 = [r - b for r, b in zip(residual_part(_axpy(p, GaussianRational(2), probe), e), base)]
        if any(not (x + x - y).is_zero() for x, y in zip(d1, d2)):
            raise NonlinearSystemError(f"residual weight {e} is not affine in the unknowns")
        row_keys = sorted({(j, key) for col in cols + [base] for j, r in enumerate(col) for key in r._t})
        ncol = len(cols)
        rows = []
        for j, key in row_keys:
            for part in (0, 1):
                row = [GaussianRational(col[j]._t[key][part]) if key in col[j]._t else GaussianRational(0)
                       for col in cols]
                v = base[j]._t.get(key)
                row.append(-GaussianRational(v[part]) if v else GaussianRational(0))
                rows.append(row)
        red, piv = _scalar_rref(rows) if rows else ([], [])
        if ncol in piv:
            return DegreewiseResult("none", None, {}, 0, (), f"no solution at residual weight {e}", D)
        for r_i, c in enumerate(piv):
            p = _axpy(p, red[r_i][ncol], moves[c])
        nxt = []
        for f in (c for c in range(ncol) if c not in piv):
            vec = dict(moves[f])
            for r_i, c in enumerate(piv):
                if red[r_i][f]:
                    vec = _axpy(vec, -red[r_i][f], moves[c])
            nxt.append(vec)
        dirs = nxt

    out_keys = [(i, a) for i in range(Np) for j in range(1, D + 1) for a in multi_indices(N, j)]
    free_dims = {}
    for j in range(k + 1, D + 1):
        fd = _real_rank(dirs, [key for key in out_keys if sum(key[1]) == j])
        if fd:
            free_dims[j] = fd
    total = _real_rank(dirs, out_keys)
    sol = FormalMap(tuple(_assemble(p, N, Np, D)), n_p, Mp.d)
    kept = tuple({key: v for key, v in d_.items() if sum(key[1]) <= D} for d_ in dirs)
    return DegreewiseResult("family" if total else "unique", sol, free_dims, total,
                            tuple(d_ for d_ in kept if d_), None, D)
