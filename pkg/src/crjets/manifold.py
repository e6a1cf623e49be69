"""Formal generic submanifolds and their normal coordinates.

Ambient coordinates are ``Z = (z, w)`` with ``z`` of size ``n`` and ``w`` of
size ``d``; their conjugate counterparts are ``zeta = (chi, tau)``.  Series in
``(Z, zeta)`` use the variable order ``z, w, chi, tau``.  The normal form ``Q``
is a vector of series in ``(z, chi, tau)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .series_core import (
    GaussianRational,
    SeriesError,
    TruncatedSeries,
    compose,
    implicit_solve,
    scalar_rank,
    _scalar_rref,
    unpack,
)

S = TruncatedSeries


class Layout(NamedTuple):
    """Index bookkeeping for the ring ``(z, w, chi, tau)``."""

    n: int
    d: int

    @property
    def N(self) -> int:
        return self.n + self.d

    @property
    def z(self) -> list[int]:
        return list(range(self.n))

    @property
    def w(self) -> list[int]:
        return list(range(self.n, self.N))

    @property
    def chi(self) -> list[int]:
        return list(range(self.N, self.N + self.n))

    @property
    def tau(self) -> list[int]:
        return list(range(self.N + self.n, 2 * self.N))

    @property
    def Z(self) -> list[int]:
        return list(range(self.N))

    @property
    def zeta(self) -> list[int]:
        return list(range(self.N, 2 * self.N))

    def swap(self) -> list[int]:
        """Index map exchanging ``Z`` and ``zeta``."""
        return self.zeta + self.Z

    def q_to_full(self) -> list[int]:
        """Slots of ``Q(z, chi, tau)`` inside the full ring."""
        return self.z + self.chi + self.tau

    def qbar_to_full(self) -> list[int]:
        """Slots of ``Qbar(chi, z, w)`` inside the full ring."""
        return self.chi + self.z + self.w


class SubmanifoldReport(NamedTuple):
    reality_ok: bool
    codim_rank_ok: bool
    generic_ok: bool
    messages: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return self.reality_ok and self.codim_rank_ok and self.generic_ok


class CheckResult(NamedTuple):
    ok: bool
    failure: str | None = None

    def __bool__(self):
        return self.ok


@dataclass(frozen=True, eq=False)
class FormalSubmanifold:
    """A normalized formal generic submanifold.

    ``rho`` is a real defining vector in normal coordinates, ``Q`` the normal
    form, ``coordinate_change`` expresses the input coordinates in terms of
    the normal ones, and ``certificate`` is the unit matrix ``a`` with
    ``a (w - Q) = rho`` up to cap.
    """

    n: int
    d: int
    Q: tuple[TruncatedSeries, ...]
    rho: tuple[TruncatedSeries, ...]
    coordinate_change: tuple[TruncatedSeries, ...] = ()
    certificate: tuple[tuple[TruncatedSeries, ...], ...] = ()
    name: str = field(default="", compare=False)

    @property
    def N(self) -> int:
        return self.n + self.d

    @property
    def cap(self) -> int:
        return min(q.cap for q in self.Q)

    @property
    def layout(self) -> Layout:
        return Layout(self.n, self.d)

    def Qbar(self) -> list[TruncatedSeries]:
        return conjugate_normal_form(self)

    def Q_full(self) -> list[TruncatedSeries]:
        """``Q(z, chi, tau)`` as series in the full ring."""
        L = self.layout
        return [q.remap(2 * L.N, L.q_to_full()) for q in self.Q]

    def Qbar_full(self) -> list[TruncatedSeries]:
        """``Qbar(chi, z, w)`` as series in the full ring."""
        L = self.layout
        return [q.remap(2 * L.N, L.qbar_to_full()) for q in self.Qbar()]

    def rho_complex(self) -> list[TruncatedSeries]:
        """The complex defining vector ``w - Q(z, chi, tau)``."""
        L = self.layout
        return [S.var(2 * L.N, self.cap, L.w[j]) - q for j, q in enumerate(self.Q_full())]

    def with_cap(self, cap: int) -> FormalSubmanifold:
        tr = lambda xs: tuple(x.truncate(cap) for x in xs)
        return FormalSubmanifold(self.n, self.d, tr(self.Q), tr(self.rho), tr(self.coordinate_change),
                                 tuple(tr(r) for r in self.certificate), self.name)

    def restrict_to_manifold(self, f: TruncatedSeries) -> TruncatedSeries:
        """Reduce a series in the full ring by ``tau = Qbar(chi, z, w)``."""
        L = self.layout
        subs = [S.var(2 * L.N, f.cap, i) for i in range(2 * L.N)]
        for j, qb in enumerate(self.Qbar_full()):
            subs[L.tau[j]] = qb
        return compose(f, subs)


# ---------------------------------------------------------------------------

def conjugate_swap(f: TruncatedSeries, N: int) -> TruncatedSeries:
    """``fbar(zeta, Z)``: conjugate coefficients and exchange ``Z`` with ``zeta``."""
    return f.conjugate().remap(2 * N, list(range(N, 2 * N)) + list(range(N)))


def _linear_part(rho: Sequence[TruncatedSeries], cols: Sequence[int]) -> list[list[GaussianRational]]:
    return [[f.diff(c).eval0() for c in cols] for f in rho]


def check_defining(rho: Sequence[TruncatedSeries], N: int, d: int) -> SubmanifoldReport:
    """Diagnose reality, independence of the differentials and genericity."""
    msgs = []
    if len(rho) != d or any(f.m != 2 * N for f in rho):
        return SubmanifoldReport(False, False, False, (f"expected {d} series in {2 * N} variables",))
    if any(f.eval0() for f in rho):
        msgs.append("rho(0) != 0")
    reality = True
    for j, f in enumerate(rho):
        diff = f.first_difference(conjugate_swap(f, N))
        if diff is not None:
            reality = False
            exp, a, b = diff
            msgs.append(f"reality fails for rho_{j} at {exp}: {a} vs {b}")
    full = scalar_rank(_linear_part(rho, range(2 * N))) == d
    if not full:
        msgs.append("differentials of rho are dependent at 0")
    generic = full and scalar_rank(_linear_part(rho, range(N))) == d
    if full and not generic:
        msgs.append("not generic: d_Z rho(0) has rank < d")
    if any(f.eval0() for f in rho):
        full = generic = False
    return SubmanifoldReport(reality, full, generic, tuple(msgs))


def symmetrize(rho: Sequence[TruncatedSeries], c) -> list[TruncatedSeries]:
    """Multiply every component by the constant unit ``c`` (explicit opt-in)."""
    c = GaussianRational.coerce(c)
    if not c:
        raise SeriesError("scaling by zero")
    return [f.scale(c) for f in rho]


def graph_to_rho(phi: Sequence[TruncatedSeries], n: int, d: int) -> list[TruncatedSeries]:
    """Defining vector of ``Im w = phi(z, zbar, Re w)``.

    ``phi[j]`` lives in the variables ``(z, zbar, s)`` with ``s = Re w``.
    """
    N = n + d
    L = Layout(n, d)
    if len(phi) != d:
        raise SeriesError(f"need {d} graph components")
    out = []
    for j, p in enumerate(phi):
        if p.m != 2 * n + d:
            raise SeriesError("graph function must live in (z, zbar, Re w)")
        cap = p.cap
        full = [S.var(2 * N, cap, i) for i in range(2 * N)]
        s = [(full[L.w[k]] + full[L.tau[k]]) / 2 for k in range(d)]
        ph = compose(p, [full[i] for i in L.z] + [full[i] for i in L.chi] + s)
        out.append((full[L.w[j]] - full[L.tau[j]]) / GaussianRational(0, 2) - ph)
    return out


def _rho_to_Q(rho: Sequence[TruncatedSeries], L: Layout) -> list[TruncatedSeries]:
    """Solve ``rho = 0`` for ``w = Q(z, chi, tau)``."""
    order = L.z + L.chi + L.tau + L.w
    pos = [0] * (2 * L.N)
    for new, old in enumerate(order):
        pos[old] = new
    F = [f.remap(2 * L.N, pos) for f in rho]
    return implicit_solve(F, 2 * L.n + L.d)


def _change(rho, L: Layout, wmap: Sequence[TruncatedSeries]):
    """Apply ``w = wmap(z, w')`` (and its conjugate on ``tau``) to ``rho``.

    ``wmap`` entries live in ``(z, w)``.
    """
    N = L.N
    cap = min(f.cap for f in rho)
    full = [S.var(2 * N, cap, i) for i in range(2 * N)]
    subs = list(full)
    for j, f in enumerate(wmap):
        subs[L.w[j]] = f.remap(2 * N, L.Z)
        subs[L.tau[j]] = f.conjugate().remap(2 * N, L.zeta)
    return [compose(f, subs) for f in rho], subs


def normalize(rho: Sequence[TruncatedSeries], N: int, d: int, name: str = "") -> FormalSubmanifold:
    """Bring a real defining vector into normal coordinates."""
    rep = check_defining(rho, N, d)
    if not rep.reality_ok:
        raise SeriesError("rho is not real: " + "; ".join(rep.messages))
    if not rep.generic_ok:
        raise SeriesError("rho does not define a generic submanifold: " + "; ".join(rep.messages))
    n = N - d
    L = Layout(n, d)
    cap = min(f.cap for f in rho)
    one = lambda i: S.var(N, cap, i)
    # z-part of the coordinate change, accumulated as Z_old = change(Z_new)
    change = [one(i) for i in range(N)]

    def apply(rho, sub_Z):
        nonlocal change
        subs = [s.remap(2 * N, L.Z) for s in sub_Z] + \
               [s.conjugate().remap(2 * N, L.zeta) for s in sub_Z]
        change = [compose(c, sub_Z) for c in change]
        return [compose(f, subs) for f in rho]

    # (a) permute so that the last d coordinates carry an invertible d_w rho(0)
    lin = _linear_part(rho, range(N))
    _, piv = _scalar_rref(lin)
    perm_w = piv[:d]
    perm_z = [i for i in range(N) if i not in perm_w]
    new_of_old = [0] * N
    for k, old in enumerate(perm_z + perm_w):
        new_of_old[old] = k
    if new_of_old != list(range(N)):
        rho = apply(rho, [one(new_of_old[i]) for i in range(N)])

    Q = _rho_to_Q(rho, L)

    # (b) linear change w = P w' making dQ/dtau(0) the identity
    C = [[q.diff(2 * n + k).eval0() for k in range(d)] for q in Q]
    if any(C[i][k] != (1 if i == k else 0) for i in range(d) for k in range(d)):
        P = None
        for a in (GaussianRational(1), GaussianRational(0, 1), GaussianRational(1, 1),
                  GaussianRational(1, 2), GaussianRational(2, 1), GaussianRational(1, 3)):
            cand = [[(a if i == k else 0) + a.conjugate() * C[i][k] for k in range(d)] for i in range(d)]
            if scalar_rank(cand) == d:
                P = cand
                break
        if P is None:
            raise SeriesError("could not normalize the linear part")
        sub = [one(i) for i in range(n)] + \
              [sum((one(n + k).scale(P[j][k]) for k in range(d)), S.zero(N, cap)) for j in range(d)]
        rho = apply(rho, sub)
        Q = _rho_to_Q(rho, L)

    # (c) make Q(0, 0, tau) = tau: w = psi(w') with psi^{-1} = (id + qbar)/2
    zero_zchi = [S.zero(d, cap)] * (2 * n) + [S.var(d, cap, k) for k in range(d)]
    q = [compose(f, zero_zchi) for f in Q]
    ident = [S.var(d, cap, k) for k in range(d)]
    if any(not a.same(b) for a, b in zip(q, ident)):
        # F(s, y) = (y + qbar(y))/2 - s, solved for y = psi(s)
        ys = [S.var(2 * d, cap, d + k) for k in range(d)]
        F = []
        for k in range(d):
            qb = compose(q[k].conjugate(), ys)
            F.append((ys[k] + qb) / 2 - S.var(2 * d, cap, k))
        psi = implicit_solve(F, d)
        sub = [one(i) for i in range(n)] + [p.remap(N, list(range(n, N))) for p in psi]
        rho = apply(rho, sub)
        Q = _rho_to_Q(rho, L)

    # (d) make Q(z, 0, tau) = tau: w = Q(z, 0, w')
    zq = [S.var(N, cap, i) for i in range(n)] + [S.zero(N, cap)] * n + \
         [S.var(N, cap, n + k) for k in range(d)]
    phi = [compose(f, zq) for f in Q]
    if any(not a.same(S.var(N, cap, n + k)) for k, a in enumerate(phi)):
        sub = [one(i) for i in range(n)] + phi
        rho = apply(rho, sub)
        Q = _rho_to_Q(rho, L)

    cert = _certificate(rho, Q, L)
    M = FormalSubmanifold(n, d, tuple(Q), tuple(rho), tuple(change),
                          tuple(tuple(r) for r in cert), name)
    bad = check_normal(M)
    if not bad:
        raise SeriesError(f"normalization failed: {bad.failure}")
    return M


def _certificate(rho, Q, L: Layout) -> list[list[TruncatedSeries]]:
    """Matrix ``a`` with ``a (w - Q) = rho`` in the full ring."""
    N, d = L.N, L.d
    cap = min(f.cap for f in rho)
    full = [S.var(2 * N, cap, i) for i in range(2 * N)]
    Qf = [q.remap(2 * N, L.q_to_full()) for q in Q]
    # write w = Q + s with s in the w slots, divide out s column by column
    subs = list(full)
    for j in range(d):
        subs[L.w[j]] = Qf[j] + full[L.w[j]]
    a = [[{} for _ in range(d)] for _ in range(d)]
    for i, f in enumerate(rho):
        g = compose(f, subs)
        for k, v in g._t.items():
            exp = unpack(k, 2 * N)
            js = [j for j in range(d) if exp[L.w[j]]]
            if not js:
                continue  # vanishes on w = Q up to cap, checked below
            j = js[0]
            e = list(exp)
            e[L.w[j]] -= 1
            a[i][j][tuple(e)] = GaussianRational._raw(*v)
    back = list(full)
    for j in range(d):
        back[L.w[j]] = full[L.w[j]] - Qf[j]
    out = [[compose(S(2 * N, cap - 1, t), back) for t in row] for row in a]
    return out


def from_normal_form(Q: Sequence[TruncatedSeries], n: int, d: int, name: str = "") -> FormalSubmanifold:
    """Wrap a normal form; the stored real ``rho`` is ``(g - gbar(zeta, Z))/(4i)``
    with ``g = w - Q``."""
    L = Layout(n, d)
    N = L.N
    cap = min(q.cap for q in Q)
    full = [S.var(2 * N, cap, i) for i in range(2 * N)]
    rho = []
    for j, q in enumerate(Q):
        g = full[L.w[j]] - q.remap(2 * N, L.q_to_full())
        rho.append((g - conjugate_swap(g, N)) / GaussianRational(0, 4))
    M = FormalSubmanifold(n, d, tuple(Q), tuple(rho), tuple(S.var(N, cap, i) for i in range(N)),
                          (), name)
    bad = check_normal(M)
    if not bad:
        raise SeriesError(f"not a normal form: {bad.failure}")
    return M


def conjugate_normal_form(M: FormalSubmanifold) -> list[TruncatedSeries]:
    """``Qbar(chi, z, w)``: conjugated coefficients, slots read as ``(chi, z, w)``."""
    return [q.conjugate() for q in M.Q]


def check_normal(M: FormalSubmanifold) -> CheckResult:
    """Both normal-form conditions and both involution identities."""
    n, d = M.n, M.d
    cap = M.cap
    m = 2 * n + d
    v = [S.var(m, cap, i) for i in range(m)]
    zero = S.zero(m, cap)
    for j, q in enumerate(M.Q):
        tau = v[2 * n + j]
        a = compose(q, [zero] * n + v[n:])
        if not a.same(tau):
            return CheckResult(False, f"Q_{j}(0, chi, tau) != tau_{j}")
        b = compose(q, v[:n] + [zero] * n + v[2 * n:])
        if not b.same(tau):
            return CheckResult(False, f"Q_{j}(z, 0, tau) != tau_{j}")
    return check_involution(M)


def check_involution(M: FormalSubmanifold) -> CheckResult:
    """``Q(z, chi, Qbar(chi, z, w)) = w`` and ``Qbar(chi, z, Q(z, chi, tau)) = tau``."""
    n, d = M.n, M.d
    m = 2 * n + d
    cap = M.cap
    v = [S.var(m, cap, i) for i in range(m)]
    Qb = conjugate_normal_form(M)
    # ring (z, chi, w): Qbar slots (chi, z, w)
    inner = [compose(qb, v[n:2 * n] + v[:n] + v[2 * n:]) for qb in Qb]
    for j, q in enumerate(M.Q):
        r = compose(q, v[:2 * n] + inner)
        diff = r.first_difference(v[2 * n + j])
        if diff is not None:
            return CheckResult(False, f"Q(z,chi,Qbar(chi,z,w))_{j} != w_{j} at {diff[0]}: {diff[1]} vs {diff[2]}")
    inner = list(M.Q)
    for j, qb in enumerate(Qb):
        r = compose(qb, v[n:2 * n] + v[:n] + inner)
        diff = r.first_difference(v[2 * n + j])
        if diff is not None:
            return CheckResult(False, f"Qbar(chi,z,Q(z,chi,tau))_{j} != tau_{j} at {diff[0]}: {diff[1]} vs {diff[2]}")
    return CheckResult(True)
