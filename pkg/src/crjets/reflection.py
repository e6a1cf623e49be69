"""Reflection identities: ``F`` of a map expressed through conjugate data.

All identities are evaluated on the submanifold in the coordinates
``(z, chi, w)`` with ``tau = Qbar(chi, z, w)``.  In these coordinates the
tangent fields ``L_j``, ``V_j`` and ``T_j`` act as ``d/dchi_j``, ``d/dz_j``
and ``d/dw_j``, so iterated field applications become coordinate derivatives.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import factorial
from typing import Mapping, Sequence

from .cr_fields import _Span
from .manifold import FormalSubmanifold
from .mapping import FormalMap, Jet, jet
from .nondegen import ell_nondegenerate, multi_indices, multi_indices_upto
from .segre import finite_type_segre, segre_map, segre_rank_report
from .series_core import (
    MAX_EXPONENT,
    GaussianRational,
    SeriesError,
    TruncatedSeries,
    compose,
    cramer_solve,
    implicit_solve,
    scalar_rank,
    unpack,
)

S = TruncatedSeries


class NotFinitelyNondegenerateError(SeriesError):
    pass


class JetConditionError(SeriesError):
    """The chosen index tuple does not give an invertible ``dF/dz`` block."""


def _fact(exp: Sequence[int]) -> int:
    out = 1
    for e in exp:
        out *= factorial(e)
    return out


def _dpow(f: TruncatedSeries, idx: Sequence[int], exp: Sequence[int]) -> TruncatedSeries:
    for i, e in zip(idx, exp):
        for _ in range(e):
            f = f.diff(i)
    return f


def _eval_poly(P: TruncatedSeries, values: Sequence[TruncatedSeries], m: int, cap: int) -> TruncatedSeries:
    """Substitute series (possibly with constant terms) into a polynomial."""
    acc = S.zero(m, cap)
    powers: dict[tuple[int, int], TruncatedSeries] = {}

    def pw(i, e):
        key = (i, e)
        if key not in powers:
            powers[key] = values[i] if e == 1 else pw(i, e - 1) * values[i]
        return powers[key]

    for exp, c in P.terms():
        term = S.const(m, cap, c)
        for i, e in enumerate(exp):
            if e:
                term = term * pw(i, e)
        acc = acc + term
    return acc


# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ThetaData:
    """Target-side data: the chosen ``(alpha^j, l_j)``, the solution ``S`` of
    ``Qbar'_{l_j, chi'^alpha^j}(chi', X, Q'(X, chi', tau')) = r_j`` and the
    universal expansions of ``D^beta c_0``.

    ``S`` lives in the ring ``(chi', tau', r)``.  ``expansions[beta][alpha]``
    is a polynomial in the slot symbols ``a^m_gamma`` (``symbols`` maps
    ``(m, gamma)`` to a variable index) such that
    ``D^beta c_0 = sum_alpha expansions[beta][alpha] * c_alpha``.
    """

    target: FormalSubmanifold
    ell0: int
    alphas: tuple[tuple[int, ...], ...]
    rows: tuple[int, ...]
    S: tuple[TruncatedSeries, ...]
    symbols: Mapping[tuple[int, tuple[int, ...]], int]
    expansions: Mapping[tuple[int, ...], Mapping[tuple[int, ...], TruncatedSeries]]

    @property
    def n(self) -> int:
        return self.target.n

    def solve_c(self, a: Mapping[tuple[int, tuple[int, ...]], TruncatedSeries],
                b: Mapping[tuple[int, ...], TruncatedSeries], kmax: int) -> dict[tuple[int, ...], TruncatedSeries]:
        """Recover ``c_alpha`` for ``1 <= |alpha| <= kmax`` from ``a`` and ``b``.

        Each order solves a square system with matrix ``Sym^k`` of
        ``(a^m_{e_j})``, whose determinant is a power of ``det(a^m_{e_j})``.
        """
        any_val = next(iter(b.values()))
        m, cap = any_val.m, min([v.cap for v in a.values()] + [v.cap for v in b.values()])
        vals = [None] * len(self.symbols)
        for key, idx in self.symbols.items():
            vals[idx] = a[key]
        c: dict[tuple[int, ...], TruncatedSeries] = {}
        for k in range(1, kmax + 1):
            idx = list(multi_indices(self.n, k))
            A = [[_eval_poly(self.expansions[beta].get(al, S.zero(len(vals), 1)), vals, m, cap)
                  for al in idx] for beta in idx]
            rhs = []
            for beta in idx:
                r = b[beta]
                for al, P in self.expansions[beta].items():
                    if sum(al) < k and al in c:
                        r = r - _eval_poly(P, vals, m, cap) * c[al]
                rhs.append(r)
            sol = cramer_solve(A, rhs)
            c.update(zip(idx, sol.x))
        return c

    def R(self, j: int, a, b) -> TruncatedSeries:
        """``R_{alpha^j}`` for the slot values ``a`` and the ``b`` slots of row ``l_j``."""
        return self.solve_c(a, b, sum(self.alphas[j]))[self.alphas[j]]


def _choose_indices(Mp: FormalSubmanifold, ell0: int):
    np_, dp = Mp.n, Mp.d
    qb = Mp.Qbar()
    chi = list(range(np_))
    zp = list(range(np_, 2 * np_))
    span = _Span(np_)
    chosen = []
    for k in range(1, ell0 + 1):
        for al in multi_indices(np_, k):
            for l in range(dp):
                d = _dpow(qb[l], chi, al)
                vec = [d.diff(zk).eval0() for zk in zp]
                if span.add(vec):
                    chosen.append((al, l))
                    if len(chosen) == np_:
                        return chosen
    raise NotFinitelyNondegenerateError(f"no invertible choice of chi'-derivatives up to order {ell0}")


def _universal_expansions(n: int, ell0: int):
    symbols = {}
    for k in range(1, ell0 + 1):
        for m in range(n):
            for g in multi_indices(n, k):
                symbols[(m, g)] = len(symbols)
    ns = len(symbols)
    cap = ell0 + 1

    def sym(m, g):
        return S.var(ns, cap, symbols[(m, g)])

    def derive(P: TruncatedSeries, j: int) -> TruncatedSeries:
        out = S.zero(ns, cap)
        for (m, g), idx in symbols.items():
            dP = P.diff(idx)
            if dP.is_zero():
                continue
            up = tuple(x + (i == j) for i, x in enumerate(g))
            out = out + dP.with_cap(cap) * sym(m, up)
        return out

    zero = (0,) * n
    exp = {zero: {zero: S.one(ns, cap)}}
    for k in range(1, ell0 + 1):
        for beta in multi_indices(n, k):
            j = next(i for i, x in enumerate(beta) if x)
            prev = tuple(x - (i == j) for i, x in enumerate(beta))
            unit_j = tuple(int(i == j) for i in range(n))
            new: dict[tuple[int, ...], TruncatedSeries] = {}
            for al, P in exp[prev].items():
                dP = derive(P, j)
                if not dP.is_zero():
                    new[al] = new[al] + dP if al in new else dP
                for m in range(n):
                    up = tuple(x + (i == m) for i, x in enumerate(al))
                    t = P * sym(m, unit_j)
                    new[up] = new[up] + t if up in new else t
            exp[beta] = {al: P for al, P in new.items() if not P.is_zero()}
    return symbols, exp


def build_theta(Mp: FormalSubmanifold, ell0: int) -> ThetaData:
    """Target data for the reflection identity of an ``ell0``-nondegenerate ``M'``."""
    np_, dp = Mp.n, Mp.d
    chosen = _choose_indices(Mp, ell0)
    cap = Mp.cap
    m = 3 * np_ + dp  # (chi', tau', r, X)
    v = [S.var(m, cap, i) for i in range(m)]
    chi, tau = v[:np_], v[np_:np_ + dp]
    r, X = v[np_ + dp:2 * np_ + dp], v[2 * np_ + dp:]
    qsub = [compose(q, X + chi + tau) for q in Mp.Q]
    qb = Mp.Qbar()
    eqs = []
    for j, (al, l) in enumerate(chosen):
        d = _dpow(qb[l], range(np_), al)
        eqs.append(compose(d, chi + X + qsub) - r[j])
    sol = implicit_solve(eqs, 2 * np_ + dp)
    symbols, exp = _universal_expansions(np_, ell0)
    return ThetaData(Mp, ell0, tuple(a for a, _ in chosen), tuple(l for _, l in chosen),
                     tuple(sol), symbols, exp)


# ---------------------------------------------------------------------------

def jtilde_valid(L: Jet, jt: Sequence[int]) -> bool:
    """``det(lambda^l_{z_{j_p}}) != 0``."""
    rows = []
    for l in range(L.n_dst):
        row = []
        for j in jt:
            e = tuple(int(i == j) for i in range(L.N_src))
            row.append(L[(l, e)])
        rows.append(row)
    return scalar_rank(rows) == L.n_dst


def choose_jtilde(L: Jet | Sequence[Jet], n: int) -> tuple[int, ...]:
    """Lexicographically first index tuple valid for every given jet."""
    jets = [L] if isinstance(L, Jet) else list(L)
    np_ = jets[0].n_dst
    for jt in combinations(range(n), np_):
        if all(jtilde_valid(J, jt) for J in jets):
            return jt
    raise JetConditionError("no index tuple gives an invertible dF/dz block")


@dataclass(frozen=True, eq=False)
class PsiEvaluator:
    """Reflection identity for a fixed ``(M, M', jtilde)``; built without any map."""

    source: FormalSubmanifold
    target: FormalSubmanifold
    jtilde: tuple[int, ...]
    theta: ThetaData

    @classmethod
    def build(cls, M: FormalSubmanifold, Mp: FormalSubmanifold, jtilde: Sequence[int],
              ell0: int | None = None) -> PsiEvaluator:
        if M.n < Mp.n:
            raise SeriesError("the reflection identity needs n >= n'")
        if len(jtilde) != Mp.n or any(j >= M.n for j in jtilde):
            raise SeriesError("jtilde must pick n' of the source z-coordinates")
        if ell0 is None:
            rep = ell_nondegenerate(Mp, min(Mp.cap - 1, Mp.N))
            if rep.ell0 is None:
                raise NotFinitelyNondegenerateError("target is not finitely nondegenerate within cap")
            ell0 = rep.ell0
        return cls(M, Mp, tuple(jtilde), build_theta(Mp, ell0))

    @property
    def ell0(self) -> int:
        return self.theta.ell0

    def delta(self, Fbar: Sequence[TruncatedSeries], chi_idx: Sequence[int]) -> TruncatedSeries:
        """``det(L_{j_p} Fbar_m)``."""
        from .series_core import det

        cols = [chi_idx[j] for j in self.jtilde]
        return det([[Fbar[m].diff(c) for m in range(self.target.n)] for c in cols])

    def on_manifold(self, Hbar: Sequence[TruncatedSeries], chi_idx: Sequence[int]) -> list[TruncatedSeries]:
        """``(F, G)`` as functions on ``M`` from ``Hbar`` restricted to ``M``.

        ``Hbar`` holds the conjugate map components as series in a ring where
        ``chi_idx`` are the ``chi`` coordinates; ``L_j`` acts as ``d/dchi_j``.
        """
        th = self.theta
        np_ = self.target.n
        Fb, Gb = list(Hbar[:np_]), list(Hbar[np_:])
        cols = [chi_idx[j] for j in self.jtilde]
        if not self.delta(Fb, chi_idx).eval0():
            raise JetConditionError("det(L_j Fbar_k) vanishes at 0 for this jtilde")
        a = {}
        for (mm, g) in th.symbols:
            a[(mm, g)] = _dpow(Fb[mm], cols, g)
        rs = []
        for j, (al, l) in enumerate(zip(th.alphas, th.rows)):
            b = {beta: _dpow(Gb[l], cols, beta) for beta in multi_indices_upto(np_, sum(al))}
            rs.append(th.R(j, a, b))
        F = [compose(s, Fb + Gb + rs) for s in th.S]
        G = [compose(q, F + Fb + Gb) for q in self.target.Q]
        return F + G

    # (z, chi, w) coordinates on the source ------------------------------
    def manifold_ring(self):
        M = self.source
        n, d = M.n, M.d
        m = 2 * n + d
        cap = M.cap
        v = [S.var(m, cap, i) for i in range(m)]
        qb_map = list(range(n, 2 * n)) + list(range(n)) + list(range(2 * n, m))
        tau = [q.remap(m, qb_map) for q in M.Qbar()]
        return v[:n], v[n:2 * n], v[2 * n:], tau

    def psi(self, alpha: Sequence[int], Hbar: Sequence[TruncatedSeries]) -> list[TruncatedSeries]:
        """``Psi_alpha`` on ``M`` as series in ``(Z, zeta)`` (free of ``tau``).

        ``Hbar`` are the conjugate components as series in ``zeta = (chi, tau)``;
        only ``Hbar`` and its derivatives enter.
        """
        M = self.source
        n, d, N = M.n, M.d, M.N
        z, chi, w, tau = self.manifold_ring()
        hb = [compose(h, chi + tau) for h in Hbar]
        E = self.on_manifold(hb, list(range(n, 2 * n)))
        zw_idx = list(range(n)) + list(range(2 * n, 2 * n + d))
        out = [_dpow(e, zw_idx, alpha) for e in E]
        # ring (z, chi, w) -> (z, w, chi, tau)
        back = list(range(n)) + list(range(N, N + n)) + list(range(n, N))
        return [e.remap(2 * N, back) for e in out]


def psi_evaluate(M: FormalSubmanifold, Mp: FormalSubmanifold, jtilde: Sequence[int] | None,
                 alpha: Sequence[int], H: FormalMap, evaluator: PsiEvaluator | None = None) -> list[TruncatedSeries]:
    """``Psi_alpha`` fed with the conjugate of ``H``."""
    if jtilde is None:
        jtilde = choose_jtilde(jet(H, 1, M.n), M.n)
    elif not jtilde_valid(jet(H, 1, M.n), jtilde):
        raise JetConditionError(f"det(dF_l/dz_j)(0) vanishes for jtilde={tuple(jtilde)}")
    ev = evaluator or PsiEvaluator.build(M, Mp, jtilde)
    return ev.psi(alpha, [h.conjugate() for h in H.components])


@dataclass(frozen=True)
class BasicIdentityReport:
    ok: bool
    failure: str | None
    checked: tuple[tuple[int, ...], ...]
    caps: tuple[int, ...]


def check_basic_identity(M: FormalSubmanifold, Mp: FormalSubmanifold, H: FormalMap, alpha_max: int,
                         jtilde: Sequence[int] | None = None,
                         evaluator: PsiEvaluator | None = None) -> BasicIdentityReport:
    """``d^alpha H(Z) - Psi_alpha`` vanishes on ``M`` for every ``|alpha| <= alpha_max``."""
    if jtilde is None:
        jtilde = evaluator.jtilde if evaluator else choose_jtilde(jet(H, 1, M.n), M.n)
    ev = evaluator or PsiEvaluator.build(M, Mp, jtilde)
    N = M.N
    Hbar = [h.conjugate() for h in H.components]
    z, chi, w, tau = ev.manifold_ring()
    hb = [compose(h, chi + tau) for h in Hbar]
    E = ev.on_manifold(hb, list(range(M.n, 2 * M.n)))
    m = 2 * M.n + M.d
    zw_idx = list(range(M.n)) + list(range(2 * M.n, m))
    Hm = [h.remap(m, zw_idx) for h in H.components]
    checked, caps = [], []
    for alpha in multi_indices_upto(N, alpha_max):
        for i, (e, h) in enumerate(zip(E, Hm)):
            lhs = _dpow(h, zw_idx, alpha)
            rhs = _dpow(e, zw_idx, alpha)
            diff = lhs.first_difference(rhs)
            if diff is not None:
                exp, x, y = diff
                return BasicIdentityReport(
                    False, f"alpha={alpha} component {i} at (z,chi,w)^{exp}: d^alpha H={x}, Psi={y}",
                    tuple(checked), tuple(caps))
            caps.append(min(lhs.cap, rhs.cap))
        checked.append(alpha)
    return BasicIdentityReport(True, None, tuple(checked), tuple(caps))


# ---------------------------------------------------------------------------
# iteration along Segre mappings

def _h_coefficient(E: TruncatedSeries, nx: int, h_idx: Sequence[int], zero_idx: Sequence[int],
                   alpha: Sequence[int]) -> TruncatedSeries:
    """Coefficient of ``h^alpha`` (with the ``zero_idx`` variables set to 0) as a
    series in the first ``nx`` variables."""
    t = {}
    target = tuple(alpha)
    for k, v in E._t.items():
        exp = unpack(k, E.m)
        if any(exp[i] for i in zero_idx):
            continue
        if tuple(exp[i] for i in h_idx) != target:
            continue
        t[exp[:nx]] = GaussianRational._raw(*v)
    return S(nx, E.cap - sum(alpha), t)


def jet_values(L: Jet) -> dict[tuple[int, tuple[int, ...]], TruncatedSeries]:
    """The jet as constant series in an empty ring (the values along ``v^0``)."""
    out = {}
    for i in range(L.N_dst):
        for k in range(0, L.order + 1):
            for a in multi_indices(L.N_src, k):
                c = L[(i, a)] if k else GaussianRational(0)
                out[(i, a)] = S.const(0, MAX_EXPONENT, c) if c else S.zero(0, MAX_EXPONENT)
    return out


def segre_chain(ev: PsiEvaluator, L: Jet, k: int, cap: int | None = None):
    """``(d^alpha H) o v^s`` for ``s = 0..k`` and ``|alpha| <= ell0 (k - s)``,
    computed from the jet ``L`` alone by iterating the reflection identity.

    Returns a list indexed by ``s`` of dicts ``(component, alpha) -> series``
    in the ``s*n`` Segre variables.
    """
    M = ev.source
    n, d, N = M.n, M.d, M.N
    ell0 = ev.ell0
    if L.order < ell0 * k:
        raise ValueError(f"need a jet of order {ell0 * k}")
    cap = M.cap if cap is None else cap
    chain = [{key: v for key, v in jet_values(L).items() if sum(key[1]) <= ell0 * k}]
    for s in range(k):
        K = ell0 * (k - s)
        prev = chain[-1]
        nx = (s + 1) * n
        m = nx + 2 * n + d
        hz = list(range(nx, nx + n))
        hc = list(range(nx + n, nx + 2 * n))
        hw = list(range(nx + 2 * n, m))
        var = lambda i: S.var(m, cap, i)
        vs = segre_map(M, s + 1)
        lift = list(range(nx))
        z = [var(i) + var(hz[i]) for i in range(n)]
        w = [u.remap(m, lift, cap) + var(hw[j]) for j, u in enumerate(vs.u)]
        chi_c = [var(n + i) if s >= 1 else S.zero(m, cap) for i in range(n)]
        chi = [c + var(hc[i]) for i, c in enumerate(chi_c)]
        tau = [compose(q, chi + z + w) for q in M.Qbar()]
        if s >= 1:
            tau_c = [c.remap(m, lift, cap) for c in segre_map(M, s).conjugate_shifted()[n:]]
        else:
            tau_c = [S.zero(m, cap) for _ in range(d)]
        eta = [var(hc[i]) for i in range(n)] + [t - c for t, c in zip(tau, tau_c)]
        shift = [n + i for i in range(s * n)]
        # Taylor expansion of Hbar around vbar^s
        hb = []
        for i in range(ev.target.N):
            acc = S.zero(m, cap)
            for kk in range(K + 1):
                for mu in multi_indices(N, kk):
                    c = prev[(i, mu)]
                    if c.is_zero():
                        continue
                    c = c.conjugate().remap(m, shift) if s else S.const(m, cap, c.eval0().conjugate())
                    # eta vanishes at h = 0, so eta^mu restores the |mu| degrees lost by c
                    term = c.with_cap(min(c.cap + kk, cap))
                    for j, e in enumerate(mu):
                        if e:
                            term = term * eta[j] ** e
                    acc = acc + term.scale(GaussianRational(1) / _fact(mu))
            hb.append(acc)
        E = ev.on_manifold(hb, hc)
        nxt = {}
        for kk in range(K - ell0 + 1):
            for al in multi_indices(N, kk):
                for i, e in enumerate(E):
                    c = _h_coefficient(e, nx, hz + hw, hc, al)
                    nxt[(i, al)] = c.scale(_fact(al)) if kk else c
        chain.append(nxt)
    return chain


def direct_chain(H: FormalMap, M: FormalSubmanifold, k: int, ell0: int):
    """``(d^alpha H) o v^s`` computed directly from ``H``."""
    N = M.N
    out = []
    for s in range(k + 1):
        vs = segre_map(M, s)
        level = {}
        for kk in range(ell0 * (k - s) + 1):
            for al in multi_indices(N, kk):
                for i, h in enumerate(H.components):
                    dh = _dpow(h, range(N), al)
                    if s == 0:
                        level[(i, al)] = S.const(0, dh.cap, dh.eval0()) if dh.eval0() else S.zero(0, dh.cap)
                    else:
                        level[(i, al)] = compose(dh.truncate(dh.cap), list(vs.components))
        out.append(level)
    return out


def _compare_levels(a, b):
    for key in a:
        x, y = a[key], b[key]
        if x.m == 0 or y.m == 0:
            if x.eval0() != y.eval0():
                return key, (), x.eval0(), y.eval0()
            continue
        diff = x.first_difference(y)
        if diff is not None:
            return (key,) + diff
    return None


@dataclass(frozen=True)
class JetDeterminationReport:
    verdict: str  # "equal", "different" or "precondition"
    message: str
    k0: int | None
    ell0: int | None
    jtilde: tuple[int, ...] | None
    parity: int | None
    cap: int | None

    @property
    def equal(self) -> bool:
        return self.verdict == "equal"


def jet_determination(M: FormalSubmanifold, Mp: FormalSubmanifold, H1: FormalMap, H2: FormalMap,
                      k0: int | None = None, evaluator: PsiEvaluator | None = None) -> JetDeterminationReport:
    """Run the induction along Segre mappings and conclude ``H1 = H2`` up to cap."""
    ft = finite_type_segre(M)
    if ft.verdict != "finite":
        return JetDeterminationReport("precondition", f"source is not of finite type ({ft.verdict})",
                                      None, None, None, None, None)
    k1 = ft.k1
    k0 = k1 if k0 is None else k0
    if k0 < k1:
        return JetDeterminationReport("precondition", f"k0={k0} is below k1={k1}", k0, None, None, None, None)
    if evaluator is None:
        rep = ell_nondegenerate(Mp, min(Mp.cap - 1, Mp.N))
        if rep.ell0 is None:
            return JetDeterminationReport("precondition", "target not finitely nondegenerate within cap",
                                          k0, None, None, None, None)
        ell0 = rep.ell0
    else:
        ell0 = evaluator.ell0
    order = k0 * ell0
    J1, J2 = jet(H1, order, M.n), jet(H2, order, M.n)
    diff = J1.first_difference(J2)
    if diff is not None:
        (i, a), x, y = diff
        return JetDeterminationReport("precondition",
                                      f"jets differ at order {sum(a)}: component {i}, derivative {a}: {x} vs {y}",
                                      k0, ell0, None, None, None)
    try:
        jt = evaluator.jtilde if evaluator else choose_jtilde(J1, M.n)
    except JetConditionError as e:
        return JetDeterminationReport("precondition", str(e), k0, ell0, None, None, None)
    ev = evaluator or PsiEvaluator.build(M, Mp, jt, ell0)
    rk = segre_rank_report(M, k0)
    if rk.rank != M.N:
        return JetDeterminationReport("precondition", f"Rk(v^{k0}) = {rk.rank} < N", k0, ell0, jt, None, None)
    chain = segre_chain(ev, J1, k0)
    for idx, H in enumerate((H1, H2), start=1):
        direct = direct_chain(H, M, k0, ell0)
        for s in range(k0 + 1):
            bad = _compare_levels(chain[s], direct[s])
            if bad is not None:
                return JetDeterminationReport(
                    "different", f"map {idx} disagrees with the reflection chain at step {s}: {bad}",
                    k0, ell0, jt, k0 % 2, None)
    # H1 and H2 agree along v^{k0}; full rank there forces equality
    cap = min(H1.cap, H2.cap, M.cap, Mp.cap)
    d = H1.with_cap(cap).first_difference(H2.with_cap(cap))
    if d is not None:
        return JetDeterminationReport("different", f"maps differ at component {d[0]}, exponent {d[1]}",
                                      k0, ell0, jt, k0 % 2, cap)
    return JetDeterminationReport("equal", f"equal up to degree {cap}", k0, ell0, jt, k0 % 2, cap)
