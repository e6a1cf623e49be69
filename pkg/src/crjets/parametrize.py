"""Jet parametrization of CR submersive maps at concrete jets.

Pipeline: ``Xi = H o v^{2k}`` from the jet alone, singular inversion of the
Segre map ``v^{2k}``, extraction of ``Phi`` by division along a line, and
recovery of higher derivatives from ``H o v^k``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import combinations
from math import factorial
from typing import Mapping, Sequence

from .manifold import FormalSubmanifold
from .mapping import FormalMap, Jet, jet
from .nondegen import ell_nondegenerate, multi_indices
from .reflection import (
    NotFinitelyNondegenerateError,
    PsiEvaluator,
    choose_jtilde,
    segre_chain,
)
from .segre import diagonal_embedding, finite_type_segre, segre_map
from .series_core import (
    GaussianRational,
    SeriesError,
    SingularError,
    TruncatedSeries,
    compose,
    det,
    rank_report,
    scalar_solve,
    singular_implicit_solve,
)

S = TruncatedSeries


class RecoveryError(SeriesError):
    pass


class CancellationError(SeriesError):
    """The ``t``-dependent parts do not cancel: the input is not a jet of a map."""

    def __init__(self, message: str, report: "PhiHatReport"):
        super().__init__(message)
        self.report = report


def _fact(exp: Sequence[int]) -> int:
    out = 1
    for e in exp:
        out *= factorial(e)
    return out


def _source_data(M: FormalSubmanifold, Mp: FormalSubmanifold, evaluator: PsiEvaluator | None = None):
    ft = finite_type_segre(M)
    if ft.verdict != "finite":
        raise SeriesError(f"source is not of finite type within cap ({ft.verdict})")
    if evaluator is not None:
        return ft.k1, evaluator.ell0
    rep = ell_nondegenerate(Mp, min(Mp.cap - 1, Mp.N))
    if rep.ell0 is None:
        raise NotFinitelyNondegenerateError("target is not finitely nondegenerate within cap")
    return ft.k1, rep.ell0


def strip_double_prime(L: Jet) -> Jet:
    """Drop ``z``-only derivatives of ``G``; the pipeline never reads them."""
    return Jet(L.order, L.n_src, L.d_src, L.n_dst, L.d_dst,
               {k: v for k, v in L.values.items() if not L.is_double_prime(k)})


def _evaluator(M, Mp, jtilde, L, ell0, evaluator):
    if evaluator is not None:
        return evaluator
    jt = choose_jtilde(L, M.n) if jtilde is None else tuple(jtilde)
    return PsiEvaluator.build(M, Mp, jt, ell0)


def xi_map(M: FormalSubmanifold, Mp: FormalSubmanifold, jtilde: Sequence[int] | None, L: Jet, k: int,
           evaluator: PsiEvaluator | None = None) -> list[TruncatedSeries]:
    """``H o v^k`` as series in the ``k*n`` Segre variables, from the jet only."""
    if k == 0:
        return [S.zero(0, M.cap) for _ in range(Mp.N)]
    ev = evaluator
    if ev is None:
        rep = ell_nondegenerate(Mp, min(Mp.cap - 1, Mp.N))
        if rep.ell0 is None:
            raise NotFinitelyNondegenerateError("target is not finitely nondegenerate within cap")
        ev = _evaluator(M, Mp, jtilde, L, rep.ell0, None)
    chain = segre_chain(ev, strip_double_prime(L), k)
    return [chain[k][(i, (0,) * M.N)] for i in range(Mp.N)]


# ---------------------------------------------------------------------------
# singular inversion of v^{2k}

def _direction_candidates(m: int):
    yield tuple([1] * m)
    yield tuple(range(1, m + 1))
    for i in range(m):
        yield tuple(int(j == i) for j in range(m))
    for i, j in combinations(range(m), 2):
        yield tuple(int(p in (i, j)) for p in range(m))
    yield tuple((-1) ** p for p in range(m))


@dataclass(frozen=True, eq=False)
class SegreInversion:
    """Solution of ``u^{2k}(z, x, m_x(x), y) = w`` for ``d`` chosen variables ``y``.

    ``x`` are Segre blocks ``1..k``; the remaining blocks ``k+1..2k-1`` are
    mirrored from ``x`` except the chosen ``y_vars``, which are
    ``m_y(x) + delta(x) * theta(x, z/delta^2, w/delta^2)``.
    """

    k: int
    n: int
    d: int
    y_vars: tuple[int, ...]
    mirror: Mapping[int, int]
    delta: TruncatedSeries
    theta: tuple[TruncatedSeries, ...]
    direction: tuple[int, ...]
    delta_t: TruncatedSeries
    order: int
    back_substitution_ok: bool

    @property
    def nx(self) -> int:
        return self.k * self.n

    def substitution(self, cap: int) -> list[TruncatedSeries]:
        """Point of ``C^{2kn}`` along ``x = t * direction`` in the ring
        ``(t, zs, ws)`` with ``z = delta_t^2 zs`` and ``w = delta_t^2 ws``."""
        n, d, nx = self.n, self.d, self.nx
        m = 1 + n + d
        t = S.var(m, cap, 0)
        dt = self.delta_t.remap(m, [0], cap)
        x = [t.scale(c) for c in self.direction]
        tw = [S.var(m, cap, 1 + i) for i in range(n + d)]
        th = [compose(f, x + tw, cap) for f in self.theta]
        out = [dt * dt * S.var(m, cap, 1 + i) for i in range(n)] + x
        for p in range(nx + n, 2 * self.k * n):
            val = x[self.mirror[p] - n]
            if p in self.y_vars:
                val = val + dt * th[self.y_vars.index(p)]
            out.append(val)
        return out


def invert_segre(M: FormalSubmanifold, k1: int | None = None) -> SegreInversion:
    """Choose ``y''``, solve the singular system and pick a line with ``delta != 0``."""
    if k1 is None:
        ft = finite_type_segre(M)
        if ft.verdict != "finite":
            raise SeriesError(f"source is not of finite type within cap ({ft.verdict})")
        k1 = ft.k1
    n, d, k = M.n, M.d, k1
    cache = M.__dict__.setdefault("_inversion_cache", {}) if hasattr(M, "__dict__") else {}
    if k in cache:
        return cache[k]
    v = segre_map(M, 2 * k)
    D = diagonal_embedding(k, n)
    second = list(range((k + 1) * n, 2 * k * n))
    choice = None
    for combo in combinations(second, d):
        J = [[D.apply(u.diff(y)) for y in combo] for u in v.u]
        if rank_report(J).rank == d:
            choice = combo
            break
    if choice is None:
        raise SingularError("no choice of d mirrored variables has full rank; contradicts finite type")
    mirror = {}
    for p in second:
        b, i = divmod(p, n)
        mirror[p] = (2 * k - b) * n + i
    nx = k * n
    m = nx + n + d
    cap = M.cap
    xs = [S.var(m, cap, i) for i in range(nx)]
    ts = [S.var(m, cap, nx + i) for i in range(n)]
    subs = list(ts) + xs
    for p in second:
        val = xs[mirror[p] - n]
        if p in choice:
            val = val + S.var(m, cap, nx + n + choice.index(p))
        subs.append(val)
    u = [compose(f, subs) for f in v.u]
    theta, delta = singular_implicit_solve(u, nx, n)
    # back-substitution u(x, delta^2 t', delta theta) = delta^2 w'
    mm = nx + n + d
    dM = delta.remap(mm, list(range(nx)))
    d2 = dM * dM
    back = [S.var(mm, cap, i) for i in range(nx)] + [d2 * S.var(mm, cap, nx + i) for i in range(n)]
    back += [dM * th for th in theta]
    ok = all(compose(f, back).first_difference(d2 * S.var(mm, cap, nx + n + j)) is None
             for j, f in enumerate(u))
    if not ok:
        raise SeriesError("back-substitution of the Segre inversion failed")
    for direction in _direction_candidates(nx):
        t = S.var(1, cap, 0)
        dt = compose(delta, [t.scale(c) for c in direction])
        if not dt.is_zero():
            inv = SegreInversion(k, n, d, tuple(choice), mirror, delta, tuple(theta), direction, dt,
                                 dt.order(), ok)
            cache[k] = inv
            return inv
    raise SingularError("no direction in the scan list makes delta nonzero")


# ---------------------------------------------------------------------------
# extraction of Phi along the line

@dataclass(frozen=True, eq=False)
class PhiHatReport:
    map: FormalMap
    degree: int
    cancellation_ok: bool
    failure: str | None
    margins: Mapping[int, int]  # total degree p -> number of t-orders checked beyond the extracted one
    inversion: SegreInversion


def working_cap(M: FormalSubmanifold, degree: int, k1: int, ell0: int, e: int) -> int:
    """Source cap needed to extract ``Phi`` up to ``degree``."""
    return degree * (2 * e + 1) + 2 * k1 * ell0


def _max_degree(M: FormalSubmanifold, k1: int, ell0: int, e: int) -> int:
    return (M.cap - 2 * k1 * ell0) // (2 * e + 1)


def phi_hat_report(M: FormalSubmanifold, Mp: FormalSubmanifold, jtilde: Sequence[int] | None, L: Jet,
                   degree: int | None = None, evaluator: PsiEvaluator | None = None) -> PhiHatReport:
    k1, ell0 = _source_data(M, Mp, evaluator)
    if L.order < 2 * k1 * ell0:
        raise ValueError(f"need a jet of order {2 * k1 * ell0}")
    inv = invert_segre(M, k1)
    e = inv.order
    top = _max_degree(M, k1, ell0, e)
    if degree is None:
        degree = top
    if degree > top or degree < 0:
        raise ValueError(f"degree {degree} needs source cap >= {working_cap(M, degree, k1, ell0, e)}")
    ev = _evaluator(M, Mp, jtilde, L, ell0, evaluator)
    xi = xi_map(M, Mp, ev.jtilde, L, 2 * k1, ev)
    cp = degree * (2 * e + 1)
    sigma = inv.substitution(cp)
    P = [compose(f.truncate(cp), sigma, cp) for f in xi]
    nz = M.N
    dt = [inv.delta_t.coeff((j,)) for j in range(cp + 1)]
    dpows = {0: [GaussianRational(1)] + [GaussianRational(0)] * cp}

    def dpow(q):
        if q not in dpows:
            prev = dpow(q - 1)
            dpows[q] = [sum((prev[a] * dt[j - a] for a in range(j + 1) if prev[a] and dt[j - a]),
                            GaussianRational(0)) for j in range(cp + 1)]
        return dpows[q]

    comps = []
    failure = None
    margins = {}
    for i, f in enumerate(P):
        coeffs: dict[tuple[int, ...], dict[int, GaussianRational]] = {}
        for exp, c in f.terms():
            coeffs.setdefault(exp[1:], {})[exp[0]] = c
        terms = {}
        for p in range(degree + 1):
            known = cp - p  # t-degree known for coefficients of total zw-degree p
            lead = 2 * p * e
            dp = dpow(2 * p)
            margins[p] = known - lead
            for ab in multi_indices(nz, p):
                R = coeffs.get(ab, {})
                T0 = R.get(lead, GaussianRational(0)) / dp[lead]
                if T0:
                    terms[ab] = T0
                if failure is None:
                    for j in range(known + 1):
                        got = R.get(j, GaussianRational(0))
                        want = T0 * dp[j] if j >= lead else GaussianRational(0)
                        if got != want:
                            failure = (f"component {i}, z^a w^b exponent {ab}: t^{j} coefficient {got} "
                                       f"where T(0)*delta^{2 * p} gives {want}")
                            break
        comps.append(S(nz, degree, terms))
    fmap = FormalMap(tuple(comps), Mp.n, Mp.d)
    return PhiHatReport(fmap, degree, failure is None, failure, margins, inv)


def phi_hat(M: FormalSubmanifold, Mp: FormalSubmanifold, jtilde: Sequence[int] | None, L: Jet,
            degree: int | None = None, evaluator: PsiEvaluator | None = None) -> FormalMap:
    rep = phi_hat_report(M, Mp, jtilde, L, degree, evaluator)
    if not rep.cancellation_ok:
        raise CancellationError(f"t-dependent parts do not cancel: {rep.failure}", rep)
    return rep.map


# ---------------------------------------------------------------------------
# coefficient recovery

def weighted_multi_indices(weights: Sequence[int], nu: int):
    """``alpha`` with ``sum(weights * alpha) == nu``."""
    if not weights:
        if nu == 0:
            yield ()
        return
    w = weights[0]
    for a in range(nu // w, -1, -1):
        for rest in weighted_multi_indices(weights[1:], nu - a * w):
            yield (a,) + rest


@dataclass(frozen=True)
class Recovery:
    coefficients: Mapping[tuple[int, ...], GaussianRational]
    weights: tuple[int, ...]
    degree: int
    consistent: bool = True
    inconsistent_degree: int | None = None

    def series(self, cap: int | None = None) -> TruncatedSeries:
        k = len(self.weights)
        cap = self.degree if cap is None else cap
        return S(k, cap, {a: c for a, c in self.coefficients.items() if sum(a) <= cap})


def _left_inverse_rows(rows: list[list[GaussianRational]], width: int) -> list[int]:
    """First rows (in order) spanning the column space; fixes a left inverse."""
    from .cr_fields import _Span

    span = _Span(width)
    picked = []
    for i, r in enumerate(rows):
        if span.add(r):
            picked.append(i)
            if len(picked) == width:
                break
    return picked


def recover_coefficients(F: Sequence[TruncatedSeries], h: TruncatedSeries, degree: int,
                         weights: Sequence[int] | None = None, strict: bool = True) -> Recovery:
    """Recover ``g`` from ``g o F = h`` for every ``alpha`` of weighted degree ``<= degree``.

    Each weighted degree solves ``g^nu o F^0 = h^nu - (known lower terms)`` with
    ``F^0`` the lowest homogeneous parts of ``F``, through a fixed left inverse
    of ``T_nu``.  With ``strict`` an inconsistent system raises; otherwise the
    left-inverse value is kept and the first inconsistent degree is reported.
    """
    k = len(F)
    l = h.m
    if weights is None:
        weights = []
        for f in F:
            o = f.order()
            if o is None:
                raise RecoveryError("a component of F vanishes up to cap")
            weights.append(o)
    weights = tuple(weights)
    F0 = [f.homogeneous_part(w) for f, w in zip(F, weights)]
    J = [[f.diff(j) for j in range(l)] for f in F0]
    if rank_report(J, polynomial=True).rank < k:
        raise RecoveryError("leading parts of F do not have full generic rank")
    if h.cap < degree or any(f.cap < degree for f in F):
        raise RecoveryError(f"F and h must be known to degree {degree}")
    cap = degree
    Fc = [f.with_cap(cap) if f.cap > cap else f for f in F]
    powers: dict[tuple[int, ...], TruncatedSeries] = {(0,) * k: S.one(l, cap)}

    def power(a):
        if a not in powers:
            j = next(i for i, x in enumerate(a) if x)
            prev = tuple(x - (i == j) for i, x in enumerate(a))
            powers[a] = power(prev) * Fc[j]
        return powers[a]

    g: dict[tuple[int, ...], GaussianRational] = {}
    known = S.zero(l, cap)
    bad = None
    for nu in range(degree + 1):
        alphas = list(weighted_multi_indices(weights, nu))
        if not alphas:
            continue
        target = (h.truncate(cap) - known).homogeneous_part(nu)
        monos = list(multi_indices(l, nu))
        cols = [power(a).homogeneous_part(nu) for a in alphas]
        rows = [[c.coeff(mu) for c in cols] for mu in monos]
        rhs = [target.coeff(mu) for mu in monos]
        picked = _left_inverse_rows(rows, len(alphas))
        if len(picked) < len(alphas):
            raise RecoveryError(f"T_{nu} is not injective")
        sol = scalar_solve([rows[i] for i in picked], [rhs[i] for i in picked])
        fits = all(sum((r * x for r, x in zip(row, sol)), GaussianRational(0)) == b
                   for row, b in zip(rows, rhs))
        if not fits:
            if strict:
                raise RecoveryError(f"h is not of the form g o F at degree {nu}")
            bad = nu if bad is None else bad
        for a, c in zip(alphas, sol):
            if c:
                g[a] = c
                known = known + power(a).scale(c)
    return Recovery(g, weights, degree, bad is None, bad)


def extend_jet(M: FormalSubmanifold, Mp: FormalSubmanifold, jtilde: Sequence[int] | None, L: Jet,
               evaluator: PsiEvaluator | None = None, strict: bool = True) -> Jet:
    """Derivatives of order ``k1*ell0 < |beta| <= 2*k1*ell0`` from the ``k1*ell0``-jet."""
    k1, ell0 = _source_data(M, Mp, evaluator)
    lo, hi = k1 * ell0, 2 * k1 * ell0
    if L.order < lo:
        raise ValueError(f"need a jet of order {lo}")
    L = L.project(lo)
    ev = _evaluator(M, Mp, jtilde, L, ell0, evaluator)
    xi = xi_map(M, Mp, ev.jtilde, L, k1, ev)
    v = segre_map(M, k1)
    weights = []
    for u in v.components:
        o = u.order()
        weights.append(o if o is not None else 1)
    top = max(weights) * hi
    if top > xi[0].cap:
        raise ValueError(f"extension needs source cap >= {top + k1 * ell0}")
    vals = dict(L.values)
    for i, h in enumerate(xi):
        rec = recover_coefficients(v.components, h, top, weights, strict=strict)
        for a, c in rec.coefficients.items():
            if lo < sum(a) <= hi:
                vals[(i, a)] = c * _fact(a)
    return Jet(hi, L.n_src, L.d_src, L.n_dst, L.d_dst, vals)


@dataclass(frozen=True, eq=False)
class Parametrization:
    map: FormalMap
    extended: Jet
    report: PhiHatReport
    jtilde: tuple[int, ...]
    extension_failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.extension_failure is None and self.report.cancellation_ok


def parametrize(M: FormalSubmanifold, Mp: FormalSubmanifold, jtilde: Sequence[int] | None, L: Jet,
                degree: int | None = None, evaluator: PsiEvaluator | None = None) -> Parametrization:
    """``extend_jet`` followed by the extraction, with diagnostics."""
    k1, ell0 = _source_data(M, Mp, evaluator)
    ev = _evaluator(M, Mp, jtilde, L.project(k1 * ell0), ell0, evaluator)
    try:
        ext = extend_jet(M, Mp, ev.jtilde, L, ev)
        note = None
    except RecoveryError as e:
        ext = extend_jet(M, Mp, ev.jtilde, L, ev, strict=False)
        note = str(e)
    rep = phi_hat_report(M, Mp, ev.jtilde, ext, degree, ev)
    return Parametrization(rep.map, ext, rep, ev.jtilde, note)


def full_parametrization(M: FormalSubmanifold, Mp: FormalSubmanifold, jtilde: Sequence[int] | None, L: Jet,
                         degree: int | None = None, evaluator: PsiEvaluator | None = None) -> FormalMap:
    """The map determined by a ``k1*ell0``-jet, up to ``degree``."""
    res = parametrize(M, Mp, jtilde, L, degree, evaluator)
    if res.extension_failure is not None:
        raise CancellationError(f"the jet does not extend: {res.extension_failure}", res.report)
    if not res.report.cancellation_ok:
        raise CancellationError(f"t-dependent parts do not cancel: {res.report.failure}", res.report)
    return res.map


# ---------------------------------------------------------------------------
# jet variety

@dataclass(frozen=True)
class VarietyEvaluation:
    values: tuple[GaussianRational, ...]
    violated: tuple[str, ...]
    excluded: bool
    jtilde: tuple[int, ...] | None
    cancellation_ok: bool | None

    @property
    def in_variety(self) -> bool:
        return not self.excluded and not self.violated


@dataclass(frozen=True, eq=False)
class JetVarietySystem:
    """Polynomial equations on jets of maps between a fixed pair.

    Variables are the ``degree``-jet coordinates ``(i, beta)`` and their
    conjugates (indices ``ncoords + j``).  Coordinates of order at most
    ``jet_order`` are the free jet; higher ones are bound to the parametrized
    map, which is what the ``jet:`` equations express.
    """

    source: FormalSubmanifold = field(repr=False)
    target: FormalSubmanifold = field(repr=False)
    jet_order: int
    degree: int
    coords: tuple[tuple[int, tuple[int, ...]], ...]
    labels: tuple[str, ...]
    equations: tuple[TruncatedSeries, ...]
    partner: tuple[int, ...]
    exclusions: Mapping[tuple[int, ...], TruncatedSeries]
    cleared_powers: Mapping[str, int]

    @property
    def ncoords(self) -> int:
        return len(self.coords)

    def point(self, values: Mapping[tuple[int, tuple[int, ...]], GaussianRational],
              conj_values: Mapping | None = None) -> list[GaussianRational]:
        zero = GaussianRational(0)
        pt = [GaussianRational.coerce(values.get(c, zero)) for c in self.coords]
        if conj_values is None:
            pt += [x.conjugate() for x in pt]
        else:
            pt += [GaussianRational.coerce(conj_values.get(c, zero)) for c in self.coords]
        return pt

    def evaluate_at(self, pt: Sequence[GaussianRational]) -> list[GaussianRational]:
        return [_eval_poly_scalar(e, pt) for e in self.equations]

    def evaluate(self, L: Jet, jtilde: Sequence[int] | None = None) -> VarietyEvaluation:
        """Evaluate every equation at a ``jet_order``-jet."""
        L = L.project(self.jet_order)
        M, Mp = self.source, self.target
        jts = [tuple(jtilde)] if jtilde is not None else list(self.exclusions)
        base = self.point({c: L[c] for c in self.coords if sum(c[1]) <= self.jet_order})
        valid = [jt for jt in jts if _eval_poly_scalar(self.exclusions[jt], base)]
        if not valid:
            return VarietyEvaluation((), (), True, None, None)
        jt = valid[0]
        res = parametrize(M, Mp, jt, L, self.degree)
        phi = jet(res.map, self.degree, M.n)
        values = {}
        for c in self.coords:
            values[c] = L[c] if sum(c[1]) <= self.jet_order else phi[c]
        vals = self.evaluate_at(self.point(values))
        # jet consistency: the parametrized map reproduces the free jet
        extra_labels, extra = [], []
        for c in self.coords:
            if sum(c[1]) <= self.jet_order:
                extra_labels.append(f"jet:{c[0]}:{_fmt_exp(c[1])}")
                extra.append(phi[c] - L[c])
        labels = list(self.labels) + extra_labels
        allv = vals + extra
        violated = tuple(lab for lab, v in zip(labels, allv) if v)
        return VarietyEvaluation(tuple(allv), violated, False, jt, res.report.cancellation_ok)

    def to_text(self) -> str:
        names = [f"L{i}_{_fmt_exp(b)}" for i, b in self.coords] + \
                [f"Lc{i}_{_fmt_exp(b)}" for i, b in self.coords]
        lines = [f"# jet variety: jet order {self.jet_order}, truncation degree {self.degree}",
                 "vars " + " ".join(f"x{j}={nm}" for j, nm in enumerate(names))]
        for lab, e, p in zip(self.labels, self.equations, self.partner):
            lines.append(f"eq {lab} conj={self.labels[p]} : {_poly_text(e)}")
        for jt, e in self.exclusions.items():
            lines.append(f"exclude {','.join(map(str, jt))} : {_poly_text(e)}")
        for k, v in self.cleared_powers.items():
            lines.append(f"cleared {k} {v}")
        return "\n".join(lines) + "\n"


def _fmt_exp(e) -> str:
    return "".join(map(str, e)) if all(x < 10 for x in e) else "-".join(map(str, e))


def _poly_text(p: TruncatedSeries) -> str:
    if p.is_zero():
        return "0"
    out = []
    for exp, c in p.terms():
        (rn, rd), (im_n, im_d) = c.to_pairs()
        out.append(f"[{rn}/{rd},{im_n}/{im_d}]" + "".join(f"*x{i}^{e}" for i, e in enumerate(exp) if e))
    return " + ".join(out)


_TERM = re.compile(r"\[(-?\d+)/(\d+),(-?\d+)/(\d+)\]((?:\*x\d+\^\d+)*)")


def parse_poly(text: str, m: int, cap: int) -> TruncatedSeries:
    """Inverse of the text form used by :meth:`JetVarietySystem.to_text`."""
    from gmpy2 import mpq

    terms = {}
    if text.strip() == "0":
        return S.zero(m, cap)
    for t in text.split(" + "):
        mo = _TERM.fullmatch(t.strip())
        if mo is None:
            raise SeriesError(f"bad term {t!r}")
        exp = [0] * m
        for var, e in re.findall(r"\*x(\d+)\^(\d+)", mo.group(5)):
            exp[int(var)] += int(e)
        c = GaussianRational(mpq(int(mo.group(1)), int(mo.group(2))), mpq(int(mo.group(3)), int(mo.group(4))))
        terms[tuple(exp)] = c
    return S(m, cap, terms)


def _eval_poly_scalar(p: TruncatedSeries, pt: Sequence[GaussianRational]) -> GaussianRational:
    acc = GaussianRational(0)
    for exp, c in p.terms():
        term = c
        for x, e in zip(pt, exp):
            if e:
                term = term * x ** e
        acc = acc + term
    return acc


def _swap_conj(p: TruncatedSeries, nc: int) -> TruncatedSeries:
    """Conjugate coefficients and exchange each coordinate with its conjugate."""
    perm = [nc + i for i in range(nc)] + list(range(nc))
    return p.conjugate().remap(p.m, perm)


def jet_variety_equations(M: FormalSubmanifold, Mp: FormalSubmanifold,
                          truncation_degree: int | None = None) -> JetVarietySystem:
    """Truncated polynomial system cutting out jets of CR submersive maps."""
    k1, ell0 = _source_data(M, Mp)
    order = k1 * ell0
    T = M.cap if truncation_degree is None else truncation_degree
    N, n, Np, np_ = M.N, M.n, Mp.N, Mp.n
    coords = tuple((i, b) for i in range(Np) for kk in range(1, T + 1) for b in multi_indices(N, kk))
    nc = len(coords)
    nsym = 2 * nc
    # ring (symbols, conj symbols, z, chi, tau) for the mapping equation on M
    m = nsym + N + n
    cap = 2 * T + 2
    zi = list(range(nsym, nsym + n))
    ci = list(range(nsym + n, nsym + 2 * n))
    ti = list(range(nsym + 2 * n, m))
    var = lambda j: S.var(m, cap, j)
    Qs = [q.remap(m, zi + ci + ti, min(q.cap, cap)) for q in M.Q]
    Z = [var(j) for j in zi] + Qs
    zeta = [var(j) for j in ci] + [var(j) for j in ti]

    def comp(i, args, conj):
        acc = S.zero(m, cap)
        for s, (ii, b) in enumerate(coords):
            if ii != i:
                continue
            term = var(nc + s if conj else s).scale(GaussianRational(1) / _fact(b))
            for a, e in zip(args, b):
                if e:
                    term = term * a ** e
            acc = acc + term
        return acc

    H = [comp(i, Z, False) for i in range(Np)]
    Hb = [comp(i, zeta, True) for i in range(Np)]
    resid = []
    for l, q in enumerate(Mp.Q):
        qs = compose(q.truncate(min(q.cap, cap)).with_cap(cap), H[:np_] + Hb[:np_] + Hb[np_:], cap)
        resid.append(H[np_ + l] - qs)
    labels, eqs = [], []
    for l, r in enumerate(resid):
        groups: dict[tuple[int, ...], dict] = {}
        for exp, c in r.terms():
            zpart = exp[nsym:]
            if sum(zpart) > T:
                continue
            groups.setdefault(zpart, {})[exp[:nsym] + (0,) * (m - nsym)] = c
        for zpart in sorted(groups, key=lambda e: (sum(e), tuple(-x for x in e))):
            poly = _project(S(m, cap, groups[zpart]), nsym)
            if poly.is_zero():
                continue
            labels.append(f"map:{l}:{_fmt_exp(zpart)}")
            eqs.append(poly)
    for s, (i, b) in enumerate(coords):
        if i >= np_ and not any(b[n:]):
            labels.append(f"normal:{i}:{_fmt_exp(b)}")
            eqs.append(S.var(nsym, cap, s))
    # conjugate partners: add the swapped equation when it is not already present
    base = list(zip(labels, eqs))
    labels, eqs, partner = [], [], []
    index = {}
    for lab, e in base:
        key = tuple(sorted(e._t.items()))
        if key in index:
            continue
        index[key] = len(eqs)
        labels.append(lab)
        eqs.append(e)
    count = len(eqs)
    partner = [None] * count
    for j in range(count):
        if partner[j] is not None:
            continue
        dual = _swap_conj(eqs[j], nc)
        key = tuple(sorted(dual._t.items()))
        if key in index:
            p = index[key]
        else:
            p = len(eqs)
            index[key] = p
            labels.append(labels[j] + "*")
            eqs.append(dual)
            partner.append(None)
        partner[j] = p
        partner[p] = j
    exclusions = {}
    pos = {c: s for s, c in enumerate(coords)}
    for jt in combinations(range(n), np_):
        rows = []
        for l in range(np_):
            row = []
            for j in jt:
                e = tuple(int(x == j) for x in range(N))
                row.append(S.var(nsym, cap, pos[(l, e)]))
            rows.append(row)
        exclusions[jt] = det(rows)
    cleared = {"map": 0, "normal": 0}
    return JetVarietySystem(M, Mp, order, T, coords, tuple(labels), tuple(eqs), tuple(partner),
                            exclusions, cleared)


def _project(p: TruncatedSeries, nsym: int) -> TruncatedSeries:
    """Keep the first ``nsym`` variables (the others carry exponent 0)."""
    return S(nsym, p.cap, {exp[:nsym]: c for exp, c in p.terms()})
