"""Finite nondegeneracy and holomorphic nondegeneracy at 0."""
from __future__ import annotations

from dataclasses import dataclass

from .cr_fields import FormalVectorField, _Span, cr_basis, field_from
from .manifold import FormalSubmanifold
from .series_core import GaussianRational, TruncatedSeries, sparse_nullspace

S = TruncatedSeries


@dataclass(frozen=True)
class NondegeneracyReport:
    ell0: int | None
    span_dims: tuple[int, ...]
    N: int


def multi_indices(n: int, k: int):
    """All multi-indices of length ``n`` and total degree exactly ``k``."""
    if n == 0:
        if k == 0:
            yield ()
        return
    for a in range(k, -1, -1):
        for rest in multi_indices(n - 1, k - a):
            yield (a,) + rest


def multi_indices_upto(n: int, k: int):
    for j in range(k + 1):
        yield from multi_indices(n, j)


def ell_nondegenerate(M: FormalSubmanifold, ell_max: int) -> NondegeneracyReport:
    """Dimensions of ``span{L^alpha (d rho_j / dZ)(0) : |alpha| <= ell}`` for each ell."""
    L = M.layout
    if ell_max > M.cap - 1:
        raise ValueError(f"ell_max {ell_max} needs cap >= {ell_max + 1}")
    Mt = M.with_cap(ell_max + 1)
    Ls = cr_basis(Mt)
    rho = Mt.rho_complex()
    grads = [[r.diff(i) for i in L.Z] for r in rho]
    span = _Span(L.N)
    dims = []
    ell0 = None
    # words[alpha] = L^alpha applied to every gradient, grown one field at a time
    words = {(0,) * L.n: grads}
    for ell in range(ell_max + 1):
        if ell > 0:
            new = {}
            for alpha in multi_indices(L.n, ell):
                j = next(i for i, a in enumerate(alpha) if a)
                prev = list(alpha)
                prev[j] -= 1
                base = words[tuple(prev)]
                new[alpha] = [[Ls[j](c) for c in g] for g in base]
            words.update(new)
            level = new
        else:
            level = {(0,) * L.n: grads}
        for vecs in level.values():
            for g in vecs:
                span.add([c.eval0() for c in g])
        dims.append(len(span))
        if ell0 is None and len(span) == L.N:
            ell0 = ell
            break
    return NondegeneracyReport(ell0, tuple(dims), L.N)


@dataclass(frozen=True, eq=False)
class HolomorphicReport:
    nondegenerate: bool
    witness: FormalVectorField | None
    cap: int
    unknown_degree: int


def holomorphically_nondegenerate(M: FormalSubmanifold) -> HolomorphicReport:
    """Search for a holomorphic field ``X = sum a_i(Z) d/dZ_i`` tangent to ``M``.

    Tangency reads ``a_w - sum_j a_zj Q_zj = 0`` after ``tau = Qbar(chi, z, w)``.
    The verdict is only valid for fields visible below the cap.
    """
    L = M.layout
    N, n, d = L.N, L.n, L.d
    cap = M.cap
    q = M.Q_full()
    # R[k][j] = Q_k,z_j restricted to the manifold, known to cap - 1
    R = [[M.restrict_to_manifold(qk.diff(L.z[j])) for j in range(n)] for qk in q]
    # a coefficient of degree e only meets R below degree cap - 1 - e; keeping
    # e <= (cap - 1) // 2 stops top-degree unknowns from solving a truncated system
    E = []
    for i in range(N):
        orders = [R[k][i].order() for k in range(d) if not R[k][i].is_zero()] if i < n else []
        E.append(min(cap - 1 - min(orders, default=0), (cap - 1) // 2))
    cols = [(i, beta) for i in range(N) for beta in multi_indices_upto(N, E[i])]
    rows: dict[tuple[int, int], dict[int, GaussianRational]] = {}
    eq_cap = cap - 1
    for ci, (i, beta) in enumerate(cols):
        mono = S.monomial(2 * N, eq_cap, beta + (0,) * N)
        for k in range(d):
            if i < n:
                contrib = -(mono * R[k][i])
            elif i - n == k:
                contrib = mono
            else:
                continue
            for key, v in contrib._t.items():
                rows.setdefault((k, key), {})[ci] = GaussianRational._raw(*v)
    basis = sparse_nullspace(rows.values(), len(cols))
    if not basis:
        return HolomorphicReport(True, None, cap, min(E))

    def lead(v):
        return min((sum(cols[c][1]), c) for c in v)

    best = min(basis, key=lead)
    coeffs: dict[int, TruncatedSeries] = {}
    for c, val in best.items():
        i, beta = cols[c]
        term = S.monomial(2 * N, cap, beta + (0,) * N, val)
        coeffs[i] = coeffs[i] + term if i in coeffs else term
    return HolomorphicReport(False, field_from(N, coeffs, cap), cap, min(E))
