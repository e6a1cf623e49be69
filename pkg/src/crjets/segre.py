"""Segre mappings, their generic ranks and the diagonal maps ``D_k``.

The ``k``-th Segre mapping lives in ``k`` blocks of ``n`` variables
``(z, chi^1, z^1, chi^2, ...)``; block ``b`` holds variables ``b*n .. b*n+n-1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .manifold import FormalSubmanifold
from .series_core import (
    RankReport,
    TruncatedSeries,
    compose,
    rank_report,
    weighted_decompose,
)

S = TruncatedSeries


@dataclass(frozen=True, eq=False)
class SegreMap:
    """``v^k = (z, u^k)`` as ``N`` series in ``k*n`` variables."""

    k: int
    n: int
    d: int
    components: tuple[TruncatedSeries, ...]

    @property
    def z_part(self) -> tuple[TruncatedSeries, ...]:
        return self.components[: self.n]

    @property
    def u(self) -> tuple[TruncatedSeries, ...]:
        return self.components[self.n:]

    @property
    def m(self) -> int:
        return self.k * self.n

    def conjugate_shifted(self, blocks: int = 1) -> list[TruncatedSeries]:
        """``vbar^k`` with every block moved up by ``blocks`` inside a ring of
        ``(k + blocks) * n`` variables."""
        m = (self.k + blocks) * self.n
        shift = [blocks * self.n + i for i in range(self.m)]
        return [c.conjugate().remap(m, shift) for c in self.components]

    def to_str(self) -> list[str]:
        return [c.to_str(block_names(self.k, self.n)) for c in self.components]


def block_names(k: int, n: int) -> list[str]:
    names = []
    for b in range(k):
        stem = "z" if b == 0 else (f"chi{(b + 1) // 2}_" if b % 2 else f"z{b // 2}_")
        names.extend(f"{stem}{i}" if n > 1 else stem.rstrip("_") for i in range(n))
    return names


def _cache(M: FormalSubmanifold) -> dict:
    c = M.__dict__.get("_segre_cache")
    if c is None:
        c = {}
        object.__setattr__(M, "_segre_cache", c)
    return c


def segre_map(M: FormalSubmanifold, k: int) -> SegreMap:
    """``v^{k+1}(z, xi) = (z, Q(z, vbar^k(xi)))`` starting from ``v^1 = (z, 0)``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    n, d, cap = M.n, M.d, M.cap
    cache = _cache(M)
    if k in cache:
        return cache[k]
    if k == 0:
        v = SegreMap(0, n, d, tuple(S.zero(0, cap) for _ in range(n + d)))
    elif k == 1:
        comps = [S.var(n, cap, i) for i in range(n)] + [S.zero(n, cap) for _ in range(d)]
        v = SegreMap(1, n, d, tuple(comps))
    else:
        prev = segre_map(M, k - 1)
        m = k * n
        z = [S.var(m, cap, i) for i in range(n)]
        bar = prev.conjugate_shifted()
        # Q slots are (z, chi, tau); vbar supplies (chi, tau)
        u = [compose(q, z + bar) for q in M.Q]
        v = SegreMap(k, n, d, tuple(z + u))
    cache[k] = v
    return v


def segre_identity_residual(M: FormalSubmanifold, k: int) -> list[TruncatedSeries]:
    """``rho(v^{k+1}, vbar^k)`` in ``(k+1)*n`` variables; zero up to cap."""
    hi = segre_map(M, k + 1)
    lo = segre_map(M, k)
    subs = list(hi.components) + lo.conjugate_shifted()
    if k == 0:
        subs = list(hi.components) + [S.zero(hi.m, M.cap) for _ in range(M.N)]
    return [compose(r, subs) for r in M.rho]


def segre_rank_report(M: FormalSubmanifold, k: int) -> RankReport:
    """``Rk(v^k) = n + rk(du^k / dxi)``."""
    if k == 0:
        return RankReport(0, False)
    v = segre_map(M, k)
    if k == 1:
        return RankReport(M.n, False)
    cols = range(M.n, v.m)
    J = [[u.diff(c) for c in cols] for u in v.u]
    r = rank_report(J)
    return RankReport(M.n + r.rank, r.truncation_warning)


def segre_rank(M: FormalSubmanifold, k: int) -> int:
    return segre_rank_report(M, k).rank


class SegreVerdict(NamedTuple):
    verdict: str  # "finite", "infinite", or "inconclusive" when truncation may hide rank
    k1: int | None
    ranks: tuple[int, ...]


def finite_type_segre(M: FormalSubmanifold) -> SegreVerdict:
    """Scan ``k = 1 .. d+1`` for the first ``k`` with ``Rk(v^k) = N``."""
    ranks = []
    warned = False
    for k in range(1, M.d + 2):
        rep = segre_rank_report(M, k)
        ranks.append(rep.rank)
        warned = warned or rep.truncation_warning
        if rep.rank == M.N:
            return SegreVerdict("finite", k, tuple(ranks))
    return SegreVerdict("inconclusive" if warned else "infinite", None, tuple(ranks))


def leading_segre_rank(M: FormalSubmanifold, k: int) -> int:
    """Rank of the Jacobian of ``(z, lead(u^k))``, each ``u`` component cut to
    its lowest homogeneous part; a lower bound for ``Rk(v^k)``."""
    if k <= 1:
        return segre_rank(M, k)
    v = segre_map(M, k)
    lead = []
    for u in v.u:
        parts = weighted_decompose(u, [1] * v.m)
        lead.append(next(iter(parts.values())) if parts else u)
    J = [[f.diff(c) for c in range(M.n, v.m)] for f in lead]
    return M.n + rank_report(J, polynomial=True).rank


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiagonalEmbedding:
    """``D_k: C^{kn} -> C^{2kn}``; ``blocks[b]`` is the source block feeding
    output block ``b``, or ``None`` for the zero block."""

    k: int
    n: int
    blocks: tuple[int | None, ...]

    def substitution(self, cap: int) -> list[TruncatedSeries]:
        m = self.k * self.n
        out = []
        for b in self.blocks:
            if b is None:
                out.extend(S.zero(m, cap) for _ in range(self.n))
            else:
                out.extend(S.var(m, cap, b * self.n + i) for i in range(self.n))
        return out

    def apply(self, f: TruncatedSeries) -> TruncatedSeries:
        return compose(f, self.substitution(f.cap))


def diagonal_embedding(k: int, n: int) -> DiagonalEmbedding:
    """Output blocks ``(0, b_0, ..., b_{k-1}, b_{k-2}, ..., b_0)``, one pattern
    for both parities of ``k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    fwd = list(range(k))
    return DiagonalEmbedding(k, n, tuple([None] + fwd + fwd[-2::-1]))


def diagonal_rank_blocks(k: int) -> list[int]:
    """Column blocks of ``v^{2k}`` whose rank along ``D_k`` equals ``Rk(v^k)``:
    ``z`` together with blocks ``k+1 .. 2k-1``."""
    return [0] + list(range(k + 1, 2 * k))


@dataclass(frozen=True)
class DiagonalReport:
    k: int
    vanishing_ok: bool
    failure: str | None
    rank_selected: int
    rank_all: int
    rk_vk: int

    @property
    def ok(self) -> bool:
        return self.vanishing_ok and self.rank_selected == self.rk_vk and self.rank_all >= self.rk_vk


def check_diagonal(M: FormalSubmanifold, k: int) -> DiagonalReport:
    """``v^{2k} o D_k = 0`` and the partial-Jacobian rank identities along ``D_k``."""
    v = segre_map(M, 2 * k)
    D = diagonal_embedding(k, M.n)
    failure = None
    for i, c in enumerate(v.components):
        r = D.apply(c)
        if not r.is_zero():
            exp, a, _ = r.first_difference(S.zero(r.m, r.cap))
            failure = f"component {i} of v^{2 * k} o D_{k} has coefficient {a} at {exp}"
            break

    def rank_of(blocks):
        cols = [b * M.n + i for b in blocks for i in range(M.n)]
        J = [[D.apply(c.diff(j)) for j in cols] for c in v.components]
        return rank_report(J).rank

    return DiagonalReport(
        k,
        failure is None,
        failure,
        rank_of(diagonal_rank_blocks(k)),
        rank_of(range(2 * k)),
        segre_rank(M, k),
    )
