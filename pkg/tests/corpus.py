"""Example submanifolds and maps shared by the test modules."""
from __future__ import annotations

import random
from functools import lru_cache

from crjets.manifold import from_normal_form, graph_to_rho, normalize
from crjets.mapping import FormalMap
from crjets.series_core import GaussianRational as G, I, TruncatedSeries as S


def _graph(n: int, d: int, cap: int, terms_per_comp):
    """``Im w = phi`` with ``phi`` given as {(a, b, s): c} in (z, zbar, Re w)."""
    m = 2 * n + d
    phi = [S(m, cap, t) for t in terms_per_comp]
    return normalize(graph_to_rho(phi, n, d), n + d, d)


def _nf(n: int, d: int, cap: int, build):
    m = 2 * n + d
    v = [S.var(m, cap, i) for i in range(m)]
    z, chi, tau = v[:n], v[n:2 * n], v[2 * n:]
    return from_normal_form(build(z, chi, tau), n, d)


@lru_cache(maxsize=None)
def heisenberg(cap: int = 8):
    return _nf(1, 1, cap, lambda z, c, t: [t[0] + 2 * I * z[0] * c[0]])


@lru_cache(maxsize=None)
def heisenberg_from_graph(cap: int = 8):
    return _graph(1, 1, cap, [{(1, 1, 0): 1}])


@lru_cache(maxsize=None)
def flat(cap: int = 8):
    return _nf(1, 1, cap, lambda z, c, t: [t[0]])


@lru_cache(maxsize=None)
def quartic(cap: int = 8):
    return _graph(1, 1, cap, [{(2, 2, 0): 1}])


@lru_cache(maxsize=None)
def ell2(cap: int = 8):
    """Im w = |z1|^2 + Re(z1^2 zbar2)."""
    h = G(1, 0) / 2
    return _graph(2, 1, cap, [{(1, 0, 1, 0, 0): 1, (2, 0, 0, 1, 0): h, (0, 1, 2, 0, 0): h}])


@lru_cache(maxsize=None)
def codim2(cap: int = 8):
    """Im w1 = |z|^2, Im w2 = Re(z^2 zbar)."""
    return _nf(1, 2, cap, lambda z, c, t: [t[0] + 2 * I * z[0] * c[0],
                                           t[1] + I * (z[0] ** 2 * c[0] + z[0] * c[0] ** 2)])


@lru_cache(maxsize=None)
def product(cap: int = 8):
    """Im w = |z1|^2 in C^3: holomorphically degenerate."""
    return _nf(2, 1, cap, lambda z, c, t: [t[0] + 2 * I * z[0] * c[0]])


@lru_cache(maxsize=None)
def hyperquadric3(cap: int = 8):
    return _graph(2, 1, cap, [{(1, 0, 1, 0, 0): 1, (0, 1, 0, 1, 0): 1}])


@lru_cache(maxsize=None)
def rew_perturbed(cap: int = 8):
    """Im w = |z|^2 + (Re w)^2 |z|^2."""
    return _graph(1, 1, cap, [{(1, 1, 0): 1, (1, 1, 2): 1}])


def random_graph_terms(seed: int, top: int = 4) -> dict:
    """|z|^2 plus random real terms of degree 2..top in (z, zbar, Re w)."""
    rng = random.Random(seed)
    terms = {(1, 1, 0): G(1)}
    for _ in range(4):
        deg = rng.randint(2, top)
        a = [0, 0, 0]
        for _ in range(deg):
            a[rng.randrange(3)] += 1
        c = G(rng.randint(-3, 3), rng.randint(-3, 3)) / rng.randint(1, 3)
        mirror = (a[1], a[0], a[2])
        terms[tuple(a)] = terms.get(tuple(a), G(0)) + c
        terms[mirror] = terms.get(mirror, G(0)) + c.conjugate()
    return terms


@lru_cache(maxsize=None)
def random_graph(seed: int, cap: int = 8):
    return _graph(1, 1, cap, [random_graph_terms(seed)])


RANDOM_SEEDS = (11, 23, 37)


def corpus(cap: int = 8) -> dict:
    out = {
        "heisenberg": heisenberg(cap),
        "heisenberg_graph": heisenberg_from_graph(cap),
        "flat": flat(cap),
        "quartic": quartic(cap),
        "ell2": ell2(cap),
        "codim2": codim2(cap),
        "product": product(cap),
        "hyperquadric3": hyperquadric3(cap),
        "rew_perturbed": rew_perturbed(cap),
    }
    for s in RANDOM_SEEDS:
        out[f"random{s}"] = random_graph(s, cap)
    return out


# expected classifications, established by the oracles in tests/oracles.py
FINITE_TYPE = {"heisenberg": True, "heisenberg_graph": True, "flat": False, "quartic": True,
               "ell2": True, "codim2": True, "product": True, "hyperquadric3": True,
               "rew_perturbed": True}


# ---------------------------------------------------------------------------
# maps on the Heisenberg hypersurface Im w = |z|^2 (Q = tau + 2 i z chi)

def _zw(cap):
    return S.var(2, cap, 0), S.var(2, cap, 1)


def identity(cap: int = 8):
    return FormalMap.identity(1, 1, cap)


def dilation(c, cap: int = 8):
    """(z, w) -> (c z, |c|^2 w)."""
    c = G.coerce(c)
    z, w = _zw(cap)
    return FormalMap((z.scale(c), w.scale(c * c.conjugate())), 1, 1)


def geometric(x: S, cap: int) -> S:
    """1 / (1 - x) for x without constant term."""
    out = S.one(x.m, cap)
    p = S.one(x.m, cap)
    for _ in range(cap):
        p = p * x
        out = out + p
    return out


def parabolic(r, cap: int = 8):
    """(z, w) / (1 - r w), r real."""
    z, w = _zw(cap)
    inv = geometric(w.scale(G.coerce(r)), cap)
    return FormalMap((z * inv, w * inv), 1, 1)


def translation(a, cap: int = 8):
    """(z + a w, w) / (1 - 2 i conj(a) z - i |a|^2 w)."""
    a = G.coerce(a)
    z, w = _zw(cap)
    den = (z.scale(2 * I * a.conjugate()) + w.scale(I * a * a.conjugate()))
    inv = geometric(den, cap)
    return FormalMap(((z + w.scale(a)) * inv, w * inv), 1, 1)


def heisenberg_automorphisms(cap: int = 8) -> dict:
    return {
        "identity": identity(cap),
        "dilation2": dilation(2, cap),
        "dilation1+i": dilation(G(1, 1), cap),
        "parabolic1": parabolic(1, cap),
        "parabolic-1": parabolic(-1, cap),
        "parabolic1/2": parabolic(G(1) / 2, cap),
        "translation1": translation(1, cap),
    }
