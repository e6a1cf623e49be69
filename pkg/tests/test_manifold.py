import pytest
import sympy as sp
from hypothesis import given, strategies as st

from crjets.manifold import (
    Layout,
    check_defining,
    check_involution,
    check_normal,
    conjugate_normal_form,
    from_normal_form,
    graph_to_rho,
    normalize,
    symmetrize,
)
from crjets.series_core import GaussianRational as G, I, SeriesError, TruncatedSeries as S
from corpus import corpus, heisenberg, random_graph_terms, _graph
from oracles import conj_coeffs, is_zero_upto, to_sympy


def full_vars(N, cap):
    return [S.var(2 * N, cap, i) for i in range(2 * N)]


# ---------------------------------------------------------------------------
# defining functions

def test_heisenberg_rho_is_real_and_generic():
    z, w, c, t = full_vars(2, 6)
    rep = check_defining([I * (t - w) + 2 * z * c], 2, 1)
    assert rep.ok and rep.messages == ()


def test_non_real_rho_is_reported():
    z, w, c, t = full_vars(2, 6)
    rep = check_defining([w - t - 2 * I * z * c], 2, 1)
    assert not rep.reality_ok
    assert "reality fails" in rep.messages[0]
    with pytest.raises(SeriesError, match="not real"):
        normalize([w - t - 2 * I * z * c], 2, 1)


def test_totally_real_line():
    # Im z = 0 in C: z - chi changes sign under conjugation, i (z - chi) is real
    z, c = S.var(2, 4, 0), S.var(2, 4, 1)
    assert not check_defining([z - c], 1, 1).reality_ok
    rep = check_defining([(z - c).scale(I)], 1, 1)
    assert rep.ok and rep.generic_ok


def test_dependent_differentials_are_reported():
    z, w, c, t = full_vars(2, 4)
    rep = check_defining([(z - c) * (z - c)], 2, 1)
    assert not rep.codim_rank_ok


def test_non_generic_rho_is_reported():
    # Im w = Re w = 0 in C^2: both differentials only involve dw, dwbar
    z, w, c, t = full_vars(2, 4)
    rep = check_defining([(w - t) / G(0, 2), (w + t) / 2], 2, 2)
    assert rep.reality_ok and rep.codim_rank_ok
    assert not rep.generic_ok
    with pytest.raises(SeriesError, match="generic"):
        normalize([(w - t) / G(0, 2), (w + t) / 2], 2, 2)


def test_constant_term_disqualifies():
    z, w, c, t = full_vars(2, 4)
    rep = check_defining([I * (t - w) + 1], 2, 1)
    assert not rep.ok


def test_symmetrize_scales():
    z, w, c, t = full_vars(2, 4)
    out = symmetrize([I * (t - w)], I)
    assert out[0] == w - t
    with pytest.raises(SeriesError):
        symmetrize([w], 0)


# ---------------------------------------------------------------------------
# normalization

def test_normalize_sign_convention():
    z, w, c, t = full_vars(2, 6)
    v3 = [S.var(3, 6, i) for i in range(3)]
    # i(tau - w) + 2 z chi = 0 means w = tau - 2 i z chi, i.e. Im w = -|z|^2
    M = normalize([I * (t - w) + 2 * z * c], 2, 1)
    assert M.Q[0] == v3[2] - 2 * I * v3[0] * v3[1]
    assert M.certificate[0][0] == S.const(4, 5, -I)
    M = normalize([I * (w - t) + 2 * z * c], 2, 1)
    assert M.Q[0] == v3[2] + 2 * I * v3[0] * v3[1]
    assert M.certificate[0][0] == S.const(4, 5, I)
    assert [x == y for x, y in zip(M.coordinate_change, [S.var(2, 6, 0), S.var(2, 6, 1)])] == [True, True]


def test_graph_and_normal_form_agree_for_heisenberg():
    a = heisenberg(8)
    b = _graph(1, 1, 8, [{(1, 1, 0): 1}])
    assert a.Q[0] == b.Q[0]


def test_conjugate_normal_form_heisenberg():
    (qb,) = conjugate_normal_form(heisenberg(6))
    x = [S.var(3, 6, i) for i in range(3)]
    # slots read as (chi, z, w): w - 2 i chi z
    assert qb == x[2] - 2 * I * x[0] * x[1]


def test_heisenberg_involution_by_hand():
    v = [S.var(3, 6, i) for i in range(3)]
    z, c, w = v
    from crjets.series_core import compose
    (q,) = heisenberg(6).Q
    assert compose(q, [z, c, w - 2 * I * c * z]) == w


def _sympy_rho_vanishes_on_graph(M):
    """rho(z, Q(z, chi, tau), chi, tau) == 0 through plain substitution."""
    n, d, N = M.n, M.d, M.N
    L = Layout(n, d)
    syms = sp.symbols(f"x0:{2 * N}")
    zs = [syms[i] for i in L.z]
    cs = [syms[i] for i in L.chi]
    ts = [syms[i] for i in L.tau]
    Qs = [to_sympy(q, zs + cs + ts) for q in M.Q]
    sub = {syms[L.w[j]]: Qs[j] for j in range(d)}
    ring = zs + cs + ts
    return all(is_zero_upto(to_sympy(r, syms).xreplace(sub), ring, M.cap) for r in M.rho)


@pytest.mark.parametrize("name", sorted(corpus(5)))
def test_corpus_normal_forms_are_consistent(name):
    M = corpus(5)[name]
    assert check_normal(M).ok
    assert check_defining(list(M.rho), M.N, M.d).ok
    assert _sympy_rho_vanishes_on_graph(M)


@pytest.mark.parametrize("seed", [2, 5, 8, 13])
def test_normalize_random_graph(seed):
    M = _graph(1, 1, 5, [random_graph_terms(seed)])
    assert check_normal(M).ok
    assert _sympy_rho_vanishes_on_graph(M)
    # normalizing the normalized rho is the identity operation
    again = normalize(list(M.rho), M.N, M.d)
    assert all(a.same(b) for a, b in zip(again.Q, M.Q))
    assert all(c == S.var(M.N, M.cap, i) for i, c in enumerate(again.coordinate_change))


def test_normal_form_requirements():
    v = [S.var(3, 5, i) for i in range(3)]
    z, c, t = v
    with pytest.raises(SeriesError, match="normal form"):
        from_normal_form([t + z * z * c], 1, 1)  # not real: involution fails
    with pytest.raises(SeriesError, match="normal form"):
        from_normal_form([t + z], 1, 1)  # Q(z, 0, tau) != tau
    assert check_involution(heisenberg(5)).ok


def test_graph_must_be_real_valued():
    # a non-real graph function gives a non-real rho
    phi = S(3, 4, {(1, 1, 0): 1, (2, 0, 0): I})
    rho = graph_to_rho([phi], 1, 1)
    assert not check_defining(rho, 2, 1).reality_ok


@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 1), st.integers(-2, 2),
                          st.integers(-2, 2)), max_size=3))
def test_real_graph_perturbations_normalize(extra):
    terms = {(1, 1, 0): G(1)}
    for a, b, s, re, im in extra:
        if a + b + s < 2 or a + b + s > 3:
            continue
        c = G(re, im)
        terms[(a, b, s)] = terms.get((a, b, s), G(0)) + c
        terms[(b, a, s)] = terms.get((b, a, s), G(0)) + c.conjugate()
    M = _graph(1, 1, 4, [terms])
    assert check_normal(M).ok
    assert _sympy_rho_vanishes_on_graph(M)


def test_qbar_matches_sympy_conjugation():
    M = corpus(5)["codim2"]
    syms = sp.symbols("a0:4")
    for q, qb in zip(M.Q, M.Qbar()):
        assert sp.expand(to_sympy(qb, syms) - conj_coeffs(to_sympy(q, syms), syms)) == 0
