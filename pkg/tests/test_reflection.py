import pytest
import sympy as sp

from crjets.mapping import FormalMap, jet
from crjets.reflection import (
    JetConditionError,
    NotFinitelyNondegenerateError,
    PsiEvaluator,
    build_theta,
    check_basic_identity,
    choose_jtilde,
    direct_chain,
    jet_determination,
    jtilde_valid,
    psi_evaluate,
    segre_chain,
)
from crjets.series_core import I, SeriesError, TruncatedSeries as S
from corpus import (
    codim2,
    ell2,
    flat,
    heisenberg,
    heisenberg_automorphisms,
    hyperquadric3,
    identity,
    parabolic,
    quartic,
)
from oracles import is_zero_upto, to_sympy

AUTOS = sorted(heisenberg_automorphisms(8))


def test_theta_for_heisenberg_target():
    th = build_theta(heisenberg(8), 1)
    assert th.alphas == ((1,),) and th.rows == (0,)
    # Qbar'_chi(chi, X, .) = -2 i X, so X = (i/2) r
    assert th.S[0] == S.var(3, 8, 2).scale(I / 2)


def test_theta_needs_enough_derivatives():
    with pytest.raises(NotFinitelyNondegenerateError):
        build_theta(ell2(6), 1)
    th = build_theta(ell2(6), 2)
    assert len(th.alphas) == 2 and max(sum(a) for a in th.alphas) == 2


def test_psi_reproduces_identity_and_dilation():
    M = heisenberg(8)
    z, w = S.var(4, 8, 0), S.var(4, 8, 1)
    assert psi_evaluate(M, M, None, (0, 0), identity(8)) == [z, w]
    assert psi_evaluate(M, M, None, (1, 0), identity(8))[0] == 1
    assert psi_evaluate(M, M, (0,), (0, 0), heisenberg_automorphisms(8)["dilation2"]) == [2 * z, 4 * w]


@pytest.mark.parametrize("name", ["parabolic1", "translation1", "dilation1+i"])
def test_psi_matches_sympy_derivatives(name):
    M = heisenberg(8)
    H = heisenberg_automorphisms(8)[name]
    x = sp.symbols("x0:4")
    for alpha in [(0, 0), (1, 0), (0, 1), (1, 1)]:
        psi = psi_evaluate(M, M, None, alpha, H)
        for c, p in zip(H.components, psi):
            d = sp.diff(to_sympy(c, x[:2]), x[0], alpha[0], x[1], alpha[1])
            assert is_zero_upto(to_sympy(p, x) - d, x, p.cap)


@pytest.mark.parametrize("name", AUTOS)
def test_basic_identity_heisenberg(name):
    M = heisenberg(8)
    rep = check_basic_identity(M, M, heisenberg_automorphisms(8)[name], 2)
    assert rep.ok, rep.failure
    assert len(rep.checked) == 6


def test_basic_identity_other_sources():
    M2 = ell2(6)
    v = [S.var(3, 6, i) for i in range(3)]
    dil = FormalMap((2 * v[0], v[1], 4 * v[2]), 2, 1)
    for H in (FormalMap.identity(2, 1, 6), dil):
        assert check_basic_identity(M2, M2, H, 1).ok
    C = codim2(6)
    assert check_basic_identity(C, C, FormalMap.identity(1, 2, 6), 1).ok


def test_basic_identity_detects_non_maps():
    M = heisenberg(8)
    z, w = S.var(2, 8, 0), S.var(2, 8, 1)
    rep = check_basic_identity(M, M, FormalMap((z + z ** 3, w), 1, 1), 2)
    assert not rep.ok and "alpha=(0, 0)" in rep.failure


def test_jtilde_selection():
    L = jet(FormalMap.identity(2, 1, 4), 1, 2)
    assert choose_jtilde(L, 2) == (0, 1)
    v = [S.var(3, 4, i) for i in range(3)]
    proj = FormalMap((v[1], v[2]), 1, 1)
    Lp = jet(proj, 1, 2)
    assert not jtilde_valid(Lp, (0,)) and jtilde_valid(Lp, (1,))
    assert choose_jtilde(Lp, 2) == (1,)
    degenerate = jet(FormalMap((v[0] * v[1], v[2]), 1, 1), 1, 2)
    with pytest.raises(JetConditionError):
        choose_jtilde(degenerate, 2)


def test_evaluator_needs_n_at_least_target_n():
    with pytest.raises(SeriesError):
        PsiEvaluator.build(heisenberg(6), hyperquadric3(6), (0, 1))


@pytest.mark.parametrize("name", ["identity", "dilation1+i", "parabolic1", "translation1"])
def test_segre_chain_matches_direct_chain(name):
    M = heisenberg(8)
    H = heisenberg_automorphisms(8)[name]
    ev = PsiEvaluator.build(M, M, (0,))
    chain = segre_chain(ev, jet(H, 2, 1), 2)
    direct = direct_chain(H, M, 2, 1)
    for s in range(3):
        assert chain[s].keys() == direct[s].keys()
        for key in chain[s]:
            a, b = chain[s][key], direct[s][key]
            assert a.eval0() == b.eval0() if a.m == 0 else a == b


def test_segre_chain_needs_jet_order():
    M = heisenberg(8)
    ev = PsiEvaluator.build(M, M, (0,))
    with pytest.raises(ValueError):
        segre_chain(ev, jet(identity(8), 1, 1), 2)


def test_jet_determination_outcomes():
    M = heisenberg(8)
    Id = identity(8)
    rep = jet_determination(M, M, Id, Id)
    assert rep.equal and (rep.k0, rep.ell0, rep.jtilde, rep.cap) == (2, 1, (0,), 8)
    rep = jet_determination(M, M, Id, parabolic(1, 8))
    assert rep.verdict == "precondition" and "order 2" in rep.message
    z, w = S.var(2, 8, 0), S.var(2, 8, 1)
    rep = jet_determination(M, M, Id, FormalMap((z + z ** 3, w), 1, 1))
    assert rep.verdict == "different" and "map 2" in rep.message
    assert jet_determination(M, M, Id, Id, k0=1).verdict == "precondition"
    assert jet_determination(flat(8), flat(8), Id, Id).verdict == "precondition"
    assert jet_determination(M, quartic(8), Id, Id).verdict == "precondition"


@pytest.mark.parametrize("name", AUTOS)
def test_jet_determination_self(name):
    M = heisenberg(8)
    H = heisenberg_automorphisms(8)[name]
    assert jet_determination(M, M, H, H).equal


def test_jet_determination_codim2():
    C = codim2(6)
    Id = FormalMap.identity(1, 2, 6)
    rep = jet_determination(C, C, Id, Id)
    assert rep.equal and rep.k0 == 3
