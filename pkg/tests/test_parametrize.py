import random

import pytest
from hypothesis import given, strategies as st

from crjets.mapping import FormalMap, jet
from crjets.parametrize import (
    CancellationError,
    RecoveryError,
    extend_jet,
    full_parametrization,
    invert_segre,
    jet_variety_equations,
    parametrize,
    parse_poly,
    phi_hat,
    phi_hat_report,
    recover_coefficients,
    strip_double_prime,
    weighted_multi_indices,
    working_cap,
    xi_map,
)
from crjets.segre import segre_map
from crjets.series_core import GaussianRational as G, SeriesError, TruncatedSeries as S, compose
from corpus import flat, heisenberg, heisenberg_automorphisms, identity, quartic
from strategies import gaussian

AUTOS = sorted(heisenberg_automorphisms(8))


def test_weighted_multi_indices():
    assert list(weighted_multi_indices([1, 2], 4)) == [(4, 0), (2, 1), (0, 2)]
    assert list(weighted_multi_indices([], 0)) == [()]
    assert list(weighted_multi_indices([2], 3)) == []


def test_working_cap_formula():
    assert working_cap(heisenberg(8), 6, 2, 1, 1) == 22


# ---------------------------------------------------------------------------
# H o v^k from the jet

@pytest.mark.parametrize("name", AUTOS)
def test_xi_map_matches_direct_composition(name):
    M = heisenberg(8)
    H = heisenberg_automorphisms(8)[name]
    for k in (1, 2, 3):
        xi = xi_map(M, M, None, jet(H, k, 1), k)
        direct = H(list(segre_map(M, k).components))
        assert xi == direct


def test_xi_map_ignores_double_prime_coordinates():
    L = jet(identity(8), 2, 1)
    assert strip_double_prime(L) == L
    Lbad = L.replace({(1, (2, 0)): 7})
    assert xi_map(heisenberg(8), heisenberg(8), None, Lbad, 2) == \
        xi_map(heisenberg(8), heisenberg(8), None, L, 2)


# ---------------------------------------------------------------------------
# singular inversion of v^{2k}

@pytest.mark.parametrize("M", [heisenberg(9), quartic(9)], ids=["heisenberg", "quartic"])
def test_segre_inversion_hits_scaled_point(M):
    inv = invert_segre(M, 2)
    assert inv.back_substitution_ok and inv.y_vars
    cap = 5
    sigma = inv.substitution(cap)
    v = segre_map(M, 4)
    image = [compose(c.truncate(cap), sigma, cap) for c in v.components]
    m = 1 + M.N
    dt = inv.delta_t.remap(m, [0], cap)
    expected = [dt * dt * S.var(m, cap, 1 + i) for i in range(M.N)]
    assert image == expected


def test_inversion_rejects_infinite_type():
    with pytest.raises(SeriesError):
        invert_segre(flat(8))


# ---------------------------------------------------------------------------
# coefficient recovery

def _random_g(rng, weights, top):
    k = len(weights)
    terms = {}
    for nu in range(1, top + 1):
        for a in weighted_multi_indices(weights, nu):
            if rng.random() < 0.6:
                terms[a] = G(rng.randint(-4, 4), rng.randint(-4, 4)) / rng.randint(1, 3)
    return S(k, top * max(weights), terms)


@pytest.mark.parametrize("M", [heisenberg(10), quartic(10)], ids=["heisenberg", "quartic"])
@pytest.mark.parametrize("seed", range(3))
def test_recovery_round_trip(M, seed):
    v = segre_map(M, 2).components
    weights = [c.order() for c in v]
    rng = random.Random(seed)
    g = _random_g(rng, weights, 4)
    cap = 8
    h = compose(g, [c.truncate(cap) for c in v], cap)
    rec = recover_coefficients(v, h, cap, weights)
    assert rec.consistent
    for nu in range(5):
        for a in weighted_multi_indices(weights, nu):
            assert rec.coefficients.get(a, G(0)) == g.coeff(a)


def test_recovery_rejects_non_composites():
    M = heisenberg(8)
    v = segre_map(M, 2).components
    h = S(2, 4, {(0, 1): 1})  # chi alone is not a function of (z, 2 i z chi)
    with pytest.raises(RecoveryError):
        recover_coefficients(v, h, 4, [1, 2])
    rec = recover_coefficients(v, h, 4, [1, 2], strict=False)
    assert not rec.consistent and rec.inconsistent_degree == 1


def test_recovery_needs_full_rank():
    z = S.var(2, 4, 0)
    with pytest.raises(RecoveryError):
        recover_coefficients([z, z * z], z, 4)


@given(st.integers(1, 4), st.tuples(st.integers(0, 4), st.integers(0, 4)), gaussian.filter(bool))
def test_recovery_dependence_bound(p, mono, c):
    # perturbing h in degree p leaves every coefficient of weighted degree < p unchanged
    M = heisenberg(10)
    v = segre_map(M, 2).components
    weights = [1, 2]
    g = _random_g(random.Random(5), weights, 4)
    h = compose(g, [x.truncate(8) for x in v], 8)
    a, b = mono
    if a + b != p:
        return
    hp = h + S(2, 8, {(a, b): c})
    base = recover_coefficients(v, h, 8, weights)
    pert = recover_coefficients(v, hp, 8, weights, strict=False)
    for nu in range(p):
        for al in weighted_multi_indices(weights, nu):
            assert base.coefficients.get(al, G(0)) == pert.coefficients.get(al, G(0))


# ---------------------------------------------------------------------------
# jet extension and parametrization

@pytest.mark.parametrize("name", AUTOS)
def test_extend_jet(name):
    M = heisenberg(12)
    H = heisenberg_automorphisms(12)[name]
    assert extend_jet(M, M, None, jet(H, 2, 1)) == jet(H, 4, 1)


@pytest.mark.parametrize("name", AUTOS)
def test_parametrization_reproduces_map(name):
    M = heisenberg(13)
    H = heisenberg_automorphisms(13)[name]
    res = parametrize(M, M, None, jet(H, 2, 1))
    assert res.ok and res.report.degree == 3
    assert res.map == H.with_cap(3)
    assert all(v >= 0 for v in res.report.margins.values())
    assert full_parametrization(M, M, None, jet(H, 2, 1)) == H.with_cap(3)


def test_phi_hat_needs_extended_jet_and_cap():
    M = heisenberg(13)
    with pytest.raises(ValueError):
        phi_hat_report(M, M, None, jet(identity(13), 2, 1))
    with pytest.raises(ValueError):
        phi_hat(M, M, None, jet(identity(13), 4, 1), degree=4)
    assert phi_hat(M, M, None, jet(identity(13), 4, 1), degree=2) == identity(2)


def test_non_jets_fail_cancellation():
    M = heisenberg(13)
    L = jet(identity(13), 2, 1)
    for key in [(0, (1, 1)), (0, (0, 2)), (1, (0, 2))]:
        bad = L.replace({key: 1})
        res = parametrize(M, M, None, bad)
        assert not res.ok
        with pytest.raises(CancellationError):
            full_parametrization(M, M, None, bad)


def test_parametrize_rejects_infinite_type_source():
    with pytest.raises(SeriesError):
        parametrize(flat(13), heisenberg(13), None, jet(identity(13), 2, 1))


# ---------------------------------------------------------------------------
# jet variety

@pytest.fixture(scope="module")
def variety():
    return jet_variety_equations(heisenberg(13), heisenberg(13), 3)


def test_variety_shape(variety):
    assert variety.jet_order == 2 and variety.degree == 3
    assert variety.ncoords == 2 * 9
    assert len(variety.labels) == len(variety.equations) == len(variety.partner)
    assert set(variety.exclusions) == {(0,)}
    assert variety.exclusions[(0,)] == S.var(2 * variety.ncoords, 8, variety.coords.index((0, (1, 0))))


@pytest.mark.parametrize("name", AUTOS)
def test_automorphism_jets_lie_on_variety(variety, name):
    H = heisenberg_automorphisms(13)[name]
    ev = variety.evaluate(jet(H, 3, 1))
    assert ev.in_variety and ev.cancellation_ok and ev.jtilde == (0,)
    # the full jet also satisfies the polynomial equations directly
    L = jet(H, 3, 1)
    vals = variety.evaluate_at(variety.point({c: L[c] for c in variety.coords}))
    assert not any(vals)


def test_non_jets_violate(variety):
    L = jet(identity(13), 2, 1)
    z, w = S.var(2, 13, 0), S.var(2, 13, 1)
    shear = jet(FormalMap((z, w + z * z), 1, 1), 2, 1)
    for bad in (L.replace({(1, (0, 1)): 2}), shear, L.replace({(0, (1, 1)): 1})):
        ev = variety.evaluate(bad)
        assert not ev.in_variety and ev.violated
    ev = variety.evaluate(L.replace({(0, (1, 0)): 0}))
    assert ev.excluded and not ev.in_variety


def test_partner_structure(variety):
    from crjets.parametrize import _swap_conj

    nc = variety.ncoords
    for j, p in enumerate(variety.partner):
        assert variety.partner[p] == j
        assert variety.equations[p] == _swap_conj(variety.equations[j], nc)


@given(st.lists(gaussian, min_size=36, max_size=36))
def test_conjugation_structure_at_points(variety, values):
    nc = variety.ncoords
    pt = list(values)
    swapped = [x.conjugate() for x in pt[nc:]] + [x.conjugate() for x in pt[:nc]]
    a = variety.evaluate_at(pt)
    b = variety.evaluate_at(swapped)
    for j, p in enumerate(variety.partner):
        assert a[p] == b[j].conjugate()


def test_text_round_trip(variety):
    text = variety.to_text()
    lines = [ln for ln in text.splitlines() if ln.startswith("eq ")]
    assert len(lines) == len(variety.equations)
    m = 2 * variety.ncoords
    for ln, e in zip(lines, variety.equations):
        poly = ln.split(" : ", 1)[1]
        assert parse_poly(poly, m, e.cap) == e
    with pytest.raises(SeriesError):
        parse_poly("[1/2,0/1]*y0^1", m, 4)
