import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qespdm.algebra import AlgebraParams, spectrum
from qespdm.mapping import COULOMB, MORSE, SEXTIC, Grid, build_mapping
from qespdm.massprofile import constant, quadratic, rational2
from qespdm.potentials import BEN_DANIEL_DUKE, ZHU_KROEMER, MassOrdering, PotentialError, e_coulomb, \
    e_morse, e_sextic, exactly_solvable_epsilons, family_potential, ordering_terms, v_coulomb, \
    v_general, v_morse, v_sextic


def P(ell=0.0, b=0.0, q=1.0, j=0.5):
    return AlgebraParams.from_j(ell, b, q, j)


def test_gamma_is_derived():
    o = MassOrdering(0.3, -0.8)
    assert o.alpha + o.beta + o.gamma == -1.0
    assert ZHU_KROEMER.gamma == -0.5 and BEN_DANIEL_DUKE.gamma == 0.0


# --- energies -------------------------------------------------------------------

def test_sextic_energy():
    assert e_sextic(P(ell=1.0, b=2.0), 0.0) == 5.0


def test_coulomb_energy_as_printed():
    assert e_coulomb(P(b=3.0)) == 0.0
    assert e_coulomb(P(b=0.0)) == -4.5


def test_coulomb_energy_corrected_sign():
    assert e_coulomb(P(b=0.0), corrected=True) == 4.5


def test_morse_energy():
    assert e_morse(P(ell=0.0)) == -0.03125
    assert e_morse(P(ell=1.0)) == -0.28125


def test_exactly_solvable_levels():
    assert exactly_solvable_epsilons(P(b=1.5, q=0.0, j=1.5)) == [0.0, 1.5, 3.0, 4.5]
    with pytest.raises(PotentialError):
        exactly_solvable_epsilons(P())


# --- explicit families ---------------------------------------------------------------

def test_sextic_constant_mass_shape():
    g = Grid(0.5, 1.5, 101)
    s = build_mapping(SEXTIC, constant(), g, anchor=0.0)
    V = v_sextic(P(), BEN_DANIEL_DUKE, constant(), s)
    np.testing.assert_allclose(V.V, -4.5 * g.x**2 + 0.5 * g.x**6, rtol=1e-13)
    assert V.V[50] == pytest.approx(-4.0, rel=1e-14)
    assert V.energy is None and V.excluded == []


def test_sextic_q0_is_harmonic_plus_centrifugal():
    g = Grid(0.2, 3.0, 101)
    s = build_mapping(SEXTIC, constant(), g, anchor=0.0)
    ell, b = 1.5, 0.8
    V = v_sextic(P(ell=ell, b=b, q=0.0, j=1.0), BEN_DANIEL_DUKE, constant(), s)
    x = g.x
    np.testing.assert_allclose(V.V, ell * (ell + 1) / (2 * x**2) + 0.5 * b**2 * x**2, rtol=1e-13)


def test_coulomb_hand_value():
    g = Grid(0.5, 1.5, 101)
    s = build_mapping(COULOMB, constant(), g, anchor=0.0)
    eps = math.sqrt(1.5)
    V = v_coulomb(P(q=0.0), BEN_DANIEL_DUKE, constant(), s, eps)
    assert V.V[50] == pytest.approx(-3 / 32 - eps, rel=1e-12)


def test_morse_hand_value():
    g = Grid(-1.0, 1.0, 101)
    s = build_mapping(MORSE, constant(), g, anchor=0.0)
    params = P(q=2.0, j=0)
    for corrected in (False, True):
        V = v_morse(params, BEN_DANIEL_DUKE, constant(), s, 0.0, corrected=corrected)
        assert V.V[50] == pytest.approx(-0.75, rel=1e-14)


def test_morse_overflow_advisory():
    g = Grid(-200.0, 1.0, 101)
    s = build_mapping(MORSE, constant(), g, anchor=0.0)
    with pytest.raises(PotentialError, match="overflows"):
        v_morse(P(), BEN_DANIEL_DUKE, constant(), s, 0.0)


def test_singular_points_are_excluded_and_listed():
    g = Grid(0.0, 1.0, 33)
    s = build_mapping(SEXTIC, constant(), g, anchor=0.0)
    V = v_sextic(P(ell=1.0), BEN_DANIEL_DUKE, constant(), s)
    assert V.excluded == [0]
    assert math.isnan(V.V[0]) and np.all(np.isfinite(V.V[1:]))
    assert not V.valid[0]


def test_general_needs_energy():
    g = Grid(0.5, 1.5, 33)
    s = build_mapping(SEXTIC, constant(), g, anchor=0.0)
    with pytest.raises(PotentialError, match="energy"):
        v_general(P(), BEN_DANIEL_DUKE, constant(), s, 0.0, None)


def test_general_matches_sextic_constant_mass():
    g = Grid(0.05, 4.0, 501)
    s = build_mapping(SEXTIC, constant(), g, anchor=0.0)
    eps = math.sqrt(1.5)
    gen = v_general(P(), BEN_DANIEL_DUKE, constant(), s, eps, 2 * eps)
    fam = v_sextic(P(), BEN_DANIEL_DUKE, constant(), s, eps)
    assert np.max(np.abs(gen.V - fam.V)) < 1e-10 * max(1.0, np.max(np.abs(fam.V)))


FAMILY_CASES = [
    (SEXTIC, Grid(0.1, 3.0, 301)),
    (COULOMB, Grid(0.1, 3.0, 301)),
    (MORSE, Grid(-1.5, 6.0, 301)),
]
ORDERINGS = [BEN_DANIEL_DUKE, ZHU_KROEMER, MassOrdering(0.0, 0.0), MassOrdering(-0.3, -0.4)]


@pytest.mark.parametrize("fam, g", FAMILY_CASES, ids=lambda v: getattr(v, "variant", ""))
@pytest.mark.parametrize("ordering", ORDERINGS, ids=lambda o: f"{o.alpha}_{o.beta}")
@pytest.mark.parametrize("mass", [constant(), rational2(2.0)], ids=["constant", "rational2"])
def test_family_equals_general(fam, g, ordering, mass):
    params = P(ell=0.5, b=0.7, q=1.3, j=1.0)
    s = build_mapping(fam, mass, g, anchor=0.0)
    eps = spectrum(params).roots[1]
    V = family_potential(fam.variant, params, ordering, mass, s, eps, corrected=True)
    E = V.energy if V.energy is not None else e_sextic(params, eps)
    gen = v_general(params, ordering, mass, s, eps, E)
    scale = max(1.0, np.max(np.abs(V.V)))
    assert np.max(np.abs(V.V - gen.V)) < 1e-9 * scale


def test_printed_coulomb_energy_disagrees_with_general():
    params = P(ell=0.5, b=0.7, q=1.3, j=1.0)
    g = Grid(0.1, 3.0, 101)
    s = build_mapping(COULOMB, constant(), g, anchor=0.0)
    eps = spectrum(params).roots[0]
    V = v_coulomb(params, BEN_DANIEL_DUKE, constant(), s, eps, corrected=False)
    gen = v_general(params, BEN_DANIEL_DUKE, constant(), s, eps, V.energy)
    # the two differ by exactly twice the energy
    np.testing.assert_allclose(gen.V - V.V, 2 * e_coulomb(params), rtol=1e-10)


def test_printed_morse_coefficient_disagrees_with_general():
    params = P(ell=0.5, b=0.7, q=1.3, j=1.0)
    g = Grid(-1.0, 3.0, 101)
    s = build_mapping(MORSE, constant(), g, anchor=0.0)
    eps = spectrum(params).roots[0]
    printed = v_morse(params, BEN_DANIEL_DUKE, constant(), s, eps, corrected=False)
    fixed = v_morse(params, BEN_DANIEL_DUKE, constant(), s, eps, corrected=True)
    # the e^{-2u} coefficient differs by j q / 2
    np.testing.assert_allclose(printed.V - fixed.V, 0.5 * params.j * params.q * np.exp(-2 * s.u), rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_constant_mass_ordering_invariance(alpha, beta):
    params = P(ell=1.0, b=0.3, q=0.8, j=1.0)
    eps = spectrum(params).roots[0]
    ref_order = BEN_DANIEL_DUKE
    for fam, g in FAMILY_CASES:
        s = build_mapping(fam, constant(2.0), g, anchor=0.0)
        a = family_potential(fam.variant, params, MassOrdering(alpha, beta), constant(2.0), s, eps)
        b = family_potential(fam.variant, params, ref_order, constant(2.0), s, eps)
        assert np.max(np.abs(a.V - b.V)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_ordering_difference_is_mass_term_only(alpha, beta):
    params = P(ell=1.0, b=0.3, q=0.8, j=1.0)
    eps = spectrum(params).roots[0]
    o1, o2 = MassOrdering(alpha, beta), ZHU_KROEMER
    for fam, g in FAMILY_CASES:
        s = build_mapping(fam, rational2(3.0), g, anchor=0.0)
        a = family_potential(fam.variant, params, o1, rational2(3.0), s, eps)
        b = family_potential(fam.variant, params, o2, rational2(3.0), s, eps)
        diff = ordering_terms(o1, s.m, s.m1, s.m2) - ordering_terms(o2, s.m, s.m1, s.m2)
        assert np.max(np.abs((a.V - b.V) - diff)) < 1e-10


def test_quadratic_mass_sextic():
    g = Grid(0.5, 2.0, 101)
    s = build_mapping(SEXTIC, quadratic(1.0), g, anchor=0.0)
    V = v_sextic(P(), BEN_DANIEL_DUKE, quadratic(1.0), s)
    u = g.x**2 / 2
    # m = x^2, m' = 2x, m'' = 2 with (a, b) = (0, -1): (-1 + 9/16) 4x^2 / (2 x^6) + 2 / (8 x^4)
    mass = (-7 / 16) * 4 * g.x**2 / (2 * g.x**6) + 2 / (8 * g.x**4)
    np.testing.assert_allclose(V.V, -4.5 * u**2 + 0.5 * u**6 + mass, rtol=1e-12)
