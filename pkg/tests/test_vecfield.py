import itertools

import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from linode.canonical import omega_basis, phi_basis
from linode.expr import P, Q, W, X, Y, Z, equivalent_zero, p, x, y
from linode.vecfield import (
    SecondOrderODE,
    VectorField,
    check_lie_pair,
    commutator,
    is_point_symmetry,
    is_proportional,
    prolong2,
    symmetry_residual,
    zero_field,
)

EMDEN = SecondOrderODE.parse("-3*y*p - y^3")
a = sp.Symbol("a")


def quad_ode(av):
    params = ("a",) if getattr(av, "free_symbols", None) else ()
    return SecondOrderODE(P / X + av * P**3 / X, (X, Y, P), params)


FREE = SecondOrderODE(sp.S.Zero, (Z, W, Q))


def test_field_rejects_derivative_symbol():
    with pytest.raises(ValueError):
        VectorField(p, sp.S.One)


def test_field_round_trips_through_dict():
    v = VectorField.parse("1 - 1/(x*y)", "y/x")
    assert VectorField.from_dict(v.to_dict()) == v


def test_ode_rejects_undeclared_symbols():
    with pytest.raises(ValueError):
        SecondOrderODE.parse("k*y")
    assert SecondOrderODE.parse("k*y", ["k"]).params == ("k",)


# -- prolongation


def test_translation_prolongs_trivially():
    pr = prolong2(VectorField(1, 0), EMDEN)
    assert pr.eta1 == 0 and pr.eta2 == 0


def test_scaling_prolongation():
    pr = prolong2(VectorField(x, -y), EMDEN)
    assert equivalent_zero(pr.eta1 + 2 * p).is_zero
    # eta2 = D(-2p) - f D(x) = -3f on shell
    assert equivalent_zero(pr.eta2 + 3 * EMDEN.rhs).is_zero


def test_dilation_on_free_particle():
    pr = prolong2(VectorField(x, 0), SecondOrderODE(0))
    assert pr.eta1 == -p and pr.eta2 == 0


def test_first_prolongation_matches_closed_form():
    xi, eta = x**2 * y, sp.exp(x) + y**3
    pr = prolong2(VectorField(xi, eta), EMDEN)
    closed = sp.diff(eta, x) + (sp.diff(eta, y) - sp.diff(xi, x)) * p - sp.diff(xi, y) * p**2
    assert equivalent_zero(pr.eta1 - closed).is_zero


# -- symmetry tests


def test_translation_is_symmetry_of_emden():
    assert is_point_symmetry(VectorField(1, 0), EMDEN)


def test_phi1_on_quadratic_family():
    assert is_point_symmetry(VectorField(1 / X, 0, (X, Y)), quad_ode(a))


def test_dy_is_not_symmetry_of_emden():
    v = VectorField(0, 1)
    assert not is_point_symmetry(v, EMDEN)
    # sign follows residual = eta2 - xi f_x - eta f_y - eta1 f_p
    assert sp.expand(symmetry_residual(v, EMDEN)) == 3 * p + 3 * y**2


@pytest.mark.parametrize("av", [sp.Integer(1), sp.Integer(-1), sp.Rational(2, 3), sp.Rational(-7, 5), a])
def test_all_phi_fields_are_symmetries(av):
    ode = quad_ode(av)
    assert all(is_point_symmetry(v, ode) for v in phi_basis(av))


def test_all_omega_fields_are_symmetries():
    assert all(is_point_symmetry(v, FREE) for v in omega_basis())


def test_printed_omega8_is_not_a_symmetry():
    assert not is_point_symmetry(VectorField(Z**2, -Z * W, (Z, W)), FREE)


# -- commutators


def test_commutator_examples():
    assert commutator(VectorField(1, 0), VectorField(x, -y)) == VectorField(1, 0)
    v = VectorField(x * y, sp.sqrt(x))
    assert commutator(v, v).is_zero()
    om = omega_basis()
    assert commutator(om[0], om[2]) == om[0]


def test_jacobi_on_basis_triples():
    for basis in (phi_basis(a), omega_basis()):
        for u, v, w in itertools.combinations(basis, 3):
            total = (commutator(commutator(u, v), w) + commutator(commutator(v, w), u)
                     + commutator(commutator(w, u), v))
            assert total.is_zero()


_comp = st.sampled_from([x, y, x * y, x**2, 1 / y, sp.sqrt(x**2 + 1), sp.exp(y), sp.Integer(3), x - y**2])
fields = st.tuples(_comp, _comp).map(lambda t: VectorField(*t))


@settings(max_examples=50, deadline=None)
@given(fields, fields)
def test_commutator_antisymmetric(v, w):
    assert (commutator(v, w) + commutator(w, v)).is_zero()


def test_chart_mismatch_rejected():
    with pytest.raises(ValueError):
        commutator(VectorField(1, 0), VectorField(1, 0, (X, Y)))


# -- proportionality and pairs


def test_proportionality_examples():
    assert not is_proportional(VectorField(1, 0), VectorField(x, -y))
    v = VectorField(x * y, y**2 + 1)
    assert is_proportional(v, 3 * v)
    assert is_proportional(VectorField(y, 0), VectorField(x * y, 0))


def test_emden_pair_admissible():
    r = check_lie_pair(VectorField(1, 0), VectorField(x, -y), EMDEN)
    assert r.as_list() == [True, True, True, True] and r.admissible


def test_proportional_pair_fails_only_independence():
    r = check_lie_pair(VectorField(1, 0), VectorField(2, 0), EMDEN)
    assert r.first_is_symmetry and r.second_is_symmetry
    assert not r.not_proportional and not r.admissible


def test_zero_field_is_allowed():
    assert zero_field().is_zero()
