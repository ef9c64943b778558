"""
Point symmetries of a second-order equation
===========================================

Prolong a vector field, test the determining equation, and check that two
generators form the non-commuting pair ``[X1, X2] = X1`` needed for
linearisation.  The equation is y'' = -3 y y' - y^3.
"""
from linode.vecfield import (
    SecondOrderODE,
    VectorField,
    check_lie_pair,
    commutator,
    is_point_symmetry,
    prolong2,
    symmetry_residual,
)
from linode.expr import to_string

ode = SecondOrderODE.parse("-3*y*p - y^3")
print(ode)

# %%
# Translation in x is obviously a symmetry; scaling x -> e x, y -> y / e is
# the other half of the pair.
X1 = VectorField.parse("1", "0")
X2 = VectorField.parse("x", "-y")
for name, v in [("X1", X1), ("X2", X2)]:
    pr = prolong2(v, ode)
    print(f"{name}: eta1 = {to_string(pr.eta1)}, eta2 = {to_string(pr.eta2)}")
    print("   symmetry:", is_point_symmetry(v, ode))

# %%
# The commutator and the full pair check.
c = commutator(X1, X2)
print("[X1, X2] =", c.to_dict())
print("pair checks:", check_lie_pair(X1, X2, ode).as_list())

# %%
# A field that is not a symmetry leaves a nonzero residual.
bad = VectorField.parse("0", "1")
print("d/dy residual:", to_string(symmetry_residual(bad, ode)))
