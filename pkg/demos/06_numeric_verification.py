"""
Checking a closed-form solution numerically
===========================================

Integrate the equation with classical RK4 from the closed form's initial
data and compare along the interval.  Halving the step should cut the
error by about 16 until rounding takes over.
"""
from linode.expr import parse_expression
from linode.vecfield import SecondOrderODE
from linode.verify import NumericCheckConfig, SingularityError, rk4_compare

ode = SecondOrderODE.parse("-3*y*p - y^3")
sol = parse_expression("2*x/(x^2 + 1)")

# %%
prev = None
for h in (1e-2, 5e-3, 2.5e-3, 1.25e-3):
    dev = rk4_compare(ode, sol, NumericCheckConfig(0, 1, h))
    note = "" if prev is None else f"  ratio {prev / dev:5.1f}"
    print(f"h = {h:<7g} max deviation {dev:.3e}{note}")
    prev = dev

# %%
# Solutions with free constants take values for them.
hydon = SecondOrderODE.parse("2*p^2/y + p/x + y^2/x")
branch = parse_expression("J2/(x^2 + J2*x + J1 - 1)")
print("with J1 = J2 = 1:", rk4_compare(hydon, branch, NumericCheckConfig(0.5, 1.5, 1e-3), {"J1": 1, "J2": 1}))

# %%
# Running into a pole is reported with its location.
try:
    rk4_compare(SecondOrderODE.parse("2*p^2/y"), parse_expression("1/(1 - x)"), NumericCheckConfig(0, 2, 0.01))
except SingularityError as exc:
    print("singular near x =", round(exc.location, 3))
