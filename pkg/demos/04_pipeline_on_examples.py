"""
From symmetry pair to general solution
======================================

The bundled problem files hold an equation, a symmetry pair and the
transformation that straightens it.  The pipeline checks the equation and
the pair, maps the equation into the two-parameter generic linearisable
family, reads off (a, b), and pulls the family's general solution back.
"""
from importlib import resources

from linode.canonical import solve_pipeline
from linode.cli import load_problem
from linode.expr import to_string, tree_size

data = resources.files("linode") / "data"

# %%
for name in ("example1.json", "example2.json", "example3.json"):
    prob = load_problem(data / name)
    res = solve_pipeline(prob.ode, *prob.symmetries, prob.transform)
    rep = res.report
    print(f"--- {name}: {prob.ode}")
    print("  stages       ", " -> ".join(rep.stages))
    print("  transformed   rhs with", tree_size(rep.transformed.rhs), "nodes")
    print("  generic (a,b)", to_string(rep.generic.a), to_string(rep.generic.b))
    print("  implicit     ", res.solution.to_dict()["implicit"])
    for branch in res.solution.to_dict()["explicit"]:
        print("  explicit     ", branch)
