"""
One peel, step by step
======================

Build a relaxed diagram, pick the exact node on its shortest path and peel
it off.  The two diagrams left over together keep every feasible order, and
each bound is at least the bound before the peel.
"""

from sopdd import random_instance
from sopdd.diagram import bound, build_initial_relaxation
from sopdd.filtering import FilterContext
from sopdd.peel import peel
from sopdd.relaxation import assignment_ordering, refine
from sopdd.search import select_exact_node

inst = random_instance(9, density=0.1, seed=11)
ctx = FilterContext(inst)

# width-n start: one node per last element, every arc value exact
d = build_initial_relaxation(inst, ctx=ctx)
print("initial   bound", bound(d), " nodes", d.node_count())

refine(d, 6, assignment_ordering(inst), ctx)
print("refined   bound", bound(d), " nodes", d.node_count())

u = select_exact_node(d, "last_exact")
print(f"peeling at layer {u.layer}, prefix cost {u.t_star}")

peeled, residual = peel(d, u, ctx)
print("peeled    bound", bound(peeled), " nodes", peeled.node_count())
print("residual  bound", bound(residual), " nodes", residual.node_count())

# the peeled diagram is small enough to refine further at the same width
refine(peeled, 6, assignment_ordering(inst), ctx)
print("peeled, refined", bound(peeled))
