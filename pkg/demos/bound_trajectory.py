"""
Bound trajectories
==================

Both searches report a bound event whenever the relaxed bound or the best
solution moves.  Here the two are run side by side on the same instance
with a short budget, and the event streams are turned into arrays.
"""

import numpy as np

from sopdd import branch_and_bound, peel_and_bound, random_instance

inst = random_instance(16, density=0.05, seed=2)

for solver in (branch_and_bound, peel_and_bound):
    res = solver(inst, width=16, time_limit=10)
    ev = np.array([(e.time, e.relaxed_bound, e.best_solution, e.queue_length) for e in res.events])
    print(f"\n{res.algorithm}: {len(ev)} events, final gap {100 * res.gap:.1f}%")
    print("   time      RB      BS   queue")
    # a handful of rows is enough to see the shape
    for t, rb, bs, q in ev[np.linspace(0, len(ev) - 1, min(len(ev), 6)).astype(int)]:
        print(f"{t:7.2f} {rb:7.0f} {bs:7.0f} {q:7.0f}")
