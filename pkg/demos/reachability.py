"""Which steady opinions can a recommender reach with a constant input?

Each user's steady opinion grows monotonically with the recommended position
u, so u = 0 and u = 1 bracket everything reachable.
"""

import numpy as np

from fjrec import constant_input_steady_state, extract_plant, generate_network, reachability_bounds

net = generate_network(6, 25, seed=11)
p = extract_plant(net, 6)
b = reachability_bounds(p)

np.set_printoptions(precision=3, suppress=True)
print("initial opinions:", p.x0)
print("lower bound (u=0):", b.lower)
print("upper bound (u=1):", b.upper)
print("susceptibility (upper - lower):", b.upper - b.lower)
for u in (0.25, 0.5, 0.75):
    print(f"steady state at u={u}:", constant_input_steady_state(p, u))
