"""When do the two recommenders agree in the long run?

The MF and MB steady states coincide exactly when a scalar gap, a linear
functional of the initial opinions, vanishes. Consensus opinions always lie in
its kernel; generic opinions do not.
"""

import numpy as np

from fjrec import (ControlledPlant, equivalence_certificate, extract_plant, generate_network,
                   mb_target, mf_equilibrium)

net = generate_network(8, 50, seed=3)
p = extract_plant(net, 8)


def report(label, plant):
    cert = equivalence_certificate(plant)
    diff = np.abs(mf_equilibrium(plant) - mb_target(plant).x_star).max()
    print(f"{label:<22} gap {cert.gap:.2e}   max |x_MF - x_MB| {diff:.2e}")


report("random opinions", p)
report("consensus at 0.4", ControlledPlant(p.A, p.B, p.lambda_tilde, np.full(8, 0.4)))

# project random opinions onto the kernel of the gap functional
f = equivalence_certificate(p).kernel_functional
y = np.random.default_rng(0).normal(size=8)
y -= (f @ y) / (f @ f) * f
report("kernel direction", ControlledPlant(p.A, p.B, p.lambda_tilde, 0.5 + 0.4 * y / abs(y).max()))
