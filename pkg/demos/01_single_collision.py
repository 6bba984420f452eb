"""A single collision between two thermal qubits.

The system starts thermal at beta_s = 1 and exchanges energy once with an
ancilla at beta_1 = 2 through a half-swap (theta = pi/4).  The heat law has
three outcomes (lose a quantum, nothing, gain a quantum) and already shows
the two hallmarks of this kind of exchange:

  * the odds of releasing versus absorbing one quantum equal
    exp((beta_1 - beta_s) * gap), and
  * the reversed protocol has exactly the same heat law.
"""

import math
from fractions import Fraction

from heatchain import (
    AncillaSpec,
    ModelConfig,
    Spectrum,
    UnitarySpec,
    compare_distributions,
    exact_backward_joint,
    exact_forward_joint,
    verify_joint_ft,
)

qubit = Spectrum.from_values(["0", "1"])
model = ModelConfig(
    system=qubit,
    system_beta=1.0,
    ancillas=(AncillaSpec(qubit, 2.0, UnitarySpec.partial_swap(math.pi / 4)),),
    master_seed=0,
)

forward = exact_forward_joint(model)
backward = exact_backward_joint(model)

print("exact heat law of one half-swap collision (beta_s=1, beta_1=2):")
for (q,), p in forward.items_sorted():
    print(f"  Q = {str(q):>2}   probability {p:.12f}")

plus = forward.probability((Fraction(1),))
minus = forward.probability((Fraction(-1),))
print(f"\nP(+1)/P(-1) = {plus / minus:.12f}")
print(f"exp(beta_1 - beta_s) = {math.exp(1.0):.12f}")

print(f"\nforward vs backward law, largest entry gap: {compare_distributions(forward, backward):.3e}")
report = verify_joint_ft(forward, backward, model)
print(f"exchange identity residual: {report.max_log_residual:.3e} over {report.checked_pairs} outcomes")
