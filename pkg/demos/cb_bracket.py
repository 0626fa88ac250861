"""
cb_bracket.py

Completely bounded norm bracket without an SDP solver.

The lower estimate maximizes ||(S (x) id_d)(V)|| over unitaries V by
alternating singular-vector updates. The upper bound is the trace norm of
the Choi matrix, or ||S(1)|| when S is completely positive. For depolarize
minus identity on a qubit the exact value is 1.5, which the ascent
reaches, while the Choi bound gives 3.
"""
from lrlab.channels import LindbladTerm, pauli_group, phi_family, phi_mixture_term, twirl_channel, uniform
from lrlab.hypothesis import cb_norm
from lrlab.operators import HEISENBERG, identity_super

dep = twirl_channel(uniform(pauli_group())).heisenberg_action
cases = {
    "depolarize - id": LindbladTerm((0,), dep - identity_super(2, HEISENBERG)).heisenberg_action,
    "Phi(0.3, 0.2)": phi_family(0.3, 0.2).heisenberg_action,
    "Phi mixture bond": phi_mixture_term().heisenberg_action,
}
for name, s in cases.items():
    lo = cb_norm(s, "lower_estimate", seed=0)
    hi = cb_norm(s, "upper_bound")
    print(f"{name:18s} lower={lo:.6f}  upper={hi:.6f}")
