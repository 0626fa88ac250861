"""
horizon_lightcone.py

Mixture chain with a vanishing asymptotic velocity.

Each bond carries I = sum_k c_k Phi_k (x) Phi'_k - id built from unital qubit
channels. The script

    - checks the structural hypotheses (alpha, beta, nu, cb norms),
    - prints the time-dependent velocity and the log of the envelope,
      which saturates once exp(-nu t) is negligible,
    - measures ||[exp(tL) A, B]|| and shows it stays at zero,
    - runs a generic random chain next to it, where the commutator grows.

Edit the CONFIG block to change sizes.
"""
import numpy as np

from lrlab.dynamics import commutator_profile
from lrlab.envelope import EnvelopeParams, ReproducingFunction, l_mu_norm, log_lr_envelope, velocity
from lrlab.hypothesis import check_model
from lrlab.models import phi_mixture_chain, random_chain
from lrlab.operators import SIGMA_X

# ---------------------------------------------------------------------------
# CONFIG
# ---------------------------------------------------------------------------
N_SITES = 6
MU = 0.25
SEED = 0

model = phi_mixture_chain(N_SITES)
report = check_model(model, seed=SEED, restarts=20)
print(f"hypotheses passed: {report.passed}")
print(f"  structure residual {report.structure_residual_max:.2e}")
print(f"  nu={report.nu:.4f} alpha={report.alpha:.2e} beta={report.beta:.4f}")
entry = report.cb_norms[0]
print(f"  cb bracket per bond: [{entry.lower_estimate:.4f}, {entry.upper_bound:.4f}]")

F = ReproducingFunction(0.5, 2.0, MU, N_SITES)
lmu = l_mu_norm(model, F, MU, [e.upper_bound for e in report.cb_norms])
params = EnvelopeParams(report.alpha, report.beta, report.nu, MU, F.f_norm, F.c_mu, lmu)

times = np.array([0.0, 0.5, 1.0, 2.0, 5.0, 10.0]) / report.nu
dist = N_SITES - 1
print(f"\nenvelope at distance {dist} (log scale, ||L||_mu={lmu:.2f}):")
for t in times:
    print(f"  t={t:7.3f}  v(t)={velocity(t, params):9.3f}  log envelope={log_lr_envelope(t, dist, params):9.3f}")

recs = commutator_profile(model, SIGMA_X, 0, SIGMA_X, [dist], times)
print("\nmixture chain ||[exp(tL)X_0, X_%d]||:" % dist)
print("  " + "  ".join(f"{r.empirical_norm:.1e}" for r in recs))

other = random_chain(N_SITES, np.random.default_rng(SEED))
recs = commutator_profile(other, SIGMA_X, 0, SIGMA_X, [2, dist], np.linspace(0, 3, 7))
print("\nrandom chain, same commutator:")
for d in (2, dist):
    row = [r.empirical_norm for r in recs if r.distance == d]
    print(f"  d={d}: " + "  ".join(f"{v:.1e}" for v in row))
