"""How many common factors does a panel with two random-walk trends and one AR(1) factor carry?

    python3 demos/01_factor_number.py
"""
import numpy as np

from stressfactors.nsfactor import factor_number_test, initial_loadings, principal_angle_deg
from stressfactors.synth import FactorDgpSpec, gen_factor_panel

panel, truth = gen_factor_panel(FactorDgpSpec(m=9, r1=2, r2=1, T=2000, seed=1))
r, table = factor_number_test(panel, lag_set=(1, 2, 3))

print(f"{'r':>2} {'q05':>8} {'q95':>8} " + " ".join(f"{'S_k' + str(k):>9}" for k in table.lags))
for row_r, q05, q95, s, _ in table.rows():
    print(f"{row_r:>2} {q05:8.3f} {q95:8.3f} " + " ".join(f"{v:9.3f}" for v in s))
print(f"\nselected r = {r} (truth: 3)")

# the lag-1 generalized covariance already points at the right subspace
init = initial_loadings(panel, r)
print(f"angle between initial and true loading spans: {principal_angle_deg(init.loadings, truth.loadings):.2f} deg")

# integrated trends dominate: the 3rd eigenvalue is tiny next to the 2nd
print("top eigenvalues of sym C_X(1):", np.round(init.eigenvalues, 4))
