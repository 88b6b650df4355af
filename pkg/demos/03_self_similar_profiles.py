"""
Self-similar profiles and decay exponents
=========================================

Power iteration on the rescaled flow gives the decay exponent alpha and the
profile psi. For the Laplacian alpha = N/2 and psi is a Gaussian.
"""

# %%
import numpy as np

from puccisys.operators import barenblatt, laplacian, pucci
from puccisys.selfsim import default_grid, envelope_check, power_iterate, self_similar_field

grid = default_grid(1, radius=10.0, h=0.05)
ops = {"-laplacian": laplacian(), "P-(1,2)": pucci("-", 1, 2),
       "P+(1,2)": pucci("+", 1, 2), "barenblatt 1/3": barenblatt(1 / 3)}
pairs = {name: power_iterate(op, grid) for name, op in ops.items()}
for name, pair in pairs.items():
    env = envelope_check(pair, ops[name].lam, ops[name].Lam)
    print(f"{name:15s} alpha = {pair.alpha:.4f}  steps = {len(pair.alpha_history):3d}  "
          f"tail rate {env.delta_fit:.3f} in [{env.delta_upper:.3f}, {env.delta_lower:.3f}]: {env.passed}")

# %%
# alpha(P-) <= alpha(-Laplacian) = 1/2 <= alpha(P+), and the convex operators sit above 1/2.
psi = pairs["-laplacian"].psi.values
print("max |psi - exp(-y^2/4)| =", np.max(np.abs(psi - np.exp(-grid.axis**2 / 4))))

# %%
# phi(x, t) = t^-alpha psi(x / sqrt t) solves the homogeneous equation.
pair = pairs["-laplacian"]
for t in (0.5, 2.0, 4.0):
    phi = self_similar_field(pair, t).values
    exact = t**-0.5 * np.exp(-grid.axis**2 / (4 * t))
    print(f"t = {t}: max |phi - heat kernel| / max = {np.max(np.abs(phi - exact)) / exact.max():.2e}")

# %%
# Profiles round-trip through JSON metadata plus the binary field format.
pair.save("/tmp/laplacian_profile")
print(open("/tmp/laplacian_profile.json").read()[:200])
