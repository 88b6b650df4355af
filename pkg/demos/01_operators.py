"""
Elliptic operators and the Pucci envelope
=========================================

Every operator in the library is a function of a symmetric matrix. The
Pucci extremal operators bound all of them from above and below.
"""

# %%
import numpy as np

from puccisys.operators import barenblatt, laplacian, minmax_2d, parse_operator, pucci, pucci_minus, pucci_plus

X = np.diag([1.0, -1.0])
print("P+(diag(1,-1)) =", pucci_plus(X, 1, 2))
print("P-(diag(1,-1)) =", pucci_minus(X, 1, 2))

# %%
# Operators can be built from short text specs, which is how run configs name them.
for text in ("laplacian dim=2", "pucci-minus lambda=1 Lambda=2", "barenblatt gamma=0.5", "minmax-2d"):
    op = parse_operator(text)
    print(f"{text:32s} -> lambda={op.lam:.3f} Lambda={op.Lam:.3f}  F(I) = {op(np.eye(2)):+.3f}")

# %%
# The sandwich P-(X-Y) <= F(X) - F(Y) <= P+(X-Y) on random symmetric pairs.
rng = np.random.default_rng(0)
A, B = rng.standard_normal((2, 2000, 2, 2))
X, Y = 0.5 * (A + A.swapaxes(1, 2)), 0.5 * (B + B.swapaxes(1, 2))
for op in (laplacian(2), pucci("+", 1, 2), barenblatt(0.3), minmax_2d()):
    d = op.evaluate_batch(X) - op.evaluate_batch(Y)
    lo = np.min(d - pucci_minus(X - Y, op.lam, op.Lam))
    hi = np.min(pucci_plus(X - Y, op.lam, op.Lam) - d)
    print(f"{op.describe():40s} slack below {lo:.2e}, above {hi:.2e}")
