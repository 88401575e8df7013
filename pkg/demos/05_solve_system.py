"""
Solving a system of equations
=============================

    9x^2 + 8.97y^7.8 + 0.876z - 32 = 0
    12x^3 + 9.97y^8 + 10.876z^3 - 43 = 0

The oracle is now the residual norm sqrt(f^2 + g^2), which is exactly known,
and the target is 0. y carries a fractional power, so it is generated
positive; x and z may take either sign.
"""

import numpy as np

from oggn.generator import solve_system
from oggn.poly import DEMO_SYSTEM, system_residuals

result = solve_system(DEMO_SYSTEM, rows=8, max_epochs=5000, tolerance=1e-4, seed=0)
print(f"{result.epochs_run} epochs, stopped on {result.stop_reason}")

norms = np.linalg.norm(result.residuals, axis=1)
best = int(np.argmin(norms))
x = result.features[best]
print("best row x, y, z =", np.round(x, 4), "residuals", system_residuals(DEMO_SYSTEM, x), "norm", norms[best])

# a different seed lands on a different root
other = solve_system(DEMO_SYSTEM, seed=3)
print("seed 3 median norm", np.median(np.linalg.norm(other.residuals, axis=1)).round(4))
