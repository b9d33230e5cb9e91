"""Numerical self-checks: geometry invariants, gradients and the least-squares oracle.

Every probe reports a worst-case error and a threshold. Negative controls
(a stretched transport, a doubled gradient) are expected to be rejected and
are reported as such. The same suites are available from the command line
through ``ramopt verify``.

    python3 demos/verify_geometry.py
"""

import numpy as np

from ramopt import ProblemInstance
from ramopt.manifolds import stiefel_geometry
from ramopt.verify import fd_gradient_check, format_reports, run_suite

print(format_reports(run_suite("geometry")))
print()
print(format_reports(run_suite("oracle")))

# A user-defined cost goes through the same finite-difference check.
# Here f(X) = sum(X^3) on St(6, 2) with its Euclidean gradient 3 X^2.
geom = stiefel_geometry(6, 2)
cube = ProblemInstance(geometry=geom, cost=lambda X: float(np.sum(X**3)), egrad=lambda X: 3 * X**2, name="cube")
x = geom.random_point(np.random.default_rng(0))
good = fd_gradient_check(cube, x)
bad = fd_gradient_check(cube, x, grad=lambda X: cube.grad(X) * 1.1)
print(f"\ncube gradient: error {good.max_error:.1e} (passes: {good.passed})")
print(f"cube gradient scaled by 1.1: error {bad.max_error:.1e} (passes: {bad.passed})")
