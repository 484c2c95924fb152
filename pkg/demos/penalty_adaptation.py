"""
What the adaptive penalty actually does
========================================

Start cubic regularization with an absurdly small penalty on a bumpy
one-dimensional objective.  Early steps overshoot, the trust ratio
collapses, and the controller rejects them while doubling the penalty;
once the penalty matches the local curvature the steps start landing.
"""

import numpy as np

from vrcubic import AdaptivePenalty, FiniteSumProblem, SolverConfig, run_cr

problem = FiniteSumProblem(
    n=1,
    dim=1,
    component_value=lambda i, x: float(np.cos(x[0])),
    component_grad=lambda i, x: np.array([-np.sin(x[0])]),
    component_hess=lambda i, x: np.array([[-np.cos(x[0])]]),
    lipschitz_grad=1.0,
    lipschitz_hess=1.0,
)

snapshots = []
config = SolverConfig(
    eps=1e-4,
    T=100,
    x0=np.array([0.1]),
    penalty=AdaptivePenalty(m0=1e-8),
)
result = run_cr(problem, config, callback=snapshots.append)

print(" t   penalty      x         step taken?")
for s in snapshots:
    print(f"{s.t:2d}   {s.penalty:8.2e}  {s.x[0]:+8.4f}   {'yes' if s.accepted else 'REJECTED'}")

rejected = sum(1 for s in snapshots if not s.accepted)
print()
print(f"{result.exit} at x = {result.x_out[0]:+.4f} (cos = {np.cos(result.x_out[0]):+.5f})")
print(f"{rejected} rejections before the penalty reached a workable scale")
