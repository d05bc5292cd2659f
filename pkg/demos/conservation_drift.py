"""
Balance laws along gradient flow
================================

Positive homogeneity of ReLU makes ``(|W1|^2 - |W2|^2)/2`` constant along
continuous gradient flow.  Explicit Euler breaks it at first order in the step.
"""

import numpy as np

from symbreak.conservation import ConservedQuantity, check_conservation, drift_scaling
from symbreak.relu_loss import DistributionSpec, LossProblem, NetworkSpec

net = NetworkSpec.multilayer((6, 6, 1))
problem = LossProblem(net, (np.eye(6), np.ones((1, 6))), DistributionSpec.gaussian(6))
rng = np.random.default_rng(0)
x0 = tuple(0.5 * rng.standard_normal(s) for s in net.weight_shapes())

q = ConservedQuantity.scalar(1, 2)
res = check_conservation(problem, q, x0, step=1e-2, n_steps=100)
print("loss", round(res.loss_start, 4), "->", round(res.loss_end, 4), " max drift", res.max_drift)

# halving the step at a fixed horizon halves the drift
out = drift_scaling(problem, q, x0)
for h, dr in zip(out["steps"], out["drifts"]):
    print(f"step {h:.4f}: drift {dr:.3e}")
print("ratios:", np.round(out["ratios"], 3))

# %%
# A softplus layer is not homogeneous, so the premise check refuses to run.
soft = LossProblem(NetworkSpec.multilayer((6, 6, 1), "softplus"), problem.teacher, problem.distribution)
try:
    check_conservation(soft, q, x0, 1e-2, 10)
except ValueError as exc:
    print("refused:", exc)
