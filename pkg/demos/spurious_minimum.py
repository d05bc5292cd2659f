"""
Symmetry of a spurious minimum
==============================

Train a 6-unit student on an identity teacher, sharpen the endpoint with
full-gradient descent on the exact loss, and read off its isotropy group.
"""

import numpy as np

from symbreak.io import read_matrix_csv
from symbreak.isotropy import classify, quantize
from symbreak.relu_loss import DistributionSpec, LossProblem, NetworkSpec, analytic_loss
from symbreak.trainer import TrainConfig, refine, sgd_run

d = 6
problem = LossProblem(NetworkSpec.two_layer(d, d), np.eye(d), DistributionSpec.gaussian(d))

# one SGD run: fresh batch of 1000 per step, step size 0.01
run = sgd_run(problem, TrainConfig(), run_seed=4)
print("SGD:", run.stop_reason, "after", run.steps, "steps, loss", round(run.loss, 6))

# the raw SGD point has no exact equalities left in it
print("classes at tol 1e-6 before refinement:", quantize(run.weights, 1e-6).num_classes)
ref = refine(problem, run.weights)
print("after refinement:", quantize(ref.weights, 1e-6).num_classes, "classes, |grad| =", ref.grad_norm)
print(classify(ref.weights, 1e-6).match_name)

# %%
# Most runs at this size reach the global minimum.  A spurious one, found by
# scanning many initializations, ships with the test data.
W = read_matrix_csv("tests/data/spurious_d6.csv")
rep = classify(W, 1e-6)
print("spurious point: loss", analytic_loss(problem, W), "->", rep.match_name, "order", rep.isotropy_order)

# the normalized pattern: a 5x5 block with constant diagonal, plus one special row and column
L = quantize(W, 1e-6).labels[np.ix_(rep.row_order, rep.col_order)]
print(L)
