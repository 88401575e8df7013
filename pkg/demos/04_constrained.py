"""
Staying inside a box
====================

With x1..x3 held to [1, 100] and x4 = 100, the largest reachable value is
f(100, 100, 100, 100) = 787.34. Asking for 788 pushes the search against the
walls. The constraint map divides overshoots by c1 and multiplies undershoots
by c2. Training stops once a row that has entered the box leaves it again.
"""

import numpy as np

from oggn.constraint import ConstraintSpec, apply_constraint, in_range
from oggn.generator import Constrained, Fixed, GenerationTask, oggn_train
from oggn.oracle import synth_dataset, train_oracle
from oggn.poly import POLY4, poly_eval

box = ConstraintSpec(lower=1.0, upper=100.0, c1=20.0, c2=10.0)
print("200 ->", apply_constraint(box, 200.0), "  0.5 ->", apply_constraint(box, 0.5), "  50 ->", apply_constraint(box, 50.0))
print("ceiling", round(poly_eval(POLY4, [100.0] * 4), 2))

oracle = train_oracle(synth_dataset(POLY4, 10000, 0.0, 500.0, seed=1), seed=0)
c = Constrained(box)
task = GenerationTask(oracle, 788.0, [c, c, c, Fixed(100.0)], max_epochs=200, stop_rule="range_exit", seed=0, truth=POLY4)
result = oggn_train(task)

print(f"stopped on {result.stop_reason} after {result.epochs_run} epochs")
print(np.round(result.features, 3))
print("in range (1% slack):", in_range(task.specs, result.features, 0.01).all())
print("true targets:", np.round(result.true_targets[:, 0], 1))
