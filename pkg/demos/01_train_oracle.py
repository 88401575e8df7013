"""
Training an oracle
==================

The oracle is an ordinary regression net. Here it learns the built-in
four-variable function from 10,000 uniform samples on [0, 500)^4 and is
scored on 1,000 fresh samples.
"""

import numpy as np

from oggn import poly
from oggn.oracle import evaluate_oracle, oracle_value, save_oracle, synth_dataset, train_oracle

train = synth_dataset(poly.POLY4, 10000, 0.0, 500.0, seed=1, function_id="poly4")
test = synth_dataset(poly.POLY4, 1000, 0.0, 500.0, seed=2, function_id="poly4")
print("targets span", train.targets.min().round(1), "to", train.targets.max().round(1))

oracle = train_oracle(train, hidden=(64, 64), epochs=200, seed=0, validation=test)
m = evaluate_oracle(oracle, test)
print(f"test mean relative error {m['mean_rel_error']:.3%}, worst {m['max_rel_error']:.3%}")

# spot check a few points against the exact function
x = np.array([[1.0, 1.0, 1.0, 1.0], [100.0] * 4, [224.6277, 0.0, 283.2135, 328.2939]])
for row, pred in zip(x, oracle_value(oracle, x)[:, 0]):
    print(row, "oracle", round(pred, 2), "exact", round(poly.poly_eval(poly.POLY4, row), 2))

save_oracle(oracle, "poly4_oracle.json")
print("saved poly4_oracle.json")
