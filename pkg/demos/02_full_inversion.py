"""
Inverting the oracle
====================

Ask for feature vectors whose target is 1900. The generator turns a fixed
block of noise into 8 candidate vectors and learns only through the frozen
oracle's input gradient. Every candidate is then scored on the exact function.
"""

import numpy as np

from oggn.generator import GenerationTask, oggn_train, verify_result
from oggn.oracle import synth_dataset, train_oracle
from oggn.poly import POLY4

train = synth_dataset(POLY4, 10000, 0.0, 500.0, seed=1)
oracle = train_oracle(train, seed=0)

result = oggn_train(GenerationTask(oracle, 1900.0, max_epochs=2000, seed=0, truth=POLY4))
print(f"{result.epochs_run} epochs, stopped on {result.stop_reason}, best loss {result.best_loss:.3g}")

for row in verify_result(result, POLY4):
    x = np.round(row["features"], 2)
    print(x, "oracle", round(row["predicted"], 1), "true", round(row["true_value"], 1))

# the rows differ: many inputs share one target
print("spread of x1 across rows:", np.ptp(result.features[:, 0]).round(1))
