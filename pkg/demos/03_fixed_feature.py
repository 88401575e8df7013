"""
Pinning a feature
=================

Only part of the input is free: x4 stays at 10 while x1..x3 are generated so
the target reaches 2000. The pinned value is a constant, so it never moves.
"""

import numpy as np

from oggn.generator import Fixed, Free, GenerationTask, oggn_train
from oggn.oracle import synth_dataset, train_oracle
from oggn.poly import POLY4

oracle = train_oracle(synth_dataset(POLY4, 10000, 0.0, 500.0, seed=1), seed=0)

modes = [Free(), Free(), Free(), Fixed(10.0)]
result = oggn_train(GenerationTask(oracle, 2000.0, modes, max_epochs=1000, seed=0, truth=POLY4))

print("x4 column:", np.unique(result.features[:, 3]))
print("true targets:", np.round(result.true_targets[:, 0], 1))
print("median miss", np.median(np.abs(result.true_targets - 2000)).round(2))
