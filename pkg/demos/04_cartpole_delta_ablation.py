"""Effect of the confidence parameter delta on A-POIS in cart-pole.

Small delta means a heavy penalty: offline steps stay close to the behavioral policy and the
effective sample size stays high. delta = 1 removes the penalty entirely and the optimizer
chases the raw IS estimate into regions where few trajectories carry the weight.

Pass the number of seeds and iterations on the command line (defaults: 2 seeds, 10 iterations).
"""
import sys

import numpy as np

from pois import CartPole, OptimizerConfig, run_apois

n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 2
iterations = int(sys.argv[2]) if len(sys.argv) > 2 else 10
seeds = (10, 109, 904, 160, 570)[:n_seeds]

env = CartPole()
print(f"{'delta':>6} {'mean ESS':>9} {'final return':>13} {'mean offline steps':>19}")
for delta in (0.2, 0.4, 1.0):
    ess, final, steps = [], [], []
    for seed in seeds:
        records = run_apois(env, OptimizerConfig(delta=delta, online_iterations=iterations, seed=seed))
        ess.append(np.mean([r.ess_hat for r in records]))
        final.append(records[-1].avg_return)
        steps.append(np.mean([r.offline_iters for r in records]))
    print(f"{delta:6.1f} {np.mean(ess):9.1f} {np.mean(final):13.1f} {np.mean(steps):19.2f}")
