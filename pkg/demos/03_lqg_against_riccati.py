"""Learning a linear controller for the 1-D LQG task and comparing it with the Riccati optimum.

The Riccati recursion gives the exact optimal expected return, so this is the one task
where the learned policy can be graded in absolute terms. P-POIS explores in parameter
space with a Gaussian hyperpolicy; A-POIS explores with per-step action noise.
"""
import numpy as np

from pois import LQG, OptimizerConfig, run_apois, run_ppois
from pois.envs import collect_trajectories, lqg_linear_return, lqg_optimal_return, lqg_riccati

env = LQG()
optimum = lqg_optimal_return(env)
_, gains = lqg_riccati(env)
print(f"Riccati optimum {optimum:.5f}; optimal time-varying gain ranges over [{-gains.max():.3f}, {-gains.min():.3f}]")
best_k = max(np.linspace(-1, 0, 2001), key=lambda k: lqg_linear_return(env, k))
print(f"best stationary gain {best_k:.3f} reaches {lqg_linear_return(env, best_k):.5f}\n")

for name, runner in (("P-POIS", run_ppois), ("A-POIS", run_apois)):
    adopted = []
    cfg = OptimizerConfig(delta=0.4, n_episodes=100, horizon=None, online_iterations=100, seed=10)
    records = runner(env, cfg, lambda rec, params: adopted.append(params))
    print(name)
    for rec in records[::20] + [records[-1]]:
        print(
            f"  iter {rec.iteration:3d}  avg return {rec.avg_return:9.4f}  ESS {rec.ess_hat:6.1f}  "
            f"sigma {rec.policy_sigma_mean:.4f}  offline steps {rec.offline_iters}"
        )
    final = collect_trajectories(env, adopted[-1], 20_000, rng=np.random.default_rng(0)).returns.mean()
    print(f"  final policy: {final:.5f} ({abs(final - optimum) / abs(optimum):.1%} from the optimum)\n")

print(
    "Both methods find a near-optimal mean gain. What separates them is exploration noise.\n"
    "A-POIS injects noise into every action, and on this task sigma = 0.025 already costs 5%.\n"
    "Its sigma falls from 1 to about 0.08 within 30 iterations and then stalls: the first\n"
    "line-search probe lands where the estimated divergence is astronomically large, and the\n"
    "parabola fit shrinks the step to a negligible size. P-POIS perturbs the gain once per\n"
    "episode, which costs far less return for the same sigma."
)
