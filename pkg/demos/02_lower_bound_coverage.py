"""Checking that the high-confidence lower bounds hold at the advertised rate.

Setting: P = N(0.5, 1), Q = N(0, 1), f(x) = clip(x, -1, 1), N = 100 samples per trial.
For each confidence level 1 - delta, the IS and SN lower bounds should exceed the true
E_P[f] in at most a fraction delta of the trials. They are usually far more conservative.
"""
import math

import numpy as np
from scipy import integrate, stats

from pois import BoundConfig, is_lower_bound, sn_estimate, sn_lower_bound

TRIALS, N = 5_000, 100
truth, _ = integrate.quad(lambda x: np.clip(x, -1, 1) * stats.norm.pdf(x, 0.5, 1.0), -np.inf, np.inf)
d2 = math.exp(0.25)

rng = np.random.default_rng(1)
x = rng.standard_normal((TRIALS, N))
log_w = 0.5 * x - 0.125
f = np.clip(x, -1.0, 1.0)
is_est = np.mean(np.exp(log_w) * f, axis=1)
sn_est = np.array([sn_estimate(lw, ff) for lw, ff in zip(log_w, f)])

print(f"true E_P[f] = {truth:.4f}, d2 = {d2:.4f}, ESS = {N / d2:.1f}")
print(f"{'delta':>6} {'IS miss rate':>13} {'IS mean bound':>14} {'SN miss rate':>13} {'SN mean bound':>14}")
for delta in (0.05, 0.1, 0.25, 0.5):
    cfg = BoundConfig(delta, 1.0, N)
    is_b = np.array([is_lower_bound(e, cfg, d2) for e in is_est])
    sn_b = np.array([sn_lower_bound(e, cfg, d2) for e in sn_est])
    print(f"{delta:6.2f} {np.mean(is_b > truth):13.4f} {is_b.mean():14.4f} {np.mean(sn_b > truth):13.4f} {sn_b.mean():14.4f}")
