"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py``; the lines are collected in an
"acceptance criteria" section of the terminal summary (and printed live with ``-s``). Criteria that are known not to hold are marked
``xfail(strict=True)`` with the literal assertion intact, so they report FAIL here and
would turn the suite red if they ever started passing unnoticed.
"""
import math
import time

import numpy as np
import pytest
from scipy import integrate, stats

from pois.cli import main
from pois.envs import CartPole, LQG, collect_trajectories, lqg_optimal_return
from pois.estimators import BoundConfig, is_lower_bound, sn_bias_bound, sn_estimate, sn_lower_bound, sn_mse_bound
from pois.gaussians import DiagGaussian, exp_renyi_divergence, renyi_divergence, sample_weights, weight_cdf, weight_law, weight_pdf
from pois.optimizer import OptimizerConfig, next_epsilon, parabolic_line_search, run_apois, run_ppois
from pois.policies import GaussianHyperpolicy, LinearGaussianPolicy, exact_hyper_fim
from pois.surrogate import evaluate, surrogate_gradient

SEEDS = (10, 109, 904, 160, 570)
RESULTS = []

P_MEAN = 0.5  # P = N(0.5, 1), Q = N(0, 1), f = clip(x, -1, 1)


def report(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)


def true_clipped_mean():
    val, _ = integrate.quad(lambda x: np.clip(x, -1, 1) * stats.norm.pdf(x, P_MEAN, 1.0), -np.inf, np.inf)
    return val


def draw_trials(seed, trials, n):
    x = np.random.default_rng(seed).standard_normal((trials, n))
    log_w = P_MEAN * x - 0.5 * P_MEAN**2
    return log_w, np.clip(x, -1.0, 1.0)


def test_criterion_01_d2_closed_form_vs_monte_carlo():
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(10):
        dim = int(rng.integers(1, 4))
        q = DiagGaussian(rng.normal(size=dim), rng.uniform(-0.5, 0.5, dim))
        # keep sigma_P / sigma_Q below 2/sqrt(3) so that w^2 has a finite variance
        p = DiagGaussian(q.mean + rng.normal(0.0, 0.3, dim), q.log_std + rng.uniform(-0.4, 0.1, dim))
        w2 = sample_weights(p, q, rng, 1_000_000) ** 2
        se = w2.std(ddof=1) / math.sqrt(w2.size)
        worst = max(worst, abs(w2.mean() - exp_renyi_divergence(2, p, q)) / se)
    elapsed = time.perf_counter() - start
    ok = worst <= 3.0 and elapsed < 30
    report(1, ok, f"max |MC - closed form| = {worst:.2f} SE (limit 3), {elapsed:.1f}s (limit 30s)")
    assert ok


def test_criterion_02_lower_bound_coverage():
    start = time.perf_counter()
    truth = true_clipped_mean()
    log_w, f = draw_trials(2, 10_000, 100)
    d2 = math.exp(P_MEAN**2)
    is_est = np.mean(np.exp(log_w) * f, axis=1)
    sn_est = np.array([sn_estimate(lw, ff) for lw, ff in zip(log_w, f)])
    details, ok = [], True
    for delta in (0.05, 0.1, 0.25):
        cfg = BoundConfig(delta, 1.0, 100)
        for name, est, bound in (("IS", is_est, is_lower_bound), ("SN", sn_est, sn_lower_bound)):
            miss = np.mean([bound(e, cfg, d2) > truth for e in est])
            ok &= miss <= delta + 0.01
            details.append(f"{name}@{delta}:{miss:.4f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    report(2, ok, f"violation rates {' '.join(details)} (limit delta + 0.01), {elapsed:.1f}s")
    assert ok


def test_criterion_03_sn_bias_and_mse():
    start = time.perf_counter()
    truth = true_clipped_mean()
    log_w, f = draw_trials(3, 10_000, 100)
    est = np.array([sn_estimate(lw, ff) for lw, ff in zip(log_w, f)])
    cfg = BoundConfig(0.5, 1.0, 100)
    d2 = math.exp(P_MEAN**2)
    bias, mse = abs(est.mean() - truth), np.mean((est - truth) ** 2)
    elapsed = time.perf_counter() - start
    ok = bias <= sn_bias_bound(cfg, d2) and mse <= sn_mse_bound(cfg, d2) and elapsed < 60
    report(3, ok, f"|bias| {bias:.2e} <= {sn_bias_bound(cfg, d2):.2e}, MSE {mse:.2e} <= {sn_mse_bound(cfg, d2):.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_04_weight_laws():
    def g(m, s):
        return DiagGaussian([m], [math.log(s)])

    cases = {"bounded": (g(0.4, 0.7), g(0.0, 1.0)), "unbounded": (g(0.3, 1.3), g(0.0, 1.0)), "equal-variance": (g(0.8, 1.0), g(0.0, 1.0))}
    ok, details = True, []
    for name, (p, q) in cases.items():
        law = weight_law(p, q)
        lo, hi = law.support
        mass, _ = integrate.quad(lambda y: float(weight_pdf(law, y)), lo, hi, limit=500)
        w = sample_weights(p, q, np.random.default_rng(4), 100_000)
        ks = stats.kstest(w, lambda y: weight_cdf(law, y)).statistic
        ok &= abs(mass - 1.0) <= 1e-3 and ks < 0.01
        if name == "bounded":
            ok &= bool(w.max() <= law.boundary)
            details.append(f"max w {w.max():.4f} <= A {law.boundary:.4f}")
        details.append(f"{name}: mass {mass:.5f} KS {ks:.4f}")
    report(4, ok, "; ".join(details))
    assert ok


def fd_hessian(fn, x, h=1e-4):
    n = x.size
    hess = np.zeros((n, n))
    eye = np.eye(n) * h
    for i in range(n):
        for j in range(n):
            hess[i, j] = (fn(x + eye[i] + eye[j]) - fn(x + eye[i] - eye[j]) - fn(x - eye[i] + eye[j]) + fn(x - eye[i] - eye[j])) / (4 * h * h)
    return hess


def fim_errors():
    """Largest elementwise gap to ``(2 / alpha) * Hessian`` and to ``Hessian / alpha``."""
    rng = np.random.default_rng(5)
    literal, consistent = 0.0, 0.0
    for _ in range(10):
        dim = int(rng.integers(1, 5))  # parameter dimension 2 * dim <= 8
        rho = GaussianHyperpolicy(rng.normal(size=dim), rng.uniform(-0.5, 0.5, dim))
        fim = exact_hyper_fim(rho)
        for alpha in (1, 2):
            hess = fd_hessian(lambda x: renyi_divergence(alpha, GaussianHyperpolicy.from_flat(x).as_gaussian(), rho.as_gaussian()), rho.flat)
            literal = max(literal, np.abs(fim - 2.0 / alpha * hess).max())
            consistent = max(consistent, np.abs(fim - hess / alpha).max())
    return literal, consistent


@pytest.mark.xfail(strict=True, reason="(2/alpha) * Hessian is twice the Fisher matrix; see README, known failing criteria")
def test_criterion_05_fisher_matrix_vs_divergence_hessian():
    literal, consistent = fim_errors()
    ok = literal <= 1e-4
    report(5, ok, f"max |F - (2/alpha) H| = {literal:.3g} (limit 1e-4); for comparison max |F - H/alpha| = {consistent:.2e}")
    assert ok


def fd_gradient(batch, target, lam, mode, estimator, h=1e-6):
    rebuild = (
        GaussianHyperpolicy.from_flat
        if mode == "P"
        else lambda x: LinearGaussianPolicy.from_flat(x, target.action_dim, target.state_dim)
    )
    flat, out = target.flat, np.zeros(target.flat.size)
    for i in range(flat.size):
        e = np.zeros_like(flat)
        e[i] = h
        hi = evaluate(batch, rebuild(flat + e), lam, mode, estimator)[0].value
        lo = evaluate(batch, rebuild(flat - e), lam, mode, estimator)[0].value
        out[i] = (hi - lo) / (2 * h)
    return out


def test_criterion_06_surrogate_gradients():
    from conftest import perturb_policy, random_action_batch, random_param_batch

    rng = np.random.default_rng(6)
    worst = 0.0
    for mode in ("A", "P"):
        for estimator in ("is", "sn"):
            for _ in range(20):
                n = int(rng.integers(2, 9))
                if mode == "A":
                    batch = random_action_batch(rng, n=n, horizon=int(rng.integers(1, 6)), ds=int(rng.integers(1, 4)))
                else:
                    batch = random_param_batch(rng, n=n, dim=int(rng.integers(1, 4)))
                target = perturb_policy(rng, batch.behavioral, 0.05)
                g = surrogate_gradient(batch, target, 0.8, mode, estimator)
                fd = fd_gradient(batch, target, 0.8, mode, estimator)
                worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-3))
    ok = worst <= 1e-5
    report(6, ok, f"max relative gradient error over 4 variants x 20 instances = {worst:.2e} (limit 1e-5)")
    assert ok


def test_criterion_07_line_search():
    g, a = 2.0, 1.5
    probes = []

    def loss(alpha):
        probes.append(alpha)
        return g * alpha - a * alpha**2

    alpha, _ = parabolic_line_search(loss, g)
    vertex_err = max(abs(probes[2] - g / (2 * a)), abs(alpha - g / (2 * a)))
    examples = [
        next_epsilon(1.0, 0.25, 2.0) == 1.0 / 1.5,
        next_epsilon(1.0, 0.9, 2.0) == 2.0,
        next_epsilon(1.0, 0.75, 2.0) == 2.0,
    ]
    ok = vertex_err <= 1e-9 and all(examples)
    report(7, ok, f"vertex error after first update {vertex_err:.1e} (limit 1e-9); epsilon examples {sum(examples)}/3 exact")
    assert ok


def lqg_learning(runner):
    """Expected return of each seed's final policy, estimated from 20,000 fresh episodes.

    The last batch average (100 episodes) estimates the same quantity with far more noise;
    it is reported alongside.
    """
    start = time.perf_counter()
    env = LQG()
    finals, last_batch = [], []
    for seed in SEEDS:
        adopted = []
        cfg = OptimizerConfig(delta=0.4, n_episodes=100, horizon=None, online_iterations=100, seed=seed)
        records = runner(env, cfg, lambda rec, params: adopted.append(params))
        last_batch.append(records[-1].avg_return)
        finals.append(collect_trajectories(env, adopted[-1], 20_000, rng=np.random.default_rng(seed + 1)).returns.mean())
    elapsed = time.perf_counter() - start
    optimum = lqg_optimal_return(env)
    gap = abs(np.mean(finals) - optimum) / abs(optimum)
    summary = (
        f"mean final return {np.mean(finals):.4f} vs optimum {optimum:.4f}: gap {gap:.2%} (limit 5%); "
        f"last batch average {np.mean(last_batch):.4f}; {elapsed:.0f}s (limit 300s)"
    )
    return gap <= 0.05 and elapsed < 300, summary


@pytest.mark.slow
def test_criterion_08_lqg_ppois():
    ok, summary = lqg_learning(run_ppois)
    report(8, ok, "P-POIS " + summary)
    assert ok


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="vanilla-gradient A-POIS stalls on LQG; see README, known failing criteria")
def test_criterion_08_lqg_apois():
    ok, summary = lqg_learning(run_apois)
    report(8, ok, "A-POIS " + summary)
    assert ok


def best_constant_return(env, rng, n=20):
    """Best mean return over a grid of constant actions."""
    best = -math.inf
    for a in np.linspace(env.spec.action_low[0], env.spec.action_high[0], 21):
        s = env.reset(rng, n)
        alive = np.ones(n, dtype=bool)
        total = np.zeros(n)
        for _ in range(env.spec.horizon):
            s_next, r, done = env.step(s[alive], np.full((alive.sum(), 1), a))
            total[alive] += r
            s[alive] = s_next
            alive[np.flatnonzero(alive)[done]] = False
            if not alive.any():
                break
        best = max(best, total.mean())
    return best


@pytest.mark.slow
def test_criterion_09_cartpole_delta_ablation():
    start = time.perf_counter()
    env = CartPole()
    baseline = best_constant_return(env, np.random.default_rng(9))
    ess, final = {}, {}
    for delta in (0.2, 0.4, 1.0):
        ess_runs, final_runs = [], []
        for seed in SEEDS:
            cfg = OptimizerConfig(delta=delta, n_episodes=100, horizon=500, online_iterations=20, seed=seed)
            records = run_apois(env, cfg)
            ess_runs.append(np.mean([r.ess_hat for r in records[-20:]]))
            final_runs.append(records[-1].avg_return)
        ess[delta], final[delta] = np.mean(ess_runs), np.mean(final_runs)
    elapsed = time.perf_counter() - start
    beats_baseline = final[0.4] >= 0.8 * baseline
    ess_order = ess[0.2] > ess[0.4] > ess[1.0]
    best_delta = final[0.4] > max(final[0.2], final[1.0])
    ok = beats_baseline and ess_order and best_delta and elapsed < 900
    report(
        9,
        ok,
        f"final return (delta 0.4) {final[0.4]:.0f} vs 0.8 x best constant {0.8 * baseline:.0f}; "
        f"ESS {ess[0.2]:.1f} > {ess[0.4]:.1f} > {ess[1.0]:.1f}: {ess_order}; "
        f"final returns 0.2/0.4/1.0 = {final[0.2]:.0f}/{final[0.4]:.0f}/{final[1.0]:.0f}; {elapsed:.0f}s (limit 900s)",
    )
    assert ok


def test_criterion_10_determinism(tmp_path):
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        argv = ["--env", "lqg", "--algo", "a-pois", "--iterations", "5", "--batch-size", "20", "--seed", "10", "--seed", "109", "--output", str(out)]
        assert main(argv) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    ok = outputs[0] == outputs[1] and len(outputs[0]) == 3
    report(10, ok, f"{len(outputs[0])} CSV files, byte-identical across runs: {outputs[0] == outputs[1]}")
    assert ok
