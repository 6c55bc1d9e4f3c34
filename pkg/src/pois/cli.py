"""Command-line experiment runner writing per-iteration diagnostics as CSV."""
import argparse
import csv
import logging
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .envs import ENVIRONMENTS, make_env
from .optimizer import IterationRecord, LineSearchConfig, OptimizerConfig, run_apois, run_ppois

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = (10, 109, 904, 160, 570)
ALGORITHMS = {"a-pois": run_apois, "p-pois": run_ppois}
COLUMNS = (
    "iteration",
    "episodes_cum",
    "avg_return",
    "ess_hat",
    "weight_var",
    "d2_hat",
    "bound_before",
    "bound_after",
    "policy_sigma_mean",
    "offline_iters",
    "step_size_last",
)


@dataclass(frozen=True)
class ExperimentConfig:
    env: str
    algo: str
    seeds: Tuple[int, ...] = DEFAULT_SEEDS
    output: str = "results"
    delta: float = 0.4
    iterations: int = 500
    batch_size: int = 100
    horizon: Optional[int] = None
    gamma: Optional[float] = None
    estimator: Optional[str] = None
    natural: Optional[bool] = None
    penalty: str = "exact"
    eta: float = 2.0
    max_offline: int = 10

    def __post_init__(self):
        if self.env not in ENVIRONMENTS:
            raise ValueError(f"--env must be one of {sorted(ENVIRONMENTS)}, got {self.env!r}")
        if self.algo not in ALGORITHMS:
            raise ValueError(f"--algo must be one of {sorted(ALGORITHMS)}, got {self.algo!r}")
        if not self.seeds:
            raise ValueError("at least one --seed is required")
        if self.gamma is not None and not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"--gamma must lie in [0, 1], got {self.gamma}")
        # delegate the remaining range checks
        self.optimizer_config(self.seeds[0])

    def optimizer_config(self, seed: int) -> OptimizerConfig:
        return OptimizerConfig(
            delta=self.delta,
            n_episodes=self.batch_size,
            horizon=self.horizon,
            gamma=self.gamma,
            online_iterations=self.iterations,
            max_offline_iterations=self.max_offline,
            estimator=self.estimator,
            natural=self.natural,
            penalty=self.penalty,
            seed=seed,
            line_search=LineSearchConfig(eta=self.eta),
        )

    def seed_path(self, seed: int) -> Path:
        return Path(self.output) / f"{self.env}_{self.algo}_seed{seed}.csv"

    def aggregate_path(self) -> Path:
        return Path(self.output) / f"{self.env}_{self.algo}_aggregate.csv"


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise ValueError(f"expected 'on' or 'off', got {text!r}")
    return text == "on"


# flag name -> (ExperimentConfig field, converter)
_OPTIONS = {
    "env": ("env", str),
    "algo": ("algo", str),
    "delta": ("delta", float),
    "iterations": ("iterations", int),
    "batch-size": ("batch_size", int),
    "horizon": ("horizon", int),
    "gamma": ("gamma", float),
    "seed": ("seeds", int),
    "estimator": ("estimator", str),
    "natural": ("natural", _on_off),
    "penalty": ("penalty", str),
    "eta": ("eta", float),
    "max-offline": ("max_offline", int),
    "output": ("output", str),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pois", description="Run A-POIS or P-POIS and write CSV diagnostics.")
    p.add_argument("--env", choices=sorted(ENVIRONMENTS))
    p.add_argument("--algo", choices=sorted(ALGORITHMS))
    p.add_argument("--delta", type=float)
    p.add_argument("--iterations", type=int, help="online iterations")
    p.add_argument("--batch-size", type=int, help="episodes per online iteration")
    p.add_argument("--horizon", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--seed", type=int, action="append", help="repeatable; defaults to five fixed seeds")
    p.add_argument("--estimator", choices=["is", "sn"])
    p.add_argument("--natural", choices=["on", "off"])
    p.add_argument("--penalty", choices=["exact", "ess"])
    p.add_argument("--eta", type=float, help="line-search growth factor")
    p.add_argument("--max-offline", type=int, help="offline iterations per online iteration")
    p.add_argument("--output", help="directory for the CSV files")
    p.add_argument("--config", help="plain-text key=value file; command-line flags take precedence")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def read_config_file(path) -> Dict[str, object]:
    """Parse ``key = value`` lines; ``#`` starts a comment, ``seed`` may repeat or hold a comma list."""
    values: Dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("_", "-")
            if key not in _OPTIONS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            name, convert = _OPTIONS[key]
            try:
                if name == "seeds":
                    seeds = values.setdefault("seeds", [])
                    seeds.extend(int(s) for s in value.split(",") if s.strip())
                else:
                    values[name] = convert(value)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    return values


def parse_args(argv: Optional[Sequence[str]] = None) -> ExperimentConfig:
    parser = build_parser()
    args = parser.parse_args(argv)
    values: Dict[str, object] = {}
    if args.config:
        try:
            values.update(read_config_file(args.config))
        except OSError as exc:
            parser.error(f"--config: cannot read {args.config}: {exc.strerror}")
        except ValueError as exc:
            parser.error(f"--config: {exc}")
    for flag, (name, convert) in _OPTIONS.items():
        given = getattr(args, flag.replace("-", "_"))
        if given is not None:
            values[name] = convert(given) if name != "seeds" else given
    for required in ("env", "algo"):
        if required not in values:
            parser.error(f"the following arguments are required: --{required}")
    if "seeds" in values:
        values["seeds"] = tuple(values["seeds"])
    try:
        return ExperimentConfig(**values)
    except ValueError as exc:
        flag = _offending_flag(str(exc))
        parser.error(f"{flag}: {exc}" if flag else str(exc))


def _offending_flag(message: str) -> Optional[str]:
    field_to_flag = {name: flag for flag, (name, _) in _OPTIONS.items()}
    field_to_flag.update(n_episodes="batch-size", online_iterations="iterations", max_offline_iterations="max-offline")
    for name, flag in field_to_flag.items():
        if message.startswith(name) or f"--{flag}" in message:
            return f"--{flag}"
    return None


def _format(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def record_row(rec: IterationRecord) -> List[str]:
    values = (
        rec.iteration,
        rec.episodes,
        rec.avg_return,
        rec.ess_hat,
        rec.weight_var,
        rec.d2_hat,
        rec.bound_before,
        rec.bound_after,
        rec.policy_sigma_mean,
        rec.offline_iters,
        rec.step_size_last,
    )
    return [_format(v) for v in values]


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def aggregate(per_seed: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Mean across seeds and the 95% normal-approximation half-width ``1.96 * s / sqrt(n)``."""
    stacked = np.stack(per_seed)
    n = len(per_seed)
    mean = stacked.mean(axis=0)
    if n == 1:
        return mean, np.zeros_like(mean)
    return mean, 1.96 * stacked.std(axis=0, ddof=1) / math.sqrt(n)


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run every seed, write the CSV files and return the process exit status."""
    out = Path(cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        logger.error("cannot create output directory %s: %s", out, exc.strerror)
        return 1

    algorithm = ALGORITHMS[cfg.algo]
    tables = []
    failed = False
    for seed in cfg.seeds:
        env = make_env(cfg.env, horizon=cfg.horizon, gamma=cfg.gamma)
        try:
            records = algorithm(env, cfg.optimizer_config(seed))
        except Exception:
            logger.exception("seed %d failed", seed)
            failed = True
            continue
        rows = [record_row(r) for r in records]
        path = cfg.seed_path(seed)
        try:
            write_csv(path, COLUMNS, rows)
        except OSError as exc:
            logger.error("cannot write %s: %s", path, exc.strerror)
            failed = True
            continue
        tables.append(np.array([[float(v) for v in row] for row in rows]))
        logger.info("seed %d: final average return %.6g -> %s", seed, records[-1].avg_return, path)

    if tables:
        mean, half = aggregate(tables)
        header = ["iteration"] + [f"{c}_{s}" for c in COLUMNS[1:] for s in ("mean", "ci95")]
        rows = []
        for i in range(mean.shape[0]):
            row = [str(i)]
            for j in range(1, len(COLUMNS)):
                row += [_format(mean[i, j]), _format(half[i, j])]
            rows.append(row)
        path = cfg.aggregate_path()
        try:
            write_csv(path, header, rows)
        except OSError as exc:
            logger.error("cannot write %s: %s", path, exc.strerror)
            failed = True
    return 1 if failed else 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    verbose = "-v" in argv or "--verbose" in argv
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")
    cfg = parse_args(argv)
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
